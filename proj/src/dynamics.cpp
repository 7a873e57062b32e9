// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#include "fsm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace fsm {

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("linspace: need at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + i * step;
  out.back() = hi;
  return out;
}

Vector ControlVector::stacked() const {
  Vector out(dim());
  out.head(state_dim()) = initial_state;
  out.tail(param_dim()) = parameters;
  return out;
}

ControlVector ControlVector::from_stacked(const Vector& packed, Eigen::Index state_dim,
                                          Eigen::Index param_dim) {
  if (packed.size() != state_dim + param_dim)
    throw std::invalid_argument("ControlVector::from_stacked: size mismatch");
  ControlVector c;
  c.initial_state = packed.head(state_dim);
  c.parameters = packed.tail(param_dim);
  return c;
}

TimeGrid::TimeGrid(double t0_, double dt_, int steps_) : t0(t0_), dt(dt_), steps(steps_) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be positive");
  if (steps < 0) throw std::invalid_argument("TimeGrid: steps must be nonnegative");
  if (!std::isfinite(t0)) throw std::invalid_argument("TimeGrid: t0 must be finite");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out(static_cast<std::size_t>(size()));
  for (int k = 0; k < size(); ++k) out[static_cast<std::size_t>(k)] = time_at(k);
  return out;
}

int TimeGrid::index_of(double t) const {
  const double raw = (t - t0) / dt;
  const int k = static_cast<int>(std::lround(raw));
  if (k < 0 || k > steps || std::abs(t - time_at(k)) > 1e-6 * dt) {
    std::ostringstream msg;
    msg << "time " << t << " is not on the grid (t0=" << t0 << ", dt=" << dt
        << ", steps=" << steps << ")";
    throw std::invalid_argument(msg.str());
  }
  return k;
}

bool TimeGrid::contains(double t) const {
  const double raw = (t - t0) / dt;
  const int k = static_cast<int>(std::lround(raw));
  return k >= 0 && k <= steps && std::abs(t - time_at(k)) <= 1e-6 * dt;
}

int TimeGrid::nearest_index(double t) const {
  if (t < t0 - 0.5 * dt || t > horizon() + 0.5 * dt) {
    std::ostringstream msg;
    msg << "time " << t << " lies outside the grid span [" << t0 << ", " << horizon() << "]";
    throw std::invalid_argument(msg.str());
  }
  const int k = static_cast<int>(std::lround((t - t0) / dt));
  return std::clamp(k, 0, steps);
}

LinearMap::LinearMap(Matrix m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("LinearMap: matrix must be square");
  dim_ = m.rows();
  dense_ = std::make_shared<const Matrix>(std::move(m));
}

LinearMap::LinearMap(SpMatrix m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("LinearMap: matrix must be square");
  dim_ = m.rows();
  m.makeCompressed();
  sparse_ = std::make_shared<const SpMatrix>(std::move(m));
}

Matrix LinearMap::apply(const Matrix& x) const {
  if (x.rows() != dim_) throw std::invalid_argument("LinearMap::apply: dimension mismatch");
  if (sparse_) return *sparse_ * x;
  return *dense_ * x;
}

Matrix LinearMap::to_dense() const {
  if (sparse_) return Matrix(*sparse_);
  return *dense_;
}

namespace {

void check_dimensions(const ModelSystem& model, const ControlVector& control) {
  if (control.state_dim() != model.state_dim || control.param_dim() != model.param_dim) {
    std::ostringstream msg;
    msg << "control dimensions (" << control.state_dim() << ", " << control.param_dim()
        << ") do not match model '" << model.name << "' (" << model.state_dim << ", "
        << model.param_dim << ")";
    throw std::invalid_argument(msg.str());
  }
}

void ensure_finite(const Vector& x, const std::string& model, double t) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite state in model '" << model << "' at t=" << t;
    throw NumericalError(msg.str());
  }
}

ModelSystem make_linear_decay() {
  ModelSystem m;
  m.name = "linear_decay";
  m.state_dim = 1;
  m.param_dim = 1;
  m.kind = ModelKind::continuous;
  m.rhs = [](const Vector& x, const Vector& p) { return Vector{{p[0] * x[0]}}; };
  m.jac_state = [](const Vector&, const Vector& p) { return Matrix{{p[0]}}; };
  m.jac_param = [](const Vector& x, const Vector&) { return Matrix{{x[0]}}; };
  return m;
}

ModelSystem make_quadratic_decay() {
  ModelSystem m;
  m.name = "quadratic_decay";
  m.state_dim = 1;
  m.param_dim = 1;
  m.kind = ModelKind::continuous;
  m.rhs = [](const Vector& x, const Vector& p) { return Vector{{p[0] * x[0] * x[0]}}; };
  m.jac_state = [](const Vector& x, const Vector& p) { return Matrix{{2.0 * p[0] * x[0]}}; };
  m.jac_param = [](const Vector& x, const Vector&) { return Matrix{{x[0] * x[0]}}; };
  return m;
}

// Semi-discrete viscous Burgers on interior nodes, zero Dirichlet
// boundaries. The nonlinear term uses the skew-symmetric three-point form,
// which conserves the discrete sum away from the boundaries.
ModelSystem make_burgers_1d(const ModelOptions& opt) {
  if (opt.grid_size < 3) throw std::invalid_argument("burgers_1d: grid_size must be >= 3");
  if (!(opt.length > 0.0)) throw std::invalid_argument("burgers_1d: length must be positive");
  if (!(opt.reynolds > 0.0)) throw std::invalid_argument("burgers_1d: reynolds must be positive");

  const int n = opt.grid_size;
  const double h = opt.length / (n + 1);
  const double inv_re = std::isinf(opt.reynolds) ? 0.0 : 1.0 / opt.reynolds;
  const double adv = 1.0 / (6.0 * h);   // 1/3 * 1/(2h)
  const double dif = inv_re / (h * h);

  ModelSystem m;
  m.name = "burgers_1d";
  m.state_dim = n;
  m.param_dim = 0;
  m.kind = ModelKind::continuous;

  m.rhs = [n, adv, dif](const Vector& x, const Vector&) {
    Vector out(n);
    for (int i = 0; i < n; ++i) {
      const double um = i > 0 ? x[i - 1] : 0.0;
      const double up = i + 1 < n ? x[i + 1] : 0.0;
      out[i] = -adv * (up + x[i] + um) * (up - um) + dif * (up - 2.0 * x[i] + um);
    }
    return out;
  };

  auto fill_triplets = [n, adv, dif](const Vector& x, auto&& emit) {
    for (int i = 0; i < n; ++i) {
      const double um = i > 0 ? x[i - 1] : 0.0;
      const double up = i + 1 < n ? x[i + 1] : 0.0;
      const double diff = up - um;
      const double sum = up + x[i] + um;
      if (i > 0) emit(i, i - 1, -adv * (diff - sum) + dif);
      emit(i, i, -adv * diff - 2.0 * dif);
      if (i + 1 < n) emit(i, i + 1, -adv * (diff + sum) + dif);
    }
  };

  m.jac_state = [n, fill_triplets](const Vector& x, const Vector&) {
    Matrix j = Matrix::Zero(n, n);
    fill_triplets(x, [&j](int r, int c, double v) { j(r, c) = v; });
    return j;
  };
  m.jac_state_sparse = [n, fill_triplets](const Vector& x, const Vector&) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(3 * n));
    fill_triplets(x, [&trip](int r, int c, double v) { trip.emplace_back(r, c, v); });
    SpMatrix j(n, n);
    j.setFromTriplets(trip.begin(), trip.end());
    return j;
  };
  m.jac_param = [n](const Vector&, const Vector&) { return Matrix(n, 0); };
  return m;
}

// Forward-Euler one-step map of the centered 5-point advection-diffusion
// stencil on the interior of the unit square, zero Dirichlet boundaries.
// The map is linear, M = I + dt A.
ModelSystem make_advdiff_2d(const ModelOptions& opt) {
  if (opt.nx < 2 || opt.ny < 2) throw std::invalid_argument("advdiff_2d: grid must be >= 2x2");
  if (!(opt.nu > 0.0)) throw std::invalid_argument("advdiff_2d: nu must be positive");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("advdiff_2d: dt must be positive");

  const SpatialGrid2D grid{opt.nx, opt.ny, 1.0, 1.0};
  const Eigen::Index n = grid.size();
  const double ax = opt.cx / (2.0 * grid.hx());
  const double ay = opt.cy / (2.0 * grid.hy());
  const double dx = opt.nu / (grid.hx() * grid.hx());
  const double dy = opt.nu / (grid.hy() * grid.hy());

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * n));
  for (int j = 0; j < opt.ny; ++j) {
    for (int i = 0; i < opt.nx; ++i) {
      const Eigen::Index row = grid.node(i, j);
      trip.emplace_back(row, row, 1.0 + opt.dt * (-2.0 * dx - 2.0 * dy));
      if (i > 0) trip.emplace_back(row, grid.node(i - 1, j), opt.dt * (ax + dx));
      if (i + 1 < opt.nx) trip.emplace_back(row, grid.node(i + 1, j), opt.dt * (-ax + dx));
      if (j > 0) trip.emplace_back(row, grid.node(i, j - 1), opt.dt * (ay + dy));
      if (j + 1 < opt.ny) trip.emplace_back(row, grid.node(i, j + 1), opt.dt * (-ay + dy));
    }
  }
  auto map = std::make_shared<SpMatrix>(n, n);
  map->setFromTriplets(trip.begin(), trip.end());
  map->makeCompressed();

  ModelSystem m;
  m.name = "advdiff_2d";
  m.state_dim = n;
  m.param_dim = 0;
  m.kind = ModelKind::discrete_map;
  m.map_dt = opt.dt;
  m.linear_in_state = true;
  m.constant_map = map;
  m.rhs = [map](const Vector& x, const Vector&) -> Vector { return *map * x; };
  m.jac_state = [map](const Vector&, const Vector&) { return Matrix(*map); };
  m.jac_state_sparse = [map](const Vector&, const Vector&) { return *map; };
  m.jac_param = [n](const Vector&, const Vector&) { return Matrix(n, 0); };
  return m;
}

}  // namespace

ModelSystem builtin_model(const std::string& name, const ModelOptions& options) {
  if (name == "linear_decay") return make_linear_decay();
  if (name == "quadratic_decay") return make_quadratic_decay();
  if (name == "burgers_1d") return make_burgers_1d(options);
  if (name == "advdiff_2d") return make_advdiff_2d(options);
  throw std::invalid_argument("unknown built-in model: " + name);
}

Trajectory integrate(const ModelSystem& model, const ControlVector& control,
                     const TimeGrid& grid) {
  check_dimensions(model, control);
  if (model.kind == ModelKind::discrete_map && model.map_dt > 0.0 &&
      std::abs(grid.dt - model.map_dt) > 1e-12 * model.map_dt) {
    throw std::invalid_argument("integrate: grid dt does not match the discrete map step");
  }

  Trajectory traj;
  traj.grid = grid;
  traj.parameters = control.parameters;
  traj.states.reserve(static_cast<std::size_t>(grid.size()));
  Vector x = control.initial_state;
  ensure_finite(x, model.name, grid.t0);
  traj.states.push_back(x);

  const Vector& p = control.parameters;
  const double dt = grid.dt;
  for (int k = 0; k < grid.steps; ++k) {
    if (model.kind == ModelKind::discrete_map) {
      x = model.rhs(x, p);
    } else {
      const Vector k1 = model.rhs(x, p);
      const Vector k2 = model.rhs(x + (0.5 * dt) * k1, p);
      const Vector k3 = model.rhs(x + (0.5 * dt) * k2, p);
      const Vector k4 = model.rhs(x + dt * k3, p);
      x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    ensure_finite(x, model.name, grid.time_at(k + 1));
    traj.states.push_back(x);
  }
  return traj;
}

Vector gaussian_field_ic(const std::array<double, 2>& center, double width,
                         const SpatialGrid2D& grid) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_field_ic: width must be positive");
  if (center[0] < 0.0 || center[0] > grid.length_x || center[1] < 0.0 ||
      center[1] > grid.length_y)
    throw std::invalid_argument("gaussian_field_ic: center outside the domain");
  Vector field(grid.size());
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double rx = grid.x(i) - center[0];
      const double ry = grid.y(j) - center[1];
      field[grid.node(i, j)] = std::exp(-(rx * rx + ry * ry) / width);
    }
  }
  return field;
}

Vector burgers_shock_profile(int n, double length, double reynolds) {
  if (n < 1) throw std::invalid_argument("burgers_shock_profile: n must be positive");
  Vector out(n);
  const double h = length / (n + 1);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * h;
    out[i] = x / (1.0 + std::exp(reynolds / 16.0 * (4.0 * x * x - 1.0)));
  }
  return out;
}

Vector sine_profile(int n, double length, double amplitude, double periods) {
  if (n < 1) throw std::invalid_argument("sine_profile: n must be positive");
  Vector out(n);
  const double h = length / (n + 1);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * h;
    out[i] = amplitude * std::sin(2.0 * M_PI * periods * x / length);
  }
  return out;
}

}  // namespace fsm
