// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#include "fsm/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fsm {

namespace {

void ensure_finite_block(const Matrix& m, double t) {
  if (!m.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite sensitivity block at t=" << t;
    throw NumericalError(msg.str());
  }
}

// One step of the tangent-linear recursion shared by the full and the
// streaming propagation. For continuous models the state's RK4 stages are
// rebuilt from states[k], so the advanced blocks are the exact derivatives
// of the discrete flow map.
class TangentStepper {
 public:
  TangentStepper(const ModelSystem& model, const Trajectory& traj)
      : model_(model), traj_(traj), params_(traj.parameters) {
    if (params_.size() != model.param_dim)
      throw std::invalid_argument("propagate: trajectory parameters do not match the model");
    u_ = Matrix::Identity(model.state_dim, model.state_dim);
    v_ = Matrix::Zero(model.state_dim, model.param_dim);
  }

  const Matrix& initial_block() const { return u_; }
  const Matrix& parameter_block() const { return v_; }

  void advance(int k) {
    const Vector& x = traj_.state_at(k);
    if (model_.kind == ModelKind::discrete_map) {
      if (model_.has_sparse_jacobian()) {
        const SpMatrix a = model_.jac_state_sparse(x, params_);
        u_ = a * u_;
        if (model_.param_dim > 0) v_ = (a * v_ + model_.jac_param(x, params_)).eval();
      } else {
        const Matrix a = model_.jac_state(x, params_);
        u_ = a * u_;
        if (model_.param_dim > 0) v_ = (a * v_ + model_.jac_param(x, params_)).eval();
      }
    } else {
      advance_rk4(x);
    }
    ensure_finite_block(u_, traj_.grid.time_at(k + 1));
  }

 private:
  void advance_rk4(const Vector& x) {
    const double dt = traj_.grid.dt;
    const Vector& p = params_;
    const bool with_params = model_.param_dim > 0;

    const Vector k1 = model_.rhs(x, p);
    const Vector x2 = x + (0.5 * dt) * k1;
    const Vector k2 = model_.rhs(x2, p);
    const Vector x3 = x + (0.5 * dt) * k2;
    const Vector k3 = model_.rhs(x3, p);
    const Vector x4 = x + dt * k3;

    auto stage = [&](const Vector& xs, const Matrix& us, const Matrix& vs, Matrix& du,
                     Matrix& dv) {
      if (model_.has_sparse_jacobian()) {
        const SpMatrix a = model_.jac_state_sparse(xs, p);
        du = a * us;
        if (with_params) dv = a * vs + model_.jac_param(xs, p);
      } else {
        const Matrix a = model_.jac_state(xs, p);
        du = a * us;
        if (with_params) dv = a * vs + model_.jac_param(xs, p);
      }
    };

    Matrix du1, du2, du3, du4;
    Matrix dv1, dv2, dv3, dv4;
    stage(x, u_, v_, du1, dv1);
    stage(x2, u_ + (0.5 * dt) * du1, with_params ? (v_ + (0.5 * dt) * dv1).eval() : v_, du2,
          dv2);
    stage(x3, u_ + (0.5 * dt) * du2, with_params ? (v_ + (0.5 * dt) * dv2).eval() : v_, du3,
          dv3);
    stage(x4, u_ + dt * du3, with_params ? (v_ + dt * dv3).eval() : v_, du4, dv4);

    u_ += (dt / 6.0) * (du1 + 2.0 * du2 + 2.0 * du3 + du4);
    if (with_params) v_ += (dt / 6.0) * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4);
  }

  const ModelSystem& model_;
  const Trajectory& traj_;
  Vector params_;
  Matrix u_;
  Matrix v_;
};

std::vector<int> normalize_indices(std::span<const int> raw, int max_index) {
  std::vector<int> idx(raw.begin(), raw.end());
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  for (int k : idx) {
    if (k < 0 || k > max_index)
      throw std::invalid_argument("propagate: store index outside the grid");
  }
  return idx;
}

}  // namespace

int SensitivityTrajectory::slot_of(int grid_index) const {
  const auto it = std::lower_bound(indices.begin(), indices.end(), grid_index);
  if (it == indices.end() || *it != grid_index) return -1;
  return static_cast<int>(it - indices.begin());
}

const Matrix& SensitivityTrajectory::initial_block(int grid_index) const {
  const int slot = slot_of(grid_index);
  if (slot < 0) throw std::invalid_argument("sensitivity block not stored at requested index");
  return wrt_initial[static_cast<std::size_t>(slot)];
}

const Matrix& SensitivityTrajectory::parameter_block(int grid_index) const {
  const int slot = slot_of(grid_index);
  if (slot < 0) throw std::invalid_argument("sensitivity block not stored at requested index");
  return wrt_parameters[static_cast<std::size_t>(slot)];
}

Matrix SensitivityTrajectory::control_block(int grid_index) const {
  const int slot = slot_of(grid_index);
  if (slot < 0) throw std::invalid_argument("sensitivity block not stored at requested index");
  Matrix f(state_dim, state_dim + param_dim);
  f.leftCols(state_dim) = wrt_initial[static_cast<std::size_t>(slot)];
  f.rightCols(param_dim) = wrt_parameters[static_cast<std::size_t>(slot)];
  return f;
}

double SensitivityTrajectory::scalar_initial(int grid_index) const {
  return initial_block(grid_index)(0, 0);
}

double SensitivityTrajectory::scalar_parameter(int grid_index) const {
  const Matrix& v = parameter_block(grid_index);
  if (v.cols() < 1) throw std::invalid_argument("model has no parameters");
  return v(0, 0);
}

SensitivityTrajectory propagate(const ModelSystem& model, const Trajectory& trajectory) {
  std::vector<int> all(static_cast<std::size_t>(trajectory.grid.size()));
  for (int k = 0; k < trajectory.grid.size(); ++k) all[static_cast<std::size_t>(k)] = k;
  return propagate(model, trajectory, all);
}

SensitivityTrajectory propagate(const ModelSystem& model, const Trajectory& trajectory,
                                std::span<const int> store_indices) {
  if (static_cast<Eigen::Index>(trajectory.states.front().size()) != model.state_dim)
    throw std::invalid_argument("propagate: trajectory does not match the model dimensions");
  if (static_cast<int>(trajectory.states.size()) != trajectory.grid.size())
    throw std::invalid_argument("propagate: trajectory length does not match its grid");

  SensitivityTrajectory sens;
  sens.grid = trajectory.grid;
  sens.state_dim = model.state_dim;
  sens.param_dim = model.param_dim;
  sens.indices = normalize_indices(store_indices, trajectory.grid.steps);
  sens.wrt_initial.reserve(sens.indices.size());
  sens.wrt_parameters.reserve(sens.indices.size());

  TangentStepper stepper(model, trajectory);
  std::size_t next = 0;
  for (int k = 0; k <= trajectory.grid.steps && next < sens.indices.size(); ++k) {
    if (sens.indices[next] == k) {
      sens.wrt_initial.push_back(stepper.initial_block());
      sens.wrt_parameters.push_back(stepper.parameter_block());
      ++next;
    }
    if (k < trajectory.grid.steps && next < sens.indices.size()) stepper.advance(k);
  }
  return sens;
}

namespace {

void gram_invariants(const Matrix& u, double& i1, double& i2) {
  const Matrix gram = u.transpose() * u;
  i1 = gram.trace();
  i2 = 0.5 * (i1 * i1 - gram.squaredNorm());  // trace(S^2) = |S|_F^2 for symmetric S
}

}  // namespace

SensitivityInvariants invariants(const SensitivityTrajectory& sens) {
  SensitivityInvariants out;
  out.grid = sens.grid;
  out.indices = sens.indices;
  out.i1.resize(sens.indices.size());
  out.i2.resize(sens.indices.size());
  for (std::size_t s = 0; s < sens.indices.size(); ++s) {
    gram_invariants(sens.wrt_initial[s], out.i1[s], out.i2[s]);
  }
  return out;
}

SensitivityInvariants invariants(const ModelSystem& model, const Trajectory& trajectory,
                                 int stride) {
  if (stride < 1) throw std::invalid_argument("invariants: stride must be positive");
  SensitivityInvariants out;
  out.grid = trajectory.grid;
  TangentStepper stepper(model, trajectory);
  for (int k = 0; k <= trajectory.grid.steps; ++k) {
    if (k % stride == 0 || k == trajectory.grid.steps) {
      double i1 = 0.0, i2 = 0.0;
      gram_invariants(stepper.initial_block(), i1, i2);
      out.indices.push_back(k);
      out.i1.push_back(i1);
      out.i2.push_back(i2);
    }
    if (k < trajectory.grid.steps) stepper.advance(k);
  }
  return out;
}

std::vector<double> first_invariant_trace(const ModelSystem& model,
                                          const Trajectory& trajectory) {
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(trajectory.grid.size()));
  TangentStepper stepper(model, trajectory);
  for (int k = 0; k <= trajectory.grid.steps; ++k) {
    trace.push_back(stepper.initial_block().squaredNorm());
    if (k < trajectory.grid.steps) stepper.advance(k);
  }
  return trace;
}

int argmax_squared_sensitivity(const SensitivityTrajectory& sens,
                               const SensitivityChannel& channel, double window_lo,
                               double window_hi) {
  if (sens.state_dim != 1)
    throw std::invalid_argument("argmax_squared_sensitivity: scalar models only");
  if (channel.type == SensitivityChannel::Type::parameter && sens.param_dim == 0)
    throw std::invalid_argument("argmax_squared_sensitivity: model has no parameters");

  int best = -1;
  double best_sq = -1.0;
  for (std::size_t s = 0; s < sens.indices.size(); ++s) {
    const int k = sens.indices[s];
    const double t = sens.grid.time_at(k);
    if (t < window_lo - 1e-12 || t > window_hi + 1e-12) continue;
    const double value = channel.type == SensitivityChannel::Type::initial_state
                             ? sens.wrt_initial[s](0, 0)
                             : sens.wrt_parameters[s](0, 0);
    const double sq = value * value;
    if (sq > best_sq) {  // strict: ties keep the earliest index
      best_sq = sq;
      best = k;
    }
  }
  if (best < 0) throw std::invalid_argument("argmax_squared_sensitivity: empty window");
  return best;
}

}  // namespace fsm
