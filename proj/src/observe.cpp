// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#include "fsm/observe.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace fsm {

ObservationOperator ObservationOperator::identity() { return ObservationOperator{}; }

ObservationOperator ObservationOperator::linear(Matrix h) {
  if (h.rows() < 1 || h.cols() < 1)
    throw std::invalid_argument("ObservationOperator::linear: empty matrix");
  ObservationOperator op;
  op.kind_ = Kind::linear;
  op.h_ = std::move(h);
  return op;
}

ObservationOperator ObservationOperator::pointwise(std::vector<Eigen::Index> indices) {
  if (indices.empty())
    throw std::invalid_argument("ObservationOperator::pointwise: no sample indices");
  ObservationOperator op;
  op.kind_ = Kind::pointwise;
  op.indices_ = std::move(indices);
  return op;
}

ObservationOperator ObservationOperator::custom_scalar(std::function<double(double)> h,
                                                       std::function<double(double)> dh) {
  if (!h || !dh)
    throw std::invalid_argument("ObservationOperator::custom_scalar: missing callable");
  ObservationOperator op;
  op.kind_ = Kind::custom_scalar;
  op.scalar_h_ = std::move(h);
  op.scalar_dh_ = std::move(dh);
  return op;
}

std::string ObservationOperator::kind_name() const {
  switch (kind_) {
    case Kind::identity: return "identity";
    case Kind::linear: return "linear";
    case Kind::pointwise: return "pointwise";
    case Kind::custom_scalar: return "custom_scalar";
  }
  return "unknown";
}

Eigen::Index ObservationOperator::obs_dim(Eigen::Index state_dim) const {
  switch (kind_) {
    case Kind::identity: return state_dim;
    case Kind::linear: return h_.rows();
    case Kind::pointwise: return static_cast<Eigen::Index>(indices_.size());
    case Kind::custom_scalar: return 1;
  }
  return 0;
}

Vector ObservationOperator::observe(const Vector& state) const {
  switch (kind_) {
    case Kind::identity: return state;
    case Kind::linear:
      if (h_.cols() != state.size())
        throw std::invalid_argument("observation operator: state dimension mismatch");
      return h_ * state;
    case Kind::pointwise: {
      Vector out(static_cast<Eigen::Index>(indices_.size()));
      for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (indices_[i] < 0 || indices_[i] >= state.size())
          throw std::invalid_argument("observation operator: sample index out of range");
        out[static_cast<Eigen::Index>(i)] = state[indices_[i]];
      }
      return out;
    }
    case Kind::custom_scalar:
      if (state.size() != 1)
        throw std::invalid_argument("custom scalar operator expects a scalar state");
      return Vector{{scalar_h_(state[0])}};
  }
  throw std::logic_error("unreachable");
}

Matrix ObservationOperator::jacobian(const Vector& state) const {
  switch (kind_) {
    case Kind::identity: return Matrix::Identity(state.size(), state.size());
    case Kind::linear: return h_;
    case Kind::pointwise: {
      Matrix j = Matrix::Zero(static_cast<Eigen::Index>(indices_.size()), state.size());
      for (std::size_t i = 0; i < indices_.size(); ++i)
        j(static_cast<Eigen::Index>(i), indices_[i]) = 1.0;
      return j;
    }
    case Kind::custom_scalar: return Matrix{{scalar_dh_(state[0])}};
  }
  throw std::logic_error("unreachable");
}

Matrix ObservationOperator::apply_jacobian(const Vector& state, const Matrix& f) const {
  switch (kind_) {
    case Kind::identity: return f;
    case Kind::linear: return h_ * f;
    case Kind::pointwise: {
      Matrix out(static_cast<Eigen::Index>(indices_.size()), f.cols());
      for (std::size_t i = 0; i < indices_.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = f.row(indices_[i]);
      return out;
    }
    case Kind::custom_scalar: return scalar_dh_(state[0]) * f;
  }
  throw std::logic_error("unreachable");
}

const Matrix& ObservationOperator::matrix() const {
  if (kind_ != Kind::linear)
    throw std::logic_error("ObservationOperator::matrix: not a linear-matrix operator");
  return h_;
}

const std::vector<Eigen::Index>& ObservationOperator::indices() const {
  if (kind_ != Kind::pointwise)
    throw std::logic_error("ObservationOperator::indices: not a pointwise operator");
  return indices_;
}

ObservationSet synthesize_observations(const ModelSystem& truth_model,
                                       const ControlVector& truth_control,
                                       const ObservationOperator& op,
                                       std::span<const double> times, const TimeGrid& grid,
                                       double noise_pct, std::uint64_t seed) {
  if (times.empty()) throw std::invalid_argument("synthesize_observations: no times given");
  if (noise_pct < 0.0)
    throw std::invalid_argument("synthesize_observations: noise_pct must be nonnegative");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("synthesize_observations: times must be strictly increasing");
  }

  const Trajectory traj = integrate(truth_model, truth_control, grid);

  ObservationSet obs;
  obs.op = op;
  obs.times.assign(times.begin(), times.end());
  obs.values.reserve(times.size());
  obs.noise_std.reserve(times.size());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (const double t : times) {
    const Vector clean = op.observe(traj.state_at_time(t));
    double sigma = 1.0;  // unit weights in the noise-free case
    if (noise_pct > 0.0) {
      const double scale = clean.size() == 1
                               ? std::abs(clean[0])
                               : clean.norm() / std::sqrt(static_cast<double>(clean.size()));
      sigma = noise_pct * scale;
    }
    Vector value = clean;
    if (noise_pct > 0.0) {
      for (Eigen::Index j = 0; j < value.size(); ++j) value[j] += sigma * unit(rng);
    }
    obs.values.push_back(std::move(value));
    obs.noise_std.push_back(sigma);
  }
  return obs;
}

double Gramian::determinant() const {
  if (total.rows() == 1) return total(0, 0);
  if (total.rows() == 2)
    return total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0);
  return total.ldlt().vectorD().prod();
}

double Gramian::log_abs_determinant() const {
  const auto ldlt = total.ldlt();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < total.rows(); ++i) {
    const double d = ldlt.vectorD()[i];
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    log_det += std::log(d);
  }
  return log_det;
}

double Gramian::min_eigenvalue() const {
  return Eigen::SelfAdjointEigenSolver<Matrix>(total, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

double Gramian::max_eigenvalue() const {
  return Eigen::SelfAdjointEigenSolver<Matrix>(total, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

Gramian build_gramian(const SensitivityTrajectory& sens, const Trajectory& trajectory,
                      const ObservationOperator& op, std::span<const double> times,
                      std::span<const double> noise_std) {
  if (times.size() != noise_std.size())
    throw std::invalid_argument("build_gramian: one noise level per observation time");
  const Eigen::Index q = sens.state_dim + sens.param_dim;

  Gramian g;
  g.total = Matrix::Zero(q, q);
  g.parts.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(noise_std[i] > 0.0)) throw std::invalid_argument("build_gramian: zero noise level");
    const int k = sens.grid.index_of(times[i]);
    const Matrix weighted =
        op.apply_jacobian(trajectory.state_at(k), sens.control_block(k)) / noise_std[i];
    Matrix part = weighted.transpose() * weighted;
    g.total += part;
    g.parts.push_back(std::move(part));
  }
  return g;
}

double gramian_det_closed_form(double u1, double v1, double u2, double v2, double d1,
                               double d2) {
  const double cross = u1 * v2 - u2 * v1;
  return d1 * d1 * d2 * d2 * cross * cross;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PlanWindow {
  double lo;
  double hi;
};

PlanWindow plan_window(const TimeGrid& grid, const PlacementConstraints& c) {
  PlanWindow w{c.min_time, c.max_time > 0.0 ? c.max_time : grid.horizon()};
  if (w.hi < w.lo) throw std::invalid_argument("plan_placement: empty placement window");
  return w;
}

bool separated(double t, const std::vector<double>& chosen, double min_separation) {
  for (const double s : chosen) {
    if (std::abs(t - s) < min_separation) return false;
  }
  return true;
}

PlacementPlan finalize_plan(const SensitivityTrajectory& sens, const Trajectory& trajectory,
                            const ObservationOperator& op, PlacementPlan plan) {
  std::sort(plan.times.begin(), plan.times.end());
  std::sort(plan.rationale.begin(), plan.rationale.end(),
            [](const PlacementChoice& a, const PlacementChoice& b) { return a.time < b.time; });
  for (std::size_t i = 1; i < plan.times.size(); ++i) {
    if (plan.times[i] == plan.times[i - 1])
      throw NumericalError("placement plan rejected: duplicate observation times give a "
                           "singular Gramian");
  }
  const std::vector<double> unit_sigma(plan.times.size(), 1.0);
  const Gramian g = build_gramian(sens, trajectory, op, plan.times, unit_sigma);
  const auto ldlt = g.total.ldlt();
  const double max_pivot = ldlt.vectorD().maxCoeff();
  const double min_pivot = ldlt.vectorD().minCoeff();
  if (!(min_pivot > 1e-12 * max_pivot))
    throw NumericalError("placement plan rejected: singular Gramian");
  plan.gramian_log_det = g.log_abs_determinant();
  plan.gramian_det = g.dim() <= 4 ? g.determinant() : std::exp(plan.gramian_log_det);
  return plan;
}

}  // namespace

PlacementPlan plan_placement(const SensitivityTrajectory& sens, const Trajectory& trajectory,
                             const ObservationOperator& op, int count,
                             const PlacementConstraints& constraints) {
  const Eigen::Index q = sens.state_dim + sens.param_dim;
  const Eigen::Index m = op.obs_dim(sens.state_dim);
  if (static_cast<Eigen::Index>(count) * m < q)
    throw std::invalid_argument("plan_placement: too few observations for the control dimension");
  const PlanWindow window = plan_window(sens.grid, constraints);

  if (sens.state_dim > 1) {
    // Vector models: rank times by the first trace invariant.
    const SensitivityInvariants inv = invariants(sens);
    PlacementPlan plan;
    std::vector<char> taken(inv.indices.size(), 0);
    for (int pick = 0; pick < count; ++pick) {
      int best_slot = -1;
      double best_i1 = -kInf;
      for (std::size_t s = 0; s < inv.indices.size(); ++s) {
        if (taken[s]) continue;
        const double t = sens.grid.time_at(inv.indices[s]);
        if (t < window.lo - 1e-12 || t > window.hi + 1e-12) continue;
        if (!separated(t, plan.times, constraints.min_separation)) continue;
        if (inv.i1[s] > best_i1) {
          best_i1 = inv.i1[s];
          best_slot = static_cast<int>(s);
        }
      }
      if (best_slot < 0)
        throw std::invalid_argument("plan_placement: constraints leave no admissible time");
      taken[static_cast<std::size_t>(best_slot)] = 1;
      const double t = sens.grid.time_at(inv.indices[static_cast<std::size_t>(best_slot)]);
      plan.times.push_back(t);
      plan.rationale.push_back({t, "invariant_i1", best_i1});
    }
    return finalize_plan(sens, trajectory, op, std::move(plan));
  }

  // Scalar models: cycle control channels, taking each channel's best
  // admissible time.
  std::vector<SensitivityChannel> channels;
  channels.push_back({SensitivityChannel::Type::initial_state, 0});
  for (int p = 0; p < sens.param_dim; ++p)
    channels.push_back({SensitivityChannel::Type::parameter, p});

  PlacementPlan plan;
  for (int pick = 0; pick < count; ++pick) {
    const SensitivityChannel& channel = channels[static_cast<std::size_t>(pick) % channels.size()];
    int best_k = -1;
    double best_sq = -1.0;
    for (std::size_t s = 0; s < sens.indices.size(); ++s) {
      const int k = sens.indices[s];
      const double t = sens.grid.time_at(k);
      if (t < window.lo - 1e-12 || t > window.hi + 1e-12) continue;
      if (!separated(t, plan.times, constraints.min_separation)) continue;
      const double value = channel.type == SensitivityChannel::Type::initial_state
                               ? sens.wrt_initial[s](0, 0)
                               : sens.wrt_parameters[s](0, channel.index);
      if (value * value > best_sq) {
        best_sq = value * value;
        best_k = k;
      }
    }
    if (best_k < 0)
      throw std::invalid_argument("plan_placement: constraints leave no admissible time");
    const double t = sens.grid.time_at(best_k);
    plan.times.push_back(t);
    plan.rationale.push_back(
        {t,
         channel.type == SensitivityChannel::Type::initial_state ? "initial_state" : "parameter",
         best_sq});
  }
  return finalize_plan(sens, trajectory, op, std::move(plan));
}

PlacementPlan plan_placement(const ModelSystem& model, const Trajectory& trajectory,
                             const ObservationOperator& op, int count,
                             const PlacementConstraints& constraints) {
  const Eigen::Index q = model.state_dim + model.param_dim;
  const Eigen::Index m = op.obs_dim(model.state_dim);
  if (static_cast<Eigen::Index>(count) * m < q)
    throw std::invalid_argument("plan_placement: too few observations for the control dimension");
  if (model.state_dim == 1) {
    // Scalar models are cheap to store in full; reuse the dense path.
    return plan_placement(propagate(model, trajectory), trajectory, op, count, constraints);
  }
  const PlanWindow window = plan_window(trajectory.grid, constraints);

  const std::vector<double> i1 = first_invariant_trace(model, trajectory);
  PlacementPlan plan;
  std::vector<char> taken(i1.size(), 0);
  for (int pick = 0; pick < count; ++pick) {
    int best_k = -1;
    double best_i1 = -kInf;
    for (std::size_t k = 0; k < i1.size(); ++k) {
      if (taken[k]) continue;
      const double t = trajectory.grid.time_at(static_cast<int>(k));
      if (t < window.lo - 1e-12 || t > window.hi + 1e-12) continue;
      if (!separated(t, plan.times, constraints.min_separation)) continue;
      if (i1[k] > best_i1) {
        best_i1 = i1[k];
        best_k = static_cast<int>(k);
      }
    }
    if (best_k < 0)
      throw std::invalid_argument("plan_placement: constraints leave no admissible time");
    taken[static_cast<std::size_t>(best_k)] = 1;
    const double t = trajectory.grid.time_at(best_k);
    plan.times.push_back(t);
    plan.rationale.push_back({t, "invariant_i1", best_i1});
  }

  std::sort(plan.times.begin(), plan.times.end());
  std::vector<int> keep;
  keep.reserve(plan.times.size());
  for (const double t : plan.times) keep.push_back(trajectory.grid.index_of(t));
  const SensitivityTrajectory sens = propagate(model, trajectory, keep);
  return finalize_plan(sens, trajectory, op, std::move(plan));
}

nlohmann::json to_json(const ObservationSet& obs) {
  if (obs.op.kind() == ObservationOperator::Kind::linear ||
      obs.op.kind() == ObservationOperator::Kind::custom_scalar)
    throw std::invalid_argument("ObservationSet JSON supports identity and pointwise operators");
  nlohmann::json j;
  j["times"] = obs.times;
  auto values = nlohmann::json::array();
  for (const Vector& v : obs.values)
    values.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  j["values"] = std::move(values);
  j["noise_std"] = obs.noise_std;
  j["operator"] = obs.op.kind_name();
  if (obs.op.kind() == ObservationOperator::Kind::pointwise) {
    j["operator_indices"] = std::vector<Eigen::Index>(obs.op.indices());
  }
  return j;
}

ObservationSet observation_set_from_json(const nlohmann::json& j) {
  ObservationSet obs;
  obs.times = j.at("times").get<std::vector<double>>();
  for (const auto& row : j.at("values")) {
    const auto vals = row.get<std::vector<double>>();
    obs.values.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  obs.noise_std = j.at("noise_std").get<std::vector<double>>();
  const std::string op_kind = j.at("operator").get<std::string>();
  if (op_kind == "identity") {
    obs.op = ObservationOperator::identity();
  } else if (op_kind == "pointwise") {
    obs.op = ObservationOperator::pointwise(
        j.at("operator_indices").get<std::vector<Eigen::Index>>());
  } else {
    throw std::invalid_argument("unsupported observation operator in JSON: " + op_kind);
  }
  if (obs.times.size() != obs.values.size() || obs.times.size() != obs.noise_std.size())
    throw std::invalid_argument("observation JSON: mismatched array lengths");
  for (std::size_t i = 1; i < obs.times.size(); ++i) {
    if (!(obs.times[i] > obs.times[i - 1]))
      throw std::invalid_argument("observation JSON: times must be strictly increasing");
  }
  for (const Vector& v : obs.values) {
    if (!v.allFinite()) throw std::invalid_argument("observation JSON: non-finite value");
  }
  return obs;
}

}  // namespace fsm
