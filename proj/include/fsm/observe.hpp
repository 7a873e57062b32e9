// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsm/sensitivity.hpp"

namespace fsm {

/// Maps a model state to the observed quantity. Identity and pointwise
/// sampling avoid materializing their Jacobians.
class ObservationOperator {
 public:
  enum class Kind { identity, linear, pointwise, custom_scalar };

  ObservationOperator() = default;

  static ObservationOperator identity();
  static ObservationOperator linear(Matrix h);
  static ObservationOperator pointwise(std::vector<Eigen::Index> indices);
  /// Scalar state, scalar observable h(x) with derivative dh(x).
  static ObservationOperator custom_scalar(std::function<double(double)> h,
                                           std::function<double(double)> dh);

  Kind kind() const { return kind_; }
  std::string kind_name() const;
  bool is_linear() const { return kind_ != Kind::custom_scalar; }

  Eigen::Index obs_dim(Eigen::Index state_dim) const;
  Vector observe(const Vector& state) const;
  /// Dense m x n Jacobian at `state`.
  Matrix jacobian(const Vector& state) const;
  /// D_h(state) * f without forming the Jacobian where possible.
  Matrix apply_jacobian(const Vector& state, const Matrix& f) const;

  const Matrix& matrix() const;                      // linear only
  const std::vector<Eigen::Index>& indices() const;  // pointwise only

 private:
  Kind kind_ = Kind::identity;
  Matrix h_;
  std::vector<Eigen::Index> indices_;
  std::function<double(double)> scalar_h_;
  std::function<double(double)> scalar_dh_;
};

/// Timestamped observations with per-time noise level; values carry
/// additive zero-mean Gaussian noise of standard deviation noise_std[i].
struct ObservationSet {
  std::vector<double> times;       // strictly increasing
  std::vector<Vector> values;      // one m-vector per time
  std::vector<double> noise_std;   // sigma_i per time
  ObservationOperator op;

  std::size_t size() const { return times.size(); }
};

/// Twin-experiment synthesis: runs the truth control, observes it at the
/// given grid times and adds Gaussian noise with sigma_i = noise_pct *
/// scale_i, where scale_i is |h| for scalar observables and the RMS of h
/// for vector observables. noise_pct == 0 yields exact values with unit
/// weights. Deterministic for a fixed seed.
ObservationSet synthesize_observations(const ModelSystem& truth_model,
                                       const ControlVector& truth_control,
                                       const ObservationOperator& op,
                                       std::span<const double> times, const TimeGrid& grid,
                                       double noise_pct, std::uint64_t seed);

/// Observability Gramian over control space with its per-observation
/// additive decomposition: total = sum(parts).
struct Gramian {
  Matrix total;
  std::vector<Matrix> parts;

  Eigen::Index dim() const { return total.rows(); }
  double determinant() const;
  /// log|det|; -infinity when the factorization finds a non-positive pivot.
  double log_abs_determinant() const;
  double min_eigenvalue() const;
  double max_eigenvalue() const;
};

/// parts[i] = F_i^T D_h^T D_h F_i / sigma_i^2 with F_i the control block of
/// the sensitivities at observation time i. Times may repeat (the repeated
/// contribution is rank-deficient by construction).
Gramian build_gramian(const SensitivityTrajectory& sens, const Trajectory& trajectory,
                      const ObservationOperator& op, std::span<const double> times,
                      std::span<const double> noise_std);

/// Determinant of the two-observation scalar-model Gramian with weights
/// d_i absorbed: d1^2 d2^2 (u1 v2 - u2 v1)^2.
double gramian_det_closed_form(double u1, double v1, double u2, double v2, double d1,
                               double d2);

struct PlacementConstraints {
  double min_time = 0.1;
  double max_time = 0.0;  // 0 means the end of the grid
  double min_separation = 0.0;
};

struct PlacementChoice {
  double time = 0.0;
  std::string channel;
  double squared_sensitivity = 0.0;
};

struct PlacementPlan {
  std::vector<double> times;  // ascending, pairwise distinct
  std::vector<PlacementChoice> rationale;
  double gramian_det = 0.0;
  double gramian_log_det = -std::numeric_limits<double>::infinity();
};

/// Greedy placement at squared-sensitivity maxima. Scalar models cycle
/// the control channels, picking each channel's best admissible time;
/// vector models rank times by the first trace invariant. The resulting
/// unit-weight Gramian must be positive definite or the plan is rejected.
PlacementPlan plan_placement(const SensitivityTrajectory& sens, const Trajectory& trajectory,
                             const ObservationOperator& op, int count,
                             const PlacementConstraints& constraints);

/// Streaming variant for large systems: ranks by the first invariant
/// without keeping the full block history.
PlacementPlan plan_placement(const ModelSystem& model, const Trajectory& trajectory,
                             const ObservationOperator& op, int count,
                             const PlacementConstraints& constraints);

nlohmann::json to_json(const ObservationSet& obs);
ObservationSet observation_set_from_json(const nlohmann::json& j);

}  // namespace fsm
