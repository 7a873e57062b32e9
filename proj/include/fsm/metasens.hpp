// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fsm/observe.hpp"

namespace fsm {

/// Sensitivity of the single-observation optimal estimate to the
/// observation value, in the vanishing-innovation limit: 1/u(k) for the
/// initial-state channel, 1/v(k) for the parameter channel. Scalar models.
double single_obs_sensitivity(const SensitivityTrajectory& sens,
                              const SensitivityChannel& channel, double time);

/// Per-observation derivative blocks of the optimal control estimate with
/// respect to each observation vector, control dim x obs dim each.
struct EstimateSensitivity {
  std::vector<double> times;
  std::vector<Matrix> blocks;
};

/// Two-observation scalar case: block_i = G^{-1} D_h(i) [u_i, v_i]^T with
/// the unit-weight Gramian built from both times. Throws on a singular
/// Gramian (coincident times or collinear sensitivities).
EstimateSensitivity pair_sensitivities(const SensitivityTrajectory& sens,
                                       const Trajectory& trajectory,
                                       const ObservationOperator& op, double t1, double t2);

/// Constant linear map, single observation of the full chain at step
/// `obs_step`: returns G^{-1} (M^T)^i H^T / sigma^2. With H = I this equals
/// M^{-i} independently of sigma.
Matrix linear_vector_sensitivity(const LinearMap& map, const ObservationOperator& op,
                                 int obs_step, double noise_std);

/// Multi-observation variant: the Gramian accumulates every step in
/// obs_steps; the returned block is the one for obs_steps[which].
Matrix linear_vector_sensitivity(const LinearMap& map, const ObservationOperator& op,
                                 std::span<const int> obs_steps,
                                 std::span<const double> noise_std, std::size_t which);

/// Squared estimate-vs-observation sensitivities over a (t1, t2) grid.
/// Cells whose Gramian fails |G| > 1e-12 (trace G)^2 are flagged singular
/// and carry NaN fields.
struct SweepGrid {
  std::vector<double> t1_axis;
  std::vector<double> t2_axis;
  Matrix y1sq;  // d estimate(initial) / d z1, squared
  Matrix w1sq;  // d estimate(parameter) / d z1, squared
  Matrix y2sq;
  Matrix w2sq;
  Matrix det_g;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> singular;
};

/// Evaluates pair_sensitivities over the Cartesian grid of the two axes
/// (snapped to the integration grid). Cells are computed independently and
/// in deterministic order; rows run in parallel up to max_threads().
SweepGrid sweep(const ModelSystem& model, const ControlVector& control,
                const ObservationOperator& op, const TimeGrid& grid,
                std::span<const double> t1_axis, std::span<const double> t2_axis);

enum class SweepField { y1sq, w1sq, y2sq, w2sq };

const Matrix& sweep_field(const SweepGrid& grid, SweepField field);

struct SweepCell {
  int i = -1;  // t1 index
  int j = -1;  // t2 index
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;
  bool valid = false;
};

/// Argmin over non-singular cells; invalid result when every cell is
/// singular.
SweepCell sweep_argmin(const SweepGrid& grid, SweepField field);
/// Argmin along the row with t1 closest to `t1`.
SweepCell sweep_argmin_row(const SweepGrid& grid, SweepField field, double t1);
/// Argmin along the column with t2 closest to `t2`.
SweepCell sweep_argmin_col(const SweepGrid& grid, SweepField field, double t2);

}  // namespace fsm
