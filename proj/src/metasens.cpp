// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#include "fsm/metasens.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

#include "fsm/parallel.hpp"

namespace fsm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool singular_gramian(const Matrix& g) {
  const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  const double trace = g.trace();
  return !(det > 1e-12 * trace * trace);
}

// Two-observation scalar-case fields at grid indices (k1, k2).
struct PairFields {
  double y1 = kNaN, w1 = kNaN, y2 = kNaN, w2 = kNaN;
  double det = 0.0;
  bool singular = true;
};

PairFields pair_fields(const SensitivityTrajectory& sens, const Trajectory& traj,
                       const ObservationOperator& op, int k1, int k2) {
  const double u1 = sens.scalar_initial(k1);
  const double v1 = sens.scalar_parameter(k1);
  const double u2 = sens.scalar_initial(k2);
  const double v2 = sens.scalar_parameter(k2);
  const double d1 = op.jacobian(traj.state_at(k1))(0, 0);
  const double d2 = op.jacobian(traj.state_at(k2))(0, 0);

  Matrix g(2, 2);
  g(0, 0) = d1 * d1 * u1 * u1 + d2 * d2 * u2 * u2;
  g(0, 1) = d1 * d1 * u1 * v1 + d2 * d2 * u2 * v2;
  g(1, 0) = g(0, 1);
  g(1, 1) = d1 * d1 * v1 * v1 + d2 * d2 * v2 * v2;

  PairFields out;
  out.det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  if (singular_gramian(g)) return out;
  out.singular = false;

  const Eigen::LDLT<Matrix> solver(g);
  const Vector first = solver.solve(Vector{{d1 * u1, d1 * v1}});
  const Vector second = solver.solve(Vector{{d2 * u2, d2 * v2}});
  out.y1 = first[0];
  out.w1 = first[1];
  out.y2 = second[0];
  out.w2 = second[1];
  return out;
}

void require_scalar_pair(const SensitivityTrajectory& sens) {
  if (sens.state_dim != 1 || sens.param_dim != 1)
    throw std::invalid_argument("operation requires a scalar model with one parameter");
}

int nearest_axis_index(const std::vector<double>& axis, double value) {
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const double dist = std::abs(axis[i] - value);
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

double single_obs_sensitivity(const SensitivityTrajectory& sens,
                              const SensitivityChannel& channel, double time) {
  if (sens.state_dim != 1)
    throw std::invalid_argument("single_obs_sensitivity: scalar models only");
  const int k = sens.grid.index_of(time);
  const double value = channel.type == SensitivityChannel::Type::initial_state
                           ? sens.scalar_initial(k)
                           : sens.scalar_parameter(k);
  if (std::abs(value) < 1e-150)
    throw NumericalError("single_obs_sensitivity: zero sensitivity at the requested time");
  return 1.0 / value;
}

EstimateSensitivity pair_sensitivities(const SensitivityTrajectory& sens,
                                       const Trajectory& trajectory,
                                       const ObservationOperator& op, double t1, double t2) {
  require_scalar_pair(sens);
  const int k1 = sens.grid.index_of(t1);
  const int k2 = sens.grid.index_of(t2);
  if (k1 == k2)
    throw NumericalError("pair_sensitivities: coincident observation times (singular Gramian)");
  const PairFields f = pair_fields(sens, trajectory, op, k1, k2);
  if (f.singular) throw NumericalError("pair_sensitivities: singular Gramian");

  EstimateSensitivity out;
  out.times = {sens.grid.time_at(k1), sens.grid.time_at(k2)};
  out.blocks.push_back(Matrix{{f.y1}, {f.w1}});
  out.blocks.push_back(Matrix{{f.y2}, {f.w2}});
  return out;
}

Matrix linear_vector_sensitivity(const LinearMap& map, const ObservationOperator& op,
                                 int obs_step, double noise_std) {
  const int steps[] = {obs_step};
  const double sigmas[] = {noise_std};
  return linear_vector_sensitivity(map, op, steps, sigmas, 0);
}

Matrix linear_vector_sensitivity(const LinearMap& map, const ObservationOperator& op,
                                 std::span<const int> obs_steps,
                                 std::span<const double> noise_std, std::size_t which) {
  if (obs_steps.empty() || obs_steps.size() != noise_std.size())
    throw std::invalid_argument("linear_vector_sensitivity: need one noise level per step");
  if (which >= obs_steps.size())
    throw std::invalid_argument("linear_vector_sensitivity: block index out of range");
  if (!op.is_linear())
    throw std::invalid_argument("linear_vector_sensitivity: linear operators only");
  const Eigen::Index n = map.dim();

  Matrix gram = Matrix::Zero(n, n);
  Matrix selected;  // (M^T)^{k_which} H^T / sigma_which^2
  for (std::size_t i = 0; i < obs_steps.size(); ++i) {
    if (obs_steps[i] < 0)
      throw std::invalid_argument("linear_vector_sensitivity: negative observation step");
    if (!(noise_std[i] > 0.0))
      throw std::invalid_argument("linear_vector_sensitivity: noise level must be positive");
    Matrix chain = Matrix::Identity(n, n);
    for (int s = 0; s < obs_steps[i]; ++s) chain = map.apply(chain);
    const Matrix h_chain = op.apply_jacobian(Vector::Zero(n), chain);
    const double w = 1.0 / (noise_std[i] * noise_std[i]);
    gram.noalias() += w * h_chain.transpose() * h_chain;
    if (i == which) selected = w * h_chain.transpose();
  }

  const Eigen::LDLT<Matrix> solver(gram);
  if (solver.info() != Eigen::Success || !(solver.vectorD().minCoeff() > 0.0))
    throw NumericalError("linear_vector_sensitivity: singular Gramian");
  return solver.solve(selected);
}

SweepGrid sweep(const ModelSystem& model, const ControlVector& control,
                const ObservationOperator& op, const TimeGrid& grid,
                std::span<const double> t1_axis, std::span<const double> t2_axis) {
  if (model.state_dim != 1 || model.param_dim != 1)
    throw std::invalid_argument("sweep: scalar models with one parameter only");
  if (t1_axis.empty() || t2_axis.empty())
    throw std::invalid_argument("sweep: empty axis");

  const Trajectory traj = integrate(model, control, grid);
  const SensitivityTrajectory sens = propagate(model, traj);

  SweepGrid out;
  out.t1_axis.assign(t1_axis.begin(), t1_axis.end());
  out.t2_axis.assign(t2_axis.begin(), t2_axis.end());
  const int rows = static_cast<int>(t1_axis.size());
  const int cols = static_cast<int>(t2_axis.size());
  out.y1sq.resize(rows, cols);
  out.w1sq.resize(rows, cols);
  out.y2sq.resize(rows, cols);
  out.w2sq.resize(rows, cols);
  out.det_g.resize(rows, cols);
  out.singular.resize(rows, cols);

  std::vector<int> k1(out.t1_axis.size());
  std::vector<int> k2(out.t2_axis.size());
  for (std::size_t i = 0; i < out.t1_axis.size(); ++i) k1[i] = grid.nearest_index(out.t1_axis[i]);
  for (std::size_t j = 0; j < out.t2_axis.size(); ++j) k2[j] = grid.nearest_index(out.t2_axis[j]);

  parallel_for(rows, [&](int i) {
    for (int j = 0; j < cols; ++j) {
      PairFields f;
      if (k1[static_cast<std::size_t>(i)] != k2[static_cast<std::size_t>(j)]) {
        f = pair_fields(sens, traj, op, k1[static_cast<std::size_t>(i)],
                        k2[static_cast<std::size_t>(j)]);
      } else {
        f.det = 0.0;
      }
      out.y1sq(i, j) = f.y1 * f.y1;
      out.w1sq(i, j) = f.w1 * f.w1;
      out.y2sq(i, j) = f.y2 * f.y2;
      out.w2sq(i, j) = f.w2 * f.w2;
      out.det_g(i, j) = f.det;
      out.singular(i, j) = f.singular ? 1 : 0;
    }
  });
  return out;
}

const Matrix& sweep_field(const SweepGrid& grid, SweepField field) {
  switch (field) {
    case SweepField::y1sq: return grid.y1sq;
    case SweepField::w1sq: return grid.w1sq;
    case SweepField::y2sq: return grid.y2sq;
    case SweepField::w2sq: return grid.w2sq;
  }
  throw std::logic_error("unreachable");
}

namespace {

SweepCell argmin_over(const SweepGrid& grid, SweepField field, int row_only, int col_only) {
  const Matrix& values = sweep_field(grid, field);
  SweepCell best;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < values.rows(); ++i) {
    if (row_only >= 0 && i != row_only) continue;
    for (int j = 0; j < values.cols(); ++j) {
      if (col_only >= 0 && j != col_only) continue;
      if (grid.singular(i, j)) continue;
      if (values(i, j) < best_value) {
        best_value = values(i, j);
        best = SweepCell{i, j, grid.t1_axis[static_cast<std::size_t>(i)],
                         grid.t2_axis[static_cast<std::size_t>(j)], values(i, j), true};
      }
    }
  }
  return best;
}

}  // namespace

SweepCell sweep_argmin(const SweepGrid& grid, SweepField field) {
  return argmin_over(grid, field, -1, -1);
}

SweepCell sweep_argmin_row(const SweepGrid& grid, SweepField field, double t1) {
  return argmin_over(grid, field, nearest_axis_index(grid.t1_axis, t1), -1);
}

SweepCell sweep_argmin_col(const SweepGrid& grid, SweepField field, double t2) {
  return argmin_over(grid, field, -1, nearest_axis_index(grid.t2_axis, t2));
}

}  // namespace fsm
