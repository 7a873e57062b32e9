// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fsm/common.hpp"

namespace fsm {

/// The unknowns of the inverse problem: initial condition plus model
/// parameters, estimated jointly.
struct ControlVector {
  Vector initial_state;
  Vector parameters;

  Eigen::Index state_dim() const { return initial_state.size(); }
  Eigen::Index param_dim() const { return parameters.size(); }
  Eigen::Index dim() const { return state_dim() + param_dim(); }

  /// [initial_state; parameters] as one column.
  Vector stacked() const;
  static ControlVector from_stacked(const Vector& packed, Eigen::Index state_dim,
                                    Eigen::Index param_dim);
};

/// Uniform time grid t_k = t0 + k*dt, k = 0..steps.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 1e-3;
  int steps = 0;

  TimeGrid() = default;
  TimeGrid(double t0_, double dt_, int steps_);

  int size() const { return steps + 1; }
  double time_at(int k) const { return t0 + k * dt; }
  double horizon() const { return time_at(steps); }
  std::vector<double> times() const;

  /// Grid index of t; throws std::invalid_argument when t is off-grid.
  int index_of(double t) const;
  bool contains(double t) const;
  /// Index of the closest grid point; throws when t lies outside the span.
  int nearest_index(double t) const;
};

struct Trajectory {
  TimeGrid grid;
  std::vector<Vector> states;  // one state per grid point
  Vector parameters;           // the parameters the trajectory was run with

  const Vector& state_at(int k) const { return states.at(static_cast<std::size_t>(k)); }
  const Vector& state_at_time(double t) const { return state_at(grid.index_of(t)); }
};

enum class ModelKind { continuous, discrete_map };

/// One-step matrix of a constant-coefficient linear map, stored dense or
/// sparse depending on size.
class LinearMap {
 public:
  explicit LinearMap(Matrix m);
  explicit LinearMap(SpMatrix m);

  Eigen::Index dim() const { return dim_; }
  bool is_sparse() const { return sparse_ != nullptr; }

  Matrix apply(const Matrix& x) const;  // M * x
  Matrix to_dense() const;

 private:
  Eigen::Index dim_ = 0;
  std::shared_ptr<const Matrix> dense_;
  std::shared_ptr<const SpMatrix> sparse_;
};

/// A dynamical model: either a continuous ODE dx/dt = rhs(x, p) advanced by
/// the fixed-step integrator, or a discrete one-step map x_{k+1} = rhs(x_k, p)
/// applied exactly. Jacobians are analytic; a sparse state Jacobian may be
/// supplied as a fast path for banded/stencil systems.
struct ModelSystem {
  std::string name;
  Eigen::Index state_dim = 0;
  Eigen::Index param_dim = 0;
  ModelKind kind = ModelKind::continuous;

  std::function<Vector(const Vector&, const Vector&)> rhs;
  std::function<Matrix(const Vector&, const Vector&)> jac_state;  // n x n
  std::function<Matrix(const Vector&, const Vector&)> jac_param;  // n x p
  std::function<SpMatrix(const Vector&, const Vector&)> jac_state_sparse;  // optional

  /// Discrete maps: the time step folded into one application (0 = free).
  double map_dt = 0.0;
  bool linear_in_state = false;
  /// Set when the model is a constant linear map (exposes M for the
  /// closed-form estimator and the estimate-sensitivity identities).
  std::shared_ptr<const SpMatrix> constant_map;

  bool has_sparse_jacobian() const { return static_cast<bool>(jac_state_sparse); }
};

/// Options for the built-in models; each model reads only its own fields.
struct ModelOptions {
  // burgers_1d: interior nodes on (0, length) with zero Dirichlet boundaries.
  int grid_size = 128;
  double length = 1.0;
  double reynolds = 500.0;  // +infinity disables the viscous term

  // advdiff_2d: interior nodes of the unit square, forward-Euler map.
  int nx = 32;
  int ny = 32;
  double cx = 0.5;
  double cy = 0.5;
  double nu = 0.01;
  double dt = 1e-3;  // step folded into the one-step map
};

/// Built-in models: linear_decay, quadratic_decay, burgers_1d, advdiff_2d.
ModelSystem builtin_model(const std::string& name, const ModelOptions& options = {});

/// Advances the model over the grid. Continuous models use the classical
/// fixed-step RK4 scheme; discrete maps apply rhs once per step.
Trajectory integrate(const ModelSystem& model, const ControlVector& control,
                     const TimeGrid& grid);

/// Interior-node grid of a rectangle with zero Dirichlet boundaries;
/// node (i, j) sits at ((i+1)hx, (j+1)hy), linear index j*nx + i.
struct SpatialGrid2D {
  int nx = 32;
  int ny = 32;
  double length_x = 1.0;
  double length_y = 1.0;

  double hx() const { return length_x / (nx + 1); }
  double hy() const { return length_y / (ny + 1); }
  double x(int i) const { return (i + 1) * hx(); }
  double y(int j) const { return (j + 1) * hy(); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(nx) * ny; }
  Eigen::Index node(int i, int j) const { return static_cast<Eigen::Index>(j) * nx + i; }
};

/// exp(-((x-cx)^2 + (y-cy)^2) / width) sampled at the interior nodes.
Vector gaussian_field_ic(const std::array<double, 2>& center, double width,
                         const SpatialGrid2D& grid);

/// Smoothed ramp x / (1 + exp(reynolds/16 (4x^2 - 1))) on interior nodes;
/// steepens into a moving front under burgers_1d.
Vector burgers_shock_profile(int n, double length, double reynolds);

/// amplitude * sin(2 pi periods x / length) on interior nodes.
Vector sine_profile(int n, double length, double amplitude = 1.0, double periods = 1.0);

}  // namespace fsm
