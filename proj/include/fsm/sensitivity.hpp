// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "fsm/dynamics.hpp"

namespace fsm {

/// Tangent-linear blocks along a trajectory: wrt_initial[k] is the n x n
/// derivative of the state at grid point k with respect to the initial
/// state, wrt_parameters[k] the n x p derivative with respect to the
/// parameters. Blocks may be stored for a subset of grid points only
/// (large systems); `indices` lists the stored grid indices in order.
struct SensitivityTrajectory {
  TimeGrid grid;
  Eigen::Index state_dim = 0;
  Eigen::Index param_dim = 0;
  std::vector<int> indices;
  std::vector<Matrix> wrt_initial;
  std::vector<Matrix> wrt_parameters;

  bool full() const { return static_cast<int>(indices.size()) == grid.size(); }
  int slot_of(int grid_index) const;  // -1 when not stored

  const Matrix& initial_block(int grid_index) const;
  const Matrix& parameter_block(int grid_index) const;
  /// Horizontal concatenation [initial | parameters], n x (n+p).
  Matrix control_block(int grid_index) const;

  /// Scalar-model accessors (state_dim == 1, param_dim == 1).
  double scalar_initial(int grid_index) const;
  double scalar_parameter(int grid_index) const;
};

/// Propagates the variational system along the trajectory. Continuous
/// models reuse the state's RK4 stages, so the blocks are the exact
/// derivatives of the discrete flow map; discrete maps satisfy the
/// recurrence wrt[k+1] = D_M(x_k) wrt[k] (+ D_M^param) exactly.
SensitivityTrajectory propagate(const ModelSystem& model, const Trajectory& trajectory);

/// As above but stores blocks only at the given grid indices (sorted,
/// deduplicated internally). The recursion still visits every step.
SensitivityTrajectory propagate(const ModelSystem& model, const Trajectory& trajectory,
                                std::span<const int> store_indices);

/// Trace invariants of the Gram matrix S = U^T U of the initial-state
/// block U: i1 = trace(S), i2 = (trace(S)^2 - trace(S^2)) / 2. Samples are
/// stored at `indices`.
struct SensitivityInvariants {
  TimeGrid grid;
  std::vector<int> indices;
  std::vector<double> i1;
  std::vector<double> i2;
};

/// Invariants of an already-propagated (fully stored) trajectory.
SensitivityInvariants invariants(const SensitivityTrajectory& sens);

/// Streaming variant: recomputes the propagation without keeping history,
/// sampling every `stride`-th grid point (endpoints always included).
SensitivityInvariants invariants(const ModelSystem& model, const Trajectory& trajectory,
                                 int stride = 1);

/// First invariant alone at every grid point. Unlike the full pair this
/// needs no Gram-matrix product, so it stays cheap for large states.
std::vector<double> first_invariant_trace(const ModelSystem& model,
                                          const Trajectory& trajectory);

/// One component of the control a sensitivity trace is taken with
/// respect to.
struct SensitivityChannel {
  enum class Type { initial_state, parameter };
  Type type = Type::initial_state;
  int index = 0;
};

/// Grid index maximizing the squared channel sensitivity over the closed
/// window [window_lo, window_hi]; ties break toward the earliest time.
/// Scalar models only.
int argmax_squared_sensitivity(const SensitivityTrajectory& sens,
                               const SensitivityChannel& channel, double window_lo,
                               double window_hi);

}  // namespace fsm
