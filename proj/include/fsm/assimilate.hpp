// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "fsm/observe.hpp"

namespace fsm {

/// Weighted least-squares misfit: value = 1/2 sum_i e_i^T e_i / sigma_i^2
/// with innovations e_i = z_i - h(x(t_i)); gradient taken over the stacked
/// control [initial_state; parameters].
struct CostReport {
  double value = 0.0;
  Vector gradient;
  std::vector<Vector> innovations;
};

/// One forward run plus one tangent-linear propagation; no adjoint sweep.
CostReport cost_and_gradient(const ModelSystem& model, const ControlVector& control,
                             const ObservationSet& obs, const TimeGrid& grid);

/// Misfit value alone (one forward run, no tangent propagation).
double cost(const ModelSystem& model, const ControlVector& control, const ObservationSet& obs,
            const TimeGrid& grid);

struct EstimateResult {
  ControlVector control;
  int iterations = 0;
  double final_cost = 0.0;
  double final_gradient_norm = 0.0;
  Gramian gramian;  // weighted Gramian at the returned control
  bool converged = false;
  std::optional<int> tsvd_rank;
  /// Cost at the starting control followed by the cost after each accepted
  /// iterate; non-increasing by the line-search contract.
  std::vector<double> cost_history;
};

struct NewtonOptions {
  double tol = 1e-8;  // on the gradient norm
  int max_iter = 100;
};

/// Newton iteration with the Gramian as the Hessian approximation and a
/// halving line search on the cost. Intended for low-dimensional controls.
EstimateResult estimate_newton(const ModelSystem& model, const ControlVector& guess,
                               const ObservationSet& obs, const TimeGrid& grid,
                               const NewtonOptions& options = {});

/// Normal-equations solve for a constant linear map and linear observation
/// operator: assembles G = sum_i (M^T)^{k_i} H^T H M^{k_i} / sigma_i^2 and
/// the matching right-hand side, then inverts G by eigendecomposition with
/// relative truncation threshold tsvd_threshold (retained rank reported).
EstimateResult estimate_linear_closed_form(const LinearMap& map,
                                           const ObservationOperator& op,
                                           const ObservationSet& obs, const TimeGrid& grid,
                                           double tsvd_threshold = 1e-3);

struct GaussNewtonOptions {
  double tsvd_threshold = 1e-3;
  double tol = 1e-8;  // on the step norm, relative to 1 + |control|
  int max_iter = 100;
};

/// Gauss-Newton with a truncated-SVD linear-least-squares step: stacks the
/// weighted Jacobian rows D_h F_i / sigma_i and weighted innovations, solves
/// for the step by SVD with relative truncation, and backtracks on the cost.
/// Steps whose trial trajectory blows up are rejected and halved.
EstimateResult estimate_gauss_newton_tsvd(const ModelSystem& model,
                                          const ControlVector& guess,
                                          const ObservationSet& obs, const TimeGrid& grid,
                                          const GaussNewtonOptions& options = {});

}  // namespace fsm
