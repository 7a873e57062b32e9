// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#include "fsm/assimilate.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fsm {

namespace {

std::vector<int> obs_indices(const ObservationSet& obs, const TimeGrid& grid) {
  std::vector<int> idx;
  idx.reserve(obs.size());
  for (const double t : obs.times) idx.push_back(grid.index_of(t));
  return idx;
}

void check_obs(const ObservationSet& obs) {
  if (obs.size() == 0) throw std::invalid_argument("empty observation set");
  for (const double s : obs.noise_std) {
    if (!(s > 0.0)) throw std::invalid_argument("observation noise level must be positive");
  }
}

// Everything one evaluation of the weighted misfit yields: cost, gradient,
// innovations, per-observation weighted Jacobian rows and (on request) the
// Gramian. The Gramian costs a q x q product per observation, so it is
// assembled only for the callers that use it.
enum class EvalMode { cost, gradient, gradient_and_gramian };

struct Evaluation {
  double cost = 0.0;
  Vector gradient;
  std::vector<Vector> innovations;        // e_i = z_i - h(x_i)
  std::vector<Matrix> weighted_jacobian;  // D_h F_i / sigma_i per observation
  Gramian gramian;
};

Evaluation evaluate(const ModelSystem& model, const ControlVector& control,
                    const ObservationSet& obs, const TimeGrid& grid, EvalMode mode) {
  const bool with_derivatives = mode != EvalMode::cost;
  check_obs(obs);
  const std::vector<int> idx = obs_indices(obs, grid);
  // The misfit only involves states up to the last observation; stop there.
  const int last = *std::max_element(idx.begin(), idx.end());
  const TimeGrid eval_grid(grid.t0, grid.dt, last);
  const Trajectory traj = integrate(model, control, eval_grid);

  Evaluation ev;
  const Eigen::Index q = model.state_dim + model.param_dim;
  ev.gradient = Vector::Zero(q);
  ev.gramian.total = Matrix::Zero(q, q);

  SensitivityTrajectory sens;
  if (with_derivatives) sens = propagate(model, traj, idx);

  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Vector& x = traj.state_at(idx[i]);
    const double sigma = obs.noise_std[i];
    const Vector innovation = obs.values[i] - obs.op.observe(x);
    ev.cost += 0.5 * innovation.squaredNorm() / (sigma * sigma);
    if (with_derivatives) {
      Matrix weighted = obs.op.apply_jacobian(x, sens.control_block(idx[i])) / sigma;
      ev.gradient -= weighted.transpose() * (innovation / sigma);
      if (mode == EvalMode::gradient_and_gramian) {
        Matrix part = weighted.transpose() * weighted;
        ev.gramian.total += part;
        ev.gramian.parts.push_back(std::move(part));
      }
      ev.weighted_jacobian.push_back(std::move(weighted));
    }
    ev.innovations.push_back(innovation);
  }
  return ev;
}

double cost_only(const ModelSystem& model, const ControlVector& control,
                 const ObservationSet& obs, const TimeGrid& grid) {
  return evaluate(model, control, obs, grid, EvalMode::cost).cost;
}

// Backtracking halving: returns the accepted step scale, or 0 when no
// scale in `max_halvings` decreases the cost. Blow-ups count as +inf cost.
double backtrack(const ModelSystem& model, const ControlVector& base, const Vector& step,
                 const ObservationSet& obs, const TimeGrid& grid, double current_cost,
                 int max_halvings) {
  double scale = 1.0;
  for (int h = 0; h <= max_halvings; ++h, scale *= 0.5) {
    const ControlVector trial = ControlVector::from_stacked(base.stacked() + scale * step,
                                                            base.state_dim(), base.param_dim());
    double trial_cost;
    try {
      trial_cost = cost_only(model, trial, obs, grid);
    } catch (const NumericalError&) {
      continue;  // trial trajectory blew up; halve and retry
    }
    if (trial_cost < current_cost) return scale;
  }
  return 0.0;
}

}  // namespace

CostReport cost_and_gradient(const ModelSystem& model, const ControlVector& control,
                             const ObservationSet& obs, const TimeGrid& grid) {
  Evaluation ev = evaluate(model, control, obs, grid, EvalMode::gradient);
  return CostReport{ev.cost, std::move(ev.gradient), std::move(ev.innovations)};
}

double cost(const ModelSystem& model, const ControlVector& control, const ObservationSet& obs,
            const TimeGrid& grid) {
  return cost_only(model, control, obs, grid);
}

EstimateResult estimate_newton(const ModelSystem& model, const ControlVector& guess,
                               const ObservationSet& obs, const TimeGrid& grid,
                               const NewtonOptions& options) {
  ControlVector control = guess;
  Evaluation ev = evaluate(model, control, obs, grid, EvalMode::gradient_and_gramian);

  EstimateResult result;
  result.iterations = 0;
  result.cost_history.push_back(ev.cost);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    if (ev.gradient.norm() <= options.tol) {
      result.converged = true;
      break;
    }

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(ev.gramian.total);
    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (!(lambda_min > 1e-14 * lambda_max))
      throw NumericalError("estimate_newton: singular Gramian at an iterate");
    const Vector step = -eig.eigenvectors() *
                        (eig.eigenvectors().transpose() * ev.gradient).cwiseQuotient(
                            eig.eigenvalues());

    const double scale = backtrack(model, control, step, obs, grid, ev.cost, 30);
    if (scale == 0.0) throw NumericalError("estimate_newton: line search failed");
    control = ControlVector::from_stacked(control.stacked() + scale * step,
                                          control.state_dim(), control.param_dim());
    ev = evaluate(model, control, obs, grid, EvalMode::gradient_and_gramian);
    result.cost_history.push_back(ev.cost);
    result.iterations = iter + 1;
  }
  if (!result.converged && ev.gradient.norm() <= options.tol) result.converged = true;

  result.control = std::move(control);
  result.final_cost = ev.cost;
  result.final_gradient_norm = ev.gradient.norm();
  result.gramian = std::move(ev.gramian);
  return result;
}

EstimateResult estimate_linear_closed_form(const LinearMap& map,
                                           const ObservationOperator& op,
                                           const ObservationSet& obs, const TimeGrid& grid,
                                           double tsvd_threshold) {
  check_obs(obs);
  if (!op.is_linear())
    throw std::invalid_argument("estimate_linear_closed_form: linear operators only");
  const Eigen::Index n = map.dim();

  // Walk the step chain once, accumulating G and the right-hand side at
  // each observation step; chain[i] = H M^{k_i}.
  const std::vector<int> steps = obs_indices(obs, grid);
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i] <= steps[i - 1])
      throw std::invalid_argument("estimate_linear_closed_form: times must be increasing");
  }
  Matrix powers = Matrix::Identity(n, n);
  int current = 0;
  Matrix gram = Matrix::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  std::vector<Matrix> observed_chain;
  observed_chain.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (; current < steps[i]; ++current) powers = map.apply(powers);
    const double w = 1.0 / (obs.noise_std[i] * obs.noise_std[i]);
    Matrix h_chain = op.apply_jacobian(Vector::Zero(n), powers);
    gram.noalias() += w * h_chain.transpose() * h_chain;
    rhs.noalias() += w * h_chain.transpose() * obs.values[i];
    observed_chain.push_back(std::move(h_chain));
  }

  // Spectral solve with relative truncation.
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (!(lambda_max > 0.0))
    throw NumericalError("estimate_linear_closed_form: zero Gramian");
  const double cutoff = tsvd_threshold * lambda_max;
  Vector inv_spectrum = Vector::Zero(n);
  int rank = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (eig.eigenvalues()[j] >= cutoff) {
      inv_spectrum[j] = 1.0 / eig.eigenvalues()[j];
      ++rank;
    }
  }
  if (rank == 0)
    throw NumericalError("estimate_linear_closed_form: every mode truncated");
  const Vector solution =
      eig.eigenvectors() *
      inv_spectrum.cwiseProduct(eig.eigenvectors().transpose() * rhs);

  EstimateResult result;
  result.control.initial_state = solution;
  result.control.parameters = Vector(0);
  result.iterations = 1;
  result.converged = true;
  result.tsvd_rank = rank;
  result.gramian.total = std::move(gram);
  double cost = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Vector innovation = obs.values[i] - observed_chain[i] * solution;
    cost += 0.5 * innovation.squaredNorm() / (obs.noise_std[i] * obs.noise_std[i]);
  }
  result.final_cost = cost;
  result.cost_history.push_back(cost);
  result.final_gradient_norm = (result.gramian.total * solution - rhs).norm();
  return result;
}

EstimateResult estimate_gauss_newton_tsvd(const ModelSystem& model,
                                          const ControlVector& guess,
                                          const ObservationSet& obs, const TimeGrid& grid,
                                          const GaussNewtonOptions& options) {
  ControlVector control = guess;
  const Eigen::Index q = guess.dim();
  const Eigen::Index m = obs.op.obs_dim(model.state_dim);
  const Eigen::Index rows = static_cast<Eigen::Index>(obs.size()) * m;

  Evaluation ev = evaluate(model, control, obs, grid, EvalMode::gradient);
  EstimateResult result;
  result.cost_history.push_back(ev.cost);
  int last_rank = 0;

  for (int iter = 0; iter < options.max_iter; ++iter) {
    Matrix stacked(rows, q);
    Vector residual(rows);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      stacked.middleRows(static_cast<Eigen::Index>(i) * m, m) = ev.weighted_jacobian[i];
      residual.segment(static_cast<Eigen::Index>(i) * m, m) =
          ev.innovations[i] / obs.noise_std[i];
    }

    Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()[0];
    if (!(smax > 0.0)) throw NumericalError("estimate_gauss_newton_tsvd: rank collapse");
    const double cutoff = options.tsvd_threshold * smax;
    Vector inv_sv = Vector::Zero(svd.singularValues().size());
    last_rank = 0;
    for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
      if (svd.singularValues()[j] >= cutoff) {
        inv_sv[j] = 1.0 / svd.singularValues()[j];
        ++last_rank;
      }
    }
    if (last_rank == 0) throw NumericalError("estimate_gauss_newton_tsvd: rank collapse");
    const Vector step =
        svd.matrixV() * inv_sv.cwiseProduct(svd.matrixU().transpose() * residual);

    if (step.norm() <= options.tol * (1.0 + control.stacked().norm())) {
      result.converged = true;
      break;
    }
    const double scale = backtrack(model, control, step, obs, grid, ev.cost, 30);
    if (scale == 0.0) break;  // cost cannot be decreased along the step
    control = ControlVector::from_stacked(control.stacked() + scale * step,
                                          control.state_dim(), control.param_dim());
    ev = evaluate(model, control, obs, grid, EvalMode::gradient);
    result.cost_history.push_back(ev.cost);
    result.iterations = iter + 1;
  }

  result.control = std::move(control);
  result.final_cost = ev.cost;
  result.final_gradient_norm = ev.gradient.norm();
  result.gramian.total = Matrix::Zero(q, q);
  for (const Matrix& weighted : ev.weighted_jacobian) {
    Matrix part = weighted.transpose() * weighted;
    result.gramian.total += part;
    result.gramian.parts.push_back(std::move(part));
  }
  result.tsvd_rank = last_rank;
  return result;
}

}  // namespace fsm
