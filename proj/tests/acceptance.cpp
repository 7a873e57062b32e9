// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: end-to-end checks of the placement, assimilation and
// estimate-sensitivity pipeline against closed forms, independent oracles
// and the reference twin experiments. One pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsm/experiment.hpp"

using namespace fsm;

namespace {

ControlVector scalar_control(double x0, double a) {
  return ControlVector{Vector{{x0}}, Vector{{a}}};
}

double rel_err(double got, double want, double floor = 1e-300) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

// ---------------------------------------------------------------- 1
std::string analytic_sensitivity_match() {
  const TimeGrid grid(0.0, 1e-3, 2000);
  double worst = 0.0;

  {
    const auto model = builtin_model("linear_decay");
    const auto sens = propagate(model, integrate(model, scalar_control(2.0, -1.0), grid));
    for (int k = 0; k <= grid.steps; ++k) {
      const double t = grid.time_at(k);
      const double u = std::exp(-t);
      const double v = t * std::exp(-t) * 2.0;
      worst = std::max(worst, std::abs(sens.scalar_initial(k) - u) / std::max(std::abs(u), 1e-9));
      worst = std::max(worst, std::abs(sens.scalar_parameter(k) - v) / std::max(std::abs(v), 1e-9));
    }
  }
  {
    const auto model = builtin_model("quadratic_decay");
    const auto sens = propagate(model, integrate(model, scalar_control(2.0, -1.0), grid));
    for (int k = 0; k <= grid.steps; ++k) {
      const double t = grid.time_at(k);
      const double denom = (1.0 + 2.0 * t) * (1.0 + 2.0 * t);
      const double u = 1.0 / denom;
      const double v = 4.0 * t / denom;
      worst = std::max(worst, std::abs(sens.scalar_initial(k) - u) / std::max(std::abs(u), 1e-9));
      worst = std::max(worst, std::abs(sens.scalar_parameter(k) - v) / std::max(std::abs(v), 1e-9));
    }
  }

  std::ostringstream detail;
  detail << "max rel err " << worst;
  if (worst > 1e-6) return "FAIL " + detail.str() + " > 1e-6";
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 2
std::string gradient_oracle() {
  std::mt19937_64 rng(20260811);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;

  auto check_model = [&](const std::string& name, const ModelOptions& opt, const TimeGrid& grid,
                         const std::vector<double>& times) {
    const auto model = builtin_model(name, opt);
    ControlVector truth;
    if (model.state_dim == 1) {
      truth = scalar_control(2.0, -1.0);
    } else {
      truth.initial_state = Vector::Zero(model.state_dim);
      for (int mode = 1; mode <= 4; ++mode) {
        for (Eigen::Index i = 0; i < model.state_dim; ++i) {
          const double x = static_cast<double>(i + 1) / (model.state_dim + 1);
          truth.initial_state[i] += 0.4 * unit(rng) / mode * std::sin(M_PI * mode * x);
        }
      }
      truth.parameters = Vector(0);
    }
    const auto obs = synthesize_observations(model, truth, ObservationOperator::identity(),
                                             times, grid, 0.05, 99);
    auto cost_at = [&](const Vector& packed) {
      return cost(model, ControlVector::from_stacked(packed, model.state_dim, model.param_dim),
                  obs, grid);
    };

    for (int trial = 0; trial < 5; ++trial) {
      ControlVector at;
      if (model.state_dim == 1) {
        at = scalar_control(1.2 + 1.2 * (0.5 + 0.5 * unit(rng)),
                            -1.2 + 0.5 * unit(rng));
      } else {
        at.initial_state = truth.initial_state;
        for (Eigen::Index i = 0; i < model.state_dim; ++i)
          at.initial_state[i] *= 0.5 + 0.4 * unit(rng);
        at.parameters = Vector(0);
      }
      const Vector gradient = cost_and_gradient(model, at, obs, grid).gradient;

      if (model.state_dim == 1) {
        for (Eigen::Index c = 0; c < 2; ++c) {
          Vector hi = at.stacked(), lo = at.stacked();
          const double h = 1e-6 * (1.0 + std::abs(hi[c]));
          hi[c] += h;
          lo[c] -= h;
          const double fd = (cost_at(hi) - cost_at(lo)) / (2.0 * h);
          worst = std::max(worst, rel_err(gradient[c], fd, 1e-10));
        }
      } else {
        for (int d = 0; d < 5; ++d) {
          Vector dir(model.state_dim);
          for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = unit(rng);
          dir.normalize();
          const double h = 1e-5;
          const double fd =
              (cost_at(at.stacked() + h * dir) - cost_at(at.stacked() - h * dir)) / (2.0 * h);
          worst = std::max(worst, rel_err(gradient.dot(dir), fd, 1e-10));
        }
      }
    }
  };

  check_model("linear_decay", {}, TimeGrid(0.0, 1e-3, 2000), {0.1, 1.0});
  check_model("quadratic_decay", {}, TimeGrid(0.0, 1e-3, 2000), {0.1, 0.5});
  ModelOptions burgers_opt;
  burgers_opt.grid_size = 128;
  burgers_opt.reynolds = 500.0;
  check_model("burgers_1d", burgers_opt, TimeGrid(0.0, 2.5e-3, 400), {0.01, 0.05});
  ModelOptions advdiff_opt;
  advdiff_opt.nx = 32;
  advdiff_opt.ny = 32;
  advdiff_opt.dt = 1e-3;
  check_model("advdiff_2d", advdiff_opt, TimeGrid(0.0, 1e-3, 1000), {0.01, 0.05});

  std::ostringstream detail;
  detail << "max rel err " << worst;
  if (worst > 1e-4) return "FAIL " + detail.str() + " > 1e-4";
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 3
std::string gramian_closed_form_property() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::uniform_real_distribution<double> weight(0.7, 1.5);
  double worst = 0.0;
  int tested = 0;
  while (tested < 1000) {
    const double u1 = val(rng), v1 = val(rng), u2 = val(rng), v2 = val(rng);
    if (std::abs(u1 * v2 - u2 * v1) < 1.0) continue;  // keep the determinant well scaled
    const double d1 = weight(rng), d2 = weight(rng);
    Matrix g(2, 2);
    g << d1 * d1 * u1 * u1 + d2 * d2 * u2 * u2, d1 * d1 * u1 * v1 + d2 * d2 * u2 * v2,
        d1 * d1 * u1 * v1 + d2 * d2 * u2 * v2, d1 * d1 * v1 * v1 + d2 * d2 * v2 * v2;
    const double assembled = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    worst = std::max(worst, rel_err(assembled, gramian_det_closed_form(u1, v1, u2, v2, d1, d2)));
    ++tested;
  }
  std::ostringstream detail;
  detail << "max rel err " << worst << " over 1000 tuples";
  if (worst > 1e-12) return "FAIL " + detail.str() + " > 1e-12";
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 4
std::string placement_reproduction() {
  struct Want {
    std::string preset_name;
    double t1, t2;
    std::function<double(double)> u;
    std::function<double(double)> v;
  };
  const std::vector<Want> wants = {
      {"linear-decay", 0.1, 1.0, [](double t) { return std::exp(-t); },
       [](double t) { return 2.0 * t * std::exp(-t); }},
      {"quadratic-decay", 0.1, 0.5,
       [](double t) { return 1.0 / ((1.0 + 2.0 * t) * (1.0 + 2.0 * t)); },
       [](double t) { return 4.0 * t / ((1.0 + 2.0 * t) * (1.0 + 2.0 * t)); }},
  };

  std::ostringstream detail;
  for (const auto& want : wants) {
    const auto config = preset(want.preset_name);
    const auto model = build_model(config);
    const auto grid = build_grid(config);
    const auto truth = resolve_control(config.truth_control, model, config.model.options);
    const auto traj = integrate(model, truth, grid);
    const PlacementConstraints constraints{config.placement.min_time, config.placement.max_time,
                                           config.placement.min_separation};
    const auto plan =
        plan_placement(model, traj, ObservationOperator::identity(), 2, constraints);
    if (std::abs(plan.times[0] - want.t1) > 1e-9 || std::abs(plan.times[1] - want.t2) > 1e-9) {
      std::ostringstream fail;
      fail << "FAIL " << want.preset_name << " planned (" << plan.times[0] << ", "
           << plan.times[1] << ") != (" << want.t1 << ", " << want.t2 << ")";
      return fail.str();
    }

    // Exhaustive oracle from the analytic sensitivities over a 200x200 grid
    // under the same window constraints.
    const auto axis = linspace(constraints.min_time, constraints.max_time, 200);
    double best = -1.0, best_t1 = 0.0, best_t2 = 0.0;
    for (const double a : axis) {
      for (const double b : axis) {
        if (a == b) continue;
        const double det = gramian_det_closed_form(want.u(a), want.v(a), want.u(b), want.v(b),
                                                   1.0, 1.0);
        if (det > best) {
          best = det;
          best_t1 = std::min(a, b);
          best_t2 = std::max(a, b);
        }
      }
    }
    const double cell = axis[1] - axis[0];
    if (std::abs(best_t1 - plan.times[0]) > cell + 1e-12 ||
        std::abs(best_t2 - plan.times[1]) > cell + 1e-12) {
      std::ostringstream fail;
      fail << "FAIL " << want.preset_name << " grid argmax (" << best_t1 << ", " << best_t2
           << ") not within one cell of the plan";
      return fail.str();
    }
    detail << want.preset_name << " (" << plan.times[0] << ", " << plan.times[1] << ") |G|="
           << plan.gramian_det << "; ";
  }
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 5
std::string noise_free_recovery() {
  std::ostringstream detail;
  for (const std::string name : {"linear-decay", "quadratic-decay"}) {
    auto config = preset(name);
    config.noise_pct = 0.0;
    config.noise_levels.clear();
    const auto model = build_model(config);
    const auto grid = build_grid(config);
    const auto truth = resolve_control(config.truth_control, model, config.model.options);
    const auto guess = resolve_control(config.guess_control, model, config.model.options);
    const auto traj = integrate(model, truth, grid);
    const PlacementConstraints constraints{config.placement.min_time, config.placement.max_time,
                                           config.placement.min_separation};
    const auto plan =
        plan_placement(model, traj, ObservationOperator::identity(), 2, constraints);
    const auto obs = synthesize_observations(model, truth, ObservationOperator::identity(),
                                             plan.times, grid, 0.0, 1);
    const auto result = estimate_newton(model, guess, obs, grid, {1e-10, 20});
    const double err = (result.control.stacked() - truth.stacked()).cwiseAbs().maxCoeff();
    if (!result.converged || err > 1e-6 || result.iterations > 20) {
      std::ostringstream fail;
      fail << "FAIL " << name << " err_linf=" << err << " iters=" << result.iterations
           << " converged=" << result.converged;
      return fail.str();
    }
    detail << name << " err_linf=" << err << " iters=" << result.iterations << "; ";
  }
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 6
std::string statistical_recovery() {
  const auto model = builtin_model("linear_decay");
  const TimeGrid grid(0.0, 1e-3, 1000);
  const auto truth = scalar_control(2.0, -1.0);
  const auto guess = scalar_control(1.8, -0.8);
  const std::vector<double> times = {0.1, 1.0};

  int converged = 0;
  Vector mean = Vector::Zero(2);
  const int n_seeds = 200;
  for (int seed = 1; seed <= n_seeds; ++seed) {
    try {
      const auto obs = synthesize_observations(model, truth, ObservationOperator::identity(),
                                               times, grid, 0.1,
                                               static_cast<std::uint64_t>(seed));
      const auto result = estimate_newton(model, guess, obs, grid, {1e-8, 100});
      if (result.converged) {
        ++converged;
        mean += result.control.stacked();
      }
    } catch (const NumericalError&) {
      // counts as non-converged
    }
  }
  mean /= std::max(converged, 1);
  const double dx0 = std::abs(mean[0] - 2.0) / 2.0;
  const double da = std::abs(mean[1] + 1.0) / 1.0;
  std::ostringstream detail;
  detail << "mean=(" << mean[0] << ", " << mean[1] << ") converged " << converged << "/"
         << n_seeds;
  if (converged < 190 || dx0 > 0.1 || da > 0.1) return "FAIL " + detail.str();
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 7
std::string second_advantage_duality() {
  std::ostringstream detail;
  for (const std::string name : {"linear-decay", "quadratic-decay"}) {
    const auto config = preset(name);
    const auto model = build_model(config);
    const auto grid = build_grid(config);
    const auto truth = resolve_control(config.truth_control, model, config.model.options);
    const auto traj = integrate(model, truth, grid);
    const PlacementConstraints constraints{config.placement.min_time, config.placement.max_time,
                                           config.placement.min_separation};
    const auto plan =
        plan_placement(model, traj, ObservationOperator::identity(), 2, constraints);

    const auto axis =
        linspace(config.sweep.t_min, config.sweep.t_max, config.sweep.resolution);
    const auto sw = sweep(model, truth, ObservationOperator::identity(), grid, axis, axis);
    const double cell = axis[1] - axis[0];

    for (const SweepField field :
         {SweepField::y1sq, SweepField::w1sq, SweepField::y2sq, SweepField::w2sq}) {
      const auto row = sweep_argmin_row(sw, field, plan.times[0]);
      const auto col = sweep_argmin_col(sw, field, plan.times[1]);
      if (!row.valid || std::abs(row.t2 - plan.times[1]) > cell + 1e-12) {
        std::ostringstream fail;
        fail << "FAIL " << name << " field " << static_cast<int>(field)
             << " row argmin t2=" << row.t2 << " != " << plan.times[1];
        return fail.str();
      }
      if (!col.valid || std::abs(col.t1 - plan.times[0]) > cell + 1e-12) {
        std::ostringstream fail;
        fail << "FAIL " << name << " field " << static_cast<int>(field)
             << " col argmin t1=" << col.t1 << " != " << plan.times[0];
        return fail.str();
      }
    }
    detail << name << " all four fields at (" << plan.times[0] << ", " << plan.times[1]
           << "); ";
  }
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 8
std::string metasensitivity_oracle() {
  double worst = 0.0;
  for (const std::string name : {"linear-decay", "quadratic-decay"}) {
    const auto config = preset(name);
    const auto model = build_model(config);
    const auto grid = build_grid(config);
    const auto truth = resolve_control(config.truth_control, model, config.model.options);
    const auto guess = resolve_control(config.guess_control, model, config.model.options);
    const auto traj = integrate(model, truth, grid);
    const auto sens = propagate(model, traj);
    const PlacementConstraints constraints{config.placement.min_time, config.placement.max_time,
                                           config.placement.min_separation};
    const auto plan =
        plan_placement(model, traj, ObservationOperator::identity(), 2, constraints);
    const auto obs = synthesize_observations(model, truth, ObservationOperator::identity(),
                                             plan.times, grid, 0.0, 1);
    const auto analytic = pair_sensitivities(sens, traj, ObservationOperator::identity(),
                                             plan.times[0], plan.times[1]);

    for (std::size_t i = 0; i < plan.times.size(); ++i) {
      const double delta = 1e-4 * obs.noise_std[i];
      ObservationSet hi = obs, lo = obs;
      hi.values[i][0] += delta;
      lo.values[i][0] -= delta;
      const Vector chi =
          estimate_newton(model, guess, hi, grid, {1e-12, 100}).control.stacked();
      const Vector clo =
          estimate_newton(model, guess, lo, grid, {1e-12, 100}).control.stacked();
      const Vector fd = (chi - clo) / (2.0 * delta);
      worst = std::max(worst, rel_err(fd[0], analytic.blocks[i](0, 0)));
      worst = std::max(worst, rel_err(fd[1], analytic.blocks[i](1, 0)));
    }
  }
  std::ostringstream detail;
  detail << "max rel err " << worst;
  if (worst > 5e-2) return "FAIL " + detail.str() + " > 5e-2";
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 9
std::string sensitivity_independence_property() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> x0_draw(0.5, 2.5);
  std::uniform_real_distribution<double> a_draw(-1.5, -0.25);
  const auto model = builtin_model("quadratic_decay");
  const TimeGrid grid(0.0, 1e-3, 2000);
  std::uniform_int_distribution<int> idx(1, 2000);

  double tightest = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    const auto traj = integrate(model, scalar_control(x0_draw(rng), a_draw(rng)), grid);
    const auto sens = propagate(model, traj);
    int k1 = idx(rng), k2 = idx(rng);
    while (k2 == k1) k2 = idx(rng);
    const double u1 = sens.scalar_initial(k1), v1 = sens.scalar_parameter(k1);
    const double u2 = sens.scalar_initial(k2), v2 = sens.scalar_parameter(k2);
    const double scale = std::max({u1 * u1, u2 * u2, v1 * v1, v2 * v2});
    const double margin = std::abs(u1 * v2 - u2 * v1) / (1e-12 * scale);
    tightest = std::min(tightest, margin);
    if (margin <= 1.0) {
      std::ostringstream fail;
      fail << "FAIL collinear pair at trial " << trial << " margin " << margin;
      return fail.str();
    }
  }
  std::ostringstream detail;
  detail << "min margin " << tightest << "x the 1e-12 floor over 100 trials";
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 10
std::string burgers_twin_experiment() {
  ModelOptions opt;
  opt.grid_size = 128;
  opt.reynolds = 500.0;
  const auto model = builtin_model("burgers_1d", opt);
  ControlVector truth{burgers_shock_profile(128, 1.0, 500.0), Vector(0)};
  ControlVector background{sine_profile(128, 1.0, 1.0, 1.0), Vector(0)};
  const TimeGrid grid(0.0, 2.5e-3, 400);

  // Trace invariant along the forecast (background) run: a local maximum
  // inside [0.25, 0.45] where the compressive wave has steepened.
  const auto inv = invariants(model, integrate(model, background, grid), 1);
  const int lo = grid.index_of(0.25), hi = grid.index_of(0.45);
  const int w = grid.index_of(0.01);  // comparison offset
  bool has_bump = false;
  double bump_t = 0.0;
  for (int k = lo; k <= hi; ++k) {
    if (inv.i1[static_cast<std::size_t>(k)] > inv.i1[static_cast<std::size_t>(k - w)] &&
        inv.i1[static_cast<std::size_t>(k)] > inv.i1[static_cast<std::size_t>(k + w)]) {
      has_bump = true;
      bump_t = grid.time_at(k);
      break;
    }
  }
  if (!has_bump) return "FAIL no interior invariant maximum in [0.25, 0.45]";

  const double err_bg =
      (background.initial_state - truth.initial_state).norm() / truth.initial_state.norm();

  std::ostringstream detail;
  detail << "invariant bump at t=" << bump_t << ", bg err " << err_bg << "; ";
  const GaussNewtonOptions gn{1e-3, 1e-8, 50};
  for (const double noise : {0.01, 0.05, 0.1}) {
    auto estimate_for = [&](const std::vector<double>& times) {
      const auto obs = synthesize_observations(model, truth, ObservationOperator::identity(),
                                               times, grid, noise, 1337);
      try {
        const auto result = estimate_gauss_newton_tsvd(model, background, obs, grid, gn);
        return (result.control.initial_state - truth.initial_state).norm() /
               truth.initial_state.norm();
      } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();  // no usable analysis
      }
    };
    const double err_good = estimate_for({0.01, 0.05});
    const double err_late = estimate_for({0.5, 1.0});
    detail << noise * 100 << "%: placed " << err_good << " vs late " << err_late << "; ";
    if (!(err_good < err_bg) || !(err_good < err_late)) {
      return "FAIL at noise " + std::to_string(noise) + ": " + detail.str();
    }
  }
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 11
std::string advdiff_twin_experiment() {
  ModelOptions opt;
  opt.nx = 32;
  opt.ny = 32;
  opt.cx = 0.5;
  opt.cy = 0.5;
  opt.nu = 0.01;
  opt.dt = 1e-3;
  const auto model = builtin_model("advdiff_2d", opt);
  const SpatialGrid2D grid2d{32, 32, 1.0, 1.0};
  ControlVector truth{gaussian_field_ic({0.25, 0.25}, opt.nu, grid2d), Vector(0)};
  ControlVector background{gaussian_field_ic({0.5, 0.5}, opt.nu, grid2d), Vector(0)};
  const TimeGrid grid(0.0, 1e-3, 1000);

  const double err_bg =
      (background.initial_state - truth.initial_state).norm() / truth.initial_state.norm();

  auto estimate_for = [&](const std::vector<double>& times) {
    const auto obs = synthesize_observations(model, truth, ObservationOperator::identity(),
                                             times, grid, 0.1, 2024);
    const auto result = estimate_linear_closed_form(LinearMap(*model.constant_map), obs.op,
                                                    obs, grid, 1e-3);
    return (result.control.initial_state - truth.initial_state).norm() /
           truth.initial_state.norm();
  };
  const double err_good = estimate_for({0.01, 0.05});
  const double err_late = estimate_for({0.5, 1.0});

  std::ostringstream detail;
  detail << "bg err " << err_bg << ", placed " << err_good << ", late " << err_late;
  if (!(err_good < err_bg) || !(err_good < err_late)) return "FAIL " + detail.str();
  return "ok, " + detail.str();
}

// ---------------------------------------------------------------- 12
std::string linear_vector_identities() {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> eig_draw(0.6, 1.8);
  std::uniform_int_distribution<int> step_draw(1, 5);

  double worst_inverse = 0.0;
  double worst_similar = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p(4, 4);
    do {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p(i, j) = unit(rng);
    } while (std::abs(p.determinant()) < 0.2);
    Vector lambda(4);
    for (int i = 0; i < 4; ++i) lambda[i] = eig_draw(rng);
    const Matrix m = p * lambda.asDiagonal() * p.inverse();
    const int step = step_draw(rng);
    const double sigma = 0.5 + unit(rng) * 0.25;

    const Matrix block =
        linear_vector_sensitivity(LinearMap(m), ObservationOperator::identity(), step, sigma);

    Matrix m_power = Matrix::Identity(4, 4);
    for (int s = 0; s < step; ++s) m_power = m * m_power;
    const Matrix want = m_power.inverse();
    worst_inverse = std::max(worst_inverse, (block - want).norm() / want.norm());

    const Matrix diagonalized = p.inverse() * block * p;
    Matrix want_diag = Matrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) want_diag(i, i) = std::pow(lambda[i], -step);
    worst_similar =
        std::max(worst_similar, (diagonalized - want_diag).norm() / want_diag.norm());
  }
  std::ostringstream detail;
  detail << "max rel err: inverse " << worst_inverse << ", eigen-similarity " << worst_similar;
  if (worst_inverse > 1e-8 || worst_similar > 1e-8) return "FAIL " + detail.str() + " > 1e-8";
  return "ok, " + detail.str();
}

struct Criterion {
  int id;
  std::string name;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "analytic-sensitivity-match", analytic_sensitivity_match},
      {2, "gradient-oracle", gradient_oracle},
      {3, "gramian-closed-form", gramian_closed_form_property},
      {4, "placement-reproduction", placement_reproduction},
      {5, "noise-free-recovery", noise_free_recovery},
      {6, "statistical-recovery", statistical_recovery},
      {7, "second-advantage-duality", second_advantage_duality},
      {8, "metasensitivity-oracle", metasensitivity_oracle},
      {9, "sensitivity-independence", sensitivity_independence_property},
      {10, "burgers-twin-experiment", burgers_twin_experiment},
      {11, "advdiff-twin-experiment", advdiff_twin_experiment},
      {12, "linear-vector-identities", linear_vector_identities},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = std::string("FAIL exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool passed = outcome.rfind("FAIL", 0) != 0;
    if (!passed) ++failures;
    std::printf("[%s] %02d %s (%.1fs) %s\n", passed ? "PASS" : "FAIL", criterion.id,
                criterion.name.c_str(), seconds, outcome.c_str());
    std::fflush(stdout);
  }
  if (failures > 0) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
