// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0
//
// Shared test oracles: finite differences, brute-force assemblies, random
// draws. These stay independent of the library code paths they check.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fsm/dynamics.hpp"

namespace fsm::test {

/// Central finite-difference Jacobian of a vector map.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                          double probe) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vector hi = x, lo = x;
    const double h = probe * (1.0 + std::abs(x[c]));
    hi[c] += h;
    lo[c] -= h;
    j.col(c) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return j;
}

/// Central finite-difference derivative of a scalar function along a
/// direction.
inline double fd_directional(const std::function<double(const Vector&)>& f, const Vector& x,
                             const Vector& dir, double step) {
  return (f(x + step * dir) - f(x - step * dir)) / (2.0 * step);
}

/// Central finite-difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double probe) {
  Vector g(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vector hi = x, lo = x;
    const double h = probe * (1.0 + std::abs(x[c]));
    hi[c] += h;
    lo[c] -= h;
    g[c] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double got, double want, double floor = 1e-12) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

inline double max_rel_err(const Matrix& got, const Matrix& want, double floor = 1e-9) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.rows(); ++i) {
    for (Eigen::Index j = 0; j < got.cols(); ++j) {
      worst = std::max(worst, std::abs(got(i, j) - want(i, j)) /
                                  std::max(std::abs(want(i, j)), floor));
    }
  }
  return worst;
}

/// Smooth random field on n interior nodes: a few low-wavenumber sine
/// modes with bounded amplitude, zero at the boundaries.
inline Vector random_smooth_field(int n, std::mt19937_64& rng, double amplitude = 0.5) {
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  Vector out = Vector::Zero(n);
  for (int mode = 1; mode <= 4; ++mode) {
    const double a = amplitude * coeff(rng) / mode;
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(i + 1) / (n + 1);
      out[i] += a * std::sin(M_PI * mode * x);
    }
  }
  return out;
}

}  // namespace fsm::test
