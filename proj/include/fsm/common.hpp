// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>
#include <vector>

namespace fsm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMatrix = Eigen::SparseMatrix<double>;

/// Raised when a computation leaves the representable range: trajectory
/// blow-up, singular Gramian, failed line search, rank collapse.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an experiment configuration fails validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// n evenly spaced values covering [lo, hi] inclusive; n == 1 returns {lo}.
std::vector<double> linspace(double lo, double hi, int n);

}  // namespace fsm
