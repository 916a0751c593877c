#pragma once

#include <optional>
#include <vector>

#include "loco/core_model.h"

namespace loco {

// Mean logistic loss (1/n) sum softplus(-z_t'w) + (1 - y_t) z_t'w over the
// rows of a design matrix. Shared by the full-space MLE and the reduced MLE.
struct LogisticProblem {
  const Matrix& design;  // n x p
  const Vector& labels;  // n

  double value(const Vector& w) const;
  Vector gradient(const Vector& w) const;
};

struct SolverOptions {
  int max_iters = 100;
  double tol = 1e-8;  // stop once ||grad||_2 <= tol
};

struct SolverResult {
  Vector solution;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step, starting at init
};

// Damped Newton with Armijo backtracking. Directions with zero curvature
// (features never observed) keep their initial value.
SolverResult minimize_logistic(const LogisticProblem& problem, const SolverOptions& opts,
                               std::optional<Vector> init = std::nullopt);

}  // namespace loco
