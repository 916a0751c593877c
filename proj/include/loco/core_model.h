#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "loco/random.h"

namespace loco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised when an iterative routine produces a non-finite value or diverges.
// Carries the objective trace collected up to the failure.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::vector<double> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

// Norm bounds on contexts, action features and the reward parameter.
struct ModelBounds {
  double b_x = 1.0;
  double b_phi = 1.0;
  double b_theta = 1.0;

  void validate() const;
  // Largest attainable |x' Theta phi| under the bounds.
  double reward_bound() const { return b_x * b_phi * b_theta; }
};

// The d_x x d_phi reward parameter, either ground truth or an estimate.
class RewardMatrix {
 public:
  RewardMatrix() = default;
  explicit RewardMatrix(Matrix entries,
                        std::optional<int> declared_rank = std::nullopt);

  const Matrix& entries() const { return entries_; }
  Eigen::Index d_x() const { return entries_.rows(); }
  Eigen::Index d_phi() const { return entries_.cols(); }
  std::optional<int> declared_rank() const { return declared_rank_; }

 private:
  Matrix entries_;
  std::optional<int> declared_rank_;
};

// Count of singular values above rel_tol * sigma_1.
int numerical_rank(const Matrix& m, double rel_tol = 1e-10);

// One pairwise comparison (x, phi(s, a1), phi(s, a0), y).
struct ComparisonRecord {
  Vector context;
  Vector phi1;
  Vector phi0;
  int label = 0;

  void validate() const;
  Vector phi_diff() const { return phi1 - phi0; }
};

double bilinear_reward(const RewardMatrix& theta, const Vector& x,
                       const Vector& phi);

// 1 / (1 + exp(-g)), never overflows.
inline double sigmoid(double g) {
  if (g >= 0.0) return 1.0 / (1.0 + std::exp(-g));
  const double e = std::exp(g);
  return e / (1.0 + e);
}

// log(1 + exp(-g)) = max(0, -g) + log1p(exp(-|g|)).
inline double softplus_neg(double g) {
  return std::max(0.0, -g) + std::log1p(std::exp(-std::abs(g)));
}

// P(y = 1) under BTL for preferences r1 (action a1) and r0 (action a0).
double btl_prob(double r1, double r0);

// Draws y ~ Bernoulli(btl_prob(x' Theta phi1, x' Theta phi0)).
int sample_label(const RewardMatrix& theta, const Vector& x,
                 const Vector& phi1, const Vector& phi0, Rng& rng);

}  // namespace loco
