#pragma once

#include <span>
#include <utility>

#include "loco/core_model.h"

namespace loco {

// Comparisons in design form: row t holds x_t, phi(s_t, a_t1) - phi(s_t, a_t0)
// and y_t. All likelihood code works on differences only.
struct PreferenceBatch {
  Matrix contexts;    // n x d_x
  Matrix phi_diffs;   // n x d_phi
  Vector labels;      // n, entries in {0, 1}

  Eigen::Index size() const { return labels.size(); }
  Eigen::Index d_x() const { return contexts.cols(); }
  Eigen::Index d_phi() const { return phi_diffs.cols(); }
};

PreferenceBatch make_batch(std::span<const ComparisonRecord> records);

// Logits x_t' Theta dphi_t for every row.
Vector batch_logits(const Matrix& theta, const PreferenceBatch& batch);

// Mean BTL negative log-likelihood of Theta.
double nll(const RewardMatrix& theta, const PreferenceBatch& batch);
double nll(const RewardMatrix& theta, std::span<const ComparisonRecord> records);

// Gradient of nll in Theta: mean of (sigmoid(g_t) - y_t) x_t dphi_t'.
Matrix nll_grad(const RewardMatrix& theta, const PreferenceBatch& batch);
Matrix nll_grad(const RewardMatrix& theta, std::span<const ComparisonRecord> records);

// Burer-Monteiro factors, Theta = U V'.
struct FactoredParams {
  Matrix u;  // d_x x r
  Matrix v;  // d_phi x r

  Eigen::Index rank() const { return u.cols(); }
  Matrix product() const { return u * v.transpose(); }
  void validate() const;
};

// nll(U V') + (1/8) ||U'U - V'V||_F^2.
double factored_objective(const FactoredParams& p, const PreferenceBatch& batch);

// (grad_U, grad_V) of factored_objective.
std::pair<Matrix, Matrix> factored_grads(const FactoredParams& p,
                                         const PreferenceBatch& batch);

}  // namespace loco
