#include "loco/core_model.h"

#include <cmath>

namespace loco {

void ModelBounds::validate() const {
  for (double b : {b_x, b_phi, b_theta}) {
    if (!(std::isfinite(b) && b > 0.0)) {
      throw std::invalid_argument("ModelBounds: bounds must be positive and finite");
    }
  }
}

RewardMatrix::RewardMatrix(Matrix entries, std::optional<int> declared_rank)
    : entries_(std::move(entries)), declared_rank_(declared_rank) {
  if (!entries_.allFinite()) {
    throw std::invalid_argument("RewardMatrix: non-finite entries");
  }
  if (declared_rank_) {
    if (*declared_rank_ < 1) {
      throw std::invalid_argument("RewardMatrix: declared rank must be >= 1");
    }
    if (numerical_rank(entries_) != *declared_rank_) {
      throw std::invalid_argument("RewardMatrix: numerical rank differs from declared rank");
    }
  }
}

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  if (sv(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++rank;
  }
  return rank;
}

void ComparisonRecord::validate() const {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("ComparisonRecord: label must be 0 or 1");
  }
  if (phi1.size() != phi0.size()) {
    throw std::invalid_argument("ComparisonRecord: feature vectors differ in length");
  }
}

double bilinear_reward(const RewardMatrix& theta, const Vector& x,
                       const Vector& phi) {
  if (x.size() != theta.d_x() || phi.size() != theta.d_phi()) {
    throw std::invalid_argument("bilinear_reward: dimension mismatch");
  }
  return x.dot(theta.entries() * phi);
}

double btl_prob(double r1, double r0) {
  if (std::isnan(r1) || std::isnan(r0)) {
    throw std::invalid_argument("btl_prob: NaN preference");
  }
  return sigmoid(r1 - r0);
}

int sample_label(const RewardMatrix& theta, const Vector& x,
                 const Vector& phi1, const Vector& phi0, Rng& rng) {
  const double p = btl_prob(bilinear_reward(theta, x, phi1),
                            bilinear_reward(theta, x, phi0));
  return rng.bernoulli(p) ? 1 : 0;
}

}  // namespace loco
