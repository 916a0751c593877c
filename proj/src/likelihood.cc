#include "loco/likelihood.h"

#include <stdexcept>

namespace loco {

namespace {

void check_batch(const PreferenceBatch& batch, Eigen::Index d_x, Eigen::Index d_phi) {
  if (batch.size() == 0) throw std::invalid_argument("likelihood: empty record list");
  if (batch.d_x() != d_x || batch.d_phi() != d_phi) {
    throw std::invalid_argument("likelihood: parameter shape does not match records");
  }
}

double mean_loss(const Vector& logits, const Vector& labels) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < logits.size(); ++t) {
    total += softplus_neg(logits(t)) + (1.0 - labels(t)) * logits(t);
  }
  return total / static_cast<double>(logits.size());
}

Matrix grad_from_logits(const Vector& logits, const PreferenceBatch& batch) {
  Vector residual(logits.size());
  for (Eigen::Index t = 0; t < logits.size(); ++t) {
    residual(t) = sigmoid(logits(t)) - batch.labels(t);
  }
  residual /= static_cast<double>(logits.size());
  return batch.contexts.transpose() * (batch.phi_diffs.array().colwise() * residual.array()).matrix();
}

}  // namespace

PreferenceBatch make_batch(std::span<const ComparisonRecord> records) {
  if (records.empty()) throw std::invalid_argument("make_batch: empty record list");
  const auto d_x = records.front().context.size();
  const auto d_phi = records.front().phi1.size();
  PreferenceBatch batch;
  batch.contexts.resize(records.size(), d_x);
  batch.phi_diffs.resize(records.size(), d_phi);
  batch.labels.resize(records.size());
  for (std::size_t t = 0; t < records.size(); ++t) {
    const auto& rec = records[t];
    rec.validate();
    if (rec.context.size() != d_x || rec.phi1.size() != d_phi) {
      throw std::invalid_argument("make_batch: inconsistent record dimensions");
    }
    batch.contexts.row(t) = rec.context.transpose();
    batch.phi_diffs.row(t) = (rec.phi1 - rec.phi0).transpose();
    batch.labels(t) = rec.label;
  }
  return batch;
}

Vector batch_logits(const Matrix& theta, const PreferenceBatch& batch) {
  return ((batch.contexts * theta).array() * batch.phi_diffs.array()).rowwise().sum();
}

double nll(const RewardMatrix& theta, const PreferenceBatch& batch) {
  check_batch(batch, theta.d_x(), theta.d_phi());
  return mean_loss(batch_logits(theta.entries(), batch), batch.labels);
}

double nll(const RewardMatrix& theta, std::span<const ComparisonRecord> records) {
  return nll(theta, make_batch(records));
}

Matrix nll_grad(const RewardMatrix& theta, const PreferenceBatch& batch) {
  check_batch(batch, theta.d_x(), theta.d_phi());
  return grad_from_logits(batch_logits(theta.entries(), batch), batch);
}

Matrix nll_grad(const RewardMatrix& theta, std::span<const ComparisonRecord> records) {
  return nll_grad(theta, make_batch(records));
}

void FactoredParams::validate() const {
  if (u.cols() != v.cols()) {
    throw std::invalid_argument("FactoredParams: U and V inner dimensions differ");
  }
  if (!u.allFinite() || !v.allFinite()) {
    throw std::invalid_argument("FactoredParams: non-finite entries");
  }
}

double factored_objective(const FactoredParams& p, const PreferenceBatch& batch) {
  p.validate();
  check_batch(batch, p.u.rows(), p.v.rows());
  const Matrix imbalance = p.u.transpose() * p.u - p.v.transpose() * p.v;
  const Vector logits = batch_logits(p.product(), batch);
  return mean_loss(logits, batch.labels) + imbalance.squaredNorm() / 8.0;
}

std::pair<Matrix, Matrix> factored_grads(const FactoredParams& p,
                                         const PreferenceBatch& batch) {
  p.validate();
  check_batch(batch, p.u.rows(), p.v.rows());
  const Matrix g = grad_from_logits(batch_logits(p.product(), batch), batch);
  const Matrix imbalance = p.u.transpose() * p.u - p.v.transpose() * p.v;
  Matrix grad_u = g * p.v + 0.5 * p.u * imbalance;
  Matrix grad_v = g.transpose() * p.u - 0.5 * p.v * imbalance;
  return {std::move(grad_u), std::move(grad_v)};
}

}  // namespace loco
