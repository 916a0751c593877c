#include "loco/synth_env.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace loco {

void EnvConfig::validate() const {
  if (d_s < 1 || d_a < 2 || d_x < 1) {
    throw std::invalid_argument("EnvConfig: need d_s >= 1, d_a >= 2, d_x >= 1");
  }
  if (rank < 1 || rank > std::min(d_x, d_phi())) {
    throw std::invalid_argument("EnvConfig: rank must lie in [1, min(d_x, d_a + d_s - 1)]");
  }
  if (pair_dist.kind == PairDistribution::Kind::Imbalanced && pair_dist.q < 1) {
    throw std::invalid_argument("EnvConfig: imbalance parameter q must be >= 1");
  }
  if (!(0 < n_subspace && n_subspace < n_total)) {
    throw std::invalid_argument("EnvConfig: need 0 < n_subspace < n_total");
  }
  if (!(train_lo < train_hi) || !std::isfinite(diag_value)) {
    throw std::invalid_argument("EnvConfig: bad sampler interval or diag_value");
  }
}

void EvalDistribution::validate() const {
  if (n_eval < 1) throw std::invalid_argument("EvalDistribution: n_eval must be >= 1");
  if (!(context.lo < context.hi) || !(state.lo < state.hi)) {
    throw std::invalid_argument("EvalDistribution: empty sampler interval");
  }
}

Vector feature_map(const Vector& s, int a, int d_a) {
  if (a < 0 || a >= d_a) throw std::invalid_argument("feature_map: action out of range");
  Vector phi = Vector::Zero(d_a - 1 + s.size());
  if (a >= 1) phi(a - 1) = 1.0;
  phi.tail(s.size()) = s;
  return phi;
}

RewardMatrix make_true_theta(const EnvConfig& config) {
  config.validate();
  Matrix theta = Matrix::Zero(config.d_x, config.d_phi());
  for (int i = 0; i < config.rank; ++i) theta(i, i) = config.diag_value;
  std::optional<int> rank;
  if (config.diag_value != 0.0) rank = config.rank;
  return RewardMatrix(std::move(theta), rank);
}

std::pair<int, int> sample_action_pair(const PairDistribution& dist, int d_a,
                                       Rng& rng) {
  if (d_a < 2) throw std::invalid_argument("sample_action_pair: need d_a >= 2");
  if (dist.kind == PairDistribution::Kind::Uniform) {
    const int a0 = static_cast<int>(rng.uniform_index(d_a));
    int a1 = static_cast<int>(rng.uniform_index(d_a - 1));
    if (a1 >= a0) ++a1;
    return {a0, a1};
  }
  if (rng.bernoulli(1.0 / dist.q)) {
    return {0, 1 + static_cast<int>(rng.uniform_index(d_a - 1))};
  }
  return {0, 1};
}

namespace {

Vector sample_box(int dim, double lo, double hi, Rng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

}  // namespace

Dataset generate_dataset(const EnvConfig& config, const RewardMatrix& theta_star) {
  config.validate();
  if (theta_star.d_x() != config.d_x || theta_star.d_phi() != config.d_phi()) {
    throw std::invalid_argument("generate_dataset: theta_star shape does not match config");
  }
  Rng rng(config.seed);
  Dataset data;
  data.d_x = config.d_x;
  data.d_phi = config.d_phi();
  data.split_index = config.n_subspace;
  data.records.reserve(config.n_total);
  for (int t = 0; t < config.n_total; ++t) {
    ComparisonRecord rec;
    rec.context = sample_box(config.d_x, config.train_lo, config.train_hi, rng);
    const Vector s = sample_box(config.d_s, config.train_lo, config.train_hi, rng);
    const auto [a0, a1] = sample_action_pair(config.pair_dist, config.d_a, rng);
    rec.phi0 = feature_map(s, a0, config.d_a);
    rec.phi1 = feature_map(s, a1, config.d_a);
    rec.label = sample_label(theta_star, rec.context, rec.phi1, rec.phi0, rng);
    data.records.push_back(std::move(rec));
  }
  return data;
}

EvalSample sample_eval_set(const EvalDistribution& dist, int d_x, int d_s,
                           Rng& rng) {
  dist.validate();
  EvalSample out;
  out.contexts.reserve(dist.n_eval);
  out.states.reserve(dist.n_eval);
  for (int i = 0; i < dist.n_eval; ++i) {
    out.contexts.push_back(sample_box(d_x, dist.context.lo, dist.context.hi, rng));
    out.states.push_back(sample_box(d_s, dist.state.lo, dist.state.hi, rng));
  }
  return out;
}

}  // namespace loco
