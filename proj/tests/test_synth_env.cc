#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "loco/synth_env.h"

using namespace loco;

namespace {

EnvConfig small_env() {
  EnvConfig env;
  env.d_s = 4;
  env.d_a = 5;
  env.d_x = 3;
  env.rank = 2;
  env.n_total = 2000;
  env.n_subspace = 1000;
  env.seed = 42;
  return env;
}

bool same_records(const Dataset& a, const Dataset& b) {
  if (a.records.size() != b.records.size() || a.split_index != b.split_index) return false;
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    const auto& x = a.records[t];
    const auto& y = b.records[t];
    if (x.context != y.context || x.phi1 != y.phi1 || x.phi0 != y.phi0 || x.label != y.label) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("feature_map examples") {
  Vector s(2);
  s << 0.5, -0.5;
  Vector expect0(4);
  expect0 << 0, 0, 0.5, -0.5;
  CHECK(feature_map(s, 0, 3) == expect0);
  Vector expect2(4);
  expect2 << 0, 1, 0.5, -0.5;
  CHECK(feature_map(s, 2, 3) == expect2);
  for (int a = 0; a < 3; ++a) CHECK(feature_map(s, a, 3).size() == 3 + 2 - 1);
  CHECK_THROWS_AS(feature_map(s, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(feature_map(s, -1, 3), std::invalid_argument);
}

TEST_CASE("make_true_theta") {
  EnvConfig env = small_env();
  env.rank = 1;
  const Matrix t1 = make_true_theta(env).entries();
  CHECK(t1(0, 0) == 2.0);
  CHECK((t1.array() != 0.0).count() == 1);

  env.d_x = 6;
  env.rank = 3;
  const RewardMatrix t3 = make_true_theta(env);
  const Vector sv = Eigen::JacobiSVD<Matrix>(t3.entries()).singularValues();
  CHECK(numerical_rank(t3.entries()) == 3);
  for (int i = 0; i < 3; ++i) CHECK(sv(i) == doctest::Approx(2.0));
  CHECK(t3.entries().norm() == doctest::Approx(2.0 * std::sqrt(3.0)));
  CHECK(t3.declared_rank() == 3);
}

TEST_CASE("EnvConfig validation") {
  EnvConfig env = small_env();
  env.rank = 4;
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);  // exceeds d_x = 3
  env = small_env();
  env.n_subspace = env.n_total;
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);
  env = small_env();
  env.d_a = 1;
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);
}

TEST_CASE("sample_action_pair uniform with two actions") {
  Rng rng(5);
  const int n = 10000;
  int count01 = 0;
  for (int t = 0; t < n; ++t) {
    const auto [a0, a1] = sample_action_pair(PairDistribution::uniform(), 2, rng);
    CHECK(a0 != a1);
    if (a0 == 0) ++count01;
  }
  CHECK(std::abs(count01 / double(n) - 0.5) <= 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("sample_action_pair uniform covers all ordered pairs") {
  Rng rng(6);
  const int d_a = 4;
  const int n = 24000;
  std::map<std::pair<int, int>, int> counts;
  for (int t = 0; t < n; ++t) ++counts[sample_action_pair(PairDistribution::uniform(), d_a, rng)];
  CHECK(counts.size() == 12);
  const double p = 1.0 / 12;
  for (const auto& [pair, c] : counts) {
    CHECK(pair.first != pair.second);
    CHECK(std::abs(c / double(n) - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("sample_action_pair imbalanced") {
  const int n = 10000;
  const int d_a = 5;
  SUBCASE("q = 1 is uniform over (0, a1)") {
    Rng rng(8);
    std::vector<int> counts(d_a, 0);
    for (int t = 0; t < n; ++t) {
      const auto [a0, a1] = sample_action_pair(PairDistribution::imbalanced(1), d_a, rng);
      CHECK(a0 == 0);
      CHECK(a1 >= 1);
      ++counts[a1];
    }
    const double p = 1.0 / (d_a - 1);
    for (int a = 1; a < d_a; ++a) {
      CHECK(std::abs(counts[a] / double(n) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
    }
  }
  SUBCASE("q = 3 concentrates on (0, 1)") {
    Rng rng(9);
    int fixed = 0;
    for (int t = 0; t < n; ++t) {
      const auto pr = sample_action_pair(PairDistribution::imbalanced(3), d_a, rng);
      if (pr == std::make_pair(0, 1)) ++fixed;
    }
    // P(0,1) = (1 - 1/q) + (1/q) * 1/(d_a - 1)
    const double p = 2.0 / 3.0 + (1.0 / 3.0) / (d_a - 1);
    CHECK(std::abs(fixed / double(n) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("generate_dataset determinism and shape") {
  const EnvConfig env = small_env();
  const RewardMatrix th = make_true_theta(env);
  const Dataset a = generate_dataset(env, th);
  const Dataset b = generate_dataset(env, th);
  CHECK(same_records(a, b));
  EnvConfig other = env;
  other.seed = 43;
  CHECK_FALSE(same_records(a, generate_dataset(other, th)));

  CHECK(a.records.size() == 2000);
  CHECK(a.split_index == env.n_subspace);
  CHECK(a.subspace_part().size() + a.reduced_part().size() == a.records.size());
  CHECK(&a.reduced_part().front() == &a.records[a.split_index]);
  for (const auto& rec : a.records) {
    CHECK(rec.phi1.size() == env.d_phi());
    CHECK(rec.phi0.size() == env.d_phi());
    CHECK(rec.context.norm() <= std::sqrt(double(env.d_x)));
    CHECK(rec.phi1.norm() <= std::sqrt(1.0 + env.d_s));
    CHECK(rec.phi0.norm() <= std::sqrt(1.0 + env.d_s));
  }
  CHECK_THROWS_AS(generate_dataset(env, RewardMatrix(Matrix::Zero(2, 2))), std::invalid_argument);
}

TEST_CASE("generate_dataset moments") {
  EnvConfig env = small_env();
  env.n_total = 10000;
  env.n_subspace = 5000;
  env.diag_value = 0.0;
  const Dataset data = generate_dataset(env, make_true_theta(env));
  const double n = data.records.size();
  double labels = 0.0;
  Vector ctx_mean = Vector::Zero(env.d_x);
  for (const auto& rec : data.records) {
    labels += rec.label;
    ctx_mean += rec.context;
  }
  CHECK(std::abs(labels / n - 0.5) <= 3.0 * std::sqrt(0.25 / n));
  ctx_mean /= n;
  for (int i = 0; i < env.d_x; ++i) CHECK(std::abs(ctx_mean(i)) <= 3.0 * std::sqrt(1.0 / (3.0 * n)));
}

TEST_CASE("labels follow the BTL probability (chi-square goodness of fit)") {
  EnvConfig env = small_env();
  env.n_total = 50000;
  env.n_subspace = 25000;
  env.seed = 2024;
  const RewardMatrix th = make_true_theta(env);
  const Dataset data = generate_dataset(env, th);
  std::vector<std::pair<double, int>> probs;
  for (const auto& rec : data.records) {
    const double g = rec.context.dot(th.entries() * (rec.phi1 - rec.phi0));
    probs.emplace_back(1.0 / (1.0 + std::exp(-g)), rec.label);
  }
  std::stable_sort(probs.begin(), probs.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const int bins = 10;
  const std::size_t per_bin = probs.size() / bins;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    double observed = 0.0, expected = 0.0, variance = 0.0;
    for (std::size_t i = b * per_bin; i < (b + 1) * per_bin; ++i) {
      observed += probs[i].second;
      expected += probs[i].first;
      variance += probs[i].first * (1.0 - probs[i].first);
    }
    chi2 += (observed - expected) * (observed - expected) / variance;
  }
  // 99.9% quantile of chi-square with 10 degrees of freedom.
  CHECK(chi2 < 29.588);
}

TEST_CASE("dataset file round trip") {
  const EnvConfig env = small_env();
  const Dataset data = generate_dataset(env, make_true_theta(env));
  std::stringstream ss;
  write_dataset(ss, data);
  const Dataset back = read_dataset(ss);
  CHECK(back.d_x == env.d_x);
  CHECK(back.d_phi == env.d_phi());
  CHECK(same_records(data, back));

  std::stringstream bad("# d_x=2 d_phi=2 n=1 split=0\nheader\n1,2,3\n");
  CHECK_THROWS(read_dataset(bad));
}

TEST_CASE("eval sampler honours intervals") {
  EvalDistribution dist;
  dist.n_eval = 500;
  dist.context = {0.0, 1.0};
  Rng rng(3);
  const EvalSample s = sample_eval_set(dist, 3, 2, rng);
  CHECK(s.size() == 500);
  for (const auto& x : s.contexts) CHECK(x.minCoeff() >= 0.0);
  for (const auto& st : s.states) CHECK(st.cwiseAbs().maxCoeff() <= 1.0);
  dist.n_eval = 0;
  CHECK_THROWS_AS(dist.validate(), std::invalid_argument);
}
