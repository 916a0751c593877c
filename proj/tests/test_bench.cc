#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loco/bench.h"
#include "loco/config.h"
#include "loco/model_io.h"
#include "test_util.h"

using namespace loco;
using namespace loco::testing;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.env.d_s = 3;
  cfg.env.d_a = 4;
  cfg.env.d_x = 4;
  cfg.env.rank = 2;
  cfg.eval.n_eval = 300;
  cfg.n_values = {800};
  cfg.seeds = {1, 2};
  return cfg;
}

EvalSample box_sample(int n, int d_x, int d_s, std::uint64_t seed) {
  EvalDistribution dist;
  dist.n_eval = n;
  Rng rng(seed);
  return sample_eval_set(dist, d_x, d_s, rng);
}

// Every numeric column except wall time, as text.
std::string deterministic_columns(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  for (auto r : rows) {
    r.wall_time_s = 0.0;
    write_result_row(out, r);
  }
  return out.str();
}

struct ThreadsOverride {
  explicit ThreadsOverride(const char* value) { setenv("LOCO_THREADS", value, 1); }
  ~ThreadsOverride() { unsetenv("LOCO_THREADS"); }
};

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::Prs, Method::MleGreedy, Method::MlePessimistic}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("oracle"), std::invalid_argument);
}

TEST_CASE("optimal_policy_value") {
  const EvalSample sample = box_sample(50, 3, 2, 1);
  CHECK(optimal_policy_value(RewardMatrix(Matrix::Zero(3, 4)), sample, 3, EvalMode::Personalization) == 0.0);

  Rng rng(2);
  const Matrix theta = random_matrix(3, 4, rng);
  const EvalSample one{{sample.contexts[0]}, {sample.states[0]}};
  double best = -INFINITY;
  for (int a = 0; a < 3; ++a) {
    best = std::max(best, bilinear_reward(RewardMatrix(theta), one.contexts[0], feature_map(one.states[0], a, 3)));
  }
  CHECK(optimal_policy_value(RewardMatrix(theta), one, 3, EvalMode::Personalization) == best);
  CHECK_THROWS_AS(optimal_policy_value(RewardMatrix(theta), EvalSample{}, 3, EvalMode::Personalization),
                  std::invalid_argument);
}

TEST_CASE("optimal value dominates every policy on the same sample") {
  Rng rng(3);
  const Matrix theta = random_matrix(3, 4, rng);
  const RewardMatrix truth(theta);
  const EvalSample sample = box_sample(400, 3, 2, 4);
  for (EvalMode mode : {EvalMode::Personalization, EvalMode::DistributionShift}) {
    const double j_star = optimal_policy_value(truth, sample, 3, mode);
    const PolicyValue oracle = policy_value(Policy::mle_greedy(truth), truth, sample, 3, mode);
    CHECK(std::abs(oracle.value - j_star) <= 1e-12);
    CHECK(std::abs(oracle.subopt) <= 1e-12);
    for (int rep = 0; rep < 20; ++rep) {
      const PolicyValue pv =
          policy_value(Policy::mle_greedy(RewardMatrix(random_matrix(3, 4, rng))), truth, sample, 3, mode);
      CHECK(pv.value <= j_star + 1e-12);
      CHECK(pv.subopt == doctest::Approx(j_star - pv.value).epsilon(1e-9));
      if (mode == EvalMode::Personalization) CHECK(pv.subopt >= 0.0);
    }
  }
}

TEST_CASE("constant policy matches the analytic mean reward") {
  // d_a = 2, d_s = 2, rank 3 diagonal truth: action 0 earns 2 (x_1 s_0 + x_2 s_1),
  // with mean 0 and variance 8/9 under Unif(-1, 1) coordinates.
  EnvConfig env;
  env.d_s = 2;
  env.d_a = 2;
  env.d_x = 3;
  env.rank = 3;
  env.n_total = 2;
  env.n_subspace = 1;
  const RewardMatrix truth = make_true_theta(env);
  const int n = 20000;
  const EvalSample sample = box_sample(n, 3, 2, 5);
  const Policy always_first = Policy::mle_greedy(RewardMatrix(Matrix::Zero(3, 3)));
  const PolicyValue pv = policy_value(always_first, truth, sample, 2, EvalMode::Personalization);
  for (int a : pv.actions) CHECK(a == 0);
  CHECK(std::abs(pv.value) <= 3.0 * std::sqrt(8.0 / 9.0 / n));

  const PolicyValue again = policy_value(always_first, truth, sample, 2, EvalMode::Personalization);
  CHECK(again.value == pv.value);
  CHECK(again.subopt == pv.subopt);
}

TEST_CASE("concentratability") {
  Rng rng(6);
  const std::vector<Vector> feats{random_vector(4, rng), random_vector(4, rng), random_vector(4, rng)};
  const Vector mean = (feats[0] + feats[1] + feats[2]) / 3.0;
  const Matrix w = Matrix::Identity(4, 4);
  const ConfidenceSet cs(Vector::Zero(4), w, 1.0, 0.0, 0.1, 0.05);
  CHECK(concentratability(cs, feats) == doctest::Approx(mean.norm()).epsilon(1e-14));
  const Matrix b = random_matrix(4, 4, rng);
  const Matrix spd = b * b.transpose() + Matrix::Identity(4, 4);
  const ConfidenceSet one(Vector::Zero(4), spd, 1.0, 0.0, 0.1, 0.05);
  const ConfidenceSet four(Vector::Zero(4), 4.0 * spd, 1.0, 0.0, 0.1, 0.05);
  CHECK(concentratability(four, feats) == doctest::Approx(0.5 * concentratability(one, feats)).epsilon(1e-12));
  CHECK_THROWS_AS(concentratability(cs, std::span<const Vector>()), std::invalid_argument);
}

TEST_CASE("fit_method produces consistent models") {
  const ExperimentConfig cfg = small_config();
  const EnvConfig env = cfg.env_for(1500, 3);
  const RewardMatrix truth = make_true_theta(env);
  const Dataset data = generate_dataset(env, truth);
  const EvalSample sample = box_sample(300, env.d_x, env.d_s, 7);

  const FittedModel prs = fit_method(Method::Prs, data, cfg);
  REQUIRE(prs.reduced);
  REQUIRE(prs.cs);
  CHECK(prs.reduced->theta_rtv.size() == rtv_dim(env.d_x, env.d_phi(), env.rank));
  CHECK(prs.cs->dim() == prs.reduced->theta_rtv.size());
  CHECK(numerical_rank(prs.theta_hat.entries()) <= env.rank);

  const FittedModel greedy = fit_method(Method::MleGreedy, data, cfg);
  CHECK_FALSE(greedy.cs);
  const FittedModel pess = fit_method(Method::MlePessimistic, data, cfg);
  REQUIRE(pess.cs);
  CHECK(pess.cs->dim() == env.d_x * env.d_phi());
  CHECK(pess.theta_hat.entries() == greedy.theta_hat.entries());

  for (const FittedModel* m : {&prs, &greedy, &pess}) {
    const PolicyValue pv = policy_value(m->policy(), truth, sample, env.d_a, EvalMode::Personalization);
    CHECK(pv.subopt >= 0.0);
    const PolicyValue shift = policy_value(m->policy(), truth, sample, env.d_a, EvalMode::DistributionShift);
    CHECK(shift.subopt >= -3.0 * shift.subopt_stderr - 1e-12);
  }
  const auto opt = optimal_actions(truth, sample, env.d_a, EvalMode::Personalization);
  CHECK(model_concentratability(prs, sample, opt, env.d_a, EvalMode::Personalization) > 0.0);
  CHECK(std::isnan(model_concentratability(greedy, sample, opt, env.d_a, EvalMode::Personalization)));

  Dataset broken = data;
  broken.split_index = 0;
  CHECK_THROWS_AS(fit_method(Method::Prs, broken, cfg), std::invalid_argument);
}

TEST_CASE("zero scale disables pessimism") {
  ExperimentConfig cfg = small_config();
  cfg.pessimism.c_scale = 0.0;
  const EnvConfig env = cfg.env_for(1500, 4);
  const RewardMatrix truth = make_true_theta(env);
  const Dataset data = generate_dataset(env, truth);
  const EvalSample sample = box_sample(200, env.d_x, env.d_s, 8);
  const auto greedy = policy_value(fit_method(Method::MleGreedy, data, cfg).policy(), truth, sample, env.d_a,
                                   EvalMode::Personalization);
  const auto pess = policy_value(fit_method(Method::MlePessimistic, data, cfg).policy(), truth, sample,
                                 env.d_a, EvalMode::Personalization);
  CHECK(greedy.actions == pess.actions);
}

TEST_CASE("run_experiment cardinality and determinism") {
  ExperimentConfig cfg = small_config();
  cfg.methods = {Method::Prs};
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].seed == 1);
  CHECK(rows[1].seed == 2);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.subopt >= 0.0);
    CHECK(std::isfinite(r.residual_22_frob));
  }

  cfg.methods = {Method::Prs, Method::MleGreedy, Method::MlePessimistic};
  cfg.n_values = {600, 900};
  std::string serial, parallel;
  {
    ThreadsOverride one("1");
    serial = deterministic_columns(run_experiment(cfg));
  }
  {
    ThreadsOverride two("2");
    parallel = deterministic_columns(run_experiment(cfg));
  }
  CHECK(serial == parallel);
  std::istringstream lines(serial);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 12);
}

TEST_CASE("results file round trip and report") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "loco_bench_test";
  fs::create_directories(dir);
  ExperimentConfig cfg = small_config();
  cfg.output_path = (dir / "rows.csv").string();
  const auto rows = run_experiment(cfg);
  const auto loaded = load_results(cfg.output_path);
  REQUIRE(loaded.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(loaded[i].method == rows[i].method);
    CHECK(loaded[i].subopt == rows[i].subopt);
    CHECK((loaded[i].c_star == rows[i].c_star || (std::isnan(loaded[i].c_star) && std::isnan(rows[i].c_star))));
    CHECK(std::isnan(loaded[i].residual_22_frob) == std::isnan(rows[i].residual_22_frob));
  }
  std::ifstream in(cfg.output_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == kResultHeader);

  const auto agg = aggregate(loaded);
  REQUIRE(agg.size() == 3);
  CHECK(agg[0].method == "prs");
  CHECK(agg[0].count == 2);
  CHECK(agg[0].median == doctest::Approx(0.5 * (rows[0].subopt + rows[3].subopt)));
  std::ostringstream report;
  write_report(report, agg);
  CHECK(report.str().rfind("method,n,count,failed,median,q1,q3,mean\n", 0) == 0);

  std::istringstream bad("method,n\n");
  CHECK_THROWS(read_results(bad));
  fs::remove_all(dir);
}

TEST_CASE("failed fits are recorded and counted") {
  std::vector<ResultRow> rows(3);
  for (auto& r : rows) r.method = "prs";
  rows[0].subopt = 1.0;
  rows[1].subopt = 3.0;
  rows[2].status = "failed: diverged";
  rows[2].subopt = NAN;
  const auto agg = aggregate(rows);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].count == 2);
  CHECK(agg[0].failed == 1);
  CHECK(agg[0].median == 2.0);
}

TEST_CASE("quantiles") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == 2.0);
  CHECK(std::isnan(median({})));
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = small_config();
  cfg.methods.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.subspace_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.pessimism.reference_action = 9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  const EnvConfig e = cfg.env_for(1000, 5);
  CHECK(e.n_total == 1000);
  CHECK(e.n_subspace == 400);
  CHECK(e.seed == cfg.env_for(1000, 5).seed);
  CHECK(e.seed != cfg.env_for(2000, 5).seed);
}

TEST_CASE("YAML experiment config") {
  const std::string text = R"(
env:
  d_s: 3
  d_a: 4
  d_x: 5
  rank: 1
  pair_dist: imbalanced
  q: 9
eval:
  n_eval: 100
  mode: distribution_shift
fgd:
  step_size_scale: 0.5
pessimism:
  c_scale: 0.3
  gamma: bounds
  reference_action: none
  bounds: {b_x: 1, b_phi: 2, b_theta: 3}
experiment:
  methods: [prs, mle_greedy]
  n_values: [1000, 2000]
  seeds: [7, 8, 9]
  output: out.csv
)";
  const ExperimentConfig cfg = parse_experiment_config(text);
  CHECK(cfg.env.d_x == 5);
  CHECK(cfg.env.rank == 1);
  CHECK(cfg.env.pair_dist.kind == PairDistribution::Kind::Imbalanced);
  CHECK(cfg.env.pair_dist.q == 9);
  CHECK(cfg.eval.n_eval == 100);
  CHECK(cfg.eval.mode == EvalMode::DistributionShift);
  CHECK(cfg.fgd.step_size_scale == 0.5);
  CHECK(cfg.pessimism.c_scale == 0.3);
  CHECK(cfg.pessimism.gamma_rule == GammaRule::Bounds);
  CHECK_FALSE(cfg.pessimism.reference_action);
  REQUIRE(cfg.pessimism.bounds);
  CHECK(cfg.pessimism.bounds->b_theta == 3.0);
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.n_values == std::vector<int>{1000, 2000});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7, 8, 9});
  CHECK(cfg.output_path == "out.csv");

  CHECK(parse_experiment_config("").env.n_subspace == 800);
  CHECK(parse_experiment_config("env:\n  n_total: 3000\nexperiment:\n  subspace_fraction: 0.5\n").env.n_subspace == 1500);
  CHECK(parse_experiment_config("env:\n  n_total: 3000\n  n_subspace: 100\n").env.n_subspace == 100);
  CHECK(parse_experiment_config("pessimism:\n  gamma: 0.2\n").pessimism.gamma_rule == GammaRule::Fixed);
  CHECK_THROWS(parse_experiment_config("env:\n  d_z: 3\n"));
  CHECK_THROWS(parse_experiment_config("extras:\n  a: 1\n"));
  CHECK_THROWS(parse_experiment_config("experiment:\n  methods: [oracle]\n"));
}

TEST_CASE("model JSON round trip") {
  const ExperimentConfig cfg = small_config();
  const EnvConfig env = cfg.env_for(1200, 6);
  const RewardMatrix truth = make_true_theta(env);
  const Dataset data = generate_dataset(env, truth);
  const EvalSample sample = box_sample(200, env.d_x, env.d_s, 9);
  for (Method m : {Method::Prs, Method::MleGreedy, Method::MlePessimistic}) {
    const FittedModel fitted = fit_method(m, data, cfg);
    const FittedModel back = model_from_json(model_to_json(fitted));
    CHECK(back.method == m);
    CHECK((back.theta_hat.entries() - fitted.theta_hat.entries()).norm() == 0.0);
    const auto a = policy_value(fitted.policy(), truth, sample, env.d_a, EvalMode::Personalization);
    const auto b = policy_value(back.policy(), truth, sample, env.d_a, EvalMode::Personalization);
    CHECK(a.actions == b.actions);
    CHECK(a.subopt == b.subopt);
    if (fitted.cs) {
      REQUIRE(back.cs);
      CHECK(back.cs->radius() == fitted.cs->radius());
    }
  }
  CHECK_THROWS(model_from_json("{\"method\": \"prs\"}"));
}
