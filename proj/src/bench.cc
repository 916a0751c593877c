#include "loco/bench.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "loco/likelihood.h"
#include "loco/rtv_reduce.h"

namespace loco {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Prs: return "prs";
    case Method::MleGreedy: return "mle_greedy";
    case Method::MlePessimistic: return "mle_pessimistic";
  }
  throw std::logic_error("method_name: unknown method");
}

Method parse_method(const std::string& name) {
  if (name == "prs") return Method::Prs;
  if (name == "mle_greedy") return Method::MleGreedy;
  if (name == "mle_pessimistic") return Method::MlePessimistic;
  throw std::invalid_argument("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (methods.empty() || n_values.empty() || seeds.empty()) {
    throw std::invalid_argument("ExperimentConfig: methods, n_values and seeds must be nonempty");
  }
  if (!(subspace_fraction > 0.0 && subspace_fraction < 1.0)) {
    throw std::invalid_argument("ExperimentConfig: subspace_fraction must lie in (0, 1)");
  }
  for (int n : n_values) env_for(n, seeds.front()).validate();
  eval.validate();
  if (pessimism.gamma_rule == GammaRule::Fixed &&
      !(pessimism.gamma > 0.0 && pessimism.gamma <= 0.25)) {
    throw std::invalid_argument("ExperimentConfig: gamma must lie in (0, 1/4]");
  }
  if (pessimism.reference_action &&
      (*pessimism.reference_action < 0 || *pessimism.reference_action >= env.d_a)) {
    throw std::invalid_argument("ExperimentConfig: reference_action out of range");
  }
}

EnvConfig ExperimentConfig::env_for(int n, std::uint64_t seed) const {
  EnvConfig e = env;
  e.n_total = n;
  e.n_subspace = static_cast<int>(std::floor(n * subspace_fraction));
  e.seed = mix_seed(seed, static_cast<std::uint64_t>(n));
  return e;
}

ModelBounds environment_bounds(const EnvConfig& env) {
  const double m = std::max(std::abs(env.train_lo), std::abs(env.train_hi));
  return {std::sqrt(static_cast<double>(env.d_x)) * m,
          std::sqrt(1.0 + env.d_s * m * m),
          std::abs(env.diag_value) * std::sqrt(static_cast<double>(env.rank))};
}

Policy FittedModel::policy() const {
  switch (method) {
    case Method::Prs: return Policy::prs(reduced, cs, reference_action);
    case Method::MleGreedy: return Policy::mle_greedy(theta_hat);
    case Method::MlePessimistic: return Policy::mle_pessimistic(theta_hat, cs, reference_action);
  }
  throw std::logic_error("FittedModel::policy: unknown method");
}

namespace {

ConfidenceSet make_cs(const Matrix& features, const Vector& center, const ExperimentConfig& config) {
  ConfidenceOptions opts;
  opts.delta = config.pessimism.delta;
  opts.c_scale = config.pessimism.c_scale;
  opts.ridge = config.pessimism.ridge;
  opts.extra_radius = config.pessimism.extra_radius;
  opts.bounds = config.pessimism.bounds.value_or(environment_bounds(config.env));
  switch (config.pessimism.gamma_rule) {
    case GammaRule::Bounds: break;
    case GammaRule::Empirical: opts.gamma = empirical_curvature(features, center); break;
    case GammaRule::Fixed: opts.gamma = config.pessimism.gamma; break;
  }
  return build_confidence_set(features, center, opts);
}

}  // namespace

FittedModel fit_method(Method method, const Dataset& data, const ExperimentConfig& config) {
  if (data.split_index <= 0 || data.split_index >= static_cast<int>(data.records.size())) {
    throw std::invalid_argument("fit_method: dataset needs two nonempty partitions");
  }
  FittedModel fitted;
  fitted.method = method;
  fitted.reference_action = config.pessimism.reference_action;
  const PreferenceBatch second = make_batch(data.reduced_part());

  if (method == Method::Prs) {
    FgdConfig fgd = config.fgd;
    fgd.rank = config.env.rank;
    fgd.mle_max_iters = config.mle_max_iters;
    fgd.mle_tol = config.mle_tol;
    const FgdFit fit = fgd_fit(make_batch(data.subspace_part()), fgd);
    const ReducedBatch reduced = reduce_batch(second, fit.subspace);
    const ReducedMleFit mle = reduced_mle(reduced, config.mle_max_iters, config.mle_tol);
    auto model = std::make_shared<ReducedModel>(ReducedModel{fit.subspace, mle.theta_rtv});
    model->validate();
    fitted.theta_hat = fit.theta_hat;
    fitted.cs = std::make_shared<ConfidenceSet>(make_cs(reduced.features, mle.theta_rtv, config));
    fitted.reduced = std::move(model);
    return fitted;
  }

  const PreferenceBatch all = make_batch(data.records);
  fitted.theta_hat = unconstrained_mle(all, config.mle_max_iters, config.mle_tol).theta;
  if (method == Method::MlePessimistic) {
    const Matrix& th = fitted.theta_hat.entries();
    const Vector center = Eigen::Map<const Vector>(th.data(), th.size());
    fitted.cs = std::make_shared<ConfidenceSet>(make_cs(full_design(second), center, config));
  }
  return fitted;
}

namespace {

std::vector<double> action_rewards(const RewardMatrix& theta, const Vector& x, const Candidates& c) {
  const Vector row = theta.entries().transpose() * x;
  std::vector<double> out(c.phis.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = row.dot(c.phis[i]);
  return out;
}

void check_sample(const EvalSample& sample) {
  if (sample.size() == 0 || sample.states.size() != sample.contexts.size()) {
    throw std::invalid_argument("evaluation: empty or inconsistent sample");
  }
}

}  // namespace

std::vector<int> optimal_actions(const RewardMatrix& theta_star, const EvalSample& sample, int d_a,
                                 EvalMode mode) {
  check_sample(sample);
  const Policy oracle = Policy::mle_greedy(theta_star);
  const auto actions = all_actions(d_a);
  const Vector x_mean = mode == EvalMode::DistributionShift ? mean_context(sample.contexts) : Vector();
  std::vector<int> out(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Candidates c = make_candidates(sample.states[i], actions, d_a);
    out[i] = oracle.act(mode == EvalMode::Personalization ? sample.contexts[i] : x_mean, c);
  }
  return out;
}

double optimal_policy_value(const RewardMatrix& theta_star, const EvalSample& sample, int d_a,
                            EvalMode mode) {
  check_sample(sample);
  const auto opt = optimal_actions(theta_star, sample, d_a, mode);
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (mode == EvalMode::Personalization) {
      const auto rewards =
          action_rewards(theta_star, sample.contexts[i], make_candidates(sample.states[i], all_actions(d_a), d_a));
      total += *std::max_element(rewards.begin(), rewards.end());
    } else {
      total += bilinear_reward(theta_star, sample.contexts[i], feature_map(sample.states[i], opt[i], d_a));
    }
  }
  return total / static_cast<double>(sample.size());
}

PolicyValue policy_value(const Policy& policy, const RewardMatrix& theta_star,
                         const EvalSample& sample, int d_a, EvalMode mode) {
  check_sample(sample);
  const auto opt = optimal_actions(theta_star, sample, d_a, mode);
  const auto actions = all_actions(d_a);
  const Vector x_mean = mode == EvalMode::DistributionShift ? mean_context(sample.contexts) : Vector();
  PolicyValue out;
  out.actions.resize(sample.size());
  double sum_value = 0.0;
  double sum_gap = 0.0;
  double sum_gap_sq = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Candidates c = make_candidates(sample.states[i], actions, d_a);
    const Vector& x = sample.contexts[i];
    const int a = policy.act(mode == EvalMode::Personalization ? x : x_mean, c);
    out.actions[i] = a;
    const auto rewards = action_rewards(theta_star, x, c);
    const double gap = rewards[opt[i]] - rewards[a];
    sum_value += rewards[a];
    sum_gap += gap;
    sum_gap_sq += gap * gap;
  }
  const auto n = static_cast<double>(sample.size());
  out.value = sum_value / n;
  out.subopt = sum_gap / n;
  const double var = n > 1 ? std::max(0.0, (sum_gap_sq - n * out.subopt * out.subopt) / (n - 1)) : 0.0;
  out.subopt_stderr = std::sqrt(var / n);
  return out;
}

double concentratability(const ConfidenceSet& cs, std::span<const Vector> features) {
  if (features.empty()) throw std::invalid_argument("concentratability: no features");
  Vector mean = Vector::Zero(cs.dim());
  for (const auto& z : features) mean += z;
  mean /= static_cast<double>(features.size());
  return cs.dual_norm(mean);
}

double model_concentratability(const FittedModel& model, const EvalSample& sample,
                               std::span<const int> opt_actions, int d_a, EvalMode mode) {
  if (!model.cs) return kNaN;
  check_sample(sample);
  const Vector x_mean = mode == EvalMode::DistributionShift ? mean_context(sample.contexts) : Vector();
  std::vector<Vector> features;
  features.reserve(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Vector& x = mode == EvalMode::Personalization ? sample.contexts[i] : x_mean;
    Vector phi = feature_map(sample.states[i], opt_actions[i], d_a);
    if (model.reference_action) phi -= feature_map(sample.states[i], *model.reference_action, d_a);
    features.push_back(model.method == Method::Prs ? rtv_feature(x, phi, model.reduced->subspace)
                                                   : full_feature(x, phi));
  }
  return concentratability(*model.cs, features);
}

void write_result_row(std::ostream& out, const ResultRow& row) {
  std::ostringstream line;
  line << std::setprecision(17);
  line << row.method << ',' << row.n << ',' << row.seed << ',' << row.subopt << ','
       << row.est_error_frob << ',' << row.residual_22_frob << ',' << row.c_star << ','
       << row.wall_time_s << ',' << row.status << '\n';
  out << line.str();
}

namespace {

double parse_number(const std::string& cell) {
  if (cell == "nan" || cell == "-nan") return kNaN;
  return std::stod(cell);
}

}  // namespace

std::vector<ResultRow> read_results(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultHeader) {
    throw std::runtime_error("results: unexpected header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw std::runtime_error("results: wrong column count in '" + line + "'");
    ResultRow r;
    r.method = cells[0];
    r.n = std::stoi(cells[1]);
    r.seed = std::stoull(cells[2]);
    r.subopt = parse_number(cells[3]);
    r.est_error_frob = parse_number(cells[4]);
    r.residual_22_frob = parse_number(cells[5]);
    r.c_star = parse_number(cells[6]);
    r.wall_time_s = parse_number(cells[7]);
    r.status = cells[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_results(in);
}

std::vector<ResultRow> run_cell(const ExperimentConfig& config, int n, std::uint64_t seed) {
  const EnvConfig env = config.env_for(n, seed);
  const RewardMatrix theta_star = make_true_theta(env);
  const Dataset data = generate_dataset(env, theta_star);
  Rng eval_rng(mix_seed(seed, 0xE7A1));
  const EvalSample sample = sample_eval_set(config.eval, env.d_x, env.d_s, eval_rng);
  const auto opt = optimal_actions(theta_star, sample, env.d_a, config.eval.mode);

  std::vector<ResultRow> rows;
  for (Method m : config.methods) {
    ResultRow row;
    row.method = method_name(m);
    row.n = n;
    row.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      const FittedModel fitted = fit_method(m, data, config);
      row.subopt = policy_value(fitted.policy(), theta_star, sample, env.d_a, config.eval.mode).subopt;
      row.est_error_frob = estimation_error(fitted.theta_hat, theta_star);
      row.residual_22_frob =
          m == Method::Prs ? rtv_matrix(theta_star.entries(), fitted.reduced->subspace).residual.norm() : kNaN;
      row.c_star = model_concentratability(fitted, sample, opt, env.d_a, config.eval.mode);
    } catch (const std::exception& e) {
      row.subopt = row.est_error_frob = row.residual_22_frob = row.c_star = kNaN;
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      row.status = "failed: " + msg;
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

int worker_count() {
  if (const char* env = std::getenv("LOCO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  config.validate();
  struct Cell {
    int n;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (int n : config.n_values) {
    for (std::uint64_t seed : config.seeds) cells.push_back({n, seed});
  }

  std::ofstream out;
  if (!config.output_path.empty()) {
    out.open(config.output_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + config.output_path + " for writing");
    out << kResultHeader << '\n';
    out.flush();
  }

  std::vector<std::vector<ResultRow>> results(cells.size());
  std::vector<char> done(cells.size(), 0);
  std::size_t next_to_write = 0;
  std::mutex mu;
  std::atomic<std::size_t> next_cell{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next_cell.fetch_add(1);
      if (i >= cells.size()) return;
      auto rows = run_cell(config, cells[i].n, cells[i].seed);
      std::lock_guard<std::mutex> lock(mu);
      results[i] = std::move(rows);
      done[i] = 1;
      while (next_to_write < cells.size() && done[next_to_write]) {
        if (out.is_open()) {
          for (const auto& row : results[next_to_write]) write_result_row(out, row);
          out.flush();
        }
        ++next_to_write;
      }
    }
  };

  const int threads = std::min<int>(worker_count(), static_cast<int>(cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> all;
  for (auto& rows : results) {
    for (auto& row : rows) all.push_back(std::move(row));
  }
  return all;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  std::map<std::pair<std::string, int>, int> failures;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.method, r.n);
    if (!groups.contains(key) && !failures.contains(key)) order.push_back(key);
    if (r.status == "ok" && std::isfinite(r.subopt)) {
      groups[key].push_back(r.subopt);
    } else {
      groups[key];
      ++failures[key];
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    AggregateRow a;
    a.method = key.first;
    a.n = key.second;
    a.count = static_cast<int>(v.size());
    a.failed = failures[key];
    a.median = median(v);
    a.q1 = quantile(v, 0.25);
    a.q3 = quantile(v, 0.75);
    double total = 0.0;
    for (double x : v) total += x;
    a.mean = v.empty() ? kNaN : total / static_cast<double>(v.size());
    out.push_back(a);
  }
  return out;
}

void write_report(std::ostream& out, const std::vector<AggregateRow>& agg) {
  std::ostringstream ss;
  ss << std::setprecision(17) << "method,n,count,failed,median,q1,q3,mean\n";
  for (const auto& a : agg) {
    ss << a.method << ',' << a.n << ',' << a.count << ',' << a.failed << ',' << a.median << ','
       << a.q1 << ',' << a.q3 << ',' << a.mean << '\n';
  }
  out << ss.str();
}

}  // namespace loco
