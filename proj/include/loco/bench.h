#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loco/lowrank_fgd.h"
#include "loco/policy.h"
#include "loco/synth_env.h"

namespace loco {

enum class Method { Prs, MleGreedy, MlePessimistic };

std::string method_name(Method m);
Method parse_method(const std::string& name);

enum class GammaRule {
  Bounds,     // curvature lower bound from ModelBounds
  Empirical,  // mean sigmoid' of the fitted logits on the estimation data
  Fixed,      // PessimismConfig::gamma
};

struct PessimismConfig {
  double delta = 0.05;
  double c_scale = 0.01;
  GammaRule gamma_rule = GammaRule::Empirical;
  double gamma = 0.25;
  std::optional<double> ridge;
  std::optional<ModelBounds> bounds;  // derived from the environment when empty
  double extra_radius = 0.0;
  // Pessimistic features are phi(s, a) - phi(s, reference_action) when set.
  std::optional<int> reference_action = 0;
};

struct ExperimentConfig {
  EnvConfig env;
  EvalDistribution eval;
  std::vector<Method> methods{Method::Prs, Method::MleGreedy, Method::MlePessimistic};
  std::vector<int> n_values{2000};
  std::vector<std::uint64_t> seeds{1};
  double subspace_fraction = 0.4;  // N_0 = floor(N * fraction)
  FgdConfig fgd;                   // rank is taken from env.rank
  int mle_max_iters = 100;
  double mle_tol = 1e-8;
  PessimismConfig pessimism;
  std::string output_path;

  void validate() const;
  EnvConfig env_for(int n, std::uint64_t seed) const;
};

// Norm bounds implied by the synthetic environment.
ModelBounds environment_bounds(const EnvConfig& env);

// A fitted model ready to act, plus the data-side diagnostics.
struct FittedModel {
  Method method = Method::Prs;
  RewardMatrix theta_hat;  // FGD estimate for PRS, unconstrained MLE otherwise
  std::shared_ptr<const ReducedModel> reduced;
  std::shared_ptr<const ConfidenceSet> cs;
  std::optional<int> reference_action;

  Policy policy() const;
};

FittedModel fit_method(Method method, const Dataset& data, const ExperimentConfig& config);

// J(pi*) on the sample. Personalization maximizes per (x, s); DistributionShift
// picks per state the action maximizing the context-mean reward.
double optimal_policy_value(const RewardMatrix& theta_star, const EvalSample& sample, int d_a,
                            EvalMode mode);

struct PolicyValue {
  double value = 0.0;          // J(pi)
  double subopt = 0.0;         // J(pi*) - J(pi), same sample
  double subopt_stderr = 0.0;  // sample standard error of the per-point gap
  std::vector<int> actions;
};

PolicyValue policy_value(const Policy& policy, const RewardMatrix& theta_star,
                         const EvalSample& sample, int d_a, EvalMode mode);

// Actions of the optimal policy on each sample point.
std::vector<int> optimal_actions(const RewardMatrix& theta_star, const EvalSample& sample, int d_a,
                                 EvalMode mode);

// ||mean of features||_{(W + ridge I)^{-1}}.
double concentratability(const ConfidenceSet& cs, std::span<const Vector> features);

// C* of a fitted pessimistic model at the optimal actions.
double model_concentratability(const FittedModel& model, const EvalSample& sample,
                               std::span<const int> opt_actions, int d_a, EvalMode mode);

struct ResultRow {
  std::string method;
  int n = 0;
  std::uint64_t seed = 0;
  double subopt = 0.0;
  double est_error_frob = 0.0;
  double residual_22_frob = 0.0;
  double c_star = 0.0;
  double wall_time_s = 0.0;
  std::string status = "ok";
};

inline constexpr const char* kResultHeader =
    "method,n,seed,subopt,est_error_frob,residual_22_frob,c_star,wall_time_s,status";

void write_result_row(std::ostream& out, const ResultRow& row);
std::vector<ResultRow> read_results(std::istream& in);
std::vector<ResultRow> load_results(const std::string& path);

// Rows for one (N, seed) cell: every method sees the same data and the same
// evaluation sample.
std::vector<ResultRow> run_cell(const ExperimentConfig& config, int n, std::uint64_t seed);

// Full factorial over n_values x seeds x methods. Rows are appended to
// config.output_path (when set) in cell order as they complete. Worker count
// comes from LOCO_THREADS, defaulting to the hardware concurrency.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

int worker_count();

struct AggregateRow {
  std::string method;
  int n = 0;
  int count = 0;
  int failed = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double mean = 0.0;
};

// Per method x N statistics of subopt over successful rows.
std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);
void write_report(std::ostream& out, const std::vector<AggregateRow>& agg);

// Linear-interpolation quantile (p in [0, 1]) of an unsorted sample.
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

}  // namespace loco
