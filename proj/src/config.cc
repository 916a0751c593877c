#include "loco/config.h"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace loco {

namespace {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void check_keys(const YAML::Node& node, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError("config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) throw ConfigError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

void parse_env(const YAML::Node& n, EnvConfig& env) {
  check_keys(n, "env", {"d_s", "d_a", "d_x", "rank", "diag_value", "pair_dist", "q", "n_total",
                        "n_subspace", "seed", "train_lo", "train_hi"});
  read(n, "d_s", env.d_s);
  read(n, "d_a", env.d_a);
  read(n, "d_x", env.d_x);
  read(n, "rank", env.rank);
  read(n, "diag_value", env.diag_value);
  read(n, "n_total", env.n_total);
  read(n, "seed", env.seed);
  read(n, "train_lo", env.train_lo);
  read(n, "train_hi", env.train_hi);
  read(n, "n_subspace", env.n_subspace);
  std::string dist = "uniform";
  read(n, "pair_dist", dist);
  if (dist == "uniform") {
    env.pair_dist = PairDistribution::uniform();
  } else if (dist == "imbalanced") {
    int q = 1;
    read(n, "q", q);
    env.pair_dist = PairDistribution::imbalanced(q);
  } else {
    throw ConfigError("config: env.pair_dist must be 'uniform' or 'imbalanced'");
  }
}

void parse_eval(const YAML::Node& n, EvalDistribution& eval) {
  check_keys(n, "eval", {"n_eval", "mode", "context_lo", "context_hi", "state_lo", "state_hi"});
  read(n, "n_eval", eval.n_eval);
  read(n, "context_lo", eval.context.lo);
  read(n, "context_hi", eval.context.hi);
  read(n, "state_lo", eval.state.lo);
  read(n, "state_hi", eval.state.hi);
  std::string mode = "personalization";
  read(n, "mode", mode);
  if (mode == "personalization") {
    eval.mode = EvalMode::Personalization;
  } else if (mode == "distribution_shift") {
    eval.mode = EvalMode::DistributionShift;
  } else {
    throw ConfigError("config: eval.mode must be 'personalization' or 'distribution_shift'");
  }
}

void parse_fgd(const YAML::Node& n, FgdConfig& fgd) {
  check_keys(n, "fgd", {"step_size_scale", "max_iters", "tol", "completion_seed"});
  read(n, "step_size_scale", fgd.step_size_scale);
  read(n, "max_iters", fgd.max_iters);
  read(n, "tol", fgd.tol);
  read(n, "completion_seed", fgd.completion_seed);
}

void parse_pessimism(const YAML::Node& n, PessimismConfig& p) {
  check_keys(n, "pessimism", {"delta", "c_scale", "gamma", "ridge", "extra_radius",
                              "reference_action", "bounds"});
  read(n, "delta", p.delta);
  read(n, "c_scale", p.c_scale);
  read(n, "extra_radius", p.extra_radius);
  if (n["ridge"]) p.ridge = n["ridge"].as<double>();
  if (const auto g = n["gamma"]) {
    const auto text = g.as<std::string>();
    if (text == "empirical") {
      p.gamma_rule = GammaRule::Empirical;
    } else if (text == "bounds") {
      p.gamma_rule = GammaRule::Bounds;
    } else {
      p.gamma_rule = GammaRule::Fixed;
      p.gamma = g.as<double>();
    }
  }
  if (const auto ref = n["reference_action"]) {
    if (ref.as<std::string>() == "none") {
      p.reference_action.reset();
    } else {
      p.reference_action = ref.as<int>();
    }
  }
  if (const auto b = n["bounds"]) {
    check_keys(b, "pessimism.bounds", {"b_x", "b_phi", "b_theta"});
    ModelBounds bounds;
    read(b, "b_x", bounds.b_x);
    read(b, "b_phi", bounds.b_phi);
    read(b, "b_theta", bounds.b_theta);
    bounds.validate();
    p.bounds = bounds;
  }
}

void parse_experiment(const YAML::Node& n, ExperimentConfig& cfg) {
  check_keys(n, "experiment", {"methods", "n_values", "seeds", "subspace_fraction",
                               "mle_max_iters", "mle_tol", "output"});
  if (n["methods"]) {
    cfg.methods.clear();
    for (const auto& m : n["methods"]) cfg.methods.push_back(parse_method(m.as<std::string>()));
  }
  if (n["n_values"]) cfg.n_values = n["n_values"].as<std::vector<int>>();
  if (n["seeds"]) cfg.seeds = n["seeds"].as<std::vector<std::uint64_t>>();
  read(n, "subspace_fraction", cfg.subspace_fraction);
  read(n, "mle_max_iters", cfg.mle_max_iters);
  read(n, "mle_tol", cfg.mle_tol);
  read(n, "output", cfg.output_path);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& yaml_text) {
  ExperimentConfig cfg;
  bool root_has_split = false;
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    if (!root.IsNull()) {
      root_has_split = root["env"] && root["env"].IsMap() && root["env"]["n_subspace"];
      check_keys(root, "<root>", {"env", "eval", "fgd", "pessimism", "experiment"});
      if (root["env"]) parse_env(root["env"], cfg.env);
      if (root["eval"]) parse_eval(root["eval"], cfg.eval);
      if (root["fgd"]) parse_fgd(root["fgd"], cfg.fgd);
      if (root["pessimism"]) parse_pessimism(root["pessimism"], cfg.pessimism);
      if (root["experiment"]) parse_experiment(root["experiment"], cfg);
    }
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.fgd.rank = cfg.env.rank;
  if (!root_has_split) {
    cfg.env.n_subspace = static_cast<int>(std::floor(cfg.env.n_total * cfg.subspace_fraction));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

}  // namespace loco
