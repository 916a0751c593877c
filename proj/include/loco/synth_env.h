#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loco/core_model.h"
#include "loco/random.h"

namespace loco {

// Distribution of the offline comparison pairs (a0, a1).
struct PairDistribution {
  enum class Kind { Uniform, Imbalanced };
  Kind kind = Kind::Uniform;
  int q = 1;  // imbalance parameter, used when kind == Imbalanced

  static PairDistribution uniform() { return {Kind::Uniform, 1}; }
  static PairDistribution imbalanced(int q) { return {Kind::Imbalanced, q}; }
};

struct EnvConfig {
  int d_s = 10;
  int d_a = 8;
  int d_x = 10;
  int rank = 2;
  double diag_value = 2.0;
  PairDistribution pair_dist;
  int n_total = 2000;
  int n_subspace = 1000;
  std::uint64_t seed = 0;
  // Training contexts and states are i.i.d. Unif(lo, hi) per coordinate.
  double train_lo = -1.0;
  double train_hi = 1.0;

  int d_phi() const { return d_a + d_s - 1; }
  void validate() const;
};

struct Dataset {
  int d_x = 0;
  int d_phi = 0;
  std::vector<ComparisonRecord> records;
  int split_index = 0;  // records [0, split) estimate the subspace

  std::span<const ComparisonRecord> subspace_part() const {
    return {records.data(), static_cast<std::size_t>(split_index)};
  }
  std::span<const ComparisonRecord> reduced_part() const {
    return std::span<const ComparisonRecord>(records).subspan(split_index);
  }
};

enum class EvalMode { Personalization, DistributionShift };

// Coordinate-wise Unif(lo, hi) sampler description.
struct BoxSampler {
  double lo = -1.0;
  double hi = 1.0;
};

struct EvalDistribution {
  int n_eval = 5000;
  BoxSampler context;
  BoxSampler state;
  EvalMode mode = EvalMode::Personalization;

  void validate() const;
};

// Held-out (x, s) pairs drawn from rho.
struct EvalSample {
  std::vector<Vector> contexts;
  std::vector<Vector> states;
  std::size_t size() const { return contexts.size(); }
};

// One-hot action encoding (dropping action 0) concatenated with s; length
// d_a + d_s - 1.
Vector feature_map(const Vector& s, int a, int d_a);

// Rank-r diagonal ground truth with entries diag_value on (i, i), i < r.
RewardMatrix make_true_theta(const EnvConfig& config);

std::pair<int, int> sample_action_pair(const PairDistribution& dist, int d_a,
                                       Rng& rng);

Dataset generate_dataset(const EnvConfig& config, const RewardMatrix& theta_star);

EvalSample sample_eval_set(const EvalDistribution& dist, int d_x, int d_s,
                           Rng& rng);

// Flat delimited text. First line "# d_x=<d_x> d_phi=<d_phi> n=<n> split=<split>",
// second line column names, then one record per line in the order
// x[0..d_x), phi1[0..d_phi), phi0[0..d_phi), y.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace loco
