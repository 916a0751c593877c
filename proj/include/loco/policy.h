#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "loco/core_model.h"
#include "loco/rtv_reduce.h"
#include "loco/synth_env.h"

namespace loco {

// Ellipsoid {theta : ||theta - theta_hat||_W <= radius} with a precomputed
// Cholesky factor of W + ridge * I. Immutable once built.
class ConfidenceSet {
 public:
  ConfidenceSet(Vector theta_hat, Matrix w, double radius, double ridge, double gamma,
                double delta);

  const Vector& theta_hat() const { return theta_hat_; }
  const Matrix& w() const { return w_; }
  double radius() const { return radius_; }
  double ridge() const { return ridge_; }
  double gamma() const { return gamma_; }
  double delta() const { return delta_; }
  Eigen::Index dim() const { return theta_hat_.size(); }

  // ||v||_{(W + ridge I)^{-1}}
  double dual_norm(const Vector& v) const;

 private:
  Vector theta_hat_;
  Matrix w_;
  double radius_;
  double ridge_;
  double gamma_;
  double delta_;
  Eigen::LLT<Matrix> chol_;
};

struct ConfidenceOptions {
  double delta = 0.05;
  double c_scale = 1.0;
  // Link-curvature lower bound; sigmoid'(bounds.reward_bound()) when empty.
  std::optional<double> gamma;
  ModelBounds bounds;
  // Ridge added to W; 1e-6 * trace(W) / k when empty.
  std::optional<double> ridge;
  // Added to the radius (e.g. a subspace-bias allowance). Zero by default.
  double extra_radius = 0.0;
};

// Minimum of sigmoid' over reward gaps of magnitude <= bound:
// 1 / (2 + exp(-bound) + exp(bound)).
double curvature_lower_bound(double bound);

// Mean of sigmoid'(z_t' theta_hat) over the rows of `features`.
double empirical_curvature(const Matrix& features, const Vector& theta_hat);

// W = (1/n) sum z z', radius = (c_scale / gamma) sqrt((k + log(1/delta)) / n).
ConfidenceSet build_confidence_set(const Matrix& features, const Vector& theta_hat,
                                   const ConfidenceOptions& options);

// min over the ellipsoid of v' theta = v' theta_hat - radius * ||v||_{(W+ridge I)^{-1}}.
double pessimistic_value_linear(const Vector& v, const ConfidenceSet& cs);

// Index of the largest entry; exact ties go to the smallest index.
std::size_t argmax_first(std::span<const double> scores);

enum class PolicyKind { PrsPessimistic, MleGreedy, MlePessimistic };

// Feature vectors phi(s, a) for a finite action set.
struct Candidates {
  std::vector<int> actions;
  std::vector<Vector> phis;
};

Candidates make_candidates(const Vector& s, std::span<const int> action_set, int d_a);
std::vector<int> all_actions(int d_a);

// LCB reference: when set, pessimistic features are built from
// phi(s, a) - phi(s, reference) so that components shared by all actions
// (which pairwise data never identifies) carry no penalty.
struct PessimismFeatures {
  std::optional<std::size_t> reference;  // index into Candidates
};

// Per-(x, s) lower-confidence-bound action in the reduced space.
int prs_policy_action(const Vector& x, const Candidates& candidates, const ReducedModel& model,
                      const ConfidenceSet& cs, PessimismFeatures ref = {});

// Global policy for one state: same rule on the context-sample mean of the
// reduced features. z_rtv is linear in x, so the mean feature equals the
// feature of the mean context.
int prs_policy_global(std::span<const Vector> eval_contexts, const Candidates& candidates,
                      const ReducedModel& model, const ConfidenceSet& cs,
                      PessimismFeatures ref = {});

int mle_greedy_action(const Vector& x, const Candidates& candidates,
                      const RewardMatrix& theta_hat);

// Full vectorized feature vec(x phi') = phi (kron) x, column-major.
Vector full_feature(const Vector& x, const Vector& phi);

int mle_pessimistic_action(const Vector& x, const Candidates& candidates,
                           const RewardMatrix& theta_hat, const ConfidenceSet& full_cs,
                           PessimismFeatures ref = {});

Vector mean_context(std::span<const Vector> contexts);

// A fitted policy bound to its model. `act` takes the individual context in
// Personalization mode and the context-sample mean in DistributionShift mode.
class Policy {
 public:
  static Policy prs(std::shared_ptr<const ReducedModel> model,
                    std::shared_ptr<const ConfidenceSet> cs, std::optional<int> reference_action);
  static Policy mle_greedy(RewardMatrix theta_hat);
  static Policy mle_pessimistic(RewardMatrix theta_hat, std::shared_ptr<const ConfidenceSet> cs,
                                std::optional<int> reference_action);

  PolicyKind kind() const { return kind_; }
  int act(const Vector& x, const Candidates& candidates) const;

 private:
  PolicyKind kind_ = PolicyKind::MleGreedy;
  std::shared_ptr<const ReducedModel> reduced_;
  std::shared_ptr<const ConfidenceSet> cs_;
  RewardMatrix theta_;
  std::optional<int> reference_action_;
};

}  // namespace loco
