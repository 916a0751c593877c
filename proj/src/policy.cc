#include "loco/policy.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace loco {

ConfidenceSet::ConfidenceSet(Vector theta_hat, Matrix w, double radius, double ridge,
                             double gamma, double delta)
    : theta_hat_(std::move(theta_hat)),
      w_(std::move(w)),
      radius_(radius),
      ridge_(ridge),
      gamma_(gamma),
      delta_(delta) {
  const Eigen::Index k = theta_hat_.size();
  if (w_.rows() != k || w_.cols() != k) {
    throw std::invalid_argument("ConfidenceSet: W must be k x k");
  }
  if (!w_.allFinite() || !theta_hat_.allFinite()) {
    throw NumericError("ConfidenceSet: non-finite second moment or center");
  }
  if (!(radius_ >= 0.0) || !(ridge_ >= 0.0)) {
    throw std::invalid_argument("ConfidenceSet: radius and ridge must be non-negative");
  }
  Matrix regularized = w_;
  regularized.diagonal().array() += ridge_;
  chol_.compute(regularized);
  if (chol_.info() != Eigen::Success) {
    throw std::invalid_argument("ConfidenceSet: W + ridge I is not positive definite");
  }
  const Vector diag = chol_.matrixL().toDenseMatrix().diagonal();
  if (k > 0 && !(diag.minCoeff() > 0.0)) {
    throw std::invalid_argument("ConfidenceSet: W + ridge I is not positive definite");
  }
}

double ConfidenceSet::dual_norm(const Vector& v) const {
  if (v.size() != dim()) throw std::invalid_argument("dual_norm: dimension mismatch");
  return chol_.matrixL().solve(v).norm();
}

double curvature_lower_bound(double bound) {
  const double e = std::exp(-std::abs(bound));
  return e / ((1.0 + e) * (1.0 + e));
}

double empirical_curvature(const Matrix& features, const Vector& theta_hat) {
  if (features.rows() == 0) throw std::invalid_argument("empirical_curvature: empty features");
  const Vector g = features * theta_hat;
  double total = 0.0;
  for (Eigen::Index t = 0; t < g.size(); ++t) {
    const double s = sigmoid(g(t));
    total += s * (1.0 - s);
  }
  return total / static_cast<double>(g.size());
}

ConfidenceSet build_confidence_set(const Matrix& features, const Vector& theta_hat,
                                   const ConfidenceOptions& options) {
  const Eigen::Index n = features.rows();
  const Eigen::Index k = features.cols();
  if (n == 0) throw std::invalid_argument("build_confidence_set: empty reduced records");
  if (theta_hat.size() != k) throw std::invalid_argument("build_confidence_set: length mismatch");
  if (!(options.delta > 0.0 && options.delta < 1.0)) {
    throw std::invalid_argument("build_confidence_set: delta must lie in (0, 1)");
  }
  if (!(options.c_scale >= 0.0)) throw std::invalid_argument("build_confidence_set: c_scale < 0");

  Matrix w = Matrix::Zero(k, k);
  w.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose(), 1.0 / static_cast<double>(n));
  w.triangularView<Eigen::StrictlyUpper>() = w.transpose();
  if (!w.allFinite()) throw NumericError("build_confidence_set: non-finite second moment");

  double gamma;
  if (options.gamma) {
    gamma = *options.gamma;
  } else {
    options.bounds.validate();
    gamma = curvature_lower_bound(options.bounds.reward_bound());
  }
  if (!(gamma > 0.0 && gamma <= 0.25)) {
    throw std::invalid_argument("build_confidence_set: gamma must lie in (0, 1/4]");
  }

  double ridge = options.ridge ? *options.ridge
                               : 1e-6 * w.trace() / static_cast<double>(std::max<Eigen::Index>(k, 1));
  if (!options.ridge && ridge <= 0.0) ridge = 1e-12;

  const double radius =
      options.c_scale / gamma *
          std::sqrt((static_cast<double>(k) + std::log(1.0 / options.delta)) / static_cast<double>(n)) +
      options.extra_radius;
  return ConfidenceSet(theta_hat, std::move(w), radius, ridge, gamma, options.delta);
}

double pessimistic_value_linear(const Vector& v, const ConfidenceSet& cs) {
  const double point = v.dot(cs.theta_hat());
  if (cs.radius() == 0.0) return point;
  return point - cs.radius() * cs.dual_norm(v);
}

std::size_t argmax_first(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax_first: empty action set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::vector<int> all_actions(int d_a) {
  std::vector<int> actions(d_a);
  for (int a = 0; a < d_a; ++a) actions[a] = a;
  return actions;
}

Candidates make_candidates(const Vector& s, std::span<const int> action_set, int d_a) {
  if (action_set.empty()) throw std::invalid_argument("make_candidates: empty action set");
  Candidates c;
  c.actions.assign(action_set.begin(), action_set.end());
  c.phis.reserve(action_set.size());
  for (int a : action_set) c.phis.push_back(feature_map(s, a, d_a));
  return c;
}

namespace {

void check_candidates(const Candidates& c, const PessimismFeatures& ref) {
  if (c.phis.empty()) throw std::invalid_argument("policy: empty action set");
  if (c.phis.size() != c.actions.size()) {
    throw std::invalid_argument("policy: candidates and actions differ in length");
  }
  if (ref.reference && *ref.reference >= c.phis.size()) {
    throw std::invalid_argument("policy: reference index out of range");
  }
}

Vector pessimism_phi(const Candidates& c, std::size_t i, const PessimismFeatures& ref) {
  return ref.reference ? Vector(c.phis[i] - c.phis[*ref.reference]) : c.phis[i];
}

int reduced_lcb_action(const Vector& x, const Candidates& candidates, const ReducedModel& model,
                       const ConfidenceSet& cs, const PessimismFeatures& ref) {
  check_candidates(candidates, ref);
  if (cs.dim() != model.theta_rtv.size()) {
    throw std::invalid_argument("prs_policy: confidence set does not match reduced model");
  }
  const Vector x_rot = model.subspace.u_hat.transpose() * x;
  std::vector<double> scores(candidates.phis.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Vector z = rtv_from_rotated(x_rot, model.subspace.v_hat.transpose() * pessimism_phi(candidates, i, ref),
                                      model.subspace.rank);
    scores[i] = z.dot(model.theta_rtv) - cs.radius() * (cs.radius() == 0.0 ? 0.0 : cs.dual_norm(z));
  }
  return candidates.actions[argmax_first(scores)];
}

std::optional<std::size_t> find_reference(const Candidates& c, std::optional<int> action) {
  if (!action) return std::nullopt;
  const auto it = std::find(c.actions.begin(), c.actions.end(), *action);
  if (it == c.actions.end()) throw std::invalid_argument("policy: reference action not in action set");
  return static_cast<std::size_t>(it - c.actions.begin());
}

}  // namespace

Vector mean_context(std::span<const Vector> contexts) {
  if (contexts.empty()) throw std::invalid_argument("mean_context: empty context sample");
  Vector mean = Vector::Zero(contexts.front().size());
  for (const auto& x : contexts) mean += x;
  return mean / static_cast<double>(contexts.size());
}

int prs_policy_action(const Vector& x, const Candidates& candidates, const ReducedModel& model,
                      const ConfidenceSet& cs, PessimismFeatures ref) {
  return reduced_lcb_action(x, candidates, model, cs, ref);
}

int prs_policy_global(std::span<const Vector> eval_contexts, const Candidates& candidates,
                      const ReducedModel& model, const ConfidenceSet& cs, PessimismFeatures ref) {
  return reduced_lcb_action(mean_context(eval_contexts), candidates, model, cs, ref);
}

int mle_greedy_action(const Vector& x, const Candidates& candidates, const RewardMatrix& theta_hat) {
  check_candidates(candidates, {});
  const Vector row = theta_hat.entries().transpose() * x;
  std::vector<double> scores(candidates.phis.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = row.dot(candidates.phis[i]);
  return candidates.actions[argmax_first(scores)];
}

Vector full_feature(const Vector& x, const Vector& phi) {
  Vector z(x.size() * phi.size());
  for (Eigen::Index j = 0; j < phi.size(); ++j) z.segment(j * x.size(), x.size()) = x * phi(j);
  return z;
}

int mle_pessimistic_action(const Vector& x, const Candidates& candidates,
                           const RewardMatrix& theta_hat, const ConfidenceSet& full_cs,
                           PessimismFeatures ref) {
  check_candidates(candidates, ref);
  if (full_cs.dim() != theta_hat.d_x() * theta_hat.d_phi()) {
    throw std::invalid_argument("mle_pessimistic_action: confidence set must span d_x * d_phi");
  }
  const Eigen::Map<const Vector> theta_vec(theta_hat.entries().data(), full_cs.dim());
  std::vector<double> scores(candidates.phis.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Vector z = full_feature(x, pessimism_phi(candidates, i, ref));
    scores[i] = z.dot(theta_vec) - full_cs.radius() * (full_cs.radius() == 0.0 ? 0.0 : full_cs.dual_norm(z));
  }
  return candidates.actions[argmax_first(scores)];
}

Policy Policy::prs(std::shared_ptr<const ReducedModel> model,
                   std::shared_ptr<const ConfidenceSet> cs, std::optional<int> reference_action) {
  if (!model || !cs) throw std::invalid_argument("Policy::prs: reduced model and confidence set required");
  Policy p;
  p.kind_ = PolicyKind::PrsPessimistic;
  p.reduced_ = std::move(model);
  p.cs_ = std::move(cs);
  p.reference_action_ = reference_action;
  return p;
}

Policy Policy::mle_greedy(RewardMatrix theta_hat) {
  Policy p;
  p.kind_ = PolicyKind::MleGreedy;
  p.theta_ = std::move(theta_hat);
  return p;
}

Policy Policy::mle_pessimistic(RewardMatrix theta_hat, std::shared_ptr<const ConfidenceSet> cs,
                               std::optional<int> reference_action) {
  if (!cs) throw std::invalid_argument("Policy::mle_pessimistic: confidence set required");
  Policy p;
  p.kind_ = PolicyKind::MlePessimistic;
  p.theta_ = std::move(theta_hat);
  p.cs_ = std::move(cs);
  p.reference_action_ = reference_action;
  return p;
}

int Policy::act(const Vector& x, const Candidates& candidates) const {
  switch (kind_) {
    case PolicyKind::PrsPessimistic:
      return reduced_lcb_action(x, candidates, *reduced_, *cs_,
                                {find_reference(candidates, reference_action_)});
    case PolicyKind::MleGreedy:
      return mle_greedy_action(x, candidates, theta_);
    case PolicyKind::MlePessimistic:
      return mle_pessimistic_action(x, candidates, theta_, *cs_,
                                    {find_reference(candidates, reference_action_)});
  }
  throw std::logic_error("Policy::act: unknown kind");
}

}  // namespace loco
