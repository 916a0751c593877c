#include "loco/lowrank_fgd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "loco/logistic_solver.h"
#include "loco/random.h"

namespace loco {

void FgdConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("FgdConfig: rank must be >= 1");
  if (!(step_size_scale > 0.0 && step_size_scale <= 1.0)) {
    throw std::invalid_argument("FgdConfig: step_size_scale must lie in (0, 1]");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("FgdConfig: tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("FgdConfig: max_iters must be >= 1");
}

void Subspace::validate() const {
  if (u_hat.rows() != u_hat.cols() || v_hat.rows() != v_hat.cols()) {
    throw std::invalid_argument("Subspace: bases must be square");
  }
  if (rank < 1 || rank > std::min(u_hat.rows(), v_hat.rows())) {
    throw std::invalid_argument("Subspace: rank out of range");
  }
  const auto eye_u = Matrix::Identity(u_hat.rows(), u_hat.rows());
  const auto eye_v = Matrix::Identity(v_hat.rows(), v_hat.rows());
  if ((u_hat.transpose() * u_hat - eye_u).norm() > 1e-8 ||
      (v_hat.transpose() * v_hat - eye_v).norm() > 1e-8) {
    throw std::invalid_argument("Subspace: bases are not orthogonal");
  }
  for (Eigen::Index i = 1; i < singular_values.size(); ++i) {
    if (singular_values(i) > singular_values(i - 1)) {
      throw std::invalid_argument("Subspace: singular values not sorted");
    }
  }
}

Matrix full_design(const PreferenceBatch& batch) {
  const Eigen::Index d_x = batch.d_x();
  const Eigen::Index d_phi = batch.d_phi();
  Matrix design(batch.size(), d_x * d_phi);
  for (Eigen::Index j = 0; j < d_phi; ++j) {
    design.middleCols(j * d_x, d_x) =
        batch.contexts.array().colwise() * batch.phi_diffs.col(j).array();
  }
  return design;
}

MleFit unconstrained_mle(const PreferenceBatch& batch, int max_iters, double tol,
                         std::optional<RewardMatrix> init) {
  if (batch.size() == 0) throw std::invalid_argument("unconstrained_mle: empty record list");
  const Eigen::Index d_x = batch.d_x();
  const Eigen::Index d_phi = batch.d_phi();
  const Matrix design = full_design(batch);
  std::optional<Vector> start;
  if (init) {
    if (init->d_x() != d_x || init->d_phi() != d_phi) {
      throw std::invalid_argument("unconstrained_mle: init shape mismatch");
    }
    start = Eigen::Map<const Vector>(init->entries().data(), d_x * d_phi);
  }
  SolverResult solved = minimize_logistic({design, batch.labels}, {max_iters, tol}, start);
  Matrix theta = Eigen::Map<const Matrix>(solved.solution.data(), d_x, d_phi);
  return {RewardMatrix(std::move(theta)), solved.iterations, solved.grad_norm,
          solved.converged, std::move(solved.trace)};
}

namespace {

// Cached products for the factored objective at (U, V).
struct FactorState {
  Matrix xu;   // n x r, contexts * U
  Matrix dv;   // n x r, phi_diffs * V
  Vector residual;  // (sigmoid(g) - y) / n
  double loss = 0.0;
};

void refresh(FactorState& st, const PreferenceBatch& batch) {
  const Vector logits = (st.xu.array() * st.dv.array()).rowwise().sum();
  const auto n = static_cast<double>(logits.size());
  st.residual.resize(logits.size());
  double total = 0.0;
  for (Eigen::Index t = 0; t < logits.size(); ++t) {
    total += softplus_neg(logits(t)) + (1.0 - batch.labels(t)) * logits(t);
    st.residual(t) = (sigmoid(logits(t)) - batch.labels(t)) / n;
  }
  st.loss = total / n;
}

double regularizer(const Matrix& u, const Matrix& v) {
  return (u.transpose() * u - v.transpose() * v).squaredNorm() / 8.0;
}

Matrix orthonormal_completion(const Matrix& leading, std::uint64_t seed) {
  const Eigen::Index d = leading.rows();
  const Eigen::Index r = leading.cols();
  Matrix basis(d, d);
  basis.leftCols(r) = leading;
  if (r == d) return basis;
  Rng rng(seed);
  Matrix g(d, d - r);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
  }
  for (int pass = 0; pass < 2; ++pass) g -= leading * (leading.transpose() * g);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d - r);
  for (int pass = 0; pass < 2; ++pass) q -= leading * (leading.transpose() * q);
  Eigen::HouseholderQR<Matrix> qr2(q);
  basis.rightCols(d - r) = qr2.householderQ() * Matrix::Identity(d, d - r);
  return basis;
}

}  // namespace

Subspace make_subspace(const Matrix& theta_hat, int rank, std::uint64_t seed) {
  const Eigen::Index min_dim = std::min(theta_hat.rows(), theta_hat.cols());
  if (rank < 1 || rank > min_dim) throw std::invalid_argument("make_subspace: rank out of range");
  Eigen::JacobiSVD<Matrix> svd(theta_hat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Subspace sub;
  sub.rank = rank;
  sub.singular_values = svd.singularValues();
  sub.u_hat = orthonormal_completion(svd.matrixU().leftCols(rank), mix_seed(seed, 1));
  sub.v_hat = orthonormal_completion(svd.matrixV().leftCols(rank), mix_seed(seed, 2));
  sub.validate();
  return sub;
}

FgdFit fgd_fit(const PreferenceBatch& batch, const FgdConfig& config) {
  config.validate();
  if (batch.size() == 0) throw std::invalid_argument("fgd_fit: empty record list");
  const Eigen::Index d_x = batch.d_x();
  const Eigen::Index d_phi = batch.d_phi();
  const int r = config.rank;
  if (r > std::min(d_x, d_phi)) throw std::invalid_argument("fgd_fit: rank exceeds min(d_x, d_phi)");

  const Matrix theta0 = config.init
                            ? config.init->entries()
                            : unconstrained_mle(batch, config.mle_max_iters, config.mle_tol).theta.entries();
  if (theta0.rows() != d_x || theta0.cols() != d_phi) {
    throw std::invalid_argument("fgd_fit: initial estimate shape mismatch");
  }

  Eigen::JacobiSVD<Matrix> svd0(theta0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector root_sv = svd0.singularValues().head(r).cwiseSqrt();
  Matrix u = svd0.matrixU().leftCols(r) * root_sv.asDiagonal();
  Matrix v = svd0.matrixV().leftCols(r) * root_sv.asDiagonal();
  const double sigma1 = svd0.singularValues()(0);
  double eta = sigma1 > 0.0 ? config.step_size_scale / sigma1 : config.step_size_scale;

  FgdFit fit;
  FactorState st{batch.contexts * u, batch.phi_diffs * v, {}, 0.0};
  refresh(st, batch);
  double f = st.loss + regularizer(u, v);
  if (!std::isfinite(f)) throw NumericError("fgd_fit: non-finite objective at initialization");
  fit.trace.push_back(f);

  int consecutive_increases = 0;
  for (int k = 1; k <= config.max_iters; ++k) {
    fit.iterations = k;
    const Matrix imb = u.transpose() * u - v.transpose() * v;
    const Matrix grad_u = batch.contexts.transpose() * (st.dv.array().colwise() * st.residual.array()).matrix() +
                          0.5 * u * imb;
    const Matrix u_next = u - eta * grad_u;

    FactorState mid{batch.contexts * u_next, st.dv, {}, 0.0};
    refresh(mid, batch);
    const Matrix imb_mid = u_next.transpose() * u_next - v.transpose() * v;
    const Matrix grad_v = batch.phi_diffs.transpose() * (mid.xu.array().colwise() * mid.residual.array()).matrix() -
                          0.5 * v * imb_mid;
    const Matrix v_next = v - eta * grad_v;

    FactorState next{mid.xu, batch.phi_diffs * v_next, {}, 0.0};
    refresh(next, batch);
    const double f_next = next.loss + regularizer(u_next, v_next);
    if (!std::isfinite(f_next)) throw NumericError("fgd_fit: non-finite objective", fit.trace);

    const double scale = std::max(std::abs(f), 1e-300);
    if (f_next > f) {
      if (f_next - f <= config.tol * scale) {
        fit.converged = true;  // tolerance-sized uptick: stop at the previous iterate
        break;
      }
      if (++consecutive_increases >= 10) {
        throw NumericError("fgd_fit: objective increased on 10 consecutive iterations", fit.trace);
      }
      eta *= 0.5;
      continue;
    }
    consecutive_increases = 0;
    const double rel_decrease = (f - f_next) / scale;
    u = u_next;
    v = v_next;
    st = std::move(next);
    f = f_next;
    fit.trace.push_back(f);
    if (rel_decrease < config.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.step_size = eta;
  fit.factors = {u, v};
  Matrix theta_hat = u * v.transpose();
  fit.subspace = make_subspace(theta_hat, r, config.completion_seed);
  fit.theta_hat = RewardMatrix(std::move(theta_hat));
  return fit;
}

double estimation_error(const RewardMatrix& theta_hat, const RewardMatrix& theta_star) {
  if (theta_hat.d_x() != theta_star.d_x() || theta_hat.d_phi() != theta_star.d_phi()) {
    throw std::invalid_argument("estimation_error: shape mismatch");
  }
  return (theta_hat.entries() - theta_star.entries()).norm();
}

}  // namespace loco
