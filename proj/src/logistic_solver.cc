#include "loco/logistic_solver.h"

#include <cmath>
#include <stdexcept>

namespace loco {

double LogisticProblem::value(const Vector& w) const {
  const Vector g = design * w;
  double total = 0.0;
  for (Eigen::Index t = 0; t < g.size(); ++t) {
    total += softplus_neg(g(t)) + (1.0 - labels(t)) * g(t);
  }
  return total / static_cast<double>(g.size());
}

Vector LogisticProblem::gradient(const Vector& w) const {
  const Vector g = design * w;
  Vector residual(g.size());
  for (Eigen::Index t = 0; t < g.size(); ++t) residual(t) = sigmoid(g(t)) - labels(t);
  return design.transpose() * residual / static_cast<double>(g.size());
}

SolverResult minimize_logistic(const LogisticProblem& problem, const SolverOptions& opts,
                               std::optional<Vector> init) {
  const Eigen::Index n = problem.design.rows();
  const Eigen::Index p = problem.design.cols();
  if (n == 0) throw std::invalid_argument("minimize_logistic: empty design");
  if (problem.labels.size() != n) {
    throw std::invalid_argument("minimize_logistic: label count mismatch");
  }

  SolverResult result;
  result.solution = init ? *init : Vector::Zero(p);
  if (result.solution.size() != p) {
    throw std::invalid_argument("minimize_logistic: init has wrong length");
  }

  Vector w = result.solution;
  double f = problem.value(w);
  if (!std::isfinite(f)) throw NumericError("minimize_logistic: non-finite objective");
  result.trace.push_back(f);

  for (int it = 0; it < opts.max_iters; ++it) {
    const Vector g = problem.design * w;
    Vector residual(n);
    Vector curvature(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double s = sigmoid(g(t));
      residual(t) = s - problem.labels(t);
      curvature(t) = s * (1.0 - s);
    }
    const Vector grad = problem.design.transpose() * residual / static_cast<double>(n);
    result.grad_norm = grad.norm();
    if (!std::isfinite(result.grad_norm)) {
      throw NumericError("minimize_logistic: non-finite gradient", result.trace);
    }
    if (result.grad_norm <= opts.tol) {
      result.converged = true;
      break;
    }

    const Matrix weighted =
        problem.design.array().colwise() * (curvature.array() / static_cast<double>(n)).sqrt();
    Matrix hessian = Matrix::Zero(p, p);
    hessian.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    const double damping = 1e-10 * (1.0 + hessian.diagonal().sum() / static_cast<double>(p));
    hessian.diagonal().array() += damping;
    const Vector step = -hessian.selfadjointView<Eigen::Lower>().ldlt().solve(grad);

    const double slope = grad.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector trial = w + alpha * step;
      const double f_trial = problem.value(trial);
      if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * alpha * slope) {
        w = trial;
        f = f_trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    result.iterations = it + 1;
    if (!accepted) break;  // no further decrease representable
    if (!std::isfinite(f)) throw NumericError("minimize_logistic: non-finite objective", result.trace);
    result.trace.push_back(f);
  }
  if (!result.converged) {
    result.grad_norm = problem.gradient(w).norm();
    result.converged = result.grad_norm <= opts.tol;
  }
  result.solution = std::move(w);
  return result;
}

}  // namespace loco
