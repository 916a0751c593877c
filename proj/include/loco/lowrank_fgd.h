#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "loco/core_model.h"
#include "loco/likelihood.h"

namespace loco {

struct FgdConfig {
  int rank = 1;
  double step_size_scale = 0.25;  // eta = step_size_scale / sigma_1(Theta_0)
  int max_iters = 2000;
  double tol = 1e-8;              // relative objective decrease
  // Initial estimate; the unconstrained MLE is used when empty.
  std::optional<RewardMatrix> init;
  int mle_max_iters = 100;
  double mle_tol = 1e-8;
  std::uint64_t completion_seed = 0;

  void validate() const;
};

// Estimated singular subspace; columns [0, rank) of u_hat / v_hat span the
// leading singular vectors, the remaining columns complete the bases.
struct Subspace {
  Matrix u_hat;  // d_x x d_x, orthogonal
  Matrix v_hat;  // d_phi x d_phi, orthogonal
  int rank = 0;
  Vector singular_values;

  Eigen::Index d_x() const { return u_hat.rows(); }
  Eigen::Index d_phi() const { return v_hat.rows(); }
  void validate() const;
};

// Design matrix for the full vectorized space: row t is vec(x_t dphi_t') in
// column-major order, i.e. entry (i + j * d_x) = x_ti * dphi_tj.
Matrix full_design(const PreferenceBatch& batch);

struct MleFit {
  RewardMatrix theta;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  std::vector<double> trace;
};

// Minimizer of nll over all d_x x d_phi matrices (Newton with line search).
MleFit unconstrained_mle(const PreferenceBatch& batch, int max_iters = 100,
                         double tol = 1e-8,
                         std::optional<RewardMatrix> init = std::nullopt);

struct FgdFit {
  RewardMatrix theta_hat;
  FactoredParams factors;
  Subspace subspace;
  std::vector<double> trace;  // factored objective, starting at the initializer
  int iterations = 0;
  bool converged = false;
  double step_size = 0.0;     // final learning rate after any backoff
};

// Alternating factored gradient descent from a balanced SVD initialization.
FgdFit fgd_fit(const PreferenceBatch& batch, const FgdConfig& config);

// Full orthogonal SVD bases of theta_hat, with columns past `rank` replaced by
// a seeded random orthonormal completion.
Subspace make_subspace(const Matrix& theta_hat, int rank, std::uint64_t seed);

double estimation_error(const RewardMatrix& theta_hat, const RewardMatrix& theta_star);

}  // namespace loco
