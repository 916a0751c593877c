#pragma once

#include <span>

#include "loco/core_model.h"
#include "loco/likelihood.h"
#include "loco/logistic_solver.h"
#include "loco/lowrank_fgd.h"

namespace loco {

// Length of the reduced vector: (d_x + d_phi) r - r^2.
Eigen::Index rtv_dim(Eigen::Index d_x, Eigen::Index d_phi, Eigen::Index r);

// Rotation M_r = U' M V split into the kept blocks (11, 12, 21), each
// vectorized column-major and concatenated in that order, and the dropped
// (2,2) block.
struct RtvParts {
  Vector kept;
  Matrix residual;  // (d_x - r) x (d_phi - r), possibly empty
};

RtvParts rtv_matrix(const Matrix& m, const Subspace& subspace);

// Inverse of the kept part: U [[11, 12], [21, residual]] V'. A zero-size or
// empty residual is treated as zero.
Matrix rtv_to_matrix(const Vector& kept, const Subspace& subspace,
                     const Matrix& residual = Matrix());

// Kept part of rtv_matrix(x * phi', subspace) without forming the outer product.
Vector rtv_feature(const Vector& x, const Vector& phi, const Subspace& subspace);

// Same as rtv_feature but from already rotated vectors U'x and V'phi.
Vector rtv_from_rotated(const Vector& x_rot, const Vector& phi_rot, int rank);

struct ReducedBatch {
  Matrix features;  // n x k, row t = z_t,rtv
  Vector labels;
  Eigen::Index size() const { return labels.size(); }
};

ReducedBatch reduce_batch(const PreferenceBatch& batch, const Subspace& subspace);

double reduced_nll(const Vector& theta_rtv, const ReducedBatch& data);
Vector reduced_nll_grad(const Vector& theta_rtv, const ReducedBatch& data);

struct ReducedMleFit {
  Vector theta_rtv;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool underdetermined = false;  // k > n
};

ReducedMleFit reduced_mle(const ReducedBatch& data, int max_iters = 100, double tol = 1e-8,
                          std::optional<Vector> init = std::nullopt);

struct ReducedModel {
  Subspace subspace;
  Vector theta_rtv;

  void validate() const;
  // z_rtv(x, phi)' theta_rtv.
  double reward(const Vector& x, const Vector& phi) const;
  // Full-space matrix with the (2,2) block set to zero.
  Matrix to_matrix() const { return rtv_to_matrix(theta_rtv, subspace); }
};

}  // namespace loco
