#include "loco/rtv_reduce.h"

#include <stdexcept>

namespace loco {

Eigen::Index rtv_dim(Eigen::Index d_x, Eigen::Index d_phi, Eigen::Index r) {
  return (d_x + d_phi) * r - r * r;
}

namespace {

void check_shape(Eigen::Index d_x, Eigen::Index d_phi, const Subspace& subspace) {
  if (d_x != subspace.d_x() || d_phi != subspace.d_phi()) {
    throw std::invalid_argument("rtv: shape does not match subspace");
  }
}

template <typename Block>
void append_colmajor(Vector& out, Eigen::Index& offset, const Block& block) {
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) out(offset++) = block(i, j);
  }
}

}  // namespace

RtvParts rtv_matrix(const Matrix& m, const Subspace& subspace) {
  check_shape(m.rows(), m.cols(), subspace);
  const Eigen::Index r = subspace.rank;
  const Eigen::Index dx2 = m.rows() - r;
  const Eigen::Index dp2 = m.cols() - r;
  const Matrix rotated = subspace.u_hat.transpose() * m * subspace.v_hat;
  RtvParts parts;
  parts.kept.resize(rtv_dim(m.rows(), m.cols(), r));
  Eigen::Index offset = 0;
  append_colmajor(parts.kept, offset, rotated.topLeftCorner(r, r));
  append_colmajor(parts.kept, offset, rotated.topRightCorner(r, dp2));
  append_colmajor(parts.kept, offset, rotated.bottomLeftCorner(dx2, r));
  parts.residual = rotated.bottomRightCorner(dx2, dp2);
  return parts;
}

Matrix rtv_to_matrix(const Vector& kept, const Subspace& subspace, const Matrix& residual) {
  const Eigen::Index d_x = subspace.d_x();
  const Eigen::Index d_phi = subspace.d_phi();
  const Eigen::Index r = subspace.rank;
  if (kept.size() != rtv_dim(d_x, d_phi, r)) {
    throw std::invalid_argument("rtv_to_matrix: vector length does not match subspace");
  }
  Matrix rotated = Matrix::Zero(d_x, d_phi);
  Eigen::Index offset = 0;
  auto fill = [&](Eigen::Index row0, Eigen::Index col0, Eigen::Index rows, Eigen::Index cols) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) rotated(row0 + i, col0 + j) = kept(offset++);
    }
  };
  fill(0, 0, r, r);
  fill(0, r, r, d_phi - r);
  fill(r, 0, d_x - r, r);
  if (residual.size() > 0) {
    if (residual.rows() != d_x - r || residual.cols() != d_phi - r) {
      throw std::invalid_argument("rtv_to_matrix: residual block has wrong shape");
    }
    rotated.bottomRightCorner(d_x - r, d_phi - r) = residual;
  }
  return subspace.u_hat * rotated * subspace.v_hat.transpose();
}

Vector rtv_from_rotated(const Vector& x_rot, const Vector& phi_rot, int rank) {
  const Eigen::Index d_x = x_rot.size();
  const Eigen::Index d_phi = phi_rot.size();
  const Eigen::Index r = rank;
  Vector z(rtv_dim(d_x, d_phi, r));
  Eigen::Index offset = 0;
  for (Eigen::Index j = 0; j < r; ++j) {
    z.segment(offset, r) = x_rot.head(r) * phi_rot(j);
    offset += r;
  }
  for (Eigen::Index j = r; j < d_phi; ++j) {
    z.segment(offset, r) = x_rot.head(r) * phi_rot(j);
    offset += r;
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    z.segment(offset, d_x - r) = x_rot.tail(d_x - r) * phi_rot(j);
    offset += d_x - r;
  }
  return z;
}

Vector rtv_feature(const Vector& x, const Vector& phi, const Subspace& subspace) {
  check_shape(x.size(), phi.size(), subspace);
  return rtv_from_rotated(subspace.u_hat.transpose() * x, subspace.v_hat.transpose() * phi,
                          subspace.rank);
}

ReducedBatch reduce_batch(const PreferenceBatch& batch, const Subspace& subspace) {
  check_shape(batch.d_x(), batch.d_phi(), subspace);
  const Eigen::Index d_x = batch.d_x();
  const Eigen::Index d_phi = batch.d_phi();
  const Eigen::Index r = subspace.rank;
  const Matrix x_rot = batch.contexts * subspace.u_hat;
  const Matrix phi_rot = batch.phi_diffs * subspace.v_hat;
  ReducedBatch out;
  out.labels = batch.labels;
  out.features.resize(batch.size(), rtv_dim(d_x, d_phi, r));
  Eigen::Index col = 0;
  for (Eigen::Index j = 0; j < d_phi; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      out.features.col(col++) = x_rot.col(i).cwiseProduct(phi_rot.col(j));
    }
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = r; i < d_x; ++i) {
      out.features.col(col++) = x_rot.col(i).cwiseProduct(phi_rot.col(j));
    }
  }
  return out;
}

double reduced_nll(const Vector& theta_rtv, const ReducedBatch& data) {
  if (data.size() == 0) throw std::invalid_argument("reduced_nll: empty record list");
  if (theta_rtv.size() != data.features.cols()) {
    throw std::invalid_argument("reduced_nll: parameter length mismatch");
  }
  return LogisticProblem{data.features, data.labels}.value(theta_rtv);
}

Vector reduced_nll_grad(const Vector& theta_rtv, const ReducedBatch& data) {
  if (data.size() == 0) throw std::invalid_argument("reduced_nll_grad: empty record list");
  if (theta_rtv.size() != data.features.cols()) {
    throw std::invalid_argument("reduced_nll_grad: parameter length mismatch");
  }
  return LogisticProblem{data.features, data.labels}.gradient(theta_rtv);
}

ReducedMleFit reduced_mle(const ReducedBatch& data, int max_iters, double tol,
                          std::optional<Vector> init) {
  if (data.size() == 0) throw std::invalid_argument("reduced_mle: empty record list");
  SolverResult solved =
      minimize_logistic({data.features, data.labels}, {max_iters, tol}, std::move(init));
  ReducedMleFit fit;
  fit.theta_rtv = std::move(solved.solution);
  fit.iterations = solved.iterations;
  fit.grad_norm = solved.grad_norm;
  fit.converged = solved.converged;
  fit.underdetermined = data.features.cols() > data.size();
  return fit;
}

void ReducedModel::validate() const {
  subspace.validate();
  if (theta_rtv.size() != rtv_dim(subspace.d_x(), subspace.d_phi(), subspace.rank)) {
    throw std::invalid_argument("ReducedModel: vector length must be (d_x + d_phi) r - r^2");
  }
}

double ReducedModel::reward(const Vector& x, const Vector& phi) const {
  return rtv_feature(x, phi, subspace).dot(theta_rtv);
}

}  // namespace loco
