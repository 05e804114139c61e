#pragma once

#include "projctl/robot_model.hpp"
#include "projctl/types.hpp"

#include <algorithm>
#include <vector>

namespace projctl {

inline constexpr double kDefaultRankTol = 1e-10;

/// Moore-Penrose pseudo-inverse by SVD. Singular values at or below
/// rank_tol * sigma_max are treated as zero.
inline Matrix pseudo_inverse(const Matrix& a, double rank_tol = kDefaultRankTol) {
  detail::require(rank_tol > 0.0, "pseudo_inverse: rank_tol must be positive");
  detail::require(a.allFinite(), "pseudo_inverse: non-finite entries");
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rank_tol * (s.size() > 0 ? s(0) : 0.0);
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) s_inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

/// Number of singular values above rank_tol * scale. With scale <= 0 the
/// cutoff is relative to the largest singular value.
inline int numerical_rank(const Matrix& a, double rank_tol = kDefaultRankTol,
                          double scale = 0.0) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  const double ref = scale > 0.0 ? scale : s(0);
  const double cutoff = rank_tol * ref;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) ++r;
  }
  return r;
}

/// Stacked contact Jacobian; `blocks[i]` describes the rows owned by the i-th
/// active contact.
struct JacobianStack {
  struct Block {
    int contact = 0;  // index into RobotModel::contacts
    int row = 0;      // first row in A
    int rows = 3;     // 3 translational rows + auxiliary rows
    double mu = 1.0;
  };

  Matrix A;
  double rank_tol = kDefaultRankTol;
  std::vector<Block> blocks;

  [[nodiscard]] int k() const { return static_cast<int>(blocks.size()); }
  [[nodiscard]] int m() const { return static_cast<int>(A.rows()); }

  /// Row of the i-th block's x, y or z component (axis 0, 1, 2).
  [[nodiscard]] int row_of(int block, int axis) const { return blocks[block].row + axis; }

  void validate() const {
    detail::require(rank_tol > 0.0, "JacobianStack: rank_tol must be positive");
    int expected = 0;
    for (const auto& b : blocks) {
      detail::require(b.row == expected && b.rows >= 3,
                      "JacobianStack: blocks must be contiguous with >= 3 rows");
      expected += b.rows;
    }
    detail::require(expected == A.rows(), "JacobianStack: row count mismatch");
  }
};

/// Projection-derived quantities of a contact Jacobian. L, Omega and P_dot are
/// filled by projector_rate.
struct ProjectorBundle {
  Matrix A_pinv;
  Matrix P;
  Matrix L;
  Matrix Omega;
  Matrix P_dot;
  int rank_A = 0;
};

/// Orthogonal projector P = I - A^+ A onto the null space of A.
inline ProjectorBundle null_projector(const Matrix& a, int n,
                                      double rank_tol = kDefaultRankTol) {
  detail::require(a.cols() == n, "null_projector: A must have n columns");
  ProjectorBundle b;
  b.A_pinv = pseudo_inverse(a, rank_tol);
  b.P = Matrix::Identity(n, n) - b.A_pinv * a;
  b.P = 0.5 * (b.P + b.P.transpose());
  b.rank_A = a.rows() == 0 ? 0 : numerical_rank(a, rank_tol);
  const Matrix zero = Matrix::Zero(n, n);
  b.L = zero;
  b.Omega = zero;
  b.P_dot = zero;
  return b;
}

inline ProjectorBundle null_projector(const Matrix& a, double rank_tol = kDefaultRankTol) {
  return null_projector(a, static_cast<int>(a.cols()), rank_tol);
}

/**
 * Completes a bundle with the rate terms for a Jacobian moving at A_dot:
 *
 *   L = -A^+ A_dot P,   P_dot = L + L^T,   Omega = L - L^T.
 *
 * Since L^T P = 0, Omega q' = P_dot q' = L q' for every admissible q'.
 */
inline ProjectorBundle projector_rate(const Matrix& a, const Matrix& a_dot,
                                      ProjectorBundle bundle) {
  detail::require_dims(a_dot, a.rows(), a.cols(), "projector_rate: A_dot");
  detail::require_dims(bundle.P, a.cols(), a.cols(), "projector_rate: bundle.P");
  bundle.L = -bundle.A_pinv * a_dot * bundle.P;
  bundle.P_dot = bundle.L + bundle.L.transpose();
  bundle.Omega = bundle.L - bundle.L.transpose();
  return bundle;
}

/// Central-difference time derivative of a configuration-dependent matrix
/// along q_dot: sum_j (F(q + h e_j) - F(q - h e_j)) / (2h) * q_dot_j.
template <class MatrixFn>
Matrix finite_difference_rate(const MatrixFn& fn, const Vector& q,
                              const Vector& q_dot, double h) {
  detail::require(h > 0.0, "finite_difference_rate: h must be positive");
  detail::require(q.size() == q_dot.size(), "finite_difference_rate: size mismatch");
  Matrix f0 = fn(q);
  Matrix rate = Matrix::Zero(f0.rows(), f0.cols());
  Vector qp = q;
  Vector qm = q;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (q_dot(j) == 0.0) continue;
    qp(j) = q(j) + h;
    qm(j) = q(j) - h;
    rate += (fn(qp) - fn(qm)) * (q_dot(j) / (2.0 * h));
    qp(j) = q(j);
    qm(j) = q(j);
  }
  return rate;
}

/// Stacks the Jacobians of the active contacts in the given order.
inline JacobianStack stack_jacobians(const RobotModel& model, const Vector& q,
                                     const std::vector<int>& active,
                                     double rank_tol = kDefaultRankTol) {
  JacobianStack stack;
  stack.rank_tol = rank_tol;
  int rows = 0;
  for (int idx : active) {
    detail::require(idx >= 0 && idx < static_cast<int>(model.contacts.size()),
                    "stack_jacobians: contact index out of range");
    const auto& c = model.contacts[idx];
    stack.blocks.push_back({idx, rows, c.rows(), c.mu});
    rows += c.rows();
  }
  stack.A = Matrix::Zero(rows, model.n);
  for (const auto& b : stack.blocks) {
    Matrix ai = model.contacts[b.contact].jacobian(q);
    detail::require_dims(ai, b.rows, model.n, "contact Jacobian");
    stack.A.middleRows(b.row, b.rows) = ai;
  }
  return stack;
}

/// Rate of the stacked contact Jacobian. Contacts that supply an analytic rate
/// use it; the rest are differenced with step h.
inline Matrix jacobian_rate(const RobotModel& model, const std::vector<int>& active,
                            const Vector& q, const Vector& q_dot, double h = 1e-6) {
  detail::require(h > 0.0, "jacobian_rate: h must be positive");
  int rows = 0;
  for (int idx : active) rows += model.contacts.at(idx).rows();
  Matrix a_dot = Matrix::Zero(rows, model.n);
  int row = 0;
  for (int idx : active) {
    const auto& c = model.contacts[idx];
    if (c.jacobian_rate) {
      a_dot.middleRows(row, c.rows()) = c.jacobian_rate(q, q_dot);
    } else {
      a_dot.middleRows(row, c.rows()) = finite_difference_rate(c.jacobian, q, q_dot, h);
    }
    row += c.rows();
  }
  return a_dot;
}

}  // namespace projctl
