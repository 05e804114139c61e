#pragma once

#include "projctl/constrained_dynamics.hpp"
#include "projctl/constraint_geometry.hpp"
#include "projctl/types.hpp"

#include <functional>
#include <optional>

namespace projctl {

/// Operational-space coordinates x(q) with optional analytic derivatives.
struct TaskFunction {
  int l = 0;
  ConfigVectorFn value;
  ConfigMatrixFn jacobian;     // optional, l x n
  StateMatrixFn jacobian_rate;  // optional, l x n
};

/// Linear task x = S q, e.g. a selection of joint angles.
inline TaskFunction linear_task(const Matrix& selection) {
  TaskFunction t;
  t.l = static_cast<int>(selection.rows());
  t.value = [selection](const Vector& q) -> Vector { return selection * q; };
  t.jacobian = [selection](const Vector&) -> Matrix { return selection; };
  t.jacobian_rate = [selection](const Vector&, const Vector&) -> Matrix {
    return Matrix::Zero(selection.rows(), selection.cols());
  };
  return t;
}

inline TaskFunction joint_task(const std::vector<int>& indices, int n) {
  Matrix sel = Matrix::Zero(static_cast<Eigen::Index>(indices.size()), n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    detail::require(indices[i] >= 0 && indices[i] < n, "joint_task: index out of range");
    sel(static_cast<Eigen::Index>(i), indices[i]) = 1.0;
  }
  return linear_task(sel);
}

struct TaskIdentityReport {
  double range_in_null = 0.0;    // |P Lambda^T - Lambda^T|
  double pinv_in_null = 0.0;     // |(I - P) Lambda^+|
  bool full_span = false;        // l == n - rank(A)
  std::optional<double> span_identity;  // |Lambda^+ Lambda - P|, full span only
  double ordering_margin = 0.0;  // min eigenvalue of P - Lambda^+ Lambda
};

struct TaskMap {
  int l = 0;
  Vector x;
  Matrix J_raw;
  Matrix Lambda;
  Matrix Lambda_pinv;
  Matrix Lambda_dot;
  Matrix Gamma_ctl;
  TaskIdentityReport identities;
};

namespace detail {

inline Matrix fd_jacobian(const ConfigVectorFn& x, const Vector& q, int l, double h) {
  Matrix j(l, q.size());
  Vector qp = q;
  Vector qm = q;
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    qp(c) = q(c) + h;
    qm(c) = q(c) - h;
    j.col(c) = (x(qp) - x(qm)) / (2.0 * h);
    qp(c) = q(c);
    qm(c) = q(c);
  }
  return j;
}

// d/dt of dx/dq from values only: mixed second difference with step h2.
inline Matrix fd_jacobian_rate(const ConfigVectorFn& x, const Vector& q,
                               const Vector& q_dot, int l, double h2) {
  Matrix jd(l, q.size());
  const Vector v = q_dot;
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    Vector e = Vector::Zero(q.size());
    e(c) = h2;
    jd.col(c) = (x(q + e + h2 * v) - x(q + e - h2 * v) - x(q - e + h2 * v) +
                 x(q - e - h2 * v)) /
                (4.0 * h2 * h2);
  }
  return jd;
}

}  // namespace detail

/**
 * Lambda = (dx/dq) P, its pseudo-inverse and rate, and the control-side
 * Gamma = Lambda^+ Lambda_dot - Omega. Derivatives not supplied by the task
 * are obtained by central differences with step h.
 *
 * Throws TaskInconsistentError when Lambda loses row rank, i.e. some task
 * direction lies in the constrained subspace.
 */
inline TaskMap build_task(const RobotModel& model, const RobotState& state,
                          const ConstraintFrame& frame, const TaskFunction& task,
                          double h = 1e-6) {
  detail::require(task.l > 0 && static_cast<bool>(task.value), "build_task: empty task");
  const int n = model.n;
  const Vector& q = state.q;
  const Matrix& P = frame.P();
  const Matrix I = Matrix::Identity(n, n);

  TaskMap t;
  t.l = task.l;
  t.x = task.value(q);
  detail::require(t.x.size() == task.l, "build_task: task value dimension");
  t.J_raw = task.jacobian ? task.jacobian(q) : detail::fd_jacobian(task.value, q, task.l, h);
  detail::require_dims(t.J_raw, task.l, n, "build_task: task Jacobian");

  Matrix j_dot;
  if (task.jacobian_rate) {
    j_dot = task.jacobian_rate(q, state.q_dot);
  } else if (task.jacobian) {
    j_dot = finite_difference_rate(task.jacobian, q, state.q_dot, h);
  } else {
    j_dot = detail::fd_jacobian_rate(task.value, q, state.q_dot, task.l, 1e-4);
  }

  t.Lambda = t.J_raw * P;
  const double scale = std::max(1.0, t.J_raw.norm());
  const int rank = numerical_rank(t.Lambda, frame.stack.rank_tol, scale);
  if (rank < task.l) {
    throw TaskInconsistentError("build_task: rank(Lambda) = " + std::to_string(rank) +
                                " < l = " + std::to_string(task.l));
  }
  t.Lambda_pinv = pseudo_inverse(t.Lambda, frame.stack.rank_tol);
  t.Lambda_dot = j_dot * P + t.J_raw * frame.bundle.P_dot;
  t.Gamma_ctl = t.Lambda_pinv * t.Lambda_dot - frame.bundle.Omega;

  auto& rep = t.identities;
  rep.range_in_null = (P * t.Lambda.transpose() - t.Lambda.transpose()).norm();
  rep.pinv_in_null = ((I - P) * t.Lambda_pinv).norm();
  rep.full_span = task.l == n - frame.rank();
  const Matrix span = t.Lambda_pinv * t.Lambda;
  if (rep.full_span) rep.span_identity = (span - P).norm();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(P - 0.5 * (span + span.transpose()),
                                            Eigen::EigenvaluesOnly);
  rep.ordering_margin = eig.eigenvalues().minCoeff();
  return t;
}

struct FeasibilityReport {
  bool task_consistent = false;       // R(Lambda^T) in N(A)
  bool actuation_sufficient = false;  // R(Lambda^T) in R(B)
  bool projected_sufficient = false;  // R(P) in R(P B)
};

namespace detail {

// rank([base | extra]) == rank(base), both ranks taken at the same absolute cutoff.
inline bool range_contains(const Matrix& base, const Matrix& extra, double tol) {
  Matrix joined(base.rows(), base.cols() + extra.cols());
  joined << base, extra;
  Eigen::JacobiSVD<Matrix> svd(joined);
  const double scale = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  if (scale == 0.0) return true;
  return numerical_rank(joined, tol, scale) == numerical_rank(base, tol, scale);
}

}  // namespace detail

inline FeasibilityReport check_feasibility(const ConstraintFrame& frame, const TaskMap& task,
                                           const Matrix& B, double tol = 1e-9) {
  FeasibilityReport r;
  const double scale =
      std::max(1.0, frame.A().norm() * task.Lambda_pinv.norm());
  r.task_consistent = frame.A().rows() == 0 ||
                      (frame.A() * task.Lambda_pinv).norm() <= tol * scale;
  r.actuation_sufficient = detail::range_contains(B, task.Lambda.transpose(), tol);
  r.projected_sufficient = detail::range_contains(frame.P() * B, frame.P(), tol);
  return r;
}

/// Generalized acceleration realizing a task acceleration:
/// q'' = Lambda^+ x'' - Gamma q', so that x'' = Lambda_dot q' + Lambda q''.
inline Vector task_accel_decompose(const TaskMap& task, const ConstraintFrame& frame,
                                   const Vector& x_ddot, const Vector& q_dot) {
  detail::require(x_ddot.size() == task.l, "task_accel_decompose: x_ddot dimension");
  detail::require(q_dot.size() == frame.n, "task_accel_decompose: q_dot dimension");
  return task.Lambda_pinv * x_ddot - task.Gamma_ctl * q_dot;
}

}  // namespace projctl
