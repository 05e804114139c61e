#pragma once

// Small hand-built models shared by the tests.

#include "projctl/models.hpp"

#include <algorithm>

namespace testfix {

using projctl::Matrix;
using projctl::Vector;

/// Constant-inertia model, B = I, one contact whose Jacobian is A padded
/// with zero rows up to the three translational rows.
inline projctl::RobotModel synthetic_model(const Matrix& M, const Matrix& A) {
  const auto n = static_cast<int>(M.rows());
  const Eigen::Index rows = std::max<Eigen::Index>(3, A.rows());
  Matrix padded = Matrix::Zero(rows, n);
  padded.topRows(A.rows()) = A;
  projctl::RobotModel m;
  m.name = "synthetic";
  m.n = n;
  m.p = n;
  m.mass_matrix = [M](const Vector&) -> Matrix { return M; };
  m.coriolis_matrix = [n](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(n, n); };
  m.gravity = [n](const Vector&) -> Vector { return Vector::Zero(n); };
  m.B = Matrix::Identity(n, n);
  projctl::ContactPoint c;
  c.name = "c";
  c.mu = 1.0;
  c.aux_rows = static_cast<int>(rows) - 3;
  c.jacobian = [padded](const Vector&) -> Matrix { return padded; };
  c.jacobian_rate = [padded](const Vector&, const Vector&) -> Matrix {
    return Matrix::Zero(padded.rows(), padded.cols());
  };
  m.contacts.push_back(c);
  projctl::apply_motors(m, projctl::MotorParams::uniform(n, 1e3));
  return m;
}

/// Constant-inertia model without contacts, B = I.
inline projctl::RobotModel free_model(const Matrix& M, const Vector& tau_g) {
  const auto n = static_cast<int>(M.rows());
  auto m = synthetic_model(M, Matrix::Zero(0, n));
  m.contacts.clear();
  m.gravity = [tau_g](const Vector&) -> Vector { return tau_g; };
  return m;
}

inline projctl::RobotState state_of(const Vector& q, const Vector& q_dot,
                                    std::vector<int> active) {
  projctl::RobotState s;
  s.q = q;
  s.q_dot = q_dot;
  s.active_contacts = std::move(active);
  return s;
}

}  // namespace testfix
