#pragma once

#include "projctl/constraint_geometry.hpp"
#include "projctl/robot_model.hpp"
#include "projctl/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace projctl {

/// Sign relating the oblique-projector reconstruction to the multipliers of
/// M q'' + C q' = B u + tau_g - A^T lambda. Checked against the saddle-point
/// solution in the test suite.
inline constexpr double kForceReconstructionSign = 1.0;

/**
 * Everything the controller needs at one state: the contact projector and its
 * rate, the constrained inertia
 *
 *   M_bar = P M P + nu (I - P),
 *   C_bar = P C P + P M (G + G^T) - nu G,   G = L,
 *
 * the oblique projector S = I - M M_bar^{-1} P and Q = M Omega + C.
 */
struct ConstraintFrame {
  int n = 0;
  JacobianStack stack;
  Matrix A_dot;
  ProjectorBundle bundle;
  Matrix M;
  Matrix C;
  Vector tau_g;
  Matrix B;
  Vector q_dot;
  Matrix M_bar;
  Matrix M_bar_inv;
  Matrix C_bar;
  Matrix S;
  Matrix Q;
  Matrix Gamma_dyn;
  double nu = 1.0;

  [[nodiscard]] const Matrix& P() const { return bundle.P; }
  [[nodiscard]] const Matrix& A() const { return stack.A; }
  [[nodiscard]] const Matrix& A_pinv() const { return bundle.A_pinv; }
  [[nodiscard]] int rank() const { return bundle.rank_A; }
};

/// nu = trace(M(q)) / n.
inline double default_nu(const RobotModel& model, const Vector& q) {
  return model.mass_matrix(q).trace() / model.n;
}

inline ConstraintFrame build_frame(const RobotModel& model, const RobotState& state,
                                   double nu, double rank_tol = kDefaultRankTol,
                                   double h = 1e-6) {
  detail::require(nu > 0.0, "build_frame: nu must be positive");
  detail::require(state.q.size() == model.n && state.q_dot.size() == model.n,
                  "build_frame: state dimension mismatch");
  const int n = model.n;
  ConstraintFrame f;
  f.n = n;
  f.nu = nu;
  f.stack = stack_jacobians(model, state.q, state.active_contacts, rank_tol);
  f.A_dot = jacobian_rate(model, state.active_contacts, state.q, state.q_dot, h);
  f.bundle = projector_rate(f.stack.A, f.A_dot, null_projector(f.stack.A, n, rank_tol));
  f.M = model.mass_matrix(state.q);
  f.C = model.coriolis_matrix(state.q, state.q_dot);
  f.tau_g = model.gravity(state.q);
  f.B = model.B;
  f.q_dot = state.q_dot;

  const Matrix& P = f.bundle.P;
  const Matrix I = Matrix::Identity(n, n);
  f.Gamma_dyn = f.bundle.L;
  const Matrix& G = f.Gamma_dyn;
  f.M_bar = P * f.M * P + nu * (I - P);
  f.M_bar = 0.5 * (f.M_bar + f.M_bar.transpose());
  f.C_bar = P * f.C * P + P * f.M * (G + G.transpose()) - nu * G;

  Eigen::LLT<Matrix> llt(f.M_bar);
  if (llt.info() != Eigen::Success) {
    throw std::logic_error("build_frame: constrained inertia is not positive-definite");
  }
  f.M_bar_inv = llt.solve(I);
  f.S = I - f.M * f.M_bar_inv * P;
  f.Q = f.M * f.bundle.Omega + f.C;
  return f;
}

/// q'' = M_bar^{-1} (tau + P tau_g - C_bar q') for an admissible generalized
/// force tau (tau = P B u for actuator torques u).
inline Vector constrained_accel_generalized(const ConstraintFrame& frame,
                                            const Vector& tau) {
  detail::require(tau.size() == frame.n, "constrained_accel: tau dimension");
  return frame.M_bar_inv *
         (tau + frame.P() * frame.tau_g - frame.C_bar * frame.q_dot);
}

inline Vector constrained_accel(const ConstraintFrame& frame, const RobotModel& model,
                                const RobotState& state, const Vector& u) {
  detail::require(u.size() == model.p, "constrained_accel: u dimension");
  detail::require(state.q_dot.size() == frame.n, "constrained_accel: state dimension");
  return constrained_accel_generalized(frame, frame.P() * model.B * u);
}

/// Contact forces with per-contact cone margins mu*lz - sqrt(lx^2 + ly^2).
struct ContactWrench {
  Vector lambda;
  Vector normal;       // lambda_z per active contact
  Vector cone_margin;  // per active contact
  bool degenerate = false;  // rank(A) < m: minimum-norm multipliers

  [[nodiscard]] bool admissible() const {
    return (normal.array() > 0.0).all() && (cone_margin.array() > 0.0).all();
  }
};

/// Affine multiplier map lambda(u) = H u + h0 of the current frame.
struct ForceMap {
  Matrix H;
  Vector h0;

  [[nodiscard]] Vector operator()(const Vector& u) const { return H * u + h0; }
};

inline ForceMap force_map(const ConstraintFrame& frame) {
  const Matrix apt = kForceReconstructionSign * frame.A_pinv().transpose();
  ForceMap map;
  map.H = apt * frame.S * frame.B;
  map.h0 = apt * frame.S * (frame.tau_g - frame.Q * frame.q_dot);
  return map;
}

inline ContactWrench wrench_from_lambda(const JacobianStack& stack, const Vector& lambda,
                                        bool degenerate) {
  ContactWrench w;
  w.lambda = lambda;
  w.degenerate = degenerate;
  const int k = stack.k();
  w.normal.resize(k);
  w.cone_margin.resize(k);
  for (int i = 0; i < k; ++i) {
    const double lx = lambda(stack.row_of(i, 0));
    const double ly = lambda(stack.row_of(i, 1));
    const double lz = lambda(stack.row_of(i, 2));
    w.normal(i) = lz;
    w.cone_margin(i) = stack.blocks[i].mu * lz - std::hypot(lx, ly);
  }
  return w;
}

/// Multipliers from A^T lambda = S (B u + tau_g - Q q'), minimum-norm when A
/// is rank-deficient.
inline ContactWrench contact_forces(const ConstraintFrame& frame, const RobotModel& model,
                                    const RobotState& state, const Vector& u) {
  detail::require(u.size() == model.p, "contact_forces: u dimension");
  const Vector applied = model.B * u + frame.tau_g - frame.Q * state.q_dot;
  const Vector lambda =
      kForceReconstructionSign * frame.A_pinv().transpose() * (frame.S * applied);
  return wrench_from_lambda(frame.stack, lambda, frame.rank() < frame.stack.m());
}

}  // namespace projctl
