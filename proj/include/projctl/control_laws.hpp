#pragma once

#include "projctl/constrained_dynamics.hpp"
#include "projctl/constraint_geometry.hpp"
#include "projctl/task_space.hpp"
#include "projctl/types.hpp"

namespace projctl {

namespace detail {

inline bool is_spd(const Matrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m - m.transpose()).norm() > tol * std::max(1.0, m.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > 0.0;
}

}  // namespace detail

/// Task-space PD gains. The regulation law damps joint velocities, so its
/// K_D is n x n while the tracking K_D is l x l.
struct ControllerGains {
  Matrix K_P;
  Matrix K_D;

  void validate(Eigen::Index kp_dim, Eigen::Index kd_dim) const {
    detail::require_dims(K_P, kp_dim, kp_dim, "gains.K_P");
    detail::require_dims(K_D, kd_dim, kd_dim, "gains.K_D");
    detail::require(detail::is_spd(K_P), "gains: K_P must be symmetric positive-definite");
    detail::require(detail::is_spd(K_D), "gains: K_D must be symmetric positive-definite");
  }
};

/// Critically damped gains K_P = w^2 I, K_D = 2 w I.
inline ControllerGains critically_damped_gains(int l, double omega = 5.0) {
  detail::require(omega > 0.0, "critically_damped_gains: omega must be positive");
  return {omega * omega * Matrix::Identity(l, l), 2.0 * omega * Matrix::Identity(l, l)};
}

struct ControlCommand {
  Vector tau_c;
  Vector u;
  Vector phi;    // tau_c - P B u
  Vector d;      // M_bar^{-1} phi
  Vector e;      // x_d - x
  Vector e_dot;
};

/**
 * Reference tracking torque
 *
 *   tau_c = P C q' - P tau_g + P M (Lambda^+ (xdd_d + K_D e' + K_P e) - Gamma q').
 *
 * Substituted into the constrained dynamics this yields
 * e'' + K_D e' + K_P e = 0.
 */
inline ControlCommand tracking_torque(const RobotState& state, const ConstraintFrame& frame,
                                      const TaskMap& task, const Vector& x_d,
                                      const Vector& x_d_dot, const Vector& x_d_ddot,
                                      const ControllerGains& gains) {
  gains.validate(task.l, task.l);
  detail::require(x_d.size() == task.l && x_d_dot.size() == task.l &&
                      x_d_ddot.size() == task.l,
                  "tracking_torque: reference dimension");
  detail::require(x_d.allFinite() && x_d_dot.allFinite() && x_d_ddot.allFinite(),
                  "tracking_torque: non-finite reference");
  const Matrix& P = frame.P();
  const Vector& qd = state.q_dot;
  ControlCommand cmd;
  cmd.e = x_d - task.x;
  cmd.e_dot = x_d_dot - task.Lambda * qd;
  const Vector v = x_d_ddot + gains.K_D * cmd.e_dot + gains.K_P * cmd.e;
  cmd.tau_c = P * (frame.C * qd) - P * frame.tau_g +
              P * (frame.M * (task.Lambda_pinv * v - task.Gamma_ctl * qd));
  return cmd;
}

/// Set-point regulation tau_c = P (-tau_g - K_D q' + Lambda^T K_P e), with
/// K_D acting on joint velocities (n x n).
inline ControlCommand regulation_torque(const RobotState& state, const ConstraintFrame& frame,
                                        const TaskMap& task, const Vector& x_d,
                                        const ControllerGains& gains) {
  gains.validate(task.l, frame.n);
  detail::require(x_d.size() == task.l, "regulation_torque: set-point dimension");
  ControlCommand cmd;
  cmd.e = x_d - task.x;
  cmd.e_dot = -task.Lambda * state.q_dot;
  cmd.tau_c = frame.P() * (-frame.tau_g - gains.K_D * state.q_dot +
                           task.Lambda.transpose() * (gains.K_P * cmd.e));
  return cmd;
}

/// V = 1/2 q'^T M_bar q' + 1/2 e^T K_P e.
inline double regulation_lyapunov(const ConstraintFrame& frame, const Vector& q_dot,
                                  const Vector& e, const Matrix& K_P) {
  return 0.5 * q_dot.dot(frame.M_bar * q_dot) + 0.5 * e.dot(K_P * e);
}

/// Error energy V = 1/2 e'^T e' + 1/2 e^T K_P e of the closed-loop tracking
/// error; with e'' + K_D e' + K_P e = 0 it decays at rate -e'^T K_D e'.
inline double tracking_lyapunov(const Vector& e, const Vector& e_dot, const Matrix& K_P) {
  return 0.5 * e_dot.squaredNorm() + 0.5 * e.dot(K_P * e);
}

/// Minimum-norm actuation u = (P B)^+ tau_c. Throws when tau_c is outside the
/// range of P B (underactuation).
inline Vector min_norm_actuation(const ConstraintFrame& frame, const Matrix& B,
                                 const Vector& tau_c, double tol = 1e-8) {
  detail::require(B.rows() == frame.n && tau_c.size() == frame.n,
                  "min_norm_actuation: dimension mismatch");
  const Matrix pb = frame.P() * B;
  const Vector u = pseudo_inverse(pb, frame.stack.rank_tol) * tau_c;
  const double residual = (tau_c - pb * u).norm();
  if (residual > tol * std::max(1.0, tau_c.norm())) {
    throw InfeasibleActuationError("min_norm_actuation: tau_c not in range(P B), residual " +
                                   std::to_string(residual));
  }
  return u;
}

inline Vector tracking_disturbance(const ConstraintFrame& frame, const Vector& phi) {
  detail::require(phi.size() == frame.n, "tracking_disturbance: phi dimension");
  return frame.M_bar_inv * phi;
}

/// Fills u, phi and d of a command once the actuator torques are chosen.
inline void complete_command(ControlCommand& cmd, const ConstraintFrame& frame,
                             const Vector& u) {
  cmd.u = u;
  cmd.phi = cmd.tau_c - frame.P() * (frame.B * u);
  cmd.d = tracking_disturbance(frame, cmd.phi);
}

}  // namespace projctl
