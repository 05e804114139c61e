#pragma once

#include "projctl/constrained_dynamics.hpp"
#include "projctl/constraint_geometry.hpp"
#include "projctl/robot_model.hpp"
#include "projctl/types.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace projctl {

/// W_jj = R_j / K_t_j^2, so that u^T W u is the copper loss i^T R i.
inline Matrix motor_weighting(const Vector& resistance, const Vector& torque_constant) {
  detail::require(resistance.size() == torque_constant.size(),
                  "motor_weighting: size mismatch");
  Vector w(resistance.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    detail::require(torque_constant(j) != 0.0, "motor_weighting: zero torque constant");
    detail::require(resistance(j) > 0.0, "motor_weighting: resistance must be positive");
    w(j) = resistance(j) / (torque_constant(j) * torque_constant(j));
  }
  return w.asDiagonal();
}

inline double power_loss(const Vector& u, const Matrix& W) {
  detail::require_dims(W, u.size(), u.size(), "power_loss: W");
  return u.dot(W * u);
}

/// Friction-cone coefficients of one contact: lambda_z(u) = z^T u + alpha and
/// mu^2 lambda_z^2 - lambda_x^2 - lambda_y^2 = u^T G u + gamma^T u + beta.
struct ConeConstraint {
  int contact = 0;
  double mu = 1.0;
  Vector a_x, a_y, a_z;
  Matrix Pi;
  Vector z;
  double alpha = 0.0;
  Matrix G;
  Vector gamma;
  double beta = 0.0;

  [[nodiscard]] double linear(const Vector& u) const { return z.dot(u) + alpha; }
  [[nodiscard]] double quadratic(const Vector& u) const {
    return u.dot(G * u) + gamma.dot(u) + beta;
  }
};

/// Extra affine inequality a^T u + b >= 0 (e.g. foot moments).
struct LinearRow {
  Vector a;
  double b = 0.0;
  int multiplier_row = -1;
};

/**
 * Power-minimizing torque program
 *
 *   minimize   u^T W u                 (or u^T W' u - rho b^T u when relaxed)
 *   subject to tau_c - E u = 0,  E = P B
 *              E_extra u = t_extra     (force regulation rows)
 *              c(u) >= 0
 *
 * with c(u) stacked per contact as (linear, quadratic), then -u + u_max,
 * then u - u_min, then the extension rows.
 */
struct TorqueProgram {
  int p = 0;
  Matrix W;
  Matrix E;
  Vector tau_c;
  Matrix E_extra;
  Vector t_extra;
  std::vector<ConeConstraint> cones;
  Vector u_min;
  Vector u_max;
  std::vector<LinearRow> extension_rows;
  Vector default_start;  // B^T tau_c

  struct Relaxation {
    bool enabled = false;
    double rho = 0.0;
    Matrix W_prime;
    Vector b;
  } relaxation;

  [[nodiscard]] int constraint_count() const {
    return 2 * static_cast<int>(cones.size()) + 2 * p +
           static_cast<int>(extension_rows.size());
  }

  [[nodiscard]] const Matrix& objective_matrix() const {
    return relaxation.enabled ? relaxation.W_prime : W;
  }

  [[nodiscard]] double objective(const Vector& u) const {
    double f = u.dot(objective_matrix() * u);
    if (relaxation.enabled) f -= relaxation.rho * relaxation.b.dot(u);
    return f;
  }

  [[nodiscard]] Vector objective_gradient(const Vector& u) const {
    Vector g = 2.0 * (objective_matrix() * u);
    if (relaxation.enabled) g -= relaxation.rho * relaxation.b;
    return g;
  }

  [[nodiscard]] Vector constraints(const Vector& u) const {
    Vector c(constraint_count());
    int i = 0;
    for (const auto& cone : cones) {
      c(i++) = cone.linear(u);
      c(i++) = cone.quadratic(u);
    }
    for (int j = 0; j < p; ++j) c(i++) = u_max(j) - u(j);
    for (int j = 0; j < p; ++j) c(i++) = u(j) - u_min(j);
    for (const auto& row : extension_rows) c(i++) = row.a.dot(u) + row.b;
    return c;
  }

  /// Row i holds the gradient of c_i at u.
  [[nodiscard]] Matrix constraint_jacobian(const Vector& u) const {
    Matrix jac = Matrix::Zero(constraint_count(), p);
    int i = 0;
    for (const auto& cone : cones) {
      jac.row(i++) = cone.z.transpose();
      jac.row(i++) = (2.0 * (cone.G * u) + cone.gamma).transpose();
    }
    for (int j = 0; j < p; ++j) jac(i++, j) = -1.0;
    for (int j = 0; j < p; ++j) jac(i++, j) = 1.0;
    for (const auto& row : extension_rows) jac.row(i++) = row.a.transpose();
    return jac;
  }

  /// Residual of every equality row stacked: (tau_c - E u; t_extra - E_extra u).
  /// The first block is dropped when the program is relaxed.
  [[nodiscard]] Vector equality_residual(const Vector& u) const {
    const Eigen::Index main = relaxation.enabled ? 0 : E.rows();
    Vector r(main + E_extra.rows());
    if (main > 0) r.head(main) = tau_c - E * u;
    if (E_extra.rows() > 0) r.tail(E_extra.rows()) = t_extra - E_extra * u;
    return r;
  }

  [[nodiscard]] Vector phi(const Vector& u) const { return tau_c - E * u; }
};

struct ProgramOptions {
  bool include_cones = true;
};

/// Cone coefficients for every active contact of the frame.
inline std::vector<ConeConstraint> assemble_cone_constraints(const RobotModel& model,
                                                             const RobotState& state,
                                                             const ConstraintFrame& frame) {
  detail::require(model.B.rows() == frame.n, "assemble_cone_constraints: B rows");
  const Matrix& S = frame.S;
  const Matrix& Ap = frame.A_pinv();
  const Matrix& B = frame.B;
  const Vector drift = frame.Q * state.q_dot - frame.tau_g;  // Q q' - tau_g
  std::vector<ConeConstraint> out;
  for (int i = 0; i < frame.stack.k(); ++i) {
    ConeConstraint c;
    c.contact = frame.stack.blocks[i].contact;
    c.mu = frame.stack.blocks[i].mu;
    detail::require(frame.stack.row_of(i, 2) < Ap.cols(),
                    "assemble_cone_constraints: selector out of range");
    c.a_x = kForceReconstructionSign * Ap.col(frame.stack.row_of(i, 0));
    c.a_y = kForceReconstructionSign * Ap.col(frame.stack.row_of(i, 1));
    c.a_z = kForceReconstructionSign * Ap.col(frame.stack.row_of(i, 2));
    const Matrix inner = -c.a_x * c.a_x.transpose() - c.a_y * c.a_y.transpose() +
                         c.mu * c.mu * c.a_z * c.a_z.transpose();
    c.Pi = S.transpose() * inner * S;
    c.Pi = 0.5 * (c.Pi + c.Pi.transpose());
    c.z = B.transpose() * (S.transpose() * c.a_z);
    c.alpha = -c.a_z.dot(S * drift);
    c.G = B.transpose() * c.Pi * B;
    c.beta = drift.dot(c.Pi * drift);
    c.gamma = -2.0 * (B.transpose() * (c.Pi * drift));
    out.push_back(std::move(c));
  }
  return out;
}

inline TorqueProgram assemble_program(const RobotModel& model, const RobotState& state,
                                      const ConstraintFrame& frame, const Vector& tau_c,
                                      const ProgramOptions& options = {}) {
  detail::require(tau_c.size() == frame.n, "assemble_program: tau_c dimension");
  TorqueProgram prog;
  prog.p = model.p;
  prog.W = motor_weighting(model.motor_resistance, model.torque_constant);
  prog.E = frame.P() * model.B;
  prog.tau_c = tau_c;
  prog.E_extra = Matrix::Zero(0, model.p);
  prog.t_extra = Vector::Zero(0);
  if (options.include_cones) prog.cones = assemble_cone_constraints(model, state, frame);
  prog.u_min = model.u_min;
  prog.u_max = model.u_max;
  prog.default_start = model.B.transpose() * tau_c;
  return prog;
}

/// Replaces the task equality by the penalty rho |M_bar^{-1}(tau_c - P B u)|^2.
inline TorqueProgram relax_program(TorqueProgram program, const ConstraintFrame& frame,
                                   double rho) {
  detail::require(rho > 0.0, "relax_program: rho must be positive");
  const Matrix Minv2 = frame.M_bar_inv * frame.M_bar_inv;
  const Matrix PB = frame.P() * frame.B;
  program.relaxation.enabled = true;
  program.relaxation.rho = rho;
  program.relaxation.W_prime = program.W + rho * PB.transpose() * Minv2 * PB;
  program.relaxation.W_prime =
      0.5 * (program.relaxation.W_prime + program.relaxation.W_prime.transpose());
  program.relaxation.b = 2.0 * frame.B.transpose() * frame.P() * Minv2 * program.tau_c;
  return program;
}

/// Appends c'(u) = -lambda_j(u) >= 0 for every multiplier row j in `rows`.
inline TorqueProgram add_moment_constraints(TorqueProgram program,
                                            const ConstraintFrame& frame,
                                            const RobotModel& model, const RobotState& state,
                                            const std::vector<int>& rows) {
  (void)state;
  detail::require(model.p == program.p, "add_moment_constraints: model mismatch");
  if (rows.empty()) return program;
  const ForceMap map = force_map(frame);
  for (int j : rows) {
    detail::require(j >= 0 && j < map.H.rows(), "add_moment_constraints: selector out of range");
    program.extension_rows.push_back({-map.H.row(j).transpose(), -map.h0(j), j});
  }
  return program;
}

/// Appends lambda_j(u) = lambda_desired for every multiplier row j in `rows`.
inline TorqueProgram add_force_regulation(TorqueProgram program, const ConstraintFrame& frame,
                                          const RobotModel& model, const RobotState& state,
                                          const std::vector<int>& rows,
                                          const Vector& lambda_desired) {
  (void)state;
  detail::require(model.p == program.p, "add_force_regulation: model mismatch");
  detail::require(static_cast<Eigen::Index>(rows.size()) == lambda_desired.size(),
                  "add_force_regulation: target size mismatch");
  const ForceMap map = force_map(frame);
  const Eigen::Index old = program.E_extra.rows();
  const auto add = static_cast<Eigen::Index>(rows.size());
  Matrix e(old + add, program.p);
  Vector t(old + add);
  if (old > 0) {
    e.topRows(old) = program.E_extra;
    t.head(old) = program.t_extra;
  }
  for (Eigen::Index i = 0; i < add; ++i) {
    const int j = rows[static_cast<std::size_t>(i)];
    detail::require(j >= 0 && j < map.H.rows(), "add_force_regulation: selector out of range");
    e.row(old + i) = map.H.row(j);
    t(old + i) = lambda_desired(i) - map.h0(j);
  }
  program.E_extra = e;
  program.t_extra = t;
  return program;
}

/// Indices of inequality rows with |c_i(u)| <= tol (not strictly satisfiable there).
inline std::vector<int> boundary_rows(const TorqueProgram& program, const Vector& u,
                                      double tol = 1e-9) {
  std::vector<int> out;
  const Vector c = program.constraints(u);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (std::abs(c(i)) <= tol) out.push_back(static_cast<int>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solver

struct BarrierParams {
  double eta0 = 1.0;
  double kappa = 0.2;
  double eps = 1e-8;
  double newton_tol = 1e-10;
  int max_iters = 1000;
  double ls_alpha = 0.25;
  double ls_beta = 0.5;
  double margin_rel = 1e-9;
  double equality_tol = 1e-9;

  void validate() const {
    detail::require(eta0 > 0.0, "barrier: eta0 must be positive");
    detail::require(kappa > 0.0 && kappa < 1.0, "barrier: kappa must lie in (0, 1)");
    detail::require(eps > 0.0, "barrier: eps must be positive");
    detail::require(newton_tol > 0.0, "barrier: newton_tol must be positive");
    detail::require(max_iters > 0, "barrier: max_iters must be positive");
    detail::require(ls_alpha > 0.0 && ls_alpha < 0.5, "barrier: ls_alpha must lie in (0, 0.5)");
    detail::require(ls_beta > 0.0 && ls_beta < 1.0, "barrier: ls_beta must lie in (0, 1)");
  }
};

enum class SolverStatus {
  optimal,
  relaxed,
  infeasible_equality,
  infeasible_inequality,
  solver_failure,
};

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::relaxed: return "relaxed";
    case SolverStatus::infeasible_equality: return "infeasible_equality";
    case SolverStatus::infeasible_inequality: return "infeasible_inequality";
    case SolverStatus::solver_failure: return "solver_failure";
  }
  return "unknown";
}

struct SolverReport {
  Vector u_star;
  Vector omega;  // multiplier of the task equality (n entries)
  Vector omega_extra;
  double eta_final = 0.0;
  int newton_iters = 0;
  int centering_steps = 0;
  double duality_gap = 0.0;
  double objective = 0.0;  // u^T W u with the motor weighting
  double kkt_residual = 0.0;
  double equality_residual = 0.0;
  bool hessian_regularized = false;
  Vector constraint_margins;
  std::vector<double> path_objective;  // true objective after each centering step
  SolverStatus status = SolverStatus::solver_failure;
  std::string message;

  [[nodiscard]] bool ok() const {
    return status == SolverStatus::optimal || status == SolverStatus::relaxed;
  }
};

/// Points satisfying every equality row: u = u_p + N z.
struct AffineSet {
  Vector u_p;
  Matrix N;
  double residual = 0.0;
  bool consistent = true;

  [[nodiscard]] Vector project(const Vector& u) const {
    return u_p + N * (N.transpose() * (u - u_p));
  }
};

inline AffineSet equality_affine_set(const TorqueProgram& program, double tol = 1e-9) {
  const int p = program.p;
  const Eigen::Index main = program.relaxation.enabled ? 0 : program.E.rows();
  const Eigen::Index rows = main + program.E_extra.rows();
  AffineSet set;
  if (rows == 0) {
    set.u_p = Vector::Zero(p);
    set.N = Matrix::Identity(p, p);
    return set;
  }
  Matrix E(rows, p);
  Vector t(rows);
  if (main > 0) {
    E.topRows(main) = program.E;
    t.head(main) = program.tau_c;
  }
  if (program.E_extra.rows() > 0) {
    E.bottomRows(program.E_extra.rows()) = program.E_extra;
    t.tail(program.E_extra.rows()) = program.t_extra;
  }
  Eigen::JacobiSVD<Matrix> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cutoff = kDefaultRankTol * (s.size() > 0 ? s(0) : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) ++rank;
  }
  Vector s_inv = Vector::Zero(s.size());
  for (int i = 0; i < rank; ++i) s_inv(i) = 1.0 / s(i);
  const Matrix U = svd.matrixU().leftCols(s.size());
  const Matrix V = svd.matrixV();
  set.u_p = V.leftCols(s.size()) * (s_inv.asDiagonal() * (U.transpose() * t));
  set.N = V.rightCols(p - rank);
  set.residual = (E * set.u_p - t).norm();
  set.consistent = set.residual <= tol * std::max(1.0, t.norm());
  return set;
}

struct Phase1Result {
  bool feasible = false;
  Vector u;
  double best_margin = -std::numeric_limits<double>::infinity();  // min_i c_i(u)
  double equality_residual = 0.0;
  SolverStatus status = SolverStatus::infeasible_inequality;
  int iterations = 0;
};

namespace detail {

// Cholesky of H + tau I with the smallest tau from a geometric ladder.
inline Eigen::LLT<Matrix> regularized_llt(const Matrix& h, bool& regularized) {
  Eigen::LLT<Matrix> llt(h);
  regularized = false;
  if (llt.info() == Eigen::Success) return llt;
  const double base = 1e-10 * std::max(1.0, h.norm());
  const Matrix I = Matrix::Identity(h.rows(), h.cols());
  for (double tau = base; tau < 1e20; tau *= 10.0) {
    llt.compute(h + tau * I);
    if (llt.info() == Eigen::Success) {
      regularized = true;
      return llt;
    }
  }
  regularized = true;
  llt.compute(I);
  return llt;
}

inline Vector row_margins(const TorqueProgram& prog, const Vector& u, double rel) {
  const Vector c = prog.constraints(u);
  Vector m(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) m(i) = rel * std::max(1.0, std::abs(c(i)));
  return m;
}

}  // namespace detail

/**
 * Strictly feasible starting point on the equality set, seeded by
 * `seed` (default B^T tau_c). Minimizes a log-sum-exp smoothing of
 * max_i(-c_i(u) / s_i) by damped Newton steps over an increasing sharpness
 * schedule. The result keeps every row at least margin_rel * scale inside.
 */
inline Phase1Result phase1_feasible_point(const TorqueProgram& program,
                                          const std::optional<Vector>& seed = std::nullopt,
                                          const BarrierParams& params = {}) {
  Phase1Result res;
  const AffineSet set = equality_affine_set(program, params.equality_tol);
  if (!set.consistent) {
    res.status = SolverStatus::infeasible_equality;
    res.equality_residual = set.residual;
    res.u = set.u_p;
    return res;
  }
  const Vector start = seed.value_or(program.default_start);
  detail::require(start.size() == program.p, "phase1: seed dimension");
  Vector u = set.project(start);
  const double eq_scale = std::max(1.0, program.equality_residual(u).size() > 0
                                            ? program.tau_c.norm()
                                            : 1.0);
  const bool start_on_set =
      program.equality_residual(start).norm() <= params.equality_tol * eq_scale;
  if (start_on_set) u = start;

  const int r = program.constraint_count();
  auto strictly_inside = [&](const Vector& v) {
    const Vector c = program.constraints(v);
    const Vector m = detail::row_margins(program, v, params.margin_rel);
    return ((c - m).array() > 0.0).all();
  };
  res.equality_residual = program.equality_residual(u).norm();
  res.u = u;
  if (r == 0 || strictly_inside(u)) {
    res.feasible = true;
    res.status = SolverStatus::optimal;
    res.best_margin = r == 0 ? std::numeric_limits<double>::infinity()
                             : program.constraints(u).minCoeff();
    return res;
  }

  // Row scales fixed at the start so the smoothed max compares like units.
  Vector scale(r);
  {
    const Vector c = program.constraints(u);
    const Matrix jac = program.constraint_jacobian(u);
    for (int i = 0; i < r; ++i) scale(i) = std::max({1.0, jac.row(i).norm()});
    (void)c;
  }
  const Matrix& N = set.N;
  const Eigen::Index dim = N.cols();
  double best = -std::numeric_limits<double>::infinity();
  Vector best_u = u;
  auto normalized = [&](const Vector& v) -> Vector {
    return program.constraints(v).cwiseQuotient(scale);
  };
  auto smooth = [&](const Vector& v, double tau) {
    const Vector y = -tau * normalized(v);
    const double mx = y.maxCoeff();
    return (mx + std::log((y.array() - mx).exp().sum())) / tau;
  };
  auto record = [&](const Vector& v) {
    const double m = normalized(v).minCoeff();
    if (m > best) {
      best = m;
      best_u = v;
    }
  };
  record(u);
  const double target = 1e-4;
  int iters = 0;
  if (dim > 0) {
    double tau = 10.0 / (1.0 + normalized(u).cwiseAbs().maxCoeff());
    for (int round = 0; round < 10; ++round, tau *= 10.0) {
      for (int it = 0; it < 60; ++it) {
        ++iters;
        const Vector cn = normalized(u);
        if (cn.minCoeff() >= target) break;
        const Vector y = -tau * cn;
        const Vector w = (y.array() - y.maxCoeff()).exp();
        const Vector wn = w / w.sum();
        Matrix jac = program.constraint_jacobian(u);
        for (int i = 0; i < r; ++i) jac.row(i) /= scale(i);
        const Vector gbar = -(jac.transpose() * wn);
        Matrix h = tau * (jac.transpose() * wn.asDiagonal() * jac - gbar * gbar.transpose());
        int qi = 0;
        for (const auto& cone : program.cones) {
          const double wq = wn(2 * qi + 1) / scale(2 * qi + 1);
          h -= 2.0 * wq * cone.G;
          ++qi;
        }
        const Vector gr = N.transpose() * gbar;
        if (gr.norm() <= 1e-12) break;
        Matrix hr = N.transpose() * h * N;
        bool reg = false;
        auto llt = detail::regularized_llt(hr, reg);
        Vector dz = -llt.solve(gr);
        if (gr.dot(dz) >= 0.0) dz = -gr;
        const double f0 = smooth(u, tau);
        double t = 1.0;
        Vector trial = u + N * dz;
        while (smooth(trial, tau) > f0 + params.ls_alpha * t * gr.dot(dz) && t > 1e-14) {
          t *= params.ls_beta;
          trial = u + t * (N * dz);
        }
        if (t <= 1e-14) break;
        u = set.project(trial);
        record(u);
      }
      if (normalized(u).minCoeff() >= target) break;
    }
  }
  res.iterations = iters;
  res.u = best_u;
  res.best_margin = program.constraints(best_u).minCoeff();
  res.equality_residual = program.equality_residual(best_u).norm();
  res.feasible = strictly_inside(best_u);
  res.status = res.feasible ? SolverStatus::optimal : SolverStatus::infeasible_inequality;
  return res;
}

/// psi(u, eta) = f(u) - eta sum_i log(c_i(u) - margin_i); +inf outside.
inline double barrier_objective(const TorqueProgram& program, const Vector& u, double eta,
                                const Vector& margins) {
  const Vector c = program.constraints(u) - margins;
  if ((c.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  return program.objective(u) - eta * c.array().log().sum();
}

inline double barrier_objective(const TorqueProgram& program, const Vector& u, double eta) {
  return barrier_objective(program, u, eta, Vector::Zero(program.constraint_count()));
}

inline Vector barrier_gradient(const TorqueProgram& program, const Vector& u, double eta,
                               const Vector& margins) {
  const Vector c = program.constraints(u) - margins;
  const Matrix jac = program.constraint_jacobian(u);
  return program.objective_gradient(u) - eta * (jac.transpose() * c.cwiseInverse());
}

inline Vector barrier_gradient(const TorqueProgram& program, const Vector& u, double eta) {
  return barrier_gradient(program, u, eta, Vector::Zero(program.constraint_count()));
}

inline Matrix barrier_hessian(const TorqueProgram& program, const Vector& u, double eta,
                              const Vector& margins) {
  const Vector c = program.constraints(u) - margins;
  const Matrix jac = program.constraint_jacobian(u);
  Matrix h = 2.0 * program.objective_matrix();
  const Vector inv2 = c.cwiseInverse().cwiseAbs2();
  h += eta * (jac.transpose() * inv2.asDiagonal() * jac);
  int qi = 0;
  for (const auto& cone : program.cones) {
    h -= eta * 2.0 * cone.G / c(2 * qi + 1);
    ++qi;
  }
  return h;
}

/// psi(u + du) - psi(u) without cancellation: the quadratic pieces are
/// expanded exactly and the logarithms differenced through log1p.
inline double barrier_delta(const TorqueProgram& program, const Vector& u, const Vector& du,
                            double eta, const Vector& margins) {
  const Vector c = program.constraints(u) - margins;
  const Vector c_new = program.constraints(u + du) - margins;
  if ((c_new.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  double delta = program.objective_gradient(u).dot(du) + du.dot(program.objective_matrix() * du);
  Vector dc = program.constraint_jacobian(u) * du;
  int qi = 0;
  for (const auto& cone : program.cones) {
    dc(2 * qi + 1) += du.dot(cone.G * du);
    ++qi;
  }
  for (Eigen::Index i = 0; i < c.size(); ++i) delta -= eta * std::log1p(dc(i) / c(i));
  return delta;
}

/// Magnitude of the terms summed in the barrier gradient; the Newton tolerance
/// is relative to it.
inline double gradient_scale(const TorqueProgram& program, const Vector& u, double eta,
                             const Vector& margins) {
  const Vector c = program.constraints(u) - margins;
  const Matrix jac = program.constraint_jacobian(u);
  double s = 1.0 + 2.0 * (program.objective_matrix() * u).norm();
  if (program.relaxation.enabled) s += program.relaxation.rho * program.relaxation.b.norm();
  for (Eigen::Index i = 0; i < c.size(); ++i) s += eta * jac.row(i).norm() / c(i);
  return s;
}

/**
 * Log-barrier interior-point method. For fixed eta the barrier problem is
 * minimized over the equality set by Newton's method with backtracking line
 * search; eta then shrinks by kappa until r * eta <= eps.
 */
inline SolverReport solve_barrier(const TorqueProgram& program, const BarrierParams& params = {},
                                  const std::optional<Vector>& seed = std::nullopt) {
  params.validate();
  SolverReport rep;
  const int p = program.p;
  const int r = program.constraint_count();
  const AffineSet set = equality_affine_set(program, params.equality_tol);
  if (!set.consistent) {
    rep.status = SolverStatus::infeasible_equality;
    rep.u_star = set.u_p;
    rep.equality_residual = set.residual;
    rep.message = "equality block is inconsistent";
    return rep;
  }
  const Phase1Result start = phase1_feasible_point(program, seed, params);
  if (!start.feasible) {
    rep.status = start.status;
    rep.u_star = start.u;
    rep.constraint_margins = program.constraints(start.u);
    rep.equality_residual = start.equality_residual;
    rep.message = "no strictly feasible point; best margin " + std::to_string(start.best_margin);
    return rep;
  }

  Vector u = start.u;
  const Vector margins = detail::row_margins(program, u, params.margin_rel);
  const Matrix& N = set.N;
  double eta = params.eta0;
  bool failed = false;
  int total = 0;
  while (true) {
    ++rep.centering_steps;
    if (N.cols() > 0) {
      for (int it = 0; it < params.max_iters; ++it) {
        if (total >= params.max_iters) {
          failed = true;
          rep.message = "Newton iteration budget exhausted";
          break;
        }
        const Vector g = barrier_gradient(program, u, eta, margins);
        const Vector gr = N.transpose() * g;
        if (gr.norm() <= params.newton_tol * gradient_scale(program, u, eta, margins)) break;
        ++total;
        const Matrix hr = N.transpose() * barrier_hessian(program, u, eta, margins) * N;
        bool reg = false;
        auto llt = detail::regularized_llt(0.5 * (hr + hr.transpose()), reg);
        rep.hessian_regularized = rep.hessian_regularized || reg;
        Vector dz = -llt.solve(gr);
        double slope = gr.dot(dz);
        if (!(slope < 0.0)) {
          dz = -gr;
          slope = -gr.squaredNorm();
        }
        const Vector du = N * dz;
        const double psi0 = barrier_objective(program, u, eta, margins);
        const double resolution = 1e-15 * (1.0 + std::abs(psi0) + std::abs(program.objective(u)) +
                                           2.0 * std::abs(u.dot(program.objective_matrix() * u)));
        // Predicted decrease below the resolution of psi: nothing left to gain.
        if (-slope <= resolution) break;
        double t = 1.0;
        double dpsi = barrier_delta(program, u, du, eta, margins);
        while (!(dpsi <= params.ls_alpha * t * slope) && t > 1e-16) {
          t *= params.ls_beta;
          dpsi = barrier_delta(program, u, t * du, eta, margins);
        }
        if (t <= 1e-16) {
          failed = true;
          rep.message = "line search failed";
          break;
        }
        Vector next = set.project(u + t * du);
        if (!std::isfinite(barrier_objective(program, next, eta, margins))) next = u + t * du;
        u = next;
      }
    }
    rep.path_objective.push_back(program.objective(u));
    if (failed) break;
    if (r * eta <= params.eps || r == 0) break;
    eta *= params.kappa;
  }
  rep.newton_iters = total;
  rep.eta_final = eta;
  rep.duality_gap = r * eta;
  rep.u_star = u;
  rep.objective = power_loss(u, program.W);
  rep.constraint_margins = program.constraints(u);
  rep.equality_residual = program.equality_residual(u).norm();

  // Equality multipliers from stationarity g + E^T omega = 0 (least squares).
  const Vector g = barrier_gradient(program, u, eta, margins);
  const Eigen::Index main = program.relaxation.enabled ? 0 : program.E.rows();
  const Eigen::Index extra = program.E_extra.rows();
  if (main + extra > 0) {
    Matrix Et(p, main + extra);
    if (main > 0) Et.leftCols(main) = program.E.transpose();
    if (extra > 0) Et.rightCols(extra) = program.E_extra.transpose();
    const Vector w = -pseudo_inverse(Et) * g;
    rep.omega = w.head(main);
    rep.omega_extra = w.tail(extra);
    rep.kkt_residual = (g + Et * w).norm();
  } else {
    rep.omega = Vector::Zero(0);
    rep.omega_extra = Vector::Zero(0);
    rep.kkt_residual = g.norm();
  }
  if (failed) {
    rep.status = SolverStatus::solver_failure;
  } else {
    rep.status = program.relaxation.enabled ? SolverStatus::relaxed : SolverStatus::optimal;
  }
  return rep;
}

}  // namespace projctl
