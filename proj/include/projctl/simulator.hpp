#pragma once

#include "projctl/constrained_dynamics.hpp"
#include "projctl/constraint_geometry.hpp"
#include "projctl/control_laws.hpp"
#include "projctl/robot_model.hpp"
#include "projctl/task_space.hpp"
#include "projctl/torque_qcqp.hpp"
#include "projctl/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace projctl {

struct IntegratorOptions {
  double dt = 1e-3;
  std::string method = "rk4";  // rk4 | euler
  bool baumgarte = false;
  double baumgarte_alpha = 20.0;
  double baumgarte_beta = 100.0;
  double drift_tol = 1e-8;     // |A q'| after projection
  double drift_limit = 1e-3;   // position drift that aborts the run

  void validate() const {
    detail::require(dt > 0.0 && std::isfinite(dt), "integrator.dt must be positive");
    detail::require(method == "rk4" || method == "euler", "integrator.method must be rk4 or euler");
    detail::require(baumgarte_alpha >= 0.0 && baumgarte_beta >= 0.0,
                    "integrator.baumgarte gains must be non-negative");
    detail::require(drift_tol > 0.0 && drift_limit > 0.0, "integrator drift tolerances must be positive");
  }
};

/// Contact positions recorded at activation; the reference for Baumgarte
/// correction and for the position-drift limit.
struct ContactAnchors {
  std::vector<std::optional<Vector>> coords;
};

namespace detail {

inline Vector position_residual(const RobotModel& model, const RobotState& state,
                                const ContactAnchors* anchors) {
  int rows = 0;
  for (int c : state.active_contacts) rows += model.contacts[c].rows();
  Vector r = Vector::Zero(rows);
  if (anchors == nullptr) return r;
  int row = 0;
  for (int c : state.active_contacts) {
    const auto& cp = model.contacts[c];
    const auto& anchor = anchors->coords.at(static_cast<std::size_t>(c));
    if (cp.coordinates && anchor) r.segment(row, cp.rows()) = cp.coordinates(state.q) - *anchor;
    row += cp.rows();
  }
  return r;
}

inline double velocity_drift(const RobotModel& model, const RobotState& state) {
  if (state.active_contacts.empty()) return 0.0;
  const JacobianStack s = stack_jacobians(model, state.q, state.active_contacts);
  return (s.A * state.q_dot).norm();
}

}  // namespace detail

/// Constrained acceleration at a (possibly intermediate) state, with the
/// optional Baumgarte term A^+ (-alpha A q' + beta (x - x_anchor)).
inline Vector simulated_accel(const RobotModel& model, const RobotState& state, const Vector& u,
                              double nu, const IntegratorOptions& opts,
                              const ContactAnchors* anchors) {
  const ConstraintFrame f = build_frame(model, state, nu);
  Vector qdd = constrained_accel(f, model, state, u);
  if (opts.baumgarte && f.stack.m() > 0) {
    const Vector res = detail::position_residual(model, state, anchors);
    qdd += f.A_pinv() * (-opts.baumgarte_alpha * (f.A() * state.q_dot) +
                         opts.baumgarte_beta * res);
  }
  return qdd;
}

/// One integration step with zero-order hold on u, followed by q' <- P q'.
inline RobotState step(const RobotModel& model, const RobotState& state, const Vector& u,
                       double dt, const IntegratorOptions& opts, double nu,
                       const ContactAnchors* anchors = nullptr) {
  detail::require(dt > 0.0, "step: dt must be positive");
  detail::require(u.size() == model.p && u.allFinite(), "step: invalid actuator torques");
  auto deriv = [&](const Vector& q, const Vector& qd) {
    RobotState s = state;
    s.q = q;
    s.q_dot = qd;
    return simulated_accel(model, s, u, nu, opts, anchors);
  };
  RobotState next = state;
  const Vector& q = state.q;
  const Vector& v = state.q_dot;
  if (opts.method == "euler") {
    const Vector a = deriv(q, v);
    next.q = q + dt * v;
    next.q_dot = v + dt * a;
  } else {
    const Vector a1 = deriv(q, v);
    const Vector v2 = v + 0.5 * dt * a1;
    const Vector a2 = deriv(q + 0.5 * dt * v, v2);
    const Vector v3 = v + 0.5 * dt * a2;
    const Vector a3 = deriv(q + 0.5 * dt * v2, v3);
    const Vector v4 = v + dt * a3;
    const Vector a4 = deriv(q + dt * v3, v4);
    next.q = q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
    next.q_dot = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  next.t = state.t + dt;
  if (!next.q.allFinite() || !next.q_dot.allFinite()) {
    throw SimulationError("step: non-finite state at t = " + std::to_string(next.t));
  }
  if (!next.active_contacts.empty()) {
    const JacobianStack s = stack_jacobians(model, next.q, next.active_contacts);
    next.q_dot = null_projector(s.A, model.n).P * next.q_dot;
    const double vel = (s.A * next.q_dot).norm();
    if (vel > opts.drift_tol * std::max(1.0, next.q_dot.norm())) {
      throw SimulationError("step: velocity drift " + std::to_string(vel));
    }
    const double pos = detail::position_residual(model, next, anchors).norm();
    if (pos > opts.drift_limit) {
      throw SimulationError("step: constraint drift " + std::to_string(pos) +
                            " exceeds the hard limit");
    }
  }
  return next;
}

/// Replaces the active set. Newly engaged contacts are anchored at their
/// current position and the velocity is projected onto the new null space.
inline RobotState switch_contacts(const RobotModel& model, const RobotState& state,
                                  const std::vector<int>& active,
                                  ContactAnchors* anchors = nullptr) {
  for (int c : active) {
    detail::require(c >= 0 && c < static_cast<int>(model.contacts.size()),
                    "switch_contacts: contact index out of range");
  }
  RobotState next = state;
  if (active == state.active_contacts) return next;
  next.active_contacts = active;
  if (anchors != nullptr) {
    anchors->coords.resize(model.contacts.size());
    for (std::size_t c = 0; c < model.contacts.size(); ++c) {
      const bool now = std::find(active.begin(), active.end(), static_cast<int>(c)) != active.end();
      const bool before = std::find(state.active_contacts.begin(), state.active_contacts.end(),
                                    static_cast<int>(c)) != state.active_contacts.end();
      if (now && !before) {
        const auto& cp = model.contacts[c];
        anchors->coords[c] = cp.coordinates ? std::optional<Vector>(cp.coordinates(state.q))
                                            : std::nullopt;
      } else if (!now) {
        anchors->coords[c].reset();
      }
    }
  }
  if (!active.empty()) {
    const JacobianStack s = stack_jacobians(model, state.q, active);
    next.q_dot = null_projector(s.A, model.n).P * state.q_dot;
  }
  return next;
}

// ---------------------------------------------------------------------------
// Scenario and closed-loop run

enum class ControllerType { tracking, regulation };
enum class OptimizerType { min_norm, qcqp, qcqp_relaxed };

inline const char* to_string(ControllerType c) {
  return c == ControllerType::tracking ? "tracking" : "regulation";
}

inline const char* to_string(OptimizerType o) {
  switch (o) {
    case OptimizerType::min_norm: return "min_norm";
    case OptimizerType::qcqp: return "qcqp";
    case OptimizerType::qcqp_relaxed: return "qcqp_relaxed";
  }
  return "unknown";
}

/// Joint-selection task with reference
///   x_d(t) = x_0 + offset + amplitude (1 - cos(2 pi f (t - t_0)))
/// where x_0 is the task value when the task becomes active at t_0.
struct TaskSpec {
  std::vector<int> joints;
  Vector offset;
  Vector amplitude;
  double frequency = 0.0;

  [[nodiscard]] int l() const { return static_cast<int>(joints.size()); }
};

struct Reference {
  Vector x, x_dot, x_ddot;
};

inline Reference evaluate_reference(const TaskSpec& task, const Vector& x0, double t_since) {
  const int l = task.l();
  const Vector off = task.offset.size() == l ? task.offset : Vector::Zero(l);
  const Vector amp = task.amplitude.size() == l ? task.amplitude : Vector::Zero(l);
  const double w = 2.0 * M_PI * task.frequency;
  Reference r;
  r.x = x0 + off + amp * (1.0 - std::cos(w * t_since));
  r.x_dot = amp * (w * std::sin(w * t_since));
  r.x_ddot = amp * (w * w * std::cos(w * t_since));
  return r;
}

struct ControllerSpec {
  ControllerType type = ControllerType::tracking;
  double omega = 5.0;
  std::vector<double> kp;  // diagonal; empty = omega^2
  std::vector<double> kd;  // diagonal; empty = 2 omega (tracking) or 2 omega (regulation, per joint)

  [[nodiscard]] ControllerGains gains(int l, int n) const {
    const int kd_dim = type == ControllerType::tracking ? l : n;
    auto diag = [](const std::vector<double>& v, int dim, double dflt, const char* what) {
      Matrix m = Matrix::Identity(dim, dim) * dflt;
      if (v.size() == 1) {
        m = Matrix::Identity(dim, dim) * v[0];
      } else if (!v.empty()) {
        detail::require(static_cast<int>(v.size()) == dim,
                        std::string("controller.gains.") + what + ": wrong dimension");
        for (int i = 0; i < dim; ++i) m(i, i) = v[static_cast<std::size_t>(i)];
      }
      return m;
    };
    ControllerGains g{diag(kp, l, omega * omega, "kp"), diag(kd, kd_dim, 2.0 * omega, "kd")};
    g.validate(l, kd_dim);
    return g;
  }
};

struct OptimizerOptions {
  OptimizerType type = OptimizerType::qcqp;
  BarrierParams barrier;
  double rho = 100.0;
  bool relaxed_fallback = true;
};

struct ContactPhase {
  double t = 0.0;
  std::vector<int> active;
  std::optional<TaskSpec> task;
};

struct Scenario {
  std::string id = "scenario";
  RobotModel model;
  RobotState initial;
  TaskSpec task;
  ControllerSpec controller;
  OptimizerOptions optimizer;
  std::vector<ContactPhase> schedule;
  IntegratorOptions integrator;
  double duration = 1.0;
  double nu = 0.0;  // <= 0: trace(M(q0)) / n

  [[nodiscard]] long steps() const {
    return std::lround(duration / integrator.dt);
  }

  void validate() const {
    model.validate();
    integrator.validate();
    detail::require(duration > 0.0 && std::isfinite(duration), "duration must be positive");
    detail::require(initial.q.size() == model.n && initial.q_dot.size() == model.n,
                    "initial_state dimension mismatch");
    detail::require(initial.q.allFinite() && initial.q_dot.allFinite(),
                    "initial_state must be finite");
    auto check_task = [&](const TaskSpec& t, const std::string& where) {
      detail::require(t.l() > 0, where + ": task needs at least one joint");
      for (int j : t.joints) {
        detail::require(j >= 0 && j < model.n, where + ": task joint out of range");
      }
      detail::require(t.offset.size() == 0 || t.offset.size() == t.l(),
                      where + ": offset dimension");
      detail::require(t.amplitude.size() == 0 || t.amplitude.size() == t.l(),
                      where + ": amplitude dimension");
      detail::require(t.frequency >= 0.0, where + ": frequency must be non-negative");
    };
    check_task(task, "task");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (i > 0) {
        detail::require(schedule[i].t > schedule[i - 1].t,
                        "contacts.schedule times must be strictly increasing");
      }
      detail::require(schedule[i].t >= 0.0, "contacts.schedule times must be non-negative");
      for (int c : schedule[i].active) {
        detail::require(c >= 0 && c < static_cast<int>(model.contacts.size()),
                        "contacts.schedule: contact index out of range");
      }
      if (schedule[i].task) check_task(*schedule[i].task, "contacts.schedule task");
    }
    detail::require(optimizer.rho > 0.0, "optimizer.rho must be positive");
    optimizer.barrier.validate();
    detail::require(nu >= 0.0, "nu must be non-negative");
  }
};

struct StepRecord {
  double t = 0.0;
  Vector q, q_dot, x, x_d, e, u;
  double e_norm = 0.0;
  std::vector<int> active;
  Vector lambda;  // 3 per model contact, NaN when inactive
  Vector margin;  // per model contact, NaN when inactive
  Vector normal;  // lambda_z per model contact, NaN when inactive
  double p_loss = 0.0;
  double lyapunov = 0.0;
  double phi_norm = 0.0;
  double d_norm = 0.0;
  double drift = 0.0;
  double kkt_residual = 0.0;
  int newton_iters = 0;
  int centering_steps = 0;
  double eta = 0.0;
  std::string status;
  bool violation = false;
  bool cone_violation = false;
  bool box_violation = false;
  bool dims_fixed = true;  // P, M_bar, C_bar, S all n x n
  int phase = 0;
};

struct SwitchEvent {
  double t = 0.0;
  std::vector<int> from, to;
  double drift_after = 0.0;
};

struct SimTrace {
  std::string scenario;
  std::string optimizer;
  int n = 0;
  int p = 0;
  int l_max = 0;
  std::vector<std::string> contact_names;
  double nu = 0.0;
  std::vector<StepRecord> records;
  std::vector<SwitchEvent> switches;
  std::vector<double> phase_start;
};

struct ActuationResult {
  Vector u;
  std::string status;
  int newton_iters = 0;
  int centering_steps = 0;
  double eta = 0.0;
  double kkt_residual = 0.0;
};

/// Chooses u for the requested generalized torque.
inline ActuationResult allocate_torques(const RobotModel& model, const RobotState& state,
                                        const ConstraintFrame& frame, const Vector& tau_c,
                                        const OptimizerOptions& opts,
                                        const std::optional<Vector>& seed) {
  ActuationResult out;
  if (opts.type == OptimizerType::min_norm) {
    out.u = min_norm_actuation(frame, model.B, tau_c);
    out.status = "min_norm";
    return out;
  }
  const TorqueProgram prog = assemble_program(model, state, frame, tau_c);
  auto take = [&](const SolverReport& rep) {
    out.u = rep.u_star;
    out.status = to_string(rep.status);
    out.newton_iters += rep.newton_iters;
    out.centering_steps += rep.centering_steps;
    out.eta = rep.eta_final;
    out.kkt_residual = rep.kkt_residual;
  };
  if (opts.type == OptimizerType::qcqp) {
    const SolverReport rep = solve_barrier(prog, opts.barrier, seed);
    if (rep.ok()) {
      take(rep);
      return out;
    }
    if (!opts.relaxed_fallback || rep.status == SolverStatus::solver_failure) {
      throw SimulationError(std::string("torque program: ") + to_string(rep.status) + " at t = " +
                            std::to_string(state.t) + (rep.message.empty() ? "" : ": " + rep.message));
    }
    out.newton_iters = rep.newton_iters;
    out.centering_steps = rep.centering_steps;
  }
  const SolverReport rel = solve_barrier(relax_program(prog, frame, opts.rho), opts.barrier, seed);
  if (!rel.ok()) {
    throw SimulationError(std::string("relaxed torque program: ") + to_string(rel.status) +
                          " at t = " + std::to_string(state.t) +
                          (rel.message.empty() ? "" : ": " + rel.message));
  }
  take(rel);  // iteration counts accumulate over both attempts
  return out;
}

/// Optional per-step hook, called after the record is filled.
struct StepContext {
  const ConstraintFrame& frame;
  const TaskMap& task;
  const ControlCommand& command;
  const RobotState& state;
};

template <class Hook>
SimTrace simulate(const Scenario& sc, Hook&& hook) {
  sc.validate();
  const RobotModel& model = sc.model;
  const int n = model.n;
  const auto kc = static_cast<int>(model.contacts.size());
  const double dt = sc.integrator.dt;
  const long steps = sc.steps();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  SimTrace trace;
  trace.scenario = sc.id;
  trace.optimizer = to_string(sc.optimizer.type);
  trace.n = n;
  trace.p = model.p;
  for (const auto& c : model.contacts) trace.contact_names.push_back(c.name);
  trace.l_max = sc.task.l();
  for (const auto& ph : sc.schedule) {
    if (ph.task) trace.l_max = std::max(trace.l_max, ph.task->l());
  }

  RobotState state = sc.initial;
  state.t = 0.0;
  ContactAnchors anchors;
  anchors.coords.resize(model.contacts.size());
  {
    const auto initial_active = state.active_contacts;
    state.active_contacts.clear();
    state = switch_contacts(model, state, initial_active, &anchors);
  }
  const double nu = sc.nu > 0.0 ? sc.nu : default_nu(model, state.q);
  trace.nu = nu;

  std::size_t next_phase = 0;
  TaskSpec task_spec = sc.task;
  TaskFunction task_fn = joint_task(task_spec.joints, n);
  Vector x0 = task_fn.value(state.q);
  double t0 = 0.0;
  int phase = 0;
  trace.phase_start.push_back(0.0);
  std::optional<Vector> seed;
  trace.records.reserve(static_cast<std::size_t>(steps + 1));

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    state.t = t;
    bool task_changed = false;
    while (next_phase < sc.schedule.size() && sc.schedule[next_phase].t <= t + 0.5 * dt) {
      const ContactPhase& ph = sc.schedule[next_phase];
      const auto before = state.active_contacts;
      state = switch_contacts(model, state, ph.active, &anchors);
      if (ph.t > 0.0 || before != ph.active) {
        trace.switches.push_back({t, before, ph.active, detail::velocity_drift(model, state)});
      }
      if (ph.task) {
        task_spec = *ph.task;
        task_fn = joint_task(task_spec.joints, n);
        task_changed = true;
      }
      if (ph.t > 0.0) {
        ++phase;
        trace.phase_start.push_back(t);
        task_changed = true;
      }
      ++next_phase;
    }
    if (task_changed) {
      x0 = task_fn.value(state.q);
      t0 = t;
    }

    const ConstraintFrame frame = build_frame(model, state, nu);
    const TaskMap task = build_task(model, state, frame, task_fn);
    const ControllerGains gains = sc.controller.gains(task.l, n);
    const Reference ref = evaluate_reference(task_spec, x0, t - t0);
    ControlCommand cmd;
    if (sc.controller.type == ControllerType::tracking) {
      cmd = tracking_torque(state, frame, task, ref.x, ref.x_dot, ref.x_ddot, gains);
    } else {
      const Reference set = evaluate_reference(task_spec, x0, 0.0);
      cmd = regulation_torque(state, frame, task, set.x, gains);
    }
    ActuationResult act;
    try {
      act = allocate_torques(model, state, frame, cmd.tau_c, sc.optimizer, seed);
    } catch (const InfeasibleActuationError& e) {
      throw SimulationError(std::string(e.what()) + " at t = " + std::to_string(t));
    }
    seed = act.u;
    complete_command(cmd, frame, act.u);

    StepRecord rec;
    rec.t = t;
    rec.q = state.q;
    rec.q_dot = state.q_dot;
    rec.x = task.x;
    rec.x_d = cmd.e + task.x;
    rec.e = cmd.e;
    rec.e_norm = cmd.e.norm();
    rec.u = act.u;
    rec.active = state.active_contacts;
    rec.lambda = Vector::Constant(3 * kc, nan);
    rec.margin = Vector::Constant(kc, nan);
    rec.normal = Vector::Constant(kc, nan);
    if (!state.active_contacts.empty()) {
      const ContactWrench w = contact_forces(frame, model, state, act.u);
      for (int i = 0; i < frame.stack.k(); ++i) {
        const int c = frame.stack.blocks[static_cast<std::size_t>(i)].contact;
        for (int a = 0; a < 3; ++a) rec.lambda(3 * c + a) = w.lambda(frame.stack.row_of(i, a));
        rec.margin(c) = w.cone_margin(i);
        rec.normal(c) = w.normal(i);
        if (!(w.normal(i) > 0.0) || !(w.cone_margin(i) > 0.0)) rec.cone_violation = true;
      }
    }
    for (int j = 0; j < model.p; ++j) {
      if (act.u(j) > model.u_max(j) || act.u(j) < model.u_min(j)) rec.box_violation = true;
    }
    rec.violation = rec.cone_violation || rec.box_violation;
    const Matrix W = motor_weighting(model.motor_resistance, model.torque_constant);
    rec.p_loss = power_loss(act.u, W);
    rec.lyapunov = sc.controller.type == ControllerType::regulation
                       ? regulation_lyapunov(frame, state.q_dot, cmd.e, gains.K_P)
                       : tracking_lyapunov(cmd.e, cmd.e_dot, gains.K_P);
    rec.phi_norm = cmd.phi.norm();
    rec.d_norm = cmd.d.norm();
    rec.drift = frame.stack.m() > 0 ? (frame.A() * state.q_dot).norm() : 0.0;
    rec.kkt_residual = act.kkt_residual;
    rec.newton_iters = act.newton_iters;
    rec.centering_steps = act.centering_steps;
    rec.eta = act.eta;
    rec.status = act.status;
    rec.dims_fixed = frame.P().rows() == n && frame.P().cols() == n && frame.M_bar.rows() == n &&
                     frame.M_bar.cols() == n && frame.C_bar.rows() == n &&
                     frame.C_bar.cols() == n && frame.S.rows() == n && frame.S.cols() == n;
    rec.phase = phase;
    hook(rec, StepContext{frame, task, cmd, state});
    trace.records.push_back(std::move(rec));

    if (k == steps) break;
    state = step(model, state, act.u, dt, sc.integrator, nu, &anchors);
  }
  return trace;
}

inline SimTrace simulate(const Scenario& sc) {
  return simulate(sc, [](const StepRecord&, const StepContext&) {});
}

}  // namespace projctl
