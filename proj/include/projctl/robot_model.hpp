#pragma once

#include "projctl/types.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace projctl {

using ConfigMatrixFn = std::function<Matrix(const Vector& q)>;
using StateMatrixFn = std::function<Matrix(const Vector& q, const Vector& q_dot)>;
using ConfigVectorFn = std::function<Vector(const Vector& q)>;

/**
 * A frictional contact of the robot with its environment.
 *
 * The constraint Jacobian has three translational rows ordered (x, y, z) with z
 * the surface normal, optionally followed by `aux_rows` extra rows (foot
 * moments for flat contacts). Rows are oriented so that the multiplier is the
 * force the environment applies to the robot: A = -d(coordinates)/dq, and the
 * generalized contact force entering the dynamics is -A^T lambda.
 */
struct ContactPoint {
  std::string name;
  double mu = 1.0;
  int aux_rows = 0;
  ConfigMatrixFn jacobian;
  StateMatrixFn jacobian_rate;  // optional; finite differences otherwise
  ConfigVectorFn coordinates;   // optional; needed for position stabilization

  [[nodiscard]] int rows() const { return 3 + aux_rows; }
};

/**
 * Generalized-coordinate rigid-body model
 *
 *   M(q) q'' + C(q, q') q' = B u + tau_g(q) - A(q)^T lambda
 *
 * with power-loss data for the actuators (winding resistance R, torque
 * constant K_t).
 */
struct RobotModel {
  std::string name;
  int n = 0;
  int p = 0;
  ConfigMatrixFn mass_matrix;
  StateMatrixFn coriolis_matrix;
  ConfigVectorFn gravity;
  Matrix B;
  std::vector<ContactPoint> contacts;
  Vector u_min;
  Vector u_max;
  Vector motor_resistance;
  Vector torque_constant;

  void validate() const {
    detail::require(n > 0 && p > 0, "model: n and p must be positive");
    detail::require(mass_matrix && coriolis_matrix && gravity,
                    "model: dynamics callbacks missing");
    detail::require_dims(B, n, p, "model.B");
    detail::require(u_min.size() == p && u_max.size() == p,
                    "model: torque limits must have p entries");
    detail::require(motor_resistance.size() == p && torque_constant.size() == p,
                    "model: motor data must have p entries");
    for (int j = 0; j < p; ++j) {
      detail::require(u_min(j) < u_max(j), "model: u_min must be below u_max");
      detail::require(torque_constant(j) != 0.0, "model: zero torque constant");
      detail::require(motor_resistance(j) > 0.0, "model: resistance must be positive");
    }
    for (const auto& c : contacts) {
      detail::require(c.mu > 0.0, "model: friction coefficient must be positive");
      detail::require(static_cast<bool>(c.jacobian), "model: contact without Jacobian");
      detail::require(c.aux_rows >= 0, "model: negative auxiliary row count");
    }
  }
};

struct RobotState {
  double t = 0.0;
  Vector q;
  Vector q_dot;
  std::vector<int> active_contacts;
};

}  // namespace projctl
