#pragma once

#include "projctl/planar_chain.hpp"
#include "projctl/robot_model.hpp"
#include "projctl/types.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace projctl {

struct MotorParams {
  Vector u_limit;     // symmetric box |u_j| <= u_limit_j
  Vector resistance;  // Ohm
  Vector torque_constant;  // N m / A

  void validate(int p, const char* what) const {
    detail::require(u_limit.size() == p && resistance.size() == p &&
                        torque_constant.size() == p,
                    std::string(what) + ": motor vectors must have one entry per actuator");
    for (int j = 0; j < p; ++j) {
      detail::require(u_limit(j) > 0.0, std::string(what) + ": torque limit must be positive");
      detail::require(resistance(j) > 0.0, std::string(what) + ": resistance must be positive");
      detail::require(torque_constant(j) != 0.0, std::string(what) + ": zero torque constant");
    }
  }

  static MotorParams uniform(int p, double limit, double r = 1.0, double kt = 1.0) {
    return {Vector::Constant(p, limit), Vector::Constant(p, r), Vector::Constant(p, kt)};
  }
};

inline void apply_motors(RobotModel& model, const MotorParams& motors) {
  model.u_max = motors.u_limit;
  model.u_min = -motors.u_limit;
  model.motor_resistance = motors.resistance;
  model.torque_constant = motors.torque_constant;
}

// ---------------------------------------------------------------------------
// Planar arm with its tip on a frictional plane.

struct ArmParams {
  std::vector<double> masses{1.0, 0.8, 0.5};
  std::vector<double> lengths{0.5, 0.4, 0.3};
  double gravity = 9.81;
  double mu = 0.8;
  MotorParams motors = MotorParams::uniform(3, 50.0);

  [[nodiscard]] int links() const { return static_cast<int>(lengths.size()); }

  void validate() const {
    detail::require(links() >= 2, "planar_arm: at least two links required");
    detail::require(masses.size() == lengths.size(), "planar_arm: masses and lengths differ");
    for (std::size_t i = 0; i < masses.size(); ++i) {
      detail::require(masses[i] > 0.0 && std::isfinite(masses[i]),
                      "planar_arm: link masses must be positive");
      detail::require(lengths[i] > 0.0 && std::isfinite(lengths[i]),
                      "planar_arm: link lengths must be positive");
    }
    detail::require(gravity >= 0.0, "planar_arm: gravity must be non-negative");
    detail::require(mu > 0.0, "planar_arm: friction coefficient must be positive");
    motors.validate(links(), "planar_arm");
  }
};

/// Serial arm with relative joint angles, base pinned at the origin; link i
/// points along R(q_0 + ... + q_i) e_x. One contact at the tip, fully actuated.
inline RobotModel planar_arm_contact(const ArmParams& params = {}) {
  params.validate();
  const int n = params.links();
  auto chain = std::make_shared<PlanarChain>();
  chain->n = n;
  chain->gravity = params.gravity;

  PlanarPoint joint(n);
  for (int i = 0; i < n; ++i) {
    Vector s = Vector::Zero(n);
    s.head(i + 1).setOnes();
    const double len = params.lengths[static_cast<std::size_t>(i)];
    PlanarBody body;
    body.mass = params.masses[static_cast<std::size_t>(i)];
    body.inertia = body.mass * len * len / 12.0;
    body.angle = s;
    body.com = joint;
    body.com.terms.push_back({s, Eigen::Vector2d(0.5 * len, 0.0)});
    chain->bodies.push_back(body);
    joint.terms.push_back({s, Eigen::Vector2d(len, 0.0)});
  }

  RobotModel model;
  model.name = "planar_arm";
  attach_chain(model, chain);
  model.p = n;
  model.B = Matrix::Identity(n, n);
  model.contacts.push_back(planar_contact("tip", params.mu, joint));
  apply_motors(model, params.motors);
  model.validate();
  return model;
}

inline Vector planar_arm_default_configuration(int links) {
  Vector q = Vector::Zero(links);
  q(0) = 0.3;
  for (int i = 1; i < links; ++i) q(i) = -1.1;
  return q;
}

// ---------------------------------------------------------------------------
// Floating-base planar biped.

struct BipedParams {
  enum class Foot { flat, point };
  Foot foot = Foot::flat;
  double torso_mass = 10.0;
  double torso_com = 0.3;  // above the pelvis
  double torso_inertia = 0.4;
  double thigh_mass = 2.0;
  double shank_mass = 1.5;
  double foot_mass = 0.5;
  double thigh_length = 0.4;
  double shank_length = 0.4;
  double foot_height = 0.05;  // ankle above the sole
  double gravity = 9.81;
  double mu = 0.8;
  MotorParams motors;  // empty: +/-300 N m, R = K_t = 1 on every joint

  [[nodiscard]] int joints_per_leg() const { return foot == Foot::flat ? 3 : 2; }
  [[nodiscard]] int actuators() const { return 2 * joints_per_leg(); }
  [[nodiscard]] MotorParams effective_motors() const {
    return motors.u_limit.size() == 0 ? MotorParams::uniform(actuators(), 300.0) : motors;
  }

  void validate() const {
    for (double v : {torso_mass, thigh_mass, shank_mass, thigh_length, shank_length}) {
      detail::require(v > 0.0 && std::isfinite(v), "floating_biped: masses and lengths must be positive");
    }
    detail::require(torso_inertia > 0.0, "floating_biped: torso inertia must be positive");
    if (foot == Foot::flat) {
      detail::require(foot_mass > 0.0 && foot_height > 0.0,
                      "floating_biped: flat feet need positive mass and height");
    }
    detail::require(gravity >= 0.0, "floating_biped: gravity must be non-negative");
    detail::require(mu > 0.0, "floating_biped: friction coefficient must be positive");
    effective_motors().validate(actuators(), "floating_biped");
  }
};

/// q = (x, z, pitch, left leg joints, right leg joints) with legs hanging along
/// -z at zero angles. Each leg has hip and knee, plus an ankle for flat feet.
/// Contacts: 0 = left foot, 1 = right foot. The base is unactuated.
inline RobotModel floating_biped(const BipedParams& params = {}) {
  params.validate();
  const int jl = params.joints_per_leg();
  const int n = 3 + 2 * jl;
  auto chain = std::make_shared<PlanarChain>();
  chain->n = n;
  chain->gravity = params.gravity;

  PlanarPoint pelvis(n);
  pelvis.T(0, 0) = 1.0;
  pelvis.T(1, 1) = 1.0;
  Vector pitch = Vector::Zero(n);
  pitch(2) = 1.0;

  PlanarBody torso;
  torso.mass = params.torso_mass;
  torso.inertia = params.torso_inertia;
  torso.angle = pitch;
  torso.com = pelvis;
  torso.com.terms.push_back({pitch, Eigen::Vector2d(0.0, params.torso_com)});
  chain->bodies.push_back(torso);

  RobotModel model;
  model.name = "floating_biped";
  for (int leg = 0; leg < 2; ++leg) {
    const int base = 3 + leg * jl;
    Vector s = pitch;
    PlanarPoint point = pelvis;
    const std::vector<std::pair<double, double>> segs{{params.thigh_mass, params.thigh_length},
                                                      {params.shank_mass, params.shank_length}};
    for (int seg = 0; seg < 2; ++seg) {
      s(base + seg) = 1.0;
      const double len = segs[static_cast<std::size_t>(seg)].second;
      PlanarBody b;
      b.mass = segs[static_cast<std::size_t>(seg)].first;
      b.inertia = b.mass * len * len / 12.0;
      b.angle = s;
      b.com = point;
      b.com.terms.push_back({s, Eigen::Vector2d(0.0, -0.5 * len)});
      chain->bodies.push_back(b);
      point.terms.push_back({s, Eigen::Vector2d(0.0, -len)});
    }
    const std::string name = leg == 0 ? "left_foot" : "right_foot";
    if (params.foot == BipedParams::Foot::flat) {
      s(base + 2) = 1.0;
      PlanarBody f;
      f.mass = params.foot_mass;
      f.inertia = f.mass * 0.15 * 0.15 / 12.0;
      f.angle = s;
      f.com = point;
      f.com.terms.push_back({s, Eigen::Vector2d(0.03, -0.5 * params.foot_height)});
      chain->bodies.push_back(f);
      PlanarPoint sole = point;
      sole.terms.push_back({s, Eigen::Vector2d(0.0, -params.foot_height)});
      model.contacts.push_back(planar_contact(name, params.mu, sole, &s));
    } else {
      model.contacts.push_back(planar_contact(name, params.mu, point));
    }
  }

  attach_chain(model, chain);
  model.p = 2 * jl;
  model.B = Matrix::Zero(n, model.p);
  for (int j = 0; j < model.p; ++j) model.B(3 + j, j) = 1.0;
  apply_motors(model, params.effective_motors());
  model.validate();
  return model;
}

/// Standing pose with both soles on z = 0 at x = +/- stance/2 (left foot in
/// front), pelvis at the given height, knees flexed, feet flat.
inline Vector biped_standing_configuration(const BipedParams& params, double pelvis_height = 0.75,
                                           double stance = 0.2) {
  const int jl = params.joints_per_leg();
  Vector q = Vector::Zero(3 + 2 * jl);
  q(1) = pelvis_height;
  const double l1 = params.thigh_length;
  const double l2 = params.shank_length;
  const double ankle_z = params.foot == BipedParams::Foot::flat ? params.foot_height : 0.0;
  for (int leg = 0; leg < 2; ++leg) {
    const double vx = leg == 0 ? 0.5 * stance : -0.5 * stance;
    const double vz = ankle_z - pelvis_height;
    const double d2 = vx * vx + vz * vz;
    const double c = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    detail::require(c > -1.0 && c < 1.0, "biped_standing_configuration: pose out of reach");
    const double knee = -std::acos(c);
    const double psi = std::atan2(vx, -vz);
    const double hip = psi - std::atan2(l2 * std::sin(knee), l1 + l2 * std::cos(knee));
    const int base = 3 + leg * jl;
    q(base) = hip;
    q(base + 1) = knee;
    if (jl == 3) q(base + 2) = -(hip + knee);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Small models used by the property tests.

/// Free point mass in 3-D resting on the plane z = 0; B = I.
inline RobotModel point_mass(double mass = 1.0, double gravity = 9.81, double mu = 0.5,
                             double u_limit = 100.0) {
  detail::require(mass > 0.0, "point_mass: mass must be positive");
  RobotModel model;
  model.name = "point_mass";
  model.n = 3;
  model.p = 3;
  model.mass_matrix = [mass](const Vector&) -> Matrix { return mass * Matrix::Identity(3, 3); };
  model.coriolis_matrix = [](const Vector&, const Vector&) -> Matrix {
    return Matrix::Zero(3, 3);
  };
  model.gravity = [mass, gravity](const Vector&) -> Vector {
    return Vector(Eigen::Vector3d(0.0, 0.0, -mass * gravity));
  };
  model.B = Matrix::Identity(3, 3);
  ContactPoint c;
  c.name = "ground";
  c.mu = mu;
  c.jacobian = [](const Vector&) -> Matrix { return -Matrix::Identity(3, 3); };
  c.jacobian_rate = [](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(3, 3); };
  c.coordinates = [](const Vector& q) -> Vector { return q; };
  model.contacts.push_back(c);
  apply_motors(model, MotorParams::uniform(3, u_limit));
  model.validate();
  return model;
}

/// Flat foot (x, z, pitch) carrying an actuated inverted pendulum (relative
/// angle q_3, upright at zero). One flat contact with moment rows.
inline RobotModel flat_foot_pendulum(double foot_mass = 1.0, double bob_mass = 2.0,
                                     double length = 0.5, double gravity = 9.81,
                                     double mu = 0.8) {
  const int n = 4;
  auto chain = std::make_shared<PlanarChain>();
  chain->n = n;
  chain->gravity = gravity;
  PlanarPoint foot(n);
  foot.T(0, 0) = 1.0;
  foot.T(1, 1) = 1.0;
  Vector pitch = Vector::Zero(n);
  pitch(2) = 1.0;
  PlanarBody fb;
  fb.mass = foot_mass;
  fb.inertia = foot_mass * 0.2 * 0.2 / 12.0;
  fb.angle = pitch;
  fb.com = foot;
  chain->bodies.push_back(fb);
  Vector s = pitch;
  s(3) = 1.0;
  PlanarBody bob;
  bob.mass = bob_mass;
  bob.inertia = 0.01;
  bob.angle = s;
  bob.com = foot;
  bob.com.terms.push_back({s, Eigen::Vector2d(0.0, length)});
  chain->bodies.push_back(bob);

  RobotModel model;
  model.name = "flat_foot_pendulum";
  attach_chain(model, chain);
  model.p = 1;
  model.B = Matrix::Zero(n, 1);
  model.B(3, 0) = 1.0;
  PlanarPoint sole = foot;
  sole.terms.push_back({pitch, Eigen::Vector2d(0.0, -0.02)});
  model.contacts.push_back(planar_contact("sole", mu, sole, &pitch));
  apply_motors(model, MotorParams::uniform(1, 100.0));
  model.validate();
  return model;
}

struct ModelInfo {
  std::string name;
  std::string description;
};

inline std::vector<ModelInfo> model_catalog() {
  return {
      {"planar_arm", "serial planar arm (default 3 links), tip on a frictional plane"},
      {"floating_biped", "planar floating-base biped, flat or point feet, base unactuated"},
      {"point_mass", "3-D point mass resting on a plane"},
      {"flat_foot_pendulum", "flat foot carrying an actuated inverted pendulum"},
  };
}

}  // namespace projctl
