#pragma once

#include "projctl/robot_model.hpp"
#include "projctl/types.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace projctl {

/// Point in the sagittal plane (horizontal, vertical) whose position is
///   p(q) = T q + c0 + sum_t R(s_t^T q) d_t.
/// Every rotation angle is linear in q, which covers serial chains with
/// relative joint angles on a floating or fixed base.
struct PlanarPoint {
  Matrix T;         // 2 x n
  Eigen::Vector2d c0 = Eigen::Vector2d::Zero();
  struct Term {
    Vector s;  // angle = s^T q
    Eigen::Vector2d d;
  };
  std::vector<Term> terms;

  explicit PlanarPoint(int n = 0) : T(Matrix::Zero(2, n)) {}

  static Eigen::Matrix2d rot(double a) {
    Eigen::Matrix2d r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
  }

  [[nodiscard]] Eigen::Vector2d position(const Vector& q) const {
    Eigen::Vector2d pos = T * q + c0;
    for (const auto& t : terms) pos += rot(t.s.dot(q)) * t.d;
    return pos;
  }

  [[nodiscard]] Matrix jacobian(const Vector& q) const {
    Matrix j = T;
    for (const auto& t : terms) {
      const Eigen::Vector2d v = rot(t.s.dot(q)) * t.d;
      const Eigen::Vector2d dv(-v.y(), v.x());
      j += dv * t.s.transpose();
    }
    return j;
  }

  [[nodiscard]] Matrix jacobian_rate(const Vector& q, const Vector& q_dot) const {
    Matrix jd = Matrix::Zero(2, q.size());
    for (const auto& t : terms) {
      const Eigen::Vector2d v = rot(t.s.dot(q)) * t.d;
      jd -= v * (t.s.dot(q_dot)) * t.s.transpose();
    }
    return jd;
  }

  /// d J / d q_k.
  [[nodiscard]] Matrix jacobian_partial(const Vector& q, Eigen::Index k) const {
    Matrix jk = Matrix::Zero(2, q.size());
    for (const auto& t : terms) {
      if (t.s(k) == 0.0) continue;
      const Eigen::Vector2d v = rot(t.s.dot(q)) * t.d;
      jk -= v * t.s(k) * t.s.transpose();
    }
    return jk;
  }
};

struct PlanarBody {
  double mass = 0.0;
  double inertia = 0.0;  // about the center of mass
  PlanarPoint com;
  Vector angle;  // orientation = angle^T q
};

/// Rigid bodies in the plane with dynamics from the kinetic energy
/// 1/2 sum (m |J q'|^2 + I (s^T q')^2).
struct PlanarChain {
  int n = 0;
  double gravity = 9.81;
  std::vector<PlanarBody> bodies;

  [[nodiscard]] Matrix mass_matrix(const Vector& q) const {
    Matrix m = Matrix::Zero(n, n);
    for (const auto& b : bodies) {
      const Matrix j = b.com.jacobian(q);
      m += b.mass * j.transpose() * j + b.inertia * b.angle * b.angle.transpose();
    }
    return 0.5 * (m + m.transpose());
  }

  [[nodiscard]] Matrix mass_partial(const Vector& q, Eigen::Index k) const {
    Matrix dm = Matrix::Zero(n, n);
    for (const auto& b : bodies) {
      if (b.mass == 0.0) continue;
      const Matrix j = b.com.jacobian(q);
      const Matrix jk = b.com.jacobian_partial(q, k);
      dm += b.mass * (jk.transpose() * j + j.transpose() * jk);
    }
    return dm;
  }

  // Christoffel form, so that M' - 2C is skew-symmetric.
  [[nodiscard]] Matrix coriolis(const Vector& q, const Vector& q_dot) const {
    std::vector<Matrix> dm(static_cast<std::size_t>(n));
    Matrix m_dot = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      dm[static_cast<std::size_t>(k)] = mass_partial(q, k);
      m_dot += dm[static_cast<std::size_t>(k)] * q_dot(k);
    }
    Matrix x(n, n);
    for (int j = 0; j < n; ++j) x.col(j) = dm[static_cast<std::size_t>(j)] * q_dot;
    return 0.5 * (m_dot + x - x.transpose());
  }

  [[nodiscard]] Vector gravity_torque(const Vector& q) const {
    Vector g = Vector::Zero(n);
    const Eigen::Vector2d down(0.0, -gravity);
    for (const auto& b : bodies) g += b.mass * b.com.jacobian(q).transpose() * down;
    return g;
  }
};

/// Contact at a planar point. Coordinates are (horizontal, 0, vertical) and,
/// for a flat contact, (0, orientation) appended as moment rows.
inline ContactPoint planar_contact(const std::string& name, double mu, const PlanarPoint& point,
                                   const Vector* flat_angle = nullptr) {
  ContactPoint c;
  c.name = name;
  c.mu = mu;
  c.aux_rows = flat_angle ? 2 : 0;
  const int rows = c.rows();
  const Eigen::Index n = point.T.cols();
  const Vector angle = flat_angle ? *flat_angle : Vector::Zero(n);
  const bool flat = flat_angle != nullptr;
  c.coordinates = [point, angle, flat, rows](const Vector& q) -> Vector {
    Vector x = Vector::Zero(rows);
    const Eigen::Vector2d pos = point.position(q);
    x(0) = pos.x();
    x(2) = pos.y();
    if (flat) x(4) = angle.dot(q);
    return x;
  };
  c.jacobian = [point, angle, flat, rows, n](const Vector& q) -> Matrix {
    Matrix a = Matrix::Zero(rows, n);
    const Matrix j = point.jacobian(q);
    a.row(0) = -j.row(0);
    a.row(2) = -j.row(1);
    if (flat) a.row(4) = -angle.transpose();
    return a;
  };
  c.jacobian_rate = [point, rows, n](const Vector& q, const Vector& q_dot) -> Matrix {
    Matrix a = Matrix::Zero(rows, n);
    const Matrix jd = point.jacobian_rate(q, q_dot);
    a.row(0) = -jd.row(0);
    a.row(2) = -jd.row(1);
    return a;
  };
  return c;
}

/// Wires the chain dynamics into a model (shared, immutable).
inline void attach_chain(RobotModel& model, std::shared_ptr<const PlanarChain> chain) {
  model.n = chain->n;
  model.mass_matrix = [chain](const Vector& q) { return chain->mass_matrix(q); };
  model.coriolis_matrix = [chain](const Vector& q, const Vector& qd) {
    return chain->coriolis(q, qd);
  };
  model.gravity = [chain](const Vector& q) { return chain->gravity_torque(q); };
}

}  // namespace projctl
