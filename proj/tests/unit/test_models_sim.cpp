#include "projctl/constrained_dynamics.hpp"
#include "projctl/models.hpp"
#include "projctl/scenario.hpp"
#include "projctl/simulator.hpp"
#include "projctl/torque_qcqp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

#include <gtest/gtest.h>

using projctl::Matrix;
using projctl::Vector;

namespace {

Vector arm_velocity(const projctl::RobotModel& arm, const Vector& q, const Vector& raw) {
  const auto s = projctl::stack_jacobians(arm, q, {0});
  return projctl::null_projector(s.A, arm.n).P * raw;
}

projctl::BipedParams point_feet() {
  projctl::BipedParams p;
  p.foot = projctl::BipedParams::Foot::point;
  return p;
}

}  // namespace

TEST(PlanarArm, GravityFreeAtRest) {
  projctl::ArmParams params;
  params.gravity = 0.0;
  const auto arm = projctl::planar_arm_contact(params);
  const Vector q = projctl::planar_arm_default_configuration(3);
  EXPECT_EQ(arm.gravity(q).norm(), 0.0);
  EXPECT_EQ((arm.coriolis_matrix(q, Vector::Zero(3)) * Vector::Zero(3)).norm(), 0.0);
}

TEST(PlanarArm, RejectsNonphysicalParameters) {
  projctl::ArmParams params;
  params.masses[1] = -1.0;
  EXPECT_THROW(projctl::planar_arm_contact(params), projctl::InputError);
}

TEST(PlanarArm, InertiaPositiveDefiniteEverywhere) {
  const auto arm = projctl::planar_arm_contact();
  testgen::Rng rng(71);
  for (int k = 0; k < 1000; ++k) {
    Vector q(3);
    for (int i = 0; i < 3; ++i) q(i) = rng.uniform(-M_PI, M_PI);
    const Matrix M = arm.mass_matrix(q);
    EXPECT_LE((M - M.transpose()).norm(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(PlanarArm, InertiaRateMinusTwoCoriolisIsSkew) {
  const auto arm = projctl::planar_arm_contact();
  testgen::Rng rng(72);
  const double h = 1e-5;
  for (int k = 0; k < 100; ++k) {
    const Vector q = rng.gaussian(3);
    const Vector qd = rng.gaussian(3);
    const Matrix m_dot = (arm.mass_matrix(q + h * qd) - arm.mass_matrix(q - h * qd)) / (2.0 * h);
    const Matrix n = m_dot - 2.0 * arm.coriolis_matrix(q, qd);
    EXPECT_LE((n + n.transpose()).norm(), 1e-9);
  }
}

TEST(FloatingBiped, BaseIsUnactuated) {
  for (const auto& params : {projctl::BipedParams{}, point_feet()}) {
    const auto biped = projctl::floating_biped(params);
    EXPECT_LT(biped.p, biped.n);
    EXPECT_EQ(biped.B.topRows(3).norm(), 0.0);
    Eigen::FullPivLU<Matrix> lu(biped.B);
    EXPECT_EQ(lu.rank(), biped.p);
  }
  EXPECT_EQ(projctl::floating_biped().n, 9);
  EXPECT_EQ(projctl::floating_biped(point_feet()).n, 7);
}

TEST(FloatingBiped, StandingStillLoadsBothFeet) {
  for (const auto& params : {projctl::BipedParams{}, point_feet()}) {
    const auto biped = projctl::floating_biped(params);
    const Vector q = projctl::biped_standing_configuration(params);
    const auto st = testfix::state_of(q, Vector::Zero(biped.n), {0, 1});
    const auto f = projctl::build_frame(biped, st, projctl::default_nu(biped, q));
    const Vector tau = -(f.P() * f.tau_g);
    const auto rep = projctl::solve_barrier(projctl::assemble_program(biped, st, f, tau));
    ASSERT_EQ(rep.status, projctl::SolverStatus::optimal) << rep.message;
    const auto w = projctl::contact_forces(f, biped, st, rep.u_star);
    EXPECT_GT(w.normal(0), 0.0);
    EXPECT_GT(w.normal(1), 0.0);
    EXPECT_TRUE(w.admissible());
  }
}

TEST(Step, ZeroDynamicsLeavesStateUnchanged) {
  const auto model = testfix::free_model(Matrix::Identity(2, 2), Vector::Zero(2));
  auto st = testfix::state_of(Eigen::Vector2d(0.3, -0.1), Vector::Zero(2), {});
  const auto next = projctl::step(model, st, Vector::Zero(2), 1e-3, {}, 1.0);
  EXPECT_EQ((next.q - st.q).norm(), 0.0);
  EXPECT_EQ(next.q_dot.norm(), 0.0);
  EXPECT_THROW(projctl::step(model, st, Vector::Zero(2), -1e-3, {}, 1.0), projctl::InputError);
}

TEST(Step, GravityFreeConstrainedMotionConservesEnergy) {
  projctl::ArmParams params;
  params.gravity = 0.0;
  const auto arm = projctl::planar_arm_contact(params);
  const Vector q0 = projctl::planar_arm_default_configuration(3);
  auto st = testfix::state_of(q0, arm_velocity(arm, q0, Eigen::Vector3d(0.5, -0.3, 0.4)), {0});
  const double nu = projctl::default_nu(arm, q0);
  auto energy = [&](const projctl::RobotState& s) {
    return 0.5 * s.q_dot.dot(arm.mass_matrix(s.q) * s.q_dot);
  };
  const double e0 = energy(st);
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) st = projctl::step(arm, st, Vector::Zero(3), dt, {}, nu);
  EXPECT_LE(std::abs(energy(st) - e0), 1e-6);
}

TEST(Step, MatchesSaddlePointIntegration) {
  const auto arm = projctl::planar_arm_contact();
  const Vector q0 = projctl::planar_arm_default_configuration(3);
  auto st = testfix::state_of(q0, arm_velocity(arm, q0, Eigen::Vector3d(0.2, 0.1, -0.2)), {0});
  const double nu = projctl::default_nu(arm, q0);
  // Hold the configuration with gravity compensation computed once.
  const auto f0 = projctl::build_frame(arm, st, nu);
  const Vector u = projctl::pseudo_inverse(f0.P() * arm.B) * (-(f0.P() * f0.tau_g));

  auto oracle_accel = [&](const Vector& q, const Vector& qd) {
    const Matrix A = arm.contacts[0].jacobian(q);
    const Matrix Ad = arm.contacts[0].jacobian_rate(q, qd);
    return oracle::saddle_point(arm.mass_matrix(q), arm.coriolis_matrix(q, qd), arm.gravity(q),
                                arm.B, u, A, Ad, qd)
        .q_ddot;
  };
  Vector q = st.q;
  Vector v = st.q_dot;
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    st = projctl::step(arm, st, u, dt, {}, nu);
    const Vector a1 = oracle_accel(q, v);
    const Vector v2 = v + 0.5 * dt * a1;
    const Vector a2 = oracle_accel(q + 0.5 * dt * v, v2);
    const Vector v3 = v + 0.5 * dt * a2;
    const Vector a3 = oracle_accel(q + 0.5 * dt * v2, v3);
    const Vector v4 = v + dt * a3;
    const Vector a4 = oracle_accel(q + dt * v3, v4);
    q += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
    v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  EXPECT_LE((st.q - q).norm(), 1e-5);
  EXPECT_LE((st.q_dot - v).norm(), 1e-5);
}

TEST(SwitchContacts, SameSetIsNoOp) {
  const auto biped = projctl::floating_biped();
  const Vector q = projctl::biped_standing_configuration(projctl::BipedParams{});
  testgen::Rng rng(73);
  const auto st = testfix::state_of(q, rng.gaussian(biped.n), {0, 1});
  const auto next = projctl::switch_contacts(biped, st, {0, 1});
  EXPECT_EQ((next.q_dot - st.q_dot).norm(), 0.0);
  EXPECT_EQ(next.active_contacts, st.active_contacts);
  EXPECT_THROW(projctl::switch_contacts(biped, st, {5}), projctl::InputError);
}

TEST(SwitchContacts, DeactivatingAllFreesTheRobot) {
  const auto biped = projctl::floating_biped();
  const Vector q = projctl::biped_standing_configuration(projctl::BipedParams{});
  const auto st = testfix::state_of(q, Vector::Zero(biped.n), {0, 1});
  const auto next = projctl::switch_contacts(biped, st, {});
  const auto f = projctl::build_frame(biped, next, 1.0);
  EXPECT_LE((f.P() - Matrix::Identity(biped.n, biped.n)).norm(), 1e-15);
  EXPECT_EQ(f.M_bar.rows(), biped.n);
}

TEST(SwitchContacts, SingleToDoubleSupportProjectsVelocity) {
  const auto biped = projctl::floating_biped();
  const Vector q = projctl::biped_standing_configuration(projctl::BipedParams{});
  testgen::Rng rng(74);
  for (int k = 0; k < 20; ++k) {
    const auto s1 = projctl::stack_jacobians(biped, q, {1});
    const Vector qd = projctl::null_projector(s1.A, biped.n).P * rng.gaussian(biped.n);
    const auto st = testfix::state_of(q, qd, {1});
    const auto both = projctl::switch_contacts(biped, st, {0, 1});
    EXPECT_LE(projctl::detail::velocity_drift(biped, both), 1e-10);
    const auto single = projctl::switch_contacts(biped, both, {1});
    EXPECT_LE(projctl::detail::velocity_drift(biped, single), 1e-10);
    const auto f = projctl::build_frame(biped, single, 1.0);
    EXPECT_EQ(f.P().rows(), biped.n);
    EXPECT_EQ(f.S.rows(), biped.n);
  }
}

TEST(Simulate, RecordCountAndDimensions) {
  auto rc = projctl::load_config(std::string(PROJCTL_SCENARIO_DIR) + "/arm_tracking.json");
  rc.scenario.duration = 0.05;
  const auto tr = projctl::simulate(rc.scenario);
  ASSERT_EQ(static_cast<long>(tr.records.size()), rc.scenario.steps() + 1);
  for (const auto& r : tr.records) {
    EXPECT_TRUE(r.dims_fixed);
    EXPECT_LE(r.drift, 1e-8);
    EXPECT_FALSE(r.violation);
    EXPECT_GT(r.normal(0), 0.0);
  }
}

TEST(Simulate, Deterministic) {
  auto rc = projctl::load_config(std::string(PROJCTL_SCENARIO_DIR) + "/biped_switch.json");
  rc.scenario.duration = 0.05;
  const auto a = projctl::simulate(rc.scenario);
  const auto b = projctl::simulate(rc.scenario);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_TRUE(a.records[i].q == b.records[i].q);
    EXPECT_TRUE(a.records[i].u == b.records[i].u);
  }
}
