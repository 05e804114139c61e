#include "projctl/constrained_dynamics.hpp"
#include "projctl/control_laws.hpp"
#include "projctl/models.hpp"
#include "projctl/torque_qcqp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

#include <gtest/gtest.h>

using projctl::Matrix;
using projctl::Vector;

namespace {

struct Setup {
  projctl::RobotModel model;
  projctl::RobotState state;
  projctl::ConstraintFrame frame;
};

Setup arm_setup(testgen::Rng& rng, double spread = 0.1) {
  Setup s{projctl::planar_arm_contact(), {}, {}};
  const Vector q = projctl::planar_arm_default_configuration(3) + spread * rng.gaussian(3);
  const auto st = projctl::stack_jacobians(s.model, q, {0});
  const Vector qd = 0.2 * (projctl::null_projector(st.A, 3).P * rng.gaussian(3));
  s.state = testfix::state_of(q, qd, {0});
  s.frame = projctl::build_frame(s.model, s.state, projctl::default_nu(s.model, q));
  return s;
}

Setup rest_setup(projctl::RobotModel model, const Vector& q, std::vector<int> active) {
  Setup s{std::move(model), {}, {}};
  s.state = testfix::state_of(q, Vector::Zero(s.model.n), std::move(active));
  s.frame = projctl::build_frame(s.model, s.state, projctl::default_nu(s.model, q));
  return s;
}

// Gravity compensation in the admissible subspace, which keeps the arm tip loaded.
Vector holding_torque(const Setup& s) { return -(s.frame.P() * s.frame.tau_g); }

}  // namespace

TEST(MotorWeighting, Examples) {
  EXPECT_LE((projctl::motor_weighting(Vector::Ones(3), Vector::Ones(3)) -
             Matrix::Identity(3, 3)).norm(), 0.0);
  EXPECT_DOUBLE_EQ(projctl::motor_weighting(Vector::Constant(1, 2.0), Vector::Constant(1, 2.0))(0, 0),
                   0.5);
  EXPECT_THROW(projctl::motor_weighting(Vector::Ones(2), Vector::Zero(2)), projctl::InputError);
}

TEST(MotorWeighting, MatchesOhmicLoss) {
  testgen::Rng rng(51);
  for (int k = 0; k < 100; ++k) {
    const int p = rng.integer(1, 6);
    Vector r(p), kt(p);
    for (int j = 0; j < p; ++j) {
      r(j) = rng.uniform(0.1, 5.0);
      kt(j) = rng.uniform(0.2, 3.0) * (rng.integer(0, 1) ? 1.0 : -1.0);
    }
    const Vector u = rng.gaussian(p);
    const Matrix W = projctl::motor_weighting(r, kt);
    const Vector i = u.cwiseQuotient(kt);
    const double ohm = i.dot(r.cwiseProduct(i));
    EXPECT_NEAR(projctl::power_loss(u, W), ohm, 1e-12 * std::max(1.0, ohm));
  }
}

TEST(PowerLoss, Examples) {
  EXPECT_EQ(projctl::power_loss(Vector::Zero(2), Matrix::Identity(2, 2)), 0.0);
  EXPECT_DOUBLE_EQ(projctl::power_loss(Eigen::Vector2d(3.0, 4.0), Matrix::Identity(2, 2)), 25.0);
}

TEST(ConeConstraints, ZeroForceGivesZeroValues) {
  const auto s = rest_setup(testfix::synthetic_model(Matrix::Identity(3, 3), Matrix::Identity(3, 3)),
                            Vector::Zero(3), {0});
  const auto cones = projctl::assemble_cone_constraints(s.model, s.state, s.frame);
  ASSERT_EQ(cones.size(), 1u);
  EXPECT_NEAR(cones[0].linear(Vector::Zero(3)), 0.0, 1e-15);
  EXPECT_NEAR(cones[0].quadratic(Vector::Zero(3)), 0.0, 1e-15);
}

TEST(ConeConstraints, PointMassNormalForce) {
  const double mass = 3.0;
  const auto s = rest_setup(projctl::point_mass(mass), Vector::Zero(3), {0});
  const auto cones = projctl::assemble_cone_constraints(s.model, s.state, s.frame);
  EXPECT_NEAR(cones[0].linear(Vector::Zero(3)), mass * 9.81, 1e-12);
  EXPECT_NEAR(cones[0].quadratic(Vector::Zero(3)), 0.25 * std::pow(mass * 9.81, 2), 1e-9);
}

TEST(ConeConstraints, RoundTripThroughContactForces) {
  testgen::Rng rng(52);
  for (int k = 0; k < 20; ++k) {
    const auto s = arm_setup(rng, 0.2);
    const auto cones = projctl::assemble_cone_constraints(s.model, s.state, s.frame);
    const auto& c = cones[0];
    const Matrix inner = -c.a_x * c.a_x.transpose() - c.a_y * c.a_y.transpose() +
                         c.mu * c.mu * c.a_z * c.a_z.transpose();
    EXPECT_LE((c.Pi - s.frame.S.transpose() * inner * s.frame.S).norm(), 1e-10);
    EXPECT_LE((c.G - c.G.transpose()).norm(), 1e-12);
    for (int j = 0; j < 10; ++j) {
      const Vector u = 10.0 * rng.gaussian(3);
      const auto w = projctl::contact_forces(s.frame, s.model, s.state, u);
      const double lx = w.lambda(0), ly = w.lambda(1), lz = w.lambda(2);
      const double quad = c.mu * c.mu * lz * lz - lx * lx - ly * ly;
      EXPECT_NEAR(c.linear(u), lz, 1e-8 * std::max(1.0, std::abs(lz)));
      EXPECT_NEAR(c.quadratic(u), quad, 1e-8 * std::max(1.0, lz * lz));
    }
  }
}

TEST(AssembleProgram, ConstraintCounts) {
  Matrix a(1, 2);
  a << 1.0, 0.0;
  const auto s = rest_setup(testfix::synthetic_model(Matrix::Identity(2, 2), a), Vector::Zero(2), {0});
  auto prog = projctl::assemble_program(s.model, s.state, s.frame, Vector::Zero(2));
  EXPECT_EQ(prog.constraint_count(), 6);
  EXPECT_EQ(prog.constraints(Vector::Zero(2)).size(), 6);
  const auto same = projctl::add_moment_constraints(prog, s.frame, s.model, s.state, {});
  EXPECT_EQ(same.constraint_count(), 6);
  prog = projctl::add_moment_constraints(prog, s.frame, s.model, s.state, {1, 2});
  EXPECT_EQ(prog.constraint_count(), 8);
  EXPECT_EQ(prog.constraints(Vector::Zero(2)).size(), 8);
  EXPECT_THROW(projctl::add_moment_constraints(prog, s.frame, s.model, s.state, {3}),
               projctl::InputError);
}

TEST(AssembleProgram, ConstraintsMatchDirectEvaluation) {
  testgen::Rng rng(53);
  const auto s = arm_setup(rng);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, holding_torque(s));
  for (int j = 0; j < 20; ++j) {
    const Vector u = 20.0 * rng.gaussian(3);
    const auto w = projctl::contact_forces(s.frame, s.model, s.state, u);
    const Vector c = prog.constraints(u);
    const double lz = w.lambda(2);
    EXPECT_NEAR(c(0), lz, 1e-8 * std::max(1.0, std::abs(lz)));
    EXPECT_NEAR(c(1), 0.64 * lz * lz - w.lambda(0) * w.lambda(0) - w.lambda(1) * w.lambda(1),
                1e-8 * std::max(1.0, lz * lz));
    for (int i = 0; i < 3; ++i) {
      EXPECT_DOUBLE_EQ(c(2 + i), s.model.u_max(i) - u(i));
      EXPECT_DOUBLE_EQ(c(5 + i), u(i) - s.model.u_min(i));
    }
  }
}

TEST(Phase1, FeasibleSeedIsKept) {
  const auto s = rest_setup(testfix::free_model(Matrix::Identity(3, 3), Vector::Zero(3)),
                            Vector::Zero(3), {});
  const Vector tau = Eigen::Vector3d(1.0, -2.0, 0.5);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
  const auto r = projctl::phase1_feasible_point(prog);
  ASSERT_TRUE(r.feasible);
  EXPECT_EQ((r.u - prog.default_start).norm(), 0.0);
}

TEST(Phase1, DegenerateBoxGivesCertificate) {
  const auto s = rest_setup(testfix::free_model(Matrix::Identity(2, 2), Vector::Zero(2)),
                            Vector::Zero(2), {});
  auto prog = projctl::assemble_program(s.model, s.state, s.frame, Vector::Zero(2));
  prog.E = Matrix::Zero(2, 2);  // leave only the box
  prog.u_min = prog.u_max;
  const auto r = projctl::phase1_feasible_point(prog);
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.status, projctl::SolverStatus::infeasible_inequality);
  EXPECT_LE(r.best_margin, 0.0);
  EXPECT_EQ(projctl::solve_barrier(prog).status, projctl::SolverStatus::infeasible_inequality);
}

TEST(Phase1, TightConeStartIsStrictlyFeasible) {
  projctl::ArmParams params;
  params.mu = 0.05;
  testgen::Rng rng(54);
  const auto s = rest_setup(projctl::planar_arm_contact(params),
                            projctl::planar_arm_default_configuration(3), {0});
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, holding_torque(s));
  const auto r = projctl::phase1_feasible_point(prog);
  ASSERT_TRUE(r.feasible);
  EXPECT_GT(prog.constraints(r.u).minCoeff(), 0.0);
  EXPECT_LE(prog.phi(r.u).norm(), 1e-9 * std::max(1.0, prog.tau_c.norm()));
}

TEST(SolveBarrier, UnconstrainedLimit) {
  const auto s = rest_setup(testfix::free_model(Matrix::Identity(3, 3), Vector::Zero(3)),
                            Vector::Zero(3), {});
  const Vector tau = Eigen::Vector3d(1.0, -2.0, 0.5);
  const auto rep = projctl::solve_barrier(projctl::assemble_program(s.model, s.state, s.frame, tau));
  ASSERT_EQ(rep.status, projctl::SolverStatus::optimal);
  EXPECT_LE((rep.u_star - tau).norm(), 1e-6);
  EXPECT_LE(rep.duality_gap, 1e-8);
}

TEST(SolveBarrier, WeightedLeastNormWhenInactive) {
  testgen::Rng rng(55);
  for (int k = 0; k < 20; ++k) {
    auto model = testfix::free_model(rng.spd(2), Vector::Zero(2));
    model.p = 4;
    model.B = rng.gaussian(2, 4);
    projctl::MotorParams motors = projctl::MotorParams::uniform(4, 1e3);
    for (int j = 0; j < 4; ++j) motors.resistance(j) = rng.uniform(0.2, 5.0);
    projctl::apply_motors(model, motors);
    const auto s = rest_setup(model, Vector::Zero(2), {});
    const Vector tau = rng.gaussian(2);
    const auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
    const auto rep = projctl::solve_barrier(prog);
    ASSERT_EQ(rep.status, projctl::SolverStatus::optimal);
    const Vector ref = oracle::weighted_least_norm(prog.W, prog.E, tau);
    EXPECT_LE((rep.u_star - ref).norm(), 1e-6 * std::max(1.0, ref.norm()));
    EXPECT_LE(prog.phi(rep.u_star).norm(), 1e-9);
  }
}

TEST(SolveBarrier, ArmSolutionIsFeasibleAndCheaper) {
  testgen::Rng rng(56);
  for (int k = 0; k < 10; ++k) {
    const auto s = arm_setup(rng);
    const Vector tau = holding_torque(s);
    const auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
    const auto rep = projctl::solve_barrier(prog);
    ASSERT_EQ(rep.status, projctl::SolverStatus::optimal) << rep.message;
    EXPECT_GT(prog.constraints(rep.u_star).minCoeff(), 0.0);
    EXPECT_LE(prog.phi(rep.u_star).norm(), 1e-8);
    const Vector mn = projctl::min_norm_actuation(s.frame, s.model.B, tau);
    if (prog.constraints(mn).minCoeff() > 0.0) {
      EXPECT_LE(rep.objective, projctl::power_loss(mn, prog.W) + 1e-6);
    }
  }
}

TEST(Relaxation, SmallRhoRecoversPowerObjective) {
  testgen::Rng rng(57);
  const auto s = arm_setup(rng);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, holding_torque(s));
  // |W' - W| is linear in rho
  const double slope = (projctl::relax_program(prog, s.frame, 1.0).relaxation.W_prime - prog.W).norm();
  for (double rho : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const auto rel = projctl::relax_program(prog, s.frame, rho);
    EXPECT_NEAR((rel.relaxation.W_prime - rel.W).norm(), rho * slope, 1e-9 * rho * slope + 1e-13);
  }
  EXPECT_THROW(projctl::relax_program(prog, s.frame, 0.0), projctl::InputError);
}

TEST(Relaxation, GradientMatchesPenalizedObjective) {
  testgen::Rng rng(58);
  const auto s = arm_setup(rng);
  const Vector tau = holding_torque(s);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
  const Matrix PB = s.frame.P() * s.model.B;
  for (double rho : {1.0, 10.0, 100.0}) {
    const auto rel = projctl::relax_program(prog, s.frame, rho);
    auto penalized = [&](const Vector& u) {
      return u.dot(prog.W * u) + rho * (s.frame.M_bar_inv * (tau - PB * u)).squaredNorm();
    };
    for (int j = 0; j < 5; ++j) {
      const Vector u = rng.gaussian(3);
      const Vector fd = oracle::fd_gradient(penalized, u, 1e-5);
      EXPECT_LE((rel.objective_gradient(u) - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
      // equal up to a constant
      EXPECT_NEAR(rel.objective(u) - penalized(u), rel.objective(Vector::Zero(3)) -
                                                       penalized(Vector::Zero(3)),
                  1e-8 * std::max(1.0, penalized(u)));
    }
  }
}

TEST(Relaxation, DisturbanceShrinksWithRho) {
  const auto s = rest_setup(testfix::free_model(Matrix::Identity(2, 2), Vector::Zero(2)),
                            Vector::Zero(2), {});
  const Vector tau = Eigen::Vector2d(2.0, -1.0);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
  double last = std::numeric_limits<double>::infinity();
  for (double rho : {1.0, 10.0, 100.0}) {
    const auto rep = projctl::solve_barrier(projctl::relax_program(prog, s.frame, rho));
    ASSERT_TRUE(rep.ok()) << rep.message;
    const double d = (s.frame.M_bar_inv * prog.phi(rep.u_star)).norm();
    EXPECT_LT(d, last);
    last = d;
  }
  EXPECT_LE(last, 0.05);
}

TEST(MomentConstraints, RowEqualsNegativeMultiplier) {
  const auto model = projctl::flat_foot_pendulum();
  const Vector q = Vector::Zero(4);
  const auto s = rest_setup(model, q, {0});
  testgen::Rng rng(59);
  auto prog = projctl::assemble_program(s.model, s.state, s.frame, Vector::Zero(4));
  const int moment_row = s.frame.stack.blocks[0].row + 4;
  prog = projctl::add_moment_constraints(prog, s.frame, s.model, s.state, {moment_row});
  for (int j = 0; j < 10; ++j) {
    const Vector u = rng.gaussian(1);
    const auto w = projctl::contact_forces(s.frame, s.model, s.state, u);
    const Vector c = prog.constraints(u);
    EXPECT_NEAR(c(c.size() - 1), -w.lambda(moment_row), 1e-9);
  }
}

TEST(MomentConstraints, SymmetricLoadSitsOnBoundary) {
  const auto model = projctl::flat_foot_pendulum();
  const auto s = rest_setup(model, Vector::Zero(4), {0});
  const int moment_row = s.frame.stack.blocks[0].row + 4;
  auto prog = projctl::assemble_program(s.model, s.state, s.frame, Vector::Zero(4));
  prog = projctl::add_moment_constraints(prog, s.frame, s.model, s.state, {moment_row});
  const auto rows = projctl::boundary_rows(prog, Vector::Zero(1));
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.back(), prog.constraint_count() - 1);
}

TEST(ForceRegulation, CurrentForceKeepsSolutionFeasible) {
  testgen::Rng rng(60);
  const auto s = arm_setup(rng);
  const Vector tau = holding_torque(s);
  auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
  const auto base = projctl::solve_barrier(prog);
  ASSERT_EQ(base.status, projctl::SolverStatus::optimal);
  const auto w = projctl::contact_forces(s.frame, s.model, s.state, base.u_star);
  const auto reg = projctl::add_force_regulation(prog, s.frame, s.model, s.state, {2},
                                                 Vector::Constant(1, w.lambda(2)));
  EXPECT_LE(reg.equality_residual(base.u_star).norm(), 1e-8);
}

TEST(ForceRegulation, ReachableTargetIsReproduced) {
  testgen::Rng rng(61);
  const auto s = arm_setup(rng);
  const Vector tau = holding_torque(s);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, tau);
  const auto base = projctl::solve_barrier(prog);
  ASSERT_EQ(base.status, projctl::SolverStatus::optimal);
  const double target =
      projctl::contact_forces(s.frame, s.model, s.state, base.u_star).lambda(2) + 1.0;
  const auto reg = projctl::add_force_regulation(prog, s.frame, s.model, s.state, {2},
                                                 Vector::Constant(1, target));
  const auto rep = projctl::solve_barrier(reg);
  ASSERT_EQ(rep.status, projctl::SolverStatus::optimal) << rep.message;
  EXPECT_NEAR(projctl::contact_forces(s.frame, s.model, s.state, rep.u_star).lambda(2), target,
              1e-6);
  EXPECT_LE(prog.phi(rep.u_star).norm(), 1e-8);
}

TEST(ForceRegulation, UnreachableTargetIsInfeasibleEquality) {
  const auto model = projctl::flat_foot_pendulum();
  const auto s = rest_setup(model, Vector::Zero(4), {0});
  Vector tau = Vector::Zero(4);
  tau(3) = 0.3;
  const Vector u0 = projctl::min_norm_actuation(s.frame, s.model.B, s.frame.P() * tau);
  const auto prog = projctl::assemble_program(s.model, s.state, s.frame, s.frame.P() * tau);
  const double lz = projctl::contact_forces(s.frame, s.model, s.state, u0).lambda(2);
  const auto reg = projctl::add_force_regulation(prog, s.frame, s.model, s.state, {2},
                                                 Vector::Constant(1, lz + 50.0));
  EXPECT_EQ(projctl::solve_barrier(reg).status, projctl::SolverStatus::infeasible_equality);
}
