#include "nthdyn/closed_form_eom.hpp"
#include "nthdyn/recursive_dynamics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <functional>

using namespace nthdyn;
using nthdyn::test::fixture_model;
using nthdyn::test::fixture_traj;
using nthdyn::test::max_abs;
using nthdyn::test::rel_diff;

namespace {

JointState random_state(std::mt19937& rng, int dof, int order) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<VecX> q;
  for (int r = 0; r <= order; ++r) {
    VecX v(dof);
    for (int i = 0; i < dof; ++i) v[i] = u(rng);
    q.push_back(v);
  }
  return make_state(0.0, q);
}

struct FdCase {
  const char* name;
  std::function<MatX(const SystemMatrices&, int)> get;
};

// Every stored series checked as D of the previous order by central differences.
std::vector<FdCase> fd_cases() {
  return {
      {"a", [](const SystemMatrices& s, int r) -> MatX { return s.a[r]; }},
      {"A", [](const SystemMatrices& s, int r) -> MatX { return s.A[r]; }},
      {"J", [](const SystemMatrices& s, int r) -> MatX { return s.J[r]; }},
      {"V", [](const SystemMatrices& s, int r) -> MatX { return s.V[r]; }},
      {"b", [](const SystemMatrices& s, int r) -> MatX { return s.b[r]; }},
      {"Csys", [](const SystemMatrices& s, int r) -> MatX { return s.Csys[r]; }},
      {"U", [](const SystemMatrices& s, int r) -> MatX { return s.U[r]; }},
      {"M", [](const SystemMatrices& s, int r) -> MatX { return s.M[r]; }},
      {"C", [](const SystemMatrices& s, int r) -> MatX { return s.C[r]; }},
      {"Qgrav", [](const SystemMatrices& s, int r) -> MatX { return s.Qgrav[r]; }},
  };
}

}  // namespace

TEST(SystemMatrices, SingleBody) {
  const ChainModel m = fixture_model("pendulum");
  std::mt19937 rng(1);
  const JointState st = random_state(rng, 1, 3);
  const SystemMatrices s = evaluate_system(m, st, 0);
  const Vec6 x = m.bodies[0].joint_screw.vector();
  EXPECT_EQ(max_abs(s.A[0] - MatX::Identity(6, 6)), 0.0);
  EXPECT_EQ(max_abs(s.J[0] - x), 0.0);
  EXPECT_EQ(max_abs(s.V[0] - x * st.q[1][0]), 0.0);
}

TEST(SystemMatrices, ZeroVelocity) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(2);
  JointState st = random_state(rng, 6, 3);
  st.q[1].setZero();
  const SystemMatrices s = evaluate_system(m, st, 0);
  EXPECT_EQ(max_abs(s.a[0]), 0.0);
  EXPECT_EQ(max_abs(s.b[0]), 0.0);
  EXPECT_EQ(max_abs(s.Csys[0]), 0.0);
}

TEST(SystemMatrices, ZeroVelocityAndAccelerationLeavesOnlyRateOfA) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(3);
  JointState st = random_state(rng, 6, 3);
  st.q[1].setZero();
  st.q[2].setZero();
  const SystemMatrices s = evaluate_system(m, st, 1);
  EXPECT_EQ(max_abs(s.a[1] - derivative_a(m, st, 1)), 0.0);
  EXPECT_LT(max_abs(s.Csys[1] + s.Msys * s.A[0] * s.a[1]), 1e-14);
}

TEST(SystemMatrices, StructureOfA) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(4);
  const JointState st = random_state(rng, 6, 2);
  const SystemMatrices s = evaluate_system(m, st, 0);
  const auto c = forward_kinematics(m, st, 0);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(max_abs(s.A[0].block<6, 6>(6 * i, 6 * i) - Mat6::Identity()), 0.0);
    for (int j = i + 1; j < 6; ++j) EXPECT_EQ(max_abs(s.A[0].block<6, 6>(6 * i, 6 * j)), 0.0);
    if (i > 0) {
      const Mat6 rel = adjoint_matrix(c.rel_pose[static_cast<std::size_t>(i)]);
      EXPECT_LT(max_abs(s.A[0].block<6, 6>(6 * i, 6 * (i - 1)) - rel), 1e-13);
    }
  }
}

TEST(SystemMatrices, SmallAAnnihilatesScrews) {
  for (const std::string name : {"planar_2r", "chain_6r"}) {
    const ChainModel m = fixture_model(name);
    std::mt19937 rng(5);
    const JointState st = random_state(rng, m.dof(), 6);
    const SystemMatrices s = evaluate_system(m, st, 4);
    for (int r = 0; r <= 4; ++r) {
      EXPECT_EQ(max_abs(apply_a(m, st, r, s.X)), 0.0) << name << " " << r;
      EXPECT_LT(max_abs(s.a[r] * s.X), 1e-14) << name << " " << r;
    }
  }
}

TEST(SystemMatrices, JacobianColumnsAreRecursiveScrews) {
  for (const std::string name : {"planar_2r", "chain_6r"}) {
    const ChainModel m = fixture_model(name);
    std::mt19937 rng(6);
    const JointState st = random_state(rng, m.dof(), 5);
    const SystemMatrices s = evaluate_system(m, st, 3);
    const auto c = forward_kinematics(m, st, 3);
    for (int r = 0; r <= 3; ++r) {
      for (int i = 0; i < m.dof(); ++i) {
        for (int j = 0; j < m.dof(); ++j) {
          const Vec6 blk = s.J[r].block<6, 1>(6 * i, j);
          if (j > i) {
            EXPECT_EQ(max_abs(blk), 0.0);
          } else {
            const Vec6& rec = c.screw[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][r];
            EXPECT_LT(max_abs(blk - rec), 1e-12 * std::max(1.0, max_abs(rec))) << name << " r " << r;
          }
        }
        EXPECT_LT(max_abs(s.V[r].segment<6>(6 * i) - c.twist[static_cast<std::size_t>(i)][r]),
                  1e-12 * std::max(1.0, max_abs(c.twist[static_cast<std::size_t>(i)][r])));
      }
    }
  }
}

TEST(SystemMatrices, FirstDerivativeIdentities) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(7);
  const JointState st = random_state(rng, 6, 4);
  const SystemMatrices s = evaluate_system(m, st, 2);
  const MatX& A = s.A[0];
  const MatX& a = s.a[0];
  EXPECT_LT(rel_diff(s.A[1], A * a - A * a * A), 1e-14);
  EXPECT_LT(rel_diff(s.J[1], -A * a * s.J[0]), 1e-12);
  EXPECT_LT(rel_diff(s.A[1] * s.X, -A * a * s.J[0]), 1e-12);
  EXPECT_LT(rel_diff(s.V[1], s.J[0] * st.q[2] - A * a * s.V[0]), 1e-12);
  EXPECT_LT(rel_diff(s.V[0], s.J[0] * st.q[1]), 1e-15);
}

TEST(SystemMatrices, BlockwiseSmallAMatchesDenseProduct) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(18);
  const JointState st = random_state(rng, 6, 5);
  const SystemMatrices s = evaluate_system(m, st, 3);
  for (int r = 0; r <= 3; ++r) {
    EXPECT_LT(rel_diff(apply_a(m, st, r, s.A[0]), s.a[r] * s.A[0]), 1e-15);
    EXPECT_LT(rel_diff(apply_a(m, st, r, s.J[1]), s.a[r] * s.J[1]), 1e-15);
  }
  EXPECT_THROW(static_cast<void>(apply_a(m, st, 0, MatX::Zero(5, 1))), std::invalid_argument);
}

TEST(SystemMatrices, ConstantConfiguration) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(8);
  JointState st = random_state(rng, 6, 6);
  for (int r = 1; r <= 6; ++r) st.q[r].setZero();
  const SystemMatrices s = evaluate_system(m, st, 4);
  for (int r = 1; r <= 4; ++r) {
    EXPECT_EQ(max_abs(s.A[r]), 0.0);
    EXPECT_EQ(max_abs(s.J[r]), 0.0);
    EXPECT_EQ(max_abs(s.M[r]), 0.0);
    EXPECT_EQ(max_abs(s.Qgrav[r]), 0.0);
  }
}

TEST(SystemMatrices, ZeroGravity) {
  ChainModel m = fixture_model("chain_6r");
  m.gravity.setZero();
  std::mt19937 rng(9);
  const SystemMatrices s = evaluate_system(m, random_state(rng, 6, 6), 4);
  for (int r = 0; r <= 4; ++r) EXPECT_EQ(max_abs(s.Qgrav[r]), 0.0);
}

TEST(SystemMatrices, GravityTransportIsStackedInverseConfigurations) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(10);
  const JointState st = random_state(rng, 6, 2);
  const SystemMatrices s = evaluate_system(m, st, 0);
  const auto c = forward_kinematics(m, st, 0);
  for (int i = 0; i < 6; ++i) {
    const Mat6 expect = adjoint_matrix(c.pose[static_cast<std::size_t>(i)].inverse());
    EXPECT_LT(max_abs(s.U[0].block<6, 6>(6 * i, 0) - expect), 1e-13);
  }
}

TEST(SystemMatrices, GravityTransportRate) {
  // d/dt Ad_{C_i^-1} = -ad_{V_i} Ad_{C_i^-1}
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(11);
  const SystemMatrices s = evaluate_system(m, random_state(rng, 6, 3), 1);
  EXPECT_LT(rel_diff(s.U[1], -s.b[0] * s.U[0]), 1e-13);
}

TEST(SystemMatrices, MassMatrixSymmetricAndPositive) {
  for (const std::string name : {"pendulum", "planar_2r", "chain_6r"}) {
    const ChainModel m = fixture_model(name);
    std::mt19937 rng(12);
    const SystemMatrices s = evaluate_system(m, random_state(rng, m.dof(), 7), 5);
    for (int r = 0; r <= 5; ++r) {
      EXPECT_LT(max_abs(s.M[r] - s.M[r].transpose()), 1e-12 * std::max(1.0, max_abs(s.M[r]))) << name << r;
    }
    Eigen::SelfAdjointEigenSolver<MatX> eig(s.M[0]);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0) << name;
  }
}

TEST(SystemMatrices, SeriesMatchFiniteDifferences) {
  const ChainModel m = fixture_model("planar_2r");
  const JointTrajectory traj = fixture_traj("planar_2r_sin");
  const double h = 1e-6;
  for (double t : {0.2, 1.1}) {
    const SystemMatrices s = evaluate_system(m, sample(traj, t, 5), 4);
    const SystemMatrices sp = evaluate_system(m, sample(traj, t + h, 5), 3);
    const SystemMatrices sm = evaluate_system(m, sample(traj, t - h, 5), 3);
    for (const auto& c : fd_cases()) {
      for (int r = 1; r <= 4; ++r) {
        const MatX fd = (c.get(sp, r - 1) - c.get(sm, r - 1)) / (2 * h);
        EXPECT_LT(rel_diff(fd, c.get(s, r)), 1e-5) << c.name << " order " << r << " t " << t;
      }
    }
  }
}

TEST(SystemMatrices, SixAxisSeriesMatchFiniteDifferences) {
  const ChainModel m = fixture_model("chain_6r");
  const JointTrajectory traj = fixture_traj("chain_6r_sin");
  const double t = 0.65, h = 1e-6;
  const SystemMatrices s = evaluate_system(m, sample(traj, t, 4), 3);
  const SystemMatrices sp = evaluate_system(m, sample(traj, t + h, 4), 2);
  const SystemMatrices sm = evaluate_system(m, sample(traj, t - h, 4), 2);
  for (const auto& c : fd_cases()) {
    for (int r = 1; r <= 3; ++r) {
      const MatX fd = (c.get(sp, r - 1) - c.get(sm, r - 1)) / (2 * h);
      EXPECT_LT(rel_diff(fd, c.get(s, r)), 1e-5) << c.name << " order " << r;
    }
  }
}

TEST(Assembly, FirstOrderCoefficients) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(13);
  const JointState st = random_state(rng, 6, 4);
  const GeneralizedEOM e = generalized_eom(evaluate_system(m, st, 2));
  EXPECT_EQ(max_abs(coefficient(e, 1, 3) - e.M[0]), 0.0);
  EXPECT_EQ(max_abs(coefficient(e, 1, 2) - (e.M[1] + e.C[0])), 0.0);
  EXPECT_EQ(max_abs(coefficient(e, 1, 1) - e.C[1]), 0.0);
  const VecX qd1 = e.M[0] * st.q[3] + (e.M[1] + e.C[0]) * st.q[2] + e.C[1] * st.q[1] + e.Qgrav[1];
  EXPECT_LT(rel_diff(assemble_Q(e, st, 1), qd1), 1e-14);
}

TEST(Assembly, SecondOrderCoefficients) {
  const ChainModel m = fixture_model("chain_6r");
  std::mt19937 rng(14);
  const JointState st = random_state(rng, 6, 4);
  const GeneralizedEOM e = generalized_eom(evaluate_system(m, st, 2));
  EXPECT_EQ(max_abs(coefficient(e, 2, 4) - e.M[0]), 0.0);
  EXPECT_LT(max_abs(coefficient(e, 2, 3) - (2.0 * e.M[1] + e.C[0])), 1e-14 * max_abs(e.M[1]));
  EXPECT_LT(max_abs(coefficient(e, 2, 2) - (e.M[2] + 2.0 * e.C[1])), 1e-14 * max_abs(e.M[2]));
  EXPECT_EQ(max_abs(coefficient(e, 2, 1) - e.C[2]), 0.0);
  EXPECT_THROW(static_cast<void>(coefficient(e, 2, 0)), OrderError);
  EXPECT_THROW(static_cast<void>(coefficient(e, 2, 5)), OrderError);
}

TEST(Assembly, CoefficientFormMatchesLeibnizForm) {
  for (const std::string name : {"planar_2r", "chain_6r"}) {
    const ChainModel m = fixture_model(name);
    std::mt19937 rng(15);
    for (int trial = 0; trial < 5; ++trial) {
      const JointState st = random_state(rng, m.dof(), 7);
      const GeneralizedEOM e = generalized_eom(evaluate_system(m, st, 5));
      for (int n = 0; n <= 5; ++n) {
        const VecX a = assemble_Q(e, st, n), b = assemble_Q_from_coefficients(e, st, n);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff() / std::max(a.cwiseAbs().maxCoeff(), 1e-9), 1e-12) << name << n;
      }
    }
  }
}

TEST(Assembly, QMatchesFiniteDifferences) {
  const ChainModel m = fixture_model("chain_6r");
  const JointTrajectory traj = fixture_traj("chain_6r_sin");
  const double t = 1.3, h = 1e-5;
  const auto q = closed_form_series(m, traj, t, 4);
  const auto qp = closed_form_series(m, traj, t + h, 3);
  const auto qm = closed_form_series(m, traj, t - h, 3);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_LT(rel_diff((qp[r] - qm[r]) / (2 * h), q[r + 1]), 1e-4) << r;
}

TEST(Assembly, OrderZeroMatchesRecursive) {
  for (const std::string name : {"pendulum", "planar_2r", "chain_6r"}) {
    const ChainModel m = fixture_model(name);
    std::mt19937 rng(16);
    const JointState st = random_state(rng, m.dof(), 2);
    const auto cf = closed_form_series(m, st, 0);
    const auto rec = inverse_dynamics_series(m, st, 0);
    EXPECT_LT(rel_diff(cf[0], rec[0]), 1e-10) << name;
  }
}

TEST(Assembly, MissingOrdersThrow) {
  const ChainModel m = fixture_model("planar_2r");
  std::mt19937 rng(17);
  const JointState st = random_state(rng, 2, 3);
  SystemMatrices s = evaluate_system(m, st, 1);
  EXPECT_THROW(static_cast<void>(derivative_A(s, 3)), OrderError);
  EXPECT_THROW(static_cast<void>(derivative_a(m, st, 3)), OrderError);
  EXPECT_THROW(extend_system(s, m, st, 3), OrderError);
  EXPECT_THROW(static_cast<void>(assemble_Q(generalized_eom(s), st, 2)), OrderError);
  EXPECT_THROW(static_cast<void>(closed_form_series(m, st, 2)), OrderError);
}
