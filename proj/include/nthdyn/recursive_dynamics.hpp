#pragma once

// k-th order forward kinematics and inverse dynamics by recursion over bodies
// and over the derivative order. Cost is O(n^2 k^2) for the joint-screw
// derivatives and O(n k^2) for the wrench sweep.
//
// Indexing: bodies are 0-based here (body b is the (b+1)-th link). Screw sums
// keep the 1-based "ground = 0" index of the formulas: screw_sum[b][j] is the
// sum of instantaneous joint screws of joints j+1..b+1, so screw_sum[b][0] is
// the body twist.

#include "nthdyn/robot_model.hpp"
#include "nthdyn/screw_algebra.hpp"
#include "nthdyn/trajectory.hpp"

#include <vector>

namespace nthdyn {

struct KinematicCache {
  int order = 0;  // highest twist derivative stored

  std::vector<PoseTransform> pose;      // C_i
  std::vector<PoseTransform> rel_pose;  // C_{i,i-1}; C_{1,0} = C_1^{-1}
  std::vector<DerivativeSeries<Mat6>> rel_adjoint;  // D^(r) Ad_{C_{i,i-1}}

  // screw[b][c], c <= b: instantaneous screw of joint c+1 seen from body b+1.
  std::vector<std::vector<DerivativeSeries<Vec6>>> screw;
  // screw_sum[b][j], j = 0..b+1 (last entry is identically zero).
  std::vector<std::vector<DerivativeSeries<Vec6>>> screw_sum;
  std::vector<DerivativeSeries<Twist>> twist;

  [[nodiscard]] int dof() const { return static_cast<int>(pose.size()); }
};

struct WrenchCache {
  int order = 0;
  std::vector<DerivativeSeries<Wrench>> wrench;      // transmitted by joint i
  std::vector<DerivativeSeries<Wrench>> body_wrench;  // net inertial+gravity wrench of body i alone
  std::vector<DerivativeSeries<double>> force;        // Q_i

  /// Q^(r) as an n-vector.
  [[nodiscard]] VecX generalized_force(int r) const {
    VecX q(static_cast<Eigen::Index>(force.size()));
    for (std::size_t i = 0; i < force.size(); ++i) q[static_cast<Eigen::Index>(i)] = force[i].at(r);
    return q;
  }

  [[nodiscard]] std::vector<VecX> generalized_forces() const {
    std::vector<VecX> out;
    for (int r = 0; r <= order; ++r) out.push_back(generalized_force(r));
    return out;
  }
};

/// Derivatives of body twists up to order k. Needs q^(0)..q^(k+1).
inline KinematicCache forward_kinematics(const ChainModel& model,
                                         const JointState& state, int k) {
  const int n = model.dof();
  if (k < 0) throw OrderError("forward_kinematics: negative order");
  if (state.dof() != n) {
    throw std::invalid_argument("forward_kinematics: state has " +
                                std::to_string(state.dof()) +
                                " joints, model has " + std::to_string(n));
  }
  if (state.order() < k + 1) {
    throw OrderError("forward_kinematics: order " + std::to_string(k) +
                     " needs joint derivatives up to " + std::to_string(k + 1) +
                     ", state holds " + std::to_string(state.order()));
  }
  const auto& q = state.q;
  const auto nu = static_cast<std::size_t>(n);

  KinematicCache c;
  c.order = k;
  c.pose.resize(nu);
  c.rel_pose.resize(nu);
  c.rel_adjoint.resize(nu);
  c.screw.resize(nu);
  c.screw_sum.resize(nu);
  c.twist.resize(nu);

  // Preparation run: poses, relative Adjoints and order-0 joint screws.
  PoseTransform prev = PoseTransform::identity();
  for (int b = 0; b < n; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    const BodyParams& body = model.bodies[bu];
    const PoseTransform local = body.offset * screw_exp(body.joint_screw, q[0][b]);
    c.pose[bu] = prev * local;
    c.rel_pose[bu] = local.inverse();
    c.rel_adjoint[bu] = relative_adjoint_series(adjoint_matrix(c.rel_pose[bu]),
                                                body.joint_screw,
                                                state.joint(b), k);
    prev = c.pose[bu];

    c.screw[bu].resize(bu + 1);
    const Mat6& ad = c.rel_adjoint[bu][0];
    for (int j = 0; j < b; ++j) {
      c.screw[bu][static_cast<std::size_t>(j)].push_back(ad * c.screw[bu - 1][static_cast<std::size_t>(j)][0]);
    }
    c.screw[bu][bu].push_back(body.joint_screw.vector());
    c.screw_sum[bu].resize(bu + 2);
  }

  // Derivative run. At order r the screw derivatives need screw sums up to
  // r-1; the screw sums at r then need the screw derivatives up to r.
  for (int r = 0; r <= k; ++r) {
    for (int b = 0; b < n; ++b) {
      const auto bu = static_cast<std::size_t>(b);
      auto& screws = c.screw[bu];
      auto& sums = c.screw_sum[bu];
      if (r >= 1) {
        for (int j = 0; j <= b; ++j) {
          const auto ju = static_cast<std::size_t>(j);
          if (j == b) {
            screws[ju].push_back(Vec6::Zero());
            continue;
          }
          Vec6 d = Vec6::Zero();
          for (int l = 0; l <= r - 1; ++l) {
            d += binomial(r - 1, l) *
                 lie_bracket(screws[ju][l], sums[ju + 1][r - l - 1]);
          }
          screws[ju].push_back(d);
        }
      }
      // Running sum from the tip joint down gives every screw_sum[b][j].
      Vec6 acc = Vec6::Zero();
      sums[bu + 1].push_back(acc);
      for (int j = b; j >= 0; --j) {
        const auto ju = static_cast<std::size_t>(j);
        for (int l = 0; l <= r; ++l) {
          acc += binomial(r, l) * q[r - l + 1][j] * screws[ju][l];
        }
        sums[ju].push_back(acc);
      }
      c.twist[bu].push_back(sums[0][r]);
    }
  }
  return c;
}

/// Derivatives of the transported gravity acceleration Ad_{C_{i,0}} (0; -g),
/// orders 0..k.
inline std::vector<DerivativeSeries<Vec6>> gravity_acceleration_series(
    const ChainModel& model, const KinematicCache& cache, int k) {
  const int n = model.dof();
  Vec6 base;
  base << Vec3::Zero(), -model.gravity;
  std::vector<DerivativeSeries<Vec6>> g(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    const auto bu = static_cast<std::size_t>(b);
    const auto& ad = cache.rel_adjoint[bu];
    for (int r = 0; r <= k; ++r) {
      if (b == 0) {
        g[bu].push_back(ad[r] * base);
      } else {
        g[bu].push_back(leibniz_combine(
            ad, g[bu - 1], r,
            [](const Mat6& a, const Vec6& v) -> Vec6 { return a * v; }));
      }
    }
  }
  return g;
}

/// Backward sweep for D^(0..k) of joint wrenches and generalized forces.
/// The cache must hold twist derivatives up to k + 1 (accelerations).
inline WrenchCache inverse_dynamics(const ChainModel& model,
                                    const KinematicCache& cache, int k) {
  const int n = model.dof();
  if (k < 0) throw OrderError("inverse_dynamics: negative order");
  if (cache.dof() != n) throw std::invalid_argument("inverse_dynamics: cache/model size mismatch");
  if (cache.order < k + 1) {
    throw OrderError("inverse_dynamics: order " + std::to_string(k) +
                     " needs twist derivatives up to " + std::to_string(k + 1) +
                     ", cache holds " + std::to_string(cache.order));
  }
  const auto gravity = gravity_acceleration_series(model, cache, k);

  WrenchCache w;
  w.order = k;
  w.wrench.resize(static_cast<std::size_t>(n));
  w.body_wrench.resize(static_cast<std::size_t>(n));
  w.force.resize(static_cast<std::size_t>(n));

  for (int b = n - 1; b >= 0; --b) {
    const auto bu = static_cast<std::size_t>(b);
    const Mat6 mi = spatial_inertia_matrix(model.bodies[bu].inertia);
    const auto& v = cache.twist[bu];
    const Vec6 x = model.bodies[bu].joint_screw.vector();
    for (int r = 0; r <= k; ++r) {
      // Newton-Euler of body b alone, differentiated r times.
      Vec6 own = mi * (v[r + 1] + gravity[bu][r]);
      for (int s = 0; s <= r; ++s) {
        own -= binomial(r, s) * ad_matrix(v[s]).transpose() * (mi * v[r - s]);
      }
      Vec6 total = own;
      if (b + 1 < n) {
        const auto& ad_next = cache.rel_adjoint[bu + 1];
        const auto& w_next = w.wrench[bu + 1];
        for (int s = 0; s <= r; ++s) {
          total += binomial(r, s) * ad_next[s].transpose() * w_next[r - s];
        }
      }
      w.body_wrench[bu].push_back(own);
      w.wrench[bu].push_back(total);
      w.force[bu].push_back(x.dot(total));
    }
  }
  return w;
}

/// Q^(0)..Q^(k) for a sampled state holding q^(0)..q^(k+2).
inline std::vector<VecX> inverse_dynamics_series(const ChainModel& model,
                                                 const JointState& state,
                                                 int k) {
  if (state.order() < k + 2) {
    throw OrderError("inverse_dynamics_series: order " + std::to_string(k) +
                     " needs joint derivatives up to " + std::to_string(k + 2));
  }
  const auto cache = forward_kinematics(model, state, k + 1);
  return inverse_dynamics(model, cache, k).generalized_forces();
}

inline std::vector<VecX> inverse_dynamics_series(const ChainModel& model,
                                                 const JointTrajectory& traj,
                                                 double t, int k) {
  return inverse_dynamics_series(model, sample(traj, t, k + 2), k);
}

}  // namespace nthdyn
