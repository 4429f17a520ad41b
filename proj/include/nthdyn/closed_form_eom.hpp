#pragma once

// Closed-form equations of motion Q = M(q) q'' + C(q, q') q' + Q_grav(q) built
// from system matrices (stacked 6n-dimensional body quantities) and their
// time derivatives of arbitrary order.
//
//   J = A X,   A' = A a - A a A,   a = diag(q'_i ad_{X_i}),   b = diag(ad_{V_i})
//   M = J^T Ms J,   C = J^T Cs J,   Cs = -Ms A a - b^T Ms
//   Q_grav = J^T Ms U Vdot0,   U = A E1 Ad_{C_{1,0}},   Vdot0 = (0; -g)
//
// All matrices are dense. Every derivative order is kept so that order n can
// be formed from orders 0..n-1 (Leibniz expansions throughout).

#include "nthdyn/robot_model.hpp"
#include "nthdyn/screw_algebra.hpp"
#include "nthdyn/trajectory.hpp"

#include <algorithm>
#include <vector>

namespace nthdyn {

struct SystemMatrices {
  int dof = 0;
  MatX X;      // 6n x n, constant
  MatX Msys;   // 6n x 6n, constant block diagonal
  Vec6 base_acceleration = Vec6::Zero();  // (0; -g), inertial frame
  Screw base_screw;                       // joint screw of body 1

  DerivativeSeries<MatX> a;      // 6n x 6n
  DerivativeSeries<MatX> A;      // 6n x 6n
  DerivativeSeries<MatX> J;      // 6n x n
  DerivativeSeries<VecX> V;      // 6n
  DerivativeSeries<MatX> b;      // 6n x 6n
  DerivativeSeries<MatX> Csys;   // 6n x 6n
  DerivativeSeries<Mat6> base_adjoint;  // Ad_{C_{1,0}}
  DerivativeSeries<MatX> U;      // 6n x 6
  DerivativeSeries<MatX> M;      // n x n
  DerivativeSeries<MatX> C;      // n x n
  DerivativeSeries<VecX> Qgrav;  // n

  /// Highest order for which every quantity is populated.
  [[nodiscard]] int order() const { return Qgrav.order(); }
};

struct GeneralizedEOM {
  DerivativeSeries<MatX> M;
  DerivativeSeries<MatX> C;
  DerivativeSeries<VecX> Qgrav;

  [[nodiscard]] int order() const {
    return std::min({M.order(), C.order(), Qgrav.order()});
  }
};

namespace detail {

inline Eigen::Index blk(int i) { return static_cast<Eigen::Index>(6 * i); }

inline void require_order(int have, int need, const char* what) {
  if (have < need) {
    throw OrderError(std::string(what) + ": needs order " + std::to_string(need) +
                     ", have " + std::to_string(have));
  }
}

inline MatX block_diag_ad(const std::vector<Vec6>& v) {
  const int n = static_cast<int>(v.size());
  MatX out = MatX::Zero(6 * n, 6 * n);
  for (int i = 0; i < n; ++i) {
    out.block<6, 6>(blk(i), blk(i)) = ad_matrix(v[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace detail

/// a^(n) = diag(q_i^(n+1) ad_{X_i}).
inline MatX derivative_a(const ChainModel& model, const JointState& state, int n) {
  detail::require_order(state.order(), n + 1, "derivative_a");
  const int dof = model.dof();
  std::vector<Vec6> v(static_cast<std::size_t>(dof));
  for (int i = 0; i < dof; ++i) {
    v[static_cast<std::size_t>(i)] =
        state.q[n + 1][i] * model.bodies[static_cast<std::size_t>(i)].joint_screw.vector();
  }
  return detail::block_diag_ad(v);
}

/// a^(n) Y without forming a^(n): block row i is q_i^(n+1) [X_i, Y_i].
/// The bracket is taken before scaling, so a^(n) X is exactly zero.
inline MatX apply_a(const ChainModel& model, const JointState& state, int n, const MatX& y) {
  detail::require_order(state.order(), n + 1, "apply_a");
  const int dof = model.dof();
  if (y.rows() != 6 * dof) throw std::invalid_argument("apply_a: operand must have 6n rows");
  MatX out(y.rows(), y.cols());
  for (int i = 0; i < dof; ++i) {
    const Vec6 x = model.bodies[static_cast<std::size_t>(i)].joint_screw.vector();
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      out.block<6, 1>(detail::blk(i), c) =
          state.q[n + 1][i] * lie_bracket(x, y.block<6, 1>(detail::blk(i), c));
    }
  }
  return out;
}

/// A^(n) = sum_k C(n-1,k) [A^(n-1-k) a^(k) - A^(n-1-k) sum_j C(k,j) a^(k-j) A^(j)].
inline MatX derivative_A(const SystemMatrices& s, int n) {
  if (n < 1) throw OrderError("derivative_A: order must be >= 1");
  detail::require_order(s.A.order(), n - 1, "derivative_A (A)");
  detail::require_order(s.a.order(), n - 1, "derivative_A (a)");
  MatX out = MatX::Zero(s.A[0].rows(), s.A[0].cols());
  for (int k = 0; k <= n - 1; ++k) {
    MatX aA = leibniz_combine(s.a, s.A, k,
                              [](const MatX& x, const MatX& y) -> MatX { return x * y; });
    out += binomial(n - 1, k) * (s.A[n - 1 - k] * (s.a[k] - aA));
  }
  return out;
}

/// J^(n) = A^(n) X.
inline MatX derivative_J(const SystemMatrices& s, int n) {
  detail::require_order(s.A.order(), n, "derivative_J");
  return s.A[n] * s.X;
}

/// V^(n) = sum_k C(n,k) J^(n-k) q^(k+1).
inline VecX derivative_V(const SystemMatrices& s, const JointState& state, int n) {
  detail::require_order(s.J.order(), n, "derivative_V");
  detail::require_order(state.order(), n + 1, "derivative_V (state)");
  VecX out = VecX::Zero(s.J[0].rows());
  for (int k = 0; k <= n; ++k) out += binomial(n, k) * (s.J[n - k] * state.q[k + 1]);
  return out;
}

/// b^(n) = diag(ad_{V_i^(n)}).
inline MatX derivative_b(const SystemMatrices& s, int n) {
  detail::require_order(s.V.order(), n, "derivative_b");
  std::vector<Vec6> v(static_cast<std::size_t>(s.dof));
  for (int i = 0; i < s.dof; ++i) v[static_cast<std::size_t>(i)] = s.V[n].segment<6>(detail::blk(i));
  return detail::block_diag_ad(v);
}

/// Cs^(n) = -Ms sum_k C(n,k) A^(n-k) a^(k) - b^(n)^T Ms.
inline MatX derivative_Csys(const SystemMatrices& s, int n) {
  detail::require_order(s.A.order(), n, "derivative_Csys (A)");
  detail::require_order(s.a.order(), n, "derivative_Csys (a)");
  detail::require_order(s.b.order(), n, "derivative_Csys (b)");
  MatX Aa = leibniz_combine(s.A, s.a, n,
                            [](const MatX& x, const MatX& y) -> MatX { return x * y; });
  return -s.Msys * Aa - s.b[n].transpose() * s.Msys;
}

/// M^(n) = sum_k C(n,k) J^(n-k)^T Ms J^(k).
inline MatX derivative_M(const SystemMatrices& s, int n) {
  detail::require_order(s.J.order(), n, "derivative_M");
  return leibniz_combine(s.J, s.J, n, [&](const MatX& x, const MatX& y) -> MatX {
    return x.transpose() * (s.Msys * y);
  });
}

/// C^(n) = sum_k C(n,k) J^(n-k)^T sum_j C(k,j) Cs^(k-j) J^(j).
inline MatX derivative_C(const SystemMatrices& s, int n) {
  detail::require_order(s.J.order(), n, "derivative_C (J)");
  detail::require_order(s.Csys.order(), n, "derivative_C (Cs)");
  MatX out = MatX::Zero(s.dof, s.dof);
  for (int k = 0; k <= n; ++k) {
    MatX CsJ = leibniz_combine(s.Csys, s.J, k,
                               [](const MatX& x, const MatX& y) -> MatX { return x * y; });
    out += binomial(n, k) * (s.J[n - k].transpose() * CsJ);
  }
  return out;
}

/// D^(n) Ad_{C_{1,0}}: the ground-to-body-1 transform moves with joint 1 only.
inline Mat6 derivative_base_adjoint(const SystemMatrices& s, const JointState& state, int n) {
  if (n < 1) throw OrderError("derivative_base_adjoint: order must be >= 1");
  detail::require_order(s.base_adjoint.order(), n - 1, "derivative_base_adjoint");
  detail::require_order(state.order(), n, "derivative_base_adjoint (state)");
  Mat6 sum = Mat6::Zero();
  for (int r = 0; r < n; ++r) sum += binomial(n - 1, r) * state.q[n - r][0] * s.base_adjoint[r];
  return -ad_matrix(s.base_screw) * sum;
}

/// U^(n) = sum_k C(n,k) A^(n-k) E1 Ad_{C_{1,0}}^(k).
inline MatX derivative_U(const SystemMatrices& s, int n) {
  detail::require_order(s.A.order(), n, "derivative_U (A)");
  detail::require_order(s.base_adjoint.order(), n, "derivative_U (base)");
  MatX out = MatX::Zero(6 * s.dof, 6);
  for (int k = 0; k <= n; ++k) {
    out += binomial(n, k) * (s.A[n - k].leftCols<6>() * s.base_adjoint[k]);
  }
  return out;
}

/// Q_grav^(n) = sum_k C(n,k) J^(n-k)^T Ms U^(k) Vdot0.
inline VecX derivative_Qgrav(const SystemMatrices& s, int n) {
  detail::require_order(s.J.order(), n, "derivative_Qgrav (J)");
  detail::require_order(s.U.order(), n, "derivative_Qgrav (U)");
  VecX out = VecX::Zero(s.dof);
  for (int k = 0; k <= n; ++k) {
    out += binomial(n, k) * (s.J[n - k].transpose() * (s.Msys * (s.U[k] * s.base_acceleration)));
  }
  return out;
}

/// Order-0 system matrices for state (q, q').
inline SystemMatrices build_system_order0(const ChainModel& model, const JointState& state) {
  detail::require_order(state.order(), 1, "build_system_order0");
  const int n = model.dof();
  if (state.dof() != n) throw std::invalid_argument("build_system_order0: state/model size mismatch");

  SystemMatrices s;
  s.dof = n;
  s.X = MatX::Zero(6 * n, n);
  s.Msys = MatX::Zero(6 * n, 6 * n);
  s.base_acceleration << Vec3::Zero(), -model.gravity;
  s.base_screw = model.bodies.front().joint_screw;

  std::vector<PoseTransform> pose(static_cast<std::size_t>(n));
  PoseTransform prev = PoseTransform::identity();
  for (int i = 0; i < n; ++i) {
    const auto& body = model.bodies[static_cast<std::size_t>(i)];
    prev = prev * body.offset * screw_exp(body.joint_screw, state.q[0][i]);
    pose[static_cast<std::size_t>(i)] = prev;
    s.X.block<6, 1>(detail::blk(i), i) = body.joint_screw.vector();
    s.Msys.block<6, 6>(detail::blk(i), detail::blk(i)) = spatial_inertia_matrix(body.inertia);
  }

  MatX A = MatX::Zero(6 * n, 6 * n);
  for (int i = 0; i < n; ++i) {
    const PoseTransform inv_i = pose[static_cast<std::size_t>(i)].inverse();
    for (int j = 0; j <= i; ++j) {
      A.block<6, 6>(detail::blk(i), detail::blk(j)) =
          i == j ? Mat6::Identity() : adjoint_matrix(inv_i * pose[static_cast<std::size_t>(j)]);
    }
  }
  s.a.push_back(derivative_a(model, state, 0));
  s.A.push_back(std::move(A));
  s.J.push_back(derivative_J(s, 0));
  s.V.push_back(derivative_V(s, state, 0));
  s.b.push_back(derivative_b(s, 0));
  s.Csys.push_back(derivative_Csys(s, 0));
  s.base_adjoint.push_back(adjoint_matrix(pose.front().inverse()));
  s.U.push_back(derivative_U(s, 0));
  s.M.push_back(derivative_M(s, 0));
  s.C.push_back(derivative_C(s, 0));
  s.Qgrav.push_back(derivative_Qgrav(s, 0));
  return s;
}

/// Appends orders order()+1..n in dependency order a -> A -> J -> V -> b ->
/// Cs -> U -> (M, C, Q_grav). Needs q^(0)..q^(n+1).
inline void extend_system(SystemMatrices& s, const ChainModel& model,
                          const JointState& state, int n) {
  detail::require_order(state.order(), n + 1, "extend_system (state)");
  for (int r = s.order() + 1; r <= n; ++r) {
    s.a.push_back(derivative_a(model, state, r));
    s.A.push_back(derivative_A(s, r));
    s.J.push_back(derivative_J(s, r));
    s.V.push_back(derivative_V(s, state, r));
    s.b.push_back(derivative_b(s, r));
    s.Csys.push_back(derivative_Csys(s, r));
    s.base_adjoint.push_back(derivative_base_adjoint(s, state, r));
    s.U.push_back(derivative_U(s, r));
    s.M.push_back(derivative_M(s, r));
    s.C.push_back(derivative_C(s, r));
    s.Qgrav.push_back(derivative_Qgrav(s, r));
  }
}

inline SystemMatrices evaluate_system(const ChainModel& model, const JointState& state, int n) {
  SystemMatrices s = build_system_order0(model, state);
  extend_system(s, model, state, n);
  return s;
}

inline GeneralizedEOM generalized_eom(const SystemMatrices& s) {
  return {s.M, s.C, s.Qgrav};
}

/// Q^(n) = sum_k C(n,k) M^(n-k) q^(k+2) + sum_k C(n,k) C^(n-k) q^(k+1) + Q_grav^(n).
inline VecX assemble_Q(const GeneralizedEOM& eom, const JointState& state, int n) {
  detail::require_order(eom.order(), n, "assemble_Q (eom)");
  detail::require_order(state.order(), n + 2, "assemble_Q (state)");
  VecX out = eom.Qgrav[n];
  for (int k = 0; k <= n; ++k) {
    out += binomial(n, k) * (eom.M[n - k] * state.q[k + 2]);
    out += binomial(n, k) * (eom.C[n - k] * state.q[k + 1]);
  }
  return out;
}

/// Coefficient of q^(k) in Q^(n) - Q_grav^(n), 1 <= k <= n+2:
///   P_k = C(n, k-2) M^(n-k+2) + C(n, k-1) C^(n-k+1).
inline MatX coefficient(const GeneralizedEOM& eom, int n, int k) {
  if (k < 1 || k > n + 2) {
    throw OrderError("coefficient: k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(n + 2) + "]");
  }
  detail::require_order(eom.order(), n, "coefficient");
  const Eigen::Index dof = eom.M[0].rows();
  MatX p = MatX::Zero(dof, dof);
  if (k >= 2) p += binomial(n, k - 2) * eom.M[n - k + 2];
  if (k <= n + 1) p += binomial(n, k - 1) * eom.C[n - k + 1];
  return p;
}

/// Q^(n) = sum_{k=1}^{n+2} P_k q^(k) + Q_grav^(n).
inline VecX assemble_Q_from_coefficients(const GeneralizedEOM& eom, const JointState& state, int n) {
  detail::require_order(state.order(), n + 2, "assemble_Q_from_coefficients (state)");
  VecX out = eom.Qgrav[n];
  for (int k = 1; k <= n + 2; ++k) out += coefficient(eom, n, k) * state.q[k];
  return out;
}

/// Per-body net wrench D^(r)[Ms (V' + U Vdot0) - b^T Ms V], stacked 6n.
/// Needs V up to r + 1.
inline VecX body_wrench(const SystemMatrices& s, int r) {
  detail::require_order(s.V.order(), r + 1, "body_wrench (V)");
  detail::require_order(s.U.order(), r, "body_wrench (U)");
  VecX out = s.Msys * (s.V[r + 1] + s.U[r] * s.base_acceleration);
  for (int k = 0; k <= r; ++k) {
    out -= binomial(r, k) * (s.b[k].transpose() * (s.Msys * s.V[r - k]));
  }
  return out;
}

/// Q^(0)..Q^(k) for a state holding q^(0)..q^(k+2).
inline std::vector<VecX> closed_form_series(const ChainModel& model, const JointState& state, int k) {
  detail::require_order(state.order(), k + 2, "closed_form_series (state)");
  const SystemMatrices s = evaluate_system(model, state, k);
  const GeneralizedEOM eom = generalized_eom(s);
  std::vector<VecX> out;
  out.reserve(static_cast<std::size_t>(k + 1));
  for (int r = 0; r <= k; ++r) out.push_back(assemble_Q(eom, state, r));
  return out;
}

inline std::vector<VecX> closed_form_series(const ChainModel& model, const JointTrajectory& traj,
                                            double t, int k) {
  return closed_form_series(model, sample(traj, t, k + 2), k);
}

}  // namespace nthdyn
