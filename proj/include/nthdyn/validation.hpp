#pragma once

// Independent oracles and cross-method comparison:
//  - central finite differences of any time function,
//  - a classical order-0 Newton-Euler recursion written with 3-vectors only,
//  - symbolic pendulum / planar 2R equations,
//  - cross_validate(), which runs both engines over a time grid and reports
//    the worst discrepancy per quantity and derivative order.

#include "nthdyn/closed_form_eom.hpp"
#include "nthdyn/parallel.hpp"
#include "nthdyn/recursive_dynamics.hpp"
#include "nthdyn/robot_model.hpp"
#include "nthdyn/trajectory.hpp"

#include <json.hpp>  // nlohmann/json, vendored

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace nthdyn {

struct FDConfig {
  double h = 1e-5;
  double method_rel_tol = 1e-8;  // recursive vs closed form vs RNEA
  double fd_rel_tol = 1e-4;      // finite-difference ladder
  double rel_floor = 1e-9;       // denominator floor for relative errors
};

/// (f(t + h) - f(t - h)) / (2h)
template <typename Fn>
auto fd_derivative(Fn&& f, double t, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_derivative: step must be positive");
  auto plus = detail::plain(f(t + h));
  auto minus = detail::plain(f(t - h));
  return decltype(plus)((plus - minus) / (2.0 * h));
}

/// ||value - reference||_inf / max(||reference||_inf, floor)
inline double relative_error(const VecX& value, const VecX& reference, double floor = 1e-9) {
  const double diff = (value - reference).cwiseAbs().maxCoeff();
  return diff / std::max(reference.cwiseAbs().maxCoeff(), floor);
}

// ---------------------------------------------------------------------------
// Order-0 reference Newton-Euler (3-vector form, no 6x6 operators)
// ---------------------------------------------------------------------------

/// Classical recursive Newton-Euler: outward pass for angular velocity /
/// acceleration and origin acceleration, inward pass for forces and moments
/// about each frame origin. Gravity enters as a base acceleration -g.
inline VecX rnea_order0(const ChainModel& model, const VecX& q, const VecX& qd, const VecX& qdd) {
  const int n = model.dof();
  if (q.size() != n || qd.size() != n || qdd.size() != n) {
    throw std::invalid_argument("rnea_order0: vector sizes must match the model");
  }
  struct Frame {
    Mat3 R;
    Vec3 p;
    Vec3 omega, alpha, accel;
    Vec3 force, moment;  // net inertial force at COM and moment about COM
  };
  std::vector<Frame> fr(static_cast<std::size_t>(n));

  Vec3 omega = Vec3::Zero(), alpha = Vec3::Zero(), accel = -model.gravity;
  for (int i = 0; i < n; ++i) {
    const auto& body = model.bodies[static_cast<std::size_t>(i)];
    const PoseTransform g = body.offset * screw_exp(body.joint_screw, q[i]);
    const Mat3& R = g.rotation();
    const Vec3& p = g.translation();
    const Mat3 Rt = R.transpose();
    const Vec3 w_rel = body.joint_screw.angular * qd[i];
    const Vec3 v_rel = body.joint_screw.linear * qd[i];

    const Vec3 omega_i = Rt * omega + w_rel;
    const Vec3 alpha_i = Rt * alpha + body.joint_screw.angular * qdd[i] + omega_i.cross(w_rel);
    const Vec3 accel_i =
        Rt * (accel + alpha.cross(p) + omega.cross(omega.cross(p)) + 2.0 * omega.cross(R * v_rel) +
              R * (w_rel.cross(v_rel) + body.joint_screw.linear * qdd[i]));

    const auto& in = body.inertia;
    const Vec3& c = in.com;
    const Mat3 I_com = in.rot_inertia - in.mass * (c.dot(c) * Mat3::Identity() - c * c.transpose());
    const Vec3 a_com = accel_i + alpha_i.cross(c) + omega_i.cross(omega_i.cross(c));

    Frame& f = fr[static_cast<std::size_t>(i)];
    f.R = R;
    f.p = p;
    f.omega = omega_i;
    f.alpha = alpha_i;
    f.accel = accel_i;
    f.force = in.mass * a_com;
    f.moment = I_com * alpha_i + omega_i.cross(I_com * omega_i);

    omega = omega_i;
    alpha = alpha_i;
    accel = accel_i;
  }

  VecX tau(n);
  Vec3 f_next = Vec3::Zero(), n_next = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Frame& f = fr[static_cast<std::size_t>(i)];
    const auto& body = model.bodies[static_cast<std::size_t>(i)];
    Vec3 f_child = Vec3::Zero(), n_child = Vec3::Zero();
    if (i + 1 < n) {
      const Frame& next = fr[static_cast<std::size_t>(i + 1)];
      f_child = next.R * f_next;
      n_child = next.R * n_next + next.p.cross(f_child);
    }
    const Vec3 fi = f.force + f_child;
    const Vec3 ni = f.moment + body.inertia.com.cross(f.force) + n_child;
    tau[i] = body.joint_screw.angular.dot(ni) + body.joint_screw.linear.dot(fi);
    f_next = fi;
    n_next = ni;
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Symbolic oracles
// ---------------------------------------------------------------------------

/// Q^(0..2) of a point-mass pendulum: Q = m l^2 q'' + m g l cos q, where q = 0
/// is the horizontal arm. `q` holds q^(0)..q^(4).
inline std::vector<double> pendulum_symbolic(double m, double l, double g,
                                             const DerivativeSeries<double>& q) {
  if (q.order() < 4) throw SeriesLengthError("pendulum_symbolic: needs q^(0)..q^(4)");
  const double s = std::sin(q[0]), c = std::cos(q[0]);
  const double ml2 = m * l * l, mgl = m * g * l;
  return {
      ml2 * q[2] + mgl * c,
      ml2 * q[3] - mgl * s * q[1],
      ml2 * q[4] - mgl * (c * q[1] * q[1] + s * q[2]),
  };
}

struct PlanarLink {
  double mass;
  double length;     // joint-to-joint distance along the link x axis
  double com;        // COM offset along the link x axis
  double inertia_z;  // about the joint axis
};

/// Planar 2R (both axes along z, gravity magnitude g along -y):
/// textbook M(q) q'' + h(q, q') + G(q).
inline Eigen::Vector2d planar_2r_symbolic(const PlanarLink& l1, const PlanarLink& l2, double g,
                                          const Eigen::Vector2d& q, const Eigen::Vector2d& qd,
                                          const Eigen::Vector2d& qdd) {
  const double c2 = std::cos(q[1]);
  const double k = l2.mass * l1.length * l2.com;
  const double m11 = l1.inertia_z + l2.inertia_z + l2.mass * l1.length * l1.length + 2.0 * k * c2;
  const double m12 = l2.inertia_z + k * c2;
  const double m22 = l2.inertia_z;
  const double h = k * std::sin(q[1]);
  const double g1 = g * ((l1.mass * l1.com + l2.mass * l1.length) * std::cos(q[0]) +
                         l2.mass * l2.com * std::cos(q[0] + q[1]));
  const double g2 = g * l2.mass * l2.com * std::cos(q[0] + q[1]);
  return {m11 * qdd[0] + m12 * qdd[1] - h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]) + g1,
          m12 * qdd[0] + m22 * qdd[1] + h * qd[0] * qd[0] + g2};
}

// ---------------------------------------------------------------------------
// Cross validation
// ---------------------------------------------------------------------------

struct ComparisonEntry {
  std::string quantity;  // "rnea_order0", "closed_form_Q", "body_wrench", "fd_Q"
  int order = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  int worst_body = 0;  // 1-based joint / body index
  double worst_time = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonEntry> entries;
  bool pass = true;

  /// 1-based index of the body with the largest per-body wrench discrepancy
  /// among failing entries, or 0 when everything passes.
  [[nodiscard]] int failing_body() const {
    const ComparisonEntry* worst = nullptr;
    for (const auto& e : entries) {
      if (e.pass) continue;
      const bool localized = e.quantity == "body_wrench";
      if (!worst || (localized && worst->quantity != "body_wrench") ||
          (localized == (worst->quantity == "body_wrench") && e.max_rel_error > worst->max_rel_error)) {
        worst = &e;
      }
    }
    return worst ? worst->worst_body : 0;
  }

  [[nodiscard]] const ComparisonEntry* find(const std::string& quantity, int order) const {
    for (const auto& e : entries)
      if (e.quantity == quantity && e.order == order) return &e;
    return nullptr;
  }
};

inline nlohmann::json report_to_json(const ComparisonReport& report) {
  nlohmann::json doc;
  doc["pass"] = report.pass;
  doc["failing_body"] = report.failing_body();
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    doc["entries"].push_back({{"quantity", e.quantity},
                              {"order", e.order},
                              {"max_abs_error", e.max_abs_error},
                              {"max_rel_error", e.max_rel_error},
                              {"tolerance", e.tolerance},
                              {"pass", e.pass},
                              {"worst_body", e.worst_body},
                              {"worst_time", e.worst_time}});
  }
  return doc;
}

namespace detail {

struct SampleErrors {
  double abs = 0.0;
  double rel = 0.0;
  int worst = 0;  // 0-based component block
};

// Errors of one sample; `block` groups components (1 for joints, 6 for bodies).
inline SampleErrors sample_errors(const VecX& value, const VecX& reference, int block, double floor) {
  SampleErrors e;
  const VecX diff = (value - reference).cwiseAbs();
  Eigen::Index idx = 0;
  e.abs = diff.maxCoeff(&idx);
  e.rel = e.abs / std::max(reference.cwiseAbs().maxCoeff(), floor);
  e.worst = static_cast<int>(idx) / block;
  return e;
}

inline void accumulate(ComparisonEntry& entry, const SampleErrors& e, double t) {
  entry.max_abs_error = std::max(entry.max_abs_error, e.abs);
  if (entry.worst_body == 0 || e.rel > entry.max_rel_error) {
    entry.max_rel_error = e.rel;
    entry.worst_body = e.worst + 1;
    entry.worst_time = t;
  }
}

struct SampleResult {
  std::vector<VecX> recursive;   // Q^(0..k)
  std::vector<VecX> closed;      // Q^(0..k)
  std::vector<VecX> rec_body;    // stacked body wrenches, orders 0..k
  std::vector<VecX> closed_body;
  VecX rnea;
  std::vector<VecX> fd;          // FD of recursive Q^(r), r = 0..k-1
};

}  // namespace detail

/// Runs the recursive engine on `recursive_model` and the closed form on
/// `closed_model` over `times`, comparing Q^(0..k), per-body wrenches and the
/// order-0 reference, plus an FD ladder on the recursive output. Passing two
/// different models is how a fault is injected.
inline ComparisonReport cross_validate(const ChainModel& recursive_model, const ChainModel& closed_model,
                                       const JointTrajectory& traj, std::span<const double> times, int k,
                                       const FDConfig& cfg = {}, unsigned threads = 1) {
  if (k < 0) throw OrderError("cross_validate: negative order");
  if (!(cfg.h > 0.0)) throw std::invalid_argument("cross_validate: FD step must be positive");
  if (recursive_model.dof() != closed_model.dof() || traj.dof() != recursive_model.dof()) {
    throw std::invalid_argument("cross_validate: model/trajectory sizes differ");
  }
  const int n = recursive_model.dof();
  std::vector<detail::SampleResult> results(times.size());

  parallel_for(times.size(), threads, [&](std::size_t s) {
    const double t = times[s];
    const JointState state = sample(traj, t, k + 2);
    auto& res = results[s];

    const auto cache = forward_kinematics(recursive_model, state, k + 1);
    const auto wc = inverse_dynamics(recursive_model, cache, k);
    res.recursive = wc.generalized_forces();
    for (int r = 0; r <= k; ++r) {
      VecX stacked(6 * n);
      for (int i = 0; i < n; ++i) stacked.segment<6>(6 * i) = wc.body_wrench[static_cast<std::size_t>(i)][r];
      res.rec_body.push_back(stacked);
    }

    const SystemMatrices sys = evaluate_system(closed_model, state, k + 1);
    const GeneralizedEOM eom = generalized_eom(sys);
    for (int r = 0; r <= k; ++r) {
      res.closed.push_back(assemble_Q(eom, state, r));
      res.closed_body.push_back(body_wrench(sys, r));
    }

    res.rnea = rnea_order0(recursive_model, state.q[0], state.q[1], state.q[2]);

    if (k >= 1) {
      const auto plus = inverse_dynamics_series(recursive_model, traj, t + cfg.h, k - 1);
      const auto minus = inverse_dynamics_series(recursive_model, traj, t - cfg.h, k - 1);
      for (int r = 0; r < k; ++r) {
        res.fd.push_back((plus[static_cast<std::size_t>(r)] - minus[static_cast<std::size_t>(r)]) / (2.0 * cfg.h));
      }
    }
  });

  ComparisonReport report;
  auto make = [](std::string q, int r, double tol) {
    ComparisonEntry e;
    e.quantity = std::move(q);
    e.order = r;
    e.tolerance = tol;
    return e;
  };

  ComparisonEntry rnea = make("rnea_order0", 0, cfg.method_rel_tol);
  std::vector<ComparisonEntry> closed, body, fd;
  for (int r = 0; r <= k; ++r) {
    closed.push_back(make("closed_form_Q", r, cfg.method_rel_tol));
    body.push_back(make("body_wrench", r, cfg.method_rel_tol));
    if (r < k) fd.push_back(make("fd_Q", r, cfg.fd_rel_tol));
  }

  for (std::size_t s = 0; s < times.size(); ++s) {
    const auto& res = results[s];
    const double t = times[s];
    detail::accumulate(rnea, detail::sample_errors(res.recursive[0], res.rnea, 1, cfg.rel_floor), t);
    for (int r = 0; r <= k; ++r) {
      const auto ru = static_cast<std::size_t>(r);
      detail::accumulate(closed[ru], detail::sample_errors(res.recursive[ru], res.closed[ru], 1, cfg.rel_floor), t);
      detail::accumulate(body[ru], detail::sample_errors(res.rec_body[ru], res.closed_body[ru], 6, cfg.rel_floor), t);
      if (r < k) {
        detail::accumulate(fd[ru], detail::sample_errors(res.fd[ru], res.recursive[ru + 1], 1, cfg.rel_floor), t);
      }
    }
  }

  report.entries.push_back(rnea);
  for (auto& e : closed) report.entries.push_back(e);
  for (auto& e : body) report.entries.push_back(e);
  for (auto& e : fd) report.entries.push_back(e);
  for (auto& e : report.entries) {
    e.pass = e.max_rel_error <= e.tolerance;
    report.pass = report.pass && e.pass;
  }
  return report;
}

inline ComparisonReport cross_validate(const ChainModel& model, const JointTrajectory& traj,
                                       std::span<const double> times, int k, const FDConfig& cfg = {},
                                       unsigned threads = 1) {
  return cross_validate(model, model, traj, times, k, cfg, threads);
}

/// t0 + j (t1 - t0) / (samples - 1), j = 0..samples-1; a single sample is t0.
inline std::vector<double> time_grid(double t0, double t1, int samples) {
  if (samples < 1) throw std::invalid_argument("time_grid: sample count must be >= 1");
  std::vector<double> t(static_cast<std::size_t>(samples));
  for (int j = 0; j < samples; ++j) {
    t[static_cast<std::size_t>(j)] = samples == 1 ? t0 : t0 + (t1 - t0) * j / (samples - 1);
  }
  return t;
}

}  // namespace nthdyn
