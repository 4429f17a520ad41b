#pragma once

// Analytic joint trajectories with exact derivatives of any order.
//
// JSON: { "joints": [ { "terms": [
//           {"type": "poly", "coeffs": [c0, c1, ...]},          // sum c_j t^j
//           {"type": "sin", "amp": A, "freq": w, "phase": phi, "offset": c}
//         ] }, ... ] }

#include "nthdyn/robot_model.hpp"
#include "nthdyn/screw_algebra.hpp"

#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

namespace nthdyn {

struct PolynomialTerm {
  std::vector<double> coeffs;  // ascending powers of t
};

/// amp * sin(freq * t + phase) + offset
struct SinusoidTerm {
  double amp = 0.0;
  double freq = 0.0;
  double phase = 0.0;
  double offset = 0.0;
};

using TrajectoryTerm = std::variant<PolynomialTerm, SinusoidTerm>;

struct JointTrajectory {
  std::vector<std::vector<TrajectoryTerm>> joints;

  [[nodiscard]] int dof() const { return static_cast<int>(joints.size()); }
};

/// Joint positions and derivatives q^(0)..q^(k) at time t.
struct JointState {
  double t = 0.0;
  DerivativeSeries<VecX> q;

  [[nodiscard]] int order() const { return q.order(); }
  [[nodiscard]] int dof() const {
    return q.empty() ? 0 : static_cast<int>(q[0].size());
  }

  /// Derivative series of a single joint.
  [[nodiscard]] DerivativeSeries<double> joint(int i) const {
    std::vector<double> v;
    v.reserve(q.size());
    for (const auto& e : q.entries()) v.push_back(e[i]);
    return DerivativeSeries<double>(std::move(v));
  }

  [[nodiscard]] JointState truncated(int k) const { return {t, q.truncated(k)}; }
};

namespace detail {

inline double term_derivative(const PolynomialTerm& p, double t, int r) {
  // sum_{j>=r} c_j j!/(j-r)! t^(j-r), Horner in t
  double acc = 0.0;
  const int deg = static_cast<int>(p.coeffs.size()) - 1;
  for (int j = deg; j >= r; --j) {
    double falling = 1.0;
    for (int m = 0; m < r; ++m) falling *= static_cast<double>(j - m);
    acc = acc * t + p.coeffs[static_cast<std::size_t>(j)] * falling;
  }
  return acc;
}

inline double term_derivative(const SinusoidTerm& s, double t, int r) {
  double v = s.amp * std::pow(s.freq, r) *
             std::sin(s.freq * t + s.phase + r * std::numbers::pi / 2.0);
  if (r == 0) v += s.offset;
  return v;
}

}  // namespace detail

/// Exact q^(0)..q^(order) at t.
inline JointState sample(const JointTrajectory& traj, double t, int order) {
  if (order < 0) throw std::invalid_argument("sample: negative order");
  const int n = traj.dof();
  std::vector<VecX> entries(static_cast<std::size_t>(order + 1), VecX::Zero(n));
  for (int i = 0; i < n; ++i) {
    for (const auto& term : traj.joints[static_cast<std::size_t>(i)]) {
      for (int r = 0; r <= order; ++r) {
        entries[static_cast<std::size_t>(r)][i] += std::visit(
            [&](const auto& tm) { return detail::term_derivative(tm, t, r); },
            term);
      }
    }
  }
  return {t, DerivativeSeries<VecX>(std::move(entries))};
}

/// Builds a state directly from explicit derivative vectors.
inline JointState make_state(double t, std::vector<VecX> derivatives) {
  return {t, DerivativeSeries<VecX>(std::move(derivatives))};
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void validate_trajectory(const JointTrajectory& traj) {
  for (int i = 0; i < traj.dof(); ++i) {
    const auto& terms = traj.joints[static_cast<std::size_t>(i)];
    const std::string who = "joint " + std::to_string(i + 1);
    if (terms.empty()) throw ValidationError(who + ": at least one term required");
    for (const auto& term : terms) {
      bool finite = std::visit(
          [](const auto& tm) {
            using T = std::decay_t<decltype(tm)>;
            if constexpr (std::is_same_v<T, PolynomialTerm>) {
              for (double c : tm.coeffs)
                if (!std::isfinite(c)) return false;
              return !tm.coeffs.empty();
            } else {
              return std::isfinite(tm.amp) && std::isfinite(tm.freq) &&
                     std::isfinite(tm.phase) && std::isfinite(tm.offset);
            }
          },
          term);
      if (!finite) throw ValidationError(who + ": trajectory parameters must be finite and non-empty");
    }
  }
}

inline JointTrajectory trajectory_from_json(const nlohmann::json& doc) {
  using detail::require;
  JointTrajectory traj;
  const auto& joints = require(doc, "joints", "trajectory");
  if (!joints.is_array()) throw ParseError("trajectory: 'joints' must be an array");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string ctx = "joints[" + std::to_string(i) + "]";
    const auto& terms = require(joints[i], "terms", ctx);
    if (!terms.is_array()) throw ParseError(ctx + ".terms: expected an array");
    std::vector<TrajectoryTerm> parsed;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::string tctx = ctx + ".terms[" + std::to_string(k) + "]";
      const auto& jt = terms[k];
      const auto& type = require(jt, "type", tctx);
      if (type == "poly") {
        const auto& c = require(jt, "coeffs", tctx);
        if (!c.is_array()) throw ParseError(tctx + ".coeffs: expected an array");
        PolynomialTerm p;
        for (const auto& x : c) p.coeffs.push_back(detail::read_number(x, tctx + ".coeffs"));
        parsed.emplace_back(std::move(p));
      } else if (type == "sin") {
        SinusoidTerm s;
        s.amp = detail::read_number(require(jt, "amp", tctx), tctx + ".amp");
        s.freq = detail::read_number(require(jt, "freq", tctx), tctx + ".freq");
        s.phase = jt.contains("phase") ? detail::read_number(jt["phase"], tctx + ".phase") : 0.0;
        s.offset = jt.contains("offset") ? detail::read_number(jt["offset"], tctx + ".offset") : 0.0;
        parsed.emplace_back(s);
      } else {
        throw ParseError(tctx + ".type: expected \"poly\" or \"sin\"");
      }
    }
    traj.joints.push_back(std::move(parsed));
  }
  validate_trajectory(traj);
  return traj;
}

inline nlohmann::json trajectory_to_json(const JointTrajectory& traj) {
  using nlohmann::json;
  json doc;
  doc["joints"] = json::array();
  for (const auto& terms : traj.joints) {
    json jt = json::array();
    for (const auto& term : terms) {
      if (const auto* p = std::get_if<PolynomialTerm>(&term)) {
        jt.push_back({{"type", "poly"}, {"coeffs", p->coeffs}});
      } else {
        const auto& s = std::get<SinusoidTerm>(term);
        jt.push_back({{"type", "sin"}, {"amp", s.amp}, {"freq", s.freq},
                      {"phase", s.phase}, {"offset", s.offset}});
      }
    }
    doc["joints"].push_back({{"terms", jt}});
  }
  return doc;
}

inline JointTrajectory load_trajectory(const std::filesystem::path& path) {
  return trajectory_from_json(detail::read_json_file(path));
}

}  // namespace nthdyn
