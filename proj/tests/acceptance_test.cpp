// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include "nthdyn/cli.hpp"
#include "nthdyn/closed_form_eom.hpp"
#include "nthdyn/recursive_dynamics.hpp"
#include "nthdyn/validation.hpp"

#include <cstdio>
#include <functional>
#include <string>

using namespace nthdyn;

namespace {

std::string data(const std::string& rel) { return std::string(NTHDYN_DATA_DIR) + "/" + rel; }
ChainModel model(const std::string& n) { return load_model(data("models/" + n + ".json")); }
JointTrajectory traj(const std::string& n) { return load_trajectory(data("trajectories/" + n + ".json")); }

double max_abs(const MatX& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double rel(const MatX& a, const MatX& ref, double floor = 1e-9) {
  return max_abs(a - ref) / std::max(max_abs(ref), floor);
}

struct Fixture {
  std::string model, traj;
};

const std::vector<Fixture> kAll{{"pendulum", "pendulum_sin"}, {"planar_2r", "planar_2r_sin"}, {"chain_6r", "chain_6r_sin"}};
const std::vector<Fixture> kMulti{{"planar_2r", "planar_2r_sin"}, {"chain_6r", "chain_6r_sin"}};

struct Outcome {
  bool pass;
  std::string detail;
};

char buf[512];

// 1. recursive vs closed form, r = 0..4, 100 samples
Outcome method_equivalence() {
  double worst = 0.0;
  for (const auto& f : kMulti) {
    const auto m = model(f.model);
    const auto tr = traj(f.traj);
    for (double t : time_grid(0.0, 5.0, 100)) {
      const JointState s = sample(tr, t, 6);
      const auto a = inverse_dynamics_series(m, s, 4);
      const auto b = closed_form_series(m, s, 4);
      for (std::size_t r = 0; r <= 4; ++r) worst = std::max(worst, relative_error(a[r], b[r]));
    }
  }
  std::snprintf(buf, sizeof buf, "max rel error %.3e (limit 1e-8)", worst);
  return {worst <= 1e-8, buf};
}

// 2. FD ladder r = 0..3 at h = 1e-5 plus convergence order under halving
Outcome fd_ladder() {
  double worst = 0.0, worst_ratio_dev = 0.0, ratio_lo = 1e9, ratio_hi = 0.0;
  for (const auto& f : kMulti) {
    const auto m = model(f.model);
    const auto tr = traj(f.traj);
    const auto times = time_grid(0.0, 5.0, 20);
    for (int r = 0; r <= 3; ++r) {
      auto qr = [&](double t) { return inverse_dynamics_series(m, tr, t, r)[static_cast<std::size_t>(r)]; };
      double e_h = 0.0, e_h2 = 0.0;  // convergence check at h = 1e-4 and 5e-5
      for (double t : times) {
        const VecX exact = inverse_dynamics_series(m, tr, t, r + 1)[static_cast<std::size_t>(r + 1)];
        worst = std::max(worst, relative_error(fd_derivative(qr, t, 1e-5), exact));
        e_h = std::max(e_h, max_abs(fd_derivative(qr, t, 1e-4) - exact));
        e_h2 = std::max(e_h2, max_abs(fd_derivative(qr, t, 5e-5) - exact));
      }
      const double ratio = e_h / e_h2;
      ratio_lo = std::min(ratio_lo, ratio);
      ratio_hi = std::max(ratio_hi, ratio);
      worst_ratio_dev = std::max(worst_ratio_dev, std::abs(ratio - 4.0) / 4.0);
    }
  }
  std::snprintf(buf, sizeof buf,
                "max rel FD error %.3e at h=1e-5 (limit 1e-4); halving ratio in [%.3f, %.3f] (4 +/- 20%%)", worst,
                ratio_lo, ratio_hi);
  return {worst <= 1e-4 && worst_ratio_dev <= 0.2, buf};
}

// 3. pendulum against m l^2 q'' + m g l cos q and its derivatives
Outcome pendulum_oracle() {
  const auto m = model("pendulum");
  const auto tr = traj("pendulum_sin");
  const auto& in = m.bodies[0].inertia;
  const double l = in.com.norm(), g = m.gravity.norm();
  double worst = 0.0;
  for (double t : time_grid(0.0, 5.0, 100)) {
    const JointState s = sample(tr, t, 4);
    const auto q = inverse_dynamics_series(m, s, 2);
    const auto sym = pendulum_symbolic(in.mass, l, g, s.joint(0));
    for (std::size_t r = 0; r <= 2; ++r) worst = std::max(worst, std::abs(q[r][0] - sym[r]));
  }
  std::snprintf(buf, sizeof buf, "max abs error %.3e (limit 1e-10)", worst);
  return {worst <= 1e-10, buf};
}

// 4. k = 0 against the reference Newton-Euler
Outcome order_zero() {
  double worst = 0.0;
  for (const auto& f : kAll) {
    const auto m = model(f.model);
    const auto tr = traj(f.traj);
    for (double t : time_grid(0.0, 5.0, 100)) {
      const JointState s = sample(tr, t, 2);
      worst = std::max(worst, relative_error(inverse_dynamics_series(m, s, 0)[0], rnea_order0(m, s.q[0], s.q[1], s.q[2])));
    }
  }
  std::snprintf(buf, sizeof buf, "max rel error %.3e (limit 1e-12)", worst);
  return {worst <= 1e-12, buf};
}

// 5. coefficient extraction vs Leibniz assembly, n = 1 and n = 2
Outcome coefficients() {
  double worst = 0.0, worst_p = 0.0;
  for (const auto& f : kMulti) {
    const auto m = model(f.model);
    const auto tr = traj(f.traj);
    for (double t : time_grid(0.0, 5.0, 50)) {
      const JointState s = sample(tr, t, 4);
      const GeneralizedEOM e = generalized_eom(evaluate_system(m, s, 2));
      for (int n = 1; n <= 2; ++n) {
        worst = std::max(worst, relative_error(assemble_Q_from_coefficients(e, s, n), assemble_Q(e, s, n)));
      }
      // n = 1: M, M' + C, C'; n = 2: P3 = 2M' + C
      const MatX p1[3] = {e.C[1], e.M[1] + e.C[0], e.M[0]};
      for (int k = 1; k <= 3; ++k) worst_p = std::max(worst_p, rel(coefficient(e, 1, k), p1[k - 1], 1.0));
      worst_p = std::max(worst_p, rel(coefficient(e, 2, 3), 2.0 * e.M[1] + e.C[0], 1.0));
      worst_p = std::max(worst_p, rel(coefficient(e, 2, 4), e.M[0], 1.0));
    }
  }
  std::snprintf(buf, sizeof buf, "assembled vs coefficient rel %.3e, P_k identities %.3e (limit 1e-12)", worst,
                worst_p);
  return {worst <= 1e-12 && worst_p <= 1e-12, buf};
}

// 6. structural invariants
Outcome structure() {
  double sym = 0.0, ax = 0.0, jax = 0.0, a1 = 0.0;
  for (const auto& f : kMulti) {
    const auto m = model(f.model);
    const auto tr = traj(f.traj);
    for (double t : time_grid(0.0, 5.0, 20)) {
      const JointState s = sample(tr, t, 6);
      const SystemMatrices sys = evaluate_system(m, s, 4);
      const auto cache = forward_kinematics(m, s, 0);
      for (int r = 0; r <= 4; ++r) {
        sym = std::max(sym, rel(sys.M[r], sys.M[r].transpose(), 1.0));
        ax = std::max(ax, max_abs(apply_a(m, s, r, sys.X)));
      }
      // J = AX against screws transported by the forward pass
      for (int i = 0; i < m.dof(); ++i) {
        for (int j = 0; j <= i; ++j) {
          const Vec6 col = (sys.A[0] * sys.X).block<6, 1>(6 * i, j);
          jax = std::max(jax, max_abs(col - cache.screw[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][0]));
        }
      }
      const MatX& A = sys.A[0];
      a1 = std::max(a1, rel(sys.A[1], A * sys.a[0] - A * sys.a[0] * A, 1.0));
    }
  }
  std::snprintf(buf, sizeof buf, "M^(n) asym %.3e (1e-12); |aX| %.3e (0); J-AX %.3e (1e-13); A' %.3e (1e-14)", sym,
                ax, jax, a1);
  return {sym <= 1e-12 && ax == 0.0 && jax <= 1e-13 && a1 <= 1e-14, buf};
}

// 7. benchmark, N = 10000, k = 2, 6-DOF; ratio is informational
Outcome bench() {
  cli::RunConfig c;
  c.order = 2;
  c.iterations = 10000;
  c.t0 = 0.0;
  c.t1 = 5.0;
  c.samples = 100;
  c.method = cli::Method::kBoth;
  const cli::BenchResult r = cli::run_bench(model("chain_6r"), traj("chain_6r_sin"), c);
  const bool ok = r.recursive_seconds && r.closed_seconds && std::isfinite(r.checksum);
  const double ratio = r.ratio().value_or(0.0);
  std::snprintf(buf, sizeof buf, "recursive %.3f s, closed %.3f s, ratio recursive/closed %.3f%s",
                r.recursive_seconds.value_or(0.0), r.closed_seconds.value_or(0.0), ratio,
                ratio > cli::kSoftRatioLimit ? " (warning: above soft limit 1.1)" : "");
  return {ok, buf};
}

// 8. 1% mass perturbation in one engine is detected and localized
Outcome fault_localization() {
  const auto m = model("chain_6r");
  const auto tr = traj("chain_6r_sin");
  const auto times = time_grid(0.0, 5.0, 20);
  std::string named;
  bool ok = true;
  for (int b = 0; b < m.dof(); ++b) {
    ChainModel bad = m;
    bad.bodies[static_cast<std::size_t>(b)].inertia.mass *= 1.01;
    const ComparisonReport rep = cross_validate(m, bad, tr, times, 2);
    const int body = rep.failing_body();
    ok = ok && !rep.pass && body >= 1 && body <= m.dof();
    named += (b ? "," : "") + std::to_string(b + 1) + "->" + std::to_string(body);
  }
  return {ok, "perturbed->named body: " + named};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"method equivalence", method_equivalence},
      {"finite-difference ladder", fd_ladder},
      {"pendulum analytic oracle", pendulum_oracle},
      {"order-0 reduction", order_zero},
      {"coefficient formula", coefficients},
      {"structural invariants", structure},
      {"performance benchmark", bench},
      {"fault localization", fault_localization},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
