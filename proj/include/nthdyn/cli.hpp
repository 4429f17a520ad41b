#pragma once

// Command-line front end: `id`, `validate` and `bench` subcommands.
//
// Exit codes: 0 success, 1 validation failure, 2 input error.

#include "nthdyn/closed_form_eom.hpp"
#include "nthdyn/parallel.hpp"
#include "nthdyn/recursive_dynamics.hpp"
#include "nthdyn/robot_model.hpp"
#include "nthdyn/trajectory.hpp"
#include "nthdyn/validation.hpp"

#include <CLI11.hpp>
#include <json.hpp>  // nlohmann/json, vendored

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nthdyn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitInput = 2;

enum class Method { kRecursive, kClosed, kBoth };
enum class Format { kCsv, kJson };

struct RunConfig {
  std::string model_path;
  std::string traj_path;
  int order = 0;
  double t0 = 0.0;
  double t1 = 1.0;
  int samples = 1;
  Method method = Method::kRecursive;
  std::string out_path;  // empty or "-" means stdout
  Format format = Format::kCsv;
  double fd_step = 1e-5;
  long iterations = 1000;
  unsigned threads = 1;
};

inline void check_config(const RunConfig& c) {
  if (c.order < 0) throw std::invalid_argument("--order must be >= 0");
  if (c.samples < 1) throw std::invalid_argument("--samples must be >= 1");
  if (!(c.fd_step > 0.0)) throw std::invalid_argument("--fd-step must be positive");
  if (c.iterations < 1) throw std::invalid_argument("--iters must be >= 1");
}

/// %.17g, round-trip safe for doubles.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

struct Inputs {
  ChainModel model;
  JointTrajectory traj;
};

inline Inputs load_inputs(const RunConfig& c) {
  Inputs in{load_model(c.model_path), load_trajectory(c.traj_path)};
  if (in.traj.dof() != in.model.dof()) {
    throw ValidationError("trajectory has " + std::to_string(in.traj.dof()) +
                          " joints, model has " + std::to_string(in.model.dof()));
  }
  return in;
}

// Runs `body` with an output stream bound to c.out_path (or `fallback`).
template <typename Body>
void with_output(const RunConfig& c, std::ostream& fallback, Body&& body) {
  if (c.out_path.empty() || c.out_path == "-") {
    body(fallback);
    return;
  }
  std::ofstream out(c.out_path);
  if (!out) throw ParseError("cannot write '" + c.out_path + "'");
  body(out);
}

}  // namespace detail

/// Rows of Q^(r) for every grid sample; columns t, then Q_i^(r) r-major.
struct IdTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::optional<double> max_rel_discrepancy;  // method = both
};

inline IdTable compute_id_table(const ChainModel& model, const JointTrajectory& traj, const RunConfig& c) {
  const int n = model.dof();
  const int k = c.order;
  const auto times = time_grid(c.t0, c.t1, c.samples);
  const bool rec = c.method != Method::kClosed;
  const bool closed = c.method != Method::kRecursive;

  IdTable table;
  table.columns.push_back("t");
  auto add_columns = [&](const std::string& prefix) {
    for (int r = 0; r <= k; ++r)
      for (int i = 1; i <= n; ++i) table.columns.push_back(prefix + "Q" + std::to_string(i) + "_d" + std::to_string(r));
  };
  if (c.method == Method::kBoth) {
    add_columns("rec_");
    add_columns("closed_");
  } else {
    add_columns("");
  }

  table.rows.resize(times.size());
  std::vector<double> discrepancy(times.size(), 0.0);
  parallel_for(times.size(), c.threads, [&](std::size_t s) {
    const JointState state = sample(traj, times[s], k + 2);
    auto& row = table.rows[s];
    row.push_back(times[s]);
    std::vector<VecX> qr, qc;
    if (rec) qr = inverse_dynamics_series(model, state, k);
    if (closed) qc = closed_form_series(model, state, k);
    for (const auto* series : {&qr, &qc}) {
      for (const auto& v : *series)
        for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
    }
    if (rec && closed) {
      for (int r = 0; r <= k; ++r) {
        discrepancy[s] = std::max(discrepancy[s], relative_error(qr[static_cast<std::size_t>(r)], qc[static_cast<std::size_t>(r)]));
      }
    }
  });
  if (c.method == Method::kBoth) {
    double worst = 0.0;
    for (double d : discrepancy) worst = std::max(worst, d);
    table.max_rel_discrepancy = worst;
  }
  return table;
}

inline void write_csv(const IdTable& table, std::ostream& os) {
  for (std::size_t j = 0; j < table.columns.size(); ++j) os << (j ? "," : "") << table.columns[j];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_number(row[j]);
    os << '\n';
  }
  if (table.max_rel_discrepancy) {
    os << "# max_rel_discrepancy," << format_number(*table.max_rel_discrepancy) << '\n';
  }
}

inline void write_json(const IdTable& table, std::ostream& os) {
  nlohmann::json doc;
  doc["columns"] = table.columns;
  doc["rows"] = table.rows;
  if (table.max_rel_discrepancy) doc["max_rel_discrepancy"] = *table.max_rel_discrepancy;
  os << doc.dump(2) << '\n';
}

/// Method-equivalence threshold applied to `id --method both`.
inline constexpr double kMethodTolerance = 1e-8;

inline int cmd_id(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    check_config(c);
    const auto in = detail::load_inputs(c);
    const IdTable table = compute_id_table(in.model, in.traj, c);
    detail::with_output(c, out, [&](std::ostream& os) {
      if (c.format == Format::kCsv) {
        write_csv(table, os);
      } else {
        write_json(table, os);
      }
    });
    if (table.max_rel_discrepancy && *table.max_rel_discrepancy > kMethodTolerance) {
      err << "recursive and closed-form results differ: max relative discrepancy "
          << format_number(*table.max_rel_discrepancy) << '\n';
      return kExitValidation;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

inline int cmd_validate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    check_config(c);
    const auto in = detail::load_inputs(c);
    FDConfig fd;
    fd.h = c.fd_step;
    const auto times = time_grid(c.t0, c.t1, c.samples);
    const ComparisonReport report = cross_validate(in.model, in.traj, times, c.order, fd, c.threads);
    detail::with_output(c, out, [&](std::ostream& os) { os << report_to_json(report).dump(2) << '\n'; });
    if (!report.pass) {
      err << "validation failed; worst body " << report.failing_body() << '\n';
      return kExitValidation;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

struct BenchResult {
  long iterations = 0;
  int order = 0;
  std::optional<double> recursive_seconds;
  std::optional<double> closed_seconds;
  double checksum = 0.0;

  [[nodiscard]] std::optional<double> ratio() const {
    if (recursive_seconds && closed_seconds && *closed_seconds > 0.0) return *recursive_seconds / *closed_seconds;
    return std::nullopt;
  }
};

/// Recursive / closed-form time ratio above which bench prints a warning.
inline constexpr double kSoftRatioLimit = 1.1;

/// Times `iterations` evaluations of Q^(0..k) per method. States are sampled
/// before the timed region; iteration i uses grid sample i mod samples.
inline BenchResult run_bench(const ChainModel& model, const JointTrajectory& traj, const RunConfig& c) {
  const auto times = time_grid(c.t0, c.t1, c.samples);
  std::vector<JointState> states;
  states.reserve(times.size());
  for (double t : times) states.push_back(sample(traj, t, c.order + 2));

  using clock = std::chrono::steady_clock;
  BenchResult res;
  res.iterations = c.iterations;
  res.order = c.order;
  auto time_method = [&](auto&& eval) {
    double sink = 0.0;
    const auto start = clock::now();
    for (long it = 0; it < c.iterations; ++it) {
      const auto q = eval(states[static_cast<std::size_t>(it) % states.size()]);
      sink += q.back()[0];
    }
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    res.checksum += sink;
    return secs;
  };
  if (c.method != Method::kClosed) {
    res.recursive_seconds = time_method([&](const JointState& s) { return inverse_dynamics_series(model, s, c.order); });
  }
  if (c.method != Method::kRecursive) {
    res.closed_seconds = time_method([&](const JointState& s) { return closed_form_series(model, s, c.order); });
  }
  return res;
}

inline nlohmann::json bench_to_json(const BenchResult& r) {
  nlohmann::json doc;
  doc["iterations"] = r.iterations;
  doc["order"] = r.order;
  if (r.recursive_seconds) {
    doc["recursive"] = {{"total_s", *r.recursive_seconds}, {"per_call_s", *r.recursive_seconds / static_cast<double>(r.iterations)}};
  }
  if (r.closed_seconds) {
    doc["closed"] = {{"total_s", *r.closed_seconds}, {"per_call_s", *r.closed_seconds / static_cast<double>(r.iterations)}};
  }
  if (auto ratio = r.ratio()) doc["ratio_recursive_over_closed"] = *ratio;
  return doc;
}

inline int cmd_bench(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    check_config(c);
    const auto in = detail::load_inputs(c);
    const BenchResult r = run_bench(in.model, in.traj, c);
    auto line = [&](std::ostream& os, const char* name, double secs) {
      os << name << ": total " << format_number(secs) << " s, per call "
         << format_number(secs / static_cast<double>(r.iterations)) << " s (" << r.iterations
         << " evaluations, order " << r.order << ")\n";
    };
    if (r.recursive_seconds) line(out, "recursive", *r.recursive_seconds);
    if (r.closed_seconds) line(out, "closed", *r.closed_seconds);
    if (auto ratio = r.ratio()) {
      out << "ratio recursive/closed: " << format_number(*ratio) << '\n';
      if (*ratio > kSoftRatioLimit) {
        err << "warning: recursive/closed time ratio " << format_number(*ratio) << " exceeds "
            << kSoftRatioLimit << '\n';
      }
    }
    if (!c.out_path.empty() && c.out_path != "-") {
      detail::with_output(c, out, [&](std::ostream& os) { os << bench_to_json(r).dump(2) << '\n'; });
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

/// Parses argv and dispatches to the subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Higher-order inverse dynamics of serial chains"};
  app.require_subcommand(1);

  RunConfig c;
  c.threads = thread_count_from_env();
  const std::map<std::string, Method> methods{
      {"recursive", Method::kRecursive}, {"closed", Method::kClosed}, {"both", Method::kBoth}};
  const std::map<std::string, Format> formats{{"csv", Format::kCsv}, {"json", Format::kJson}};

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", c.model_path, "Model JSON")->required();
    sub->add_option("--traj", c.traj_path, "Trajectory JSON")->required();
    sub->add_option("--order", c.order, "Derivative order k")->check(CLI::NonNegativeNumber);
    sub->add_option("--t0", c.t0, "Grid start time [s]");
    sub->add_option("--t1", c.t1, "Grid end time [s]");
    sub->add_option("--samples", c.samples, "Grid sample count")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out_path, "Output path (default stdout)");
    return sub->add_option("--method", c.method, "recursive | closed | both")
        ->transform(CLI::CheckedTransformer(methods, CLI::ignore_case));
  };

  CLI::App* id = app.add_subcommand("id", "Evaluate Q^(0..k) over a time grid");
  CLI::Option* id_method = common(id);
  id->add_option("--format", c.format, "csv | json")->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));

  CLI::App* validate = app.add_subcommand("validate", "Cross-validate both methods and FD ladders");
  common(validate);
  validate->add_option("--fd-step", c.fd_step, "Central-difference step h [s]");

  CLI::App* bench = app.add_subcommand("bench", "Time recursive vs closed form");
  CLI::Option* bench_method = common(bench);
  bench->add_option("--iters", c.iterations, "Evaluations per method")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  // id defaults to the recursive engine, bench to timing both
  if (id->parsed()) {
    if (id_method->count() == 0) c.method = Method::kRecursive;
    return cmd_id(c, out, err);
  }
  if (validate->parsed()) return cmd_validate(c, out, err);
  if (bench_method->count() == 0) c.method = Method::kBoth;
  return cmd_bench(c, out, err);
}

}  // namespace nthdyn::cli
