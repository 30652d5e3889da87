#pragma once

// Batch front-end: flat key = value run configurations, scenario execution
// (simulate / certify_divcurl / sweep), CSV + JSON outputs with atomic
// writes, and CI-friendly pass/fail gates evaluated at fixed tolerances.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "smf/diagnostics.hpp"
#include "smf/divcurl.hpp"
#include "smf/errors.hpp"
#include "smf/flow.hpp"
#include "smf/initial_data.hpp"

namespace smf::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

enum class Scenario { Simulate, CertifyDivcurl, Sweep };
enum class InitialData { Constant, GreatCircle, SpinWave, RandomSmooth };

struct RunConfig {
  Scenario scenario = Scenario::Simulate;
  std::string target = "sphere2";
  InitialData initial_data = InitialData::SpinWave;
  double theta = 0.25 * std::numbers::pi;
  int harmonic_n = 1;
  int band = 6;
  double amplitude = 0.3;
  uint64_t seed = 1;

  int n_points = 128;
  double dt = 0.0;
  double t_final = 1.0;
  int diag_stride = 10;
  flow::Scheme scheme = flow::Scheme::ImplicitMidpoint;
  bool force_dt = false;
  double fixed_point_tol = 1e-12;
  int max_fixed_point_iters = 100;
  double cfl_safety = 0.25;
  grid::DiffScheme derivative_scheme = grid::DiffScheme::Spectral;

  std::string output_dir = "out";
  double divcurl_tol = 1e-5;

  std::vector<double> sweep_thetas;
  std::vector<int> sweep_harmonics;
  std::vector<uint64_t> sweep_seeds;
};

// -- flat key = value parsing -------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

inline long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F&& one) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(one(key, item));
  }
  return out;
}

inline void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "scenario") {
    if (v == "simulate") c.scenario = Scenario::Simulate;
    else if (v == "certify_divcurl") c.scenario = Scenario::CertifyDivcurl;
    else if (v == "sweep") c.scenario = Scenario::Sweep;
    else throw ConfigError(key, "unknown scenario '" + v + "'");
  } else if (key == "target") {
    geometry::TargetGeometry::from_name(v);  // validates
    c.target = v;
  } else if (key == "initial_data") {
    if (v == "constant") c.initial_data = InitialData::Constant;
    else if (v == "great_circle") c.initial_data = InitialData::GreatCircle;
    else if (v == "spin_wave") c.initial_data = InitialData::SpinWave;
    else if (v == "random_smooth") c.initial_data = InitialData::RandomSmooth;
    else throw ConfigError(key, "unknown initial data '" + v + "'");
  } else if (key == "theta") { c.theta = parse_double(key, v); }
  else if (key == "harmonic_n") { c.harmonic_n = static_cast<int>(parse_int(key, v)); }
  else if (key == "band") { c.band = static_cast<int>(parse_int(key, v)); }
  else if (key == "amplitude") { c.amplitude = parse_double(key, v); }
  else if (key == "seed") { c.seed = static_cast<uint64_t>(parse_int(key, v)); }
  else if (key == "n_points") { c.n_points = static_cast<int>(parse_int(key, v)); }
  else if (key == "dt") { c.dt = parse_double(key, v); }
  else if (key == "t_final") { c.t_final = parse_double(key, v); }
  else if (key == "diag_stride") { c.diag_stride = static_cast<int>(parse_int(key, v)); }
  else if (key == "scheme") {
    if (v == "implicit_midpoint") c.scheme = flow::Scheme::ImplicitMidpoint;
    else if (v == "projected_rk4") c.scheme = flow::Scheme::ProjectedRK4;
    else throw ConfigError(key, "unknown scheme '" + v + "'");
  } else if (key == "force_dt") { c.force_dt = parse_bool(key, v); }
  else if (key == "fixed_point_tol") { c.fixed_point_tol = parse_double(key, v); }
  else if (key == "max_fixed_point_iters") {
    c.max_fixed_point_iters = static_cast<int>(parse_int(key, v));
  } else if (key == "cfl_safety") { c.cfl_safety = parse_double(key, v); }
  else if (key == "derivative_scheme") {
    if (v == "spectral") c.derivative_scheme = grid::DiffScheme::Spectral;
    else if (v == "fd4") c.derivative_scheme = grid::DiffScheme::Fd4;
    else throw ConfigError(key, "unknown derivative scheme '" + v + "'");
  } else if (key == "output_dir") { c.output_dir = v; }
  else if (key == "divcurl_tol") { c.divcurl_tol = parse_double(key, v); }
  else if (key == "sweep_thetas") {
    c.sweep_thetas = parse_list<double>(key, v, parse_double);
  } else if (key == "sweep_harmonics") {
    c.sweep_harmonics = parse_list<int>(key, v, [](const std::string& k, const std::string& s) {
      return static_cast<int>(parse_int(k, s));
    });
  } else if (key == "sweep_seeds") {
    c.sweep_seeds = parse_list<uint64_t>(key, v, [](const std::string& k, const std::string& s) {
      return static_cast<uint64_t>(parse_int(k, s));
    });
  } else {
    throw ConfigError(key, "unknown key");
  }
}

inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open '" + tmp + "' for writing");
    out << bytes;
    if (!out) throw Error("short write to '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    detail::apply_key(c, key, val);
  }
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline void validate(const RunConfig& c) {
  if (c.n_points < 8 || c.n_points % 2 != 0)
    throw ConfigError("n_points", "must be even and >= 8");
  if (c.dt <= 0.0) throw ConfigError("dt", "must be positive");
  if (c.t_final <= 0.0) throw ConfigError("t_final", "must be positive");
  if (c.diag_stride < 1) throw ConfigError("diag_stride", "must be >= 1");
  if (c.initial_data == InitialData::SpinWave && c.theta <= 0.0)
    throw ConfigError("theta", "must be positive");
  if (c.harmonic_n < 1) throw ConfigError("harmonic_n", "must be >= 1");
  if (c.amplitude <= 0.0) throw ConfigError("amplitude", "must be positive");
}

inline grid::MapState make_initial_state(const RunConfig& c) {
  const auto geom = geometry::TargetGeometry::from_name(c.target);
  const grid::PeriodicGrid g(c.n_points, c.derivative_scheme);
  switch (c.initial_data) {
    case InitialData::Constant: return initial_data::constant_map(g, geom);
    case InitialData::GreatCircle:
      return initial_data::great_circle(g, geom, c.harmonic_n);
    case InitialData::SpinWave:
      return initial_data::spin_wave(g, geom, c.theta, c.harmonic_n);
    case InitialData::RandomSmooth:
      return initial_data::random_smooth(g, geom, c.seed, c.band, c.amplitude);
  }
  throw ConfigError("initial_data", "unhandled kind");
}

inline flow::SchemeConfig scheme_config(const RunConfig& c) {
  flow::SchemeConfig s;
  s.scheme = c.scheme;
  s.dt = c.dt;
  s.fixed_point_tol = c.fixed_point_tol;
  s.max_fixed_point_iters = c.max_fixed_point_iters;
  s.cfl_safety = c.cfl_safety;
  s.force_dt = c.force_dt;
  return s;
}

// Gate tolerances (fixed; a run passes or fails on these alone).
struct GateTolerances {
  double m_drift_rel = 1e-8;
  double q_drift = 1e-6;
  double b_drift = 1e-6;
  double neiji = 1e-7;
  double divcurl_route_gap = 1e-7;
  double divcurl_ratio_cap = 10.0;
};

struct Gate {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct RunSummary {
  RunConfig config;
  bool aborted = false;
  std::string abort_reason;
  long total_steps = 0;
  double wall_time_ms = 0.0;

  diagnostics::DiagnosticsSample terminal;
  double m_drift_rel = 0.0;
  double q_drift = 0.0;
  double b_drift = 0.0;
  double neiji_max = 0.0;
  double bal1_max = 0.0;
  double bal2_max = 0.0;
  double proj_residual_max = 0.0;
  double solver_residual_max = 0.0;
  int solver_iterations_max = 0;
  bool xi1_monotone = true;
  diagnostics::MonitorRecord terminal_monitors;

  std::optional<divcurl::DivCurlReport> divcurl_report;
  std::vector<Gate> gates;
  bool pass = false;
};

namespace detail {

inline ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["scenario"] = c.scenario == Scenario::Simulate ? "simulate"
                  : c.scenario == Scenario::CertifyDivcurl ? "certify_divcurl"
                                                           : "sweep";
  j["target"] = c.target;
  j["initial_data"] = c.initial_data == InitialData::Constant ? "constant"
                      : c.initial_data == InitialData::GreatCircle ? "great_circle"
                      : c.initial_data == InitialData::SpinWave ? "spin_wave"
                                                                : "random_smooth";
  j["theta"] = c.theta;
  j["harmonic_n"] = c.harmonic_n;
  j["band"] = c.band;
  j["amplitude"] = c.amplitude;
  j["seed"] = c.seed;
  j["n_points"] = c.n_points;
  j["dt"] = c.dt;
  j["t_final"] = c.t_final;
  j["diag_stride"] = c.diag_stride;
  j["scheme"] = c.scheme == flow::Scheme::ImplicitMidpoint ? "implicit_midpoint"
                                                           : "projected_rk4";
  j["force_dt"] = c.force_dt;
  j["fixed_point_tol"] = c.fixed_point_tol;
  j["max_fixed_point_iters"] = c.max_fixed_point_iters;
  j["cfl_safety"] = c.cfl_safety;
  j["derivative_scheme"] =
      c.derivative_scheme == grid::DiffScheme::Spectral ? "spectral" : "fd4";
  j["output_dir"] = c.output_dir;
  j["divcurl_tol"] = c.divcurl_tol;
  return j;
}

inline double nan_safe(double x) { return std::isfinite(x) ? x : 0.0; }

inline ordered_json summary_json(const RunSummary& s) {
  ordered_json j;
  j["config"] = config_json(s.config);
  j["aborted"] = s.aborted;
  j["abort_reason"] = s.abort_reason;
  j["total_steps"] = s.total_steps;
  j["wall_time_ms"] = s.wall_time_ms;
  j["terminal"] = {{"t", s.terminal.time},
                   {"m", s.terminal.m},
                   {"E", s.terminal.E},
                   {"b_integral", s.terminal.b_integral},
                   {"Q", s.terminal.Q},
                   {"xi1", s.terminal.xi1},
                   {"xi2", s.terminal.xi2}};
  j["drift"] = {{"m_rel", s.m_drift_rel}, {"q", s.q_drift}, {"b", s.b_drift}};
  j["max"] = {{"bal1_res", nan_safe(s.bal1_max)},
              {"bal2_res", nan_safe(s.bal2_max)},
              {"neiji", s.neiji_max},
              {"proj_residual", s.proj_residual_max},
              {"solver_residual", s.solver_residual_max},
              {"solver_iterations", s.solver_iterations_max}};
  j["monitors"] = {{"si1_ratio", s.terminal_monitors.si1_ratio},
                   {"l4_ratio", s.terminal_monitors.l4_ratio},
                   {"l5_ratio", s.terminal_monitors.l5_ratio},
                   {"l6_ratio", s.terminal_monitors.l6_ratio},
                   {"applicable", s.terminal_monitors.applicable}};
  if (s.divcurl_report)
    j["divcurl"] = divcurl::report_to_json(*s.divcurl_report);
  ordered_json gates = ordered_json::object();
  for (const auto& g : s.gates)
    gates[g.name] = {{"value", g.value}, {"threshold", g.threshold}, {"pass", g.pass}};
  j["gates"] = gates;
  j["pass"] = s.pass;
  return j;
}

inline void add_gate(RunSummary& s, const std::string& name, double value,
                     double threshold, bool pass) {
  s.gates.push_back({name, value, threshold, pass});
}

}  // namespace detail

/// Execute one configured run: evolve, write series.csv and summary.json
/// (and divcurl.json + the balance-system file for certify_divcurl), and
/// evaluate the pass/fail gates.
inline RunSummary run(const RunConfig& cfg) {
  validate(cfg);
  const auto t_start = std::chrono::steady_clock::now();

  fs::create_directories(cfg.output_dir);
  const grid::MapState u0 = make_initial_state(cfg);
  const flow::SchemeConfig scfg = scheme_config(cfg);
  flow::validate_dt(scfg, u0.grid);

  flow::EvolveResult res = flow::evolve(u0, cfg.t_final, scfg, cfg.diag_stride);

  RunSummary s;
  s.config = cfg;
  s.aborted = res.aborted;
  s.abort_reason = res.abort_reason;
  s.total_steps = res.total_steps;
  s.solver_residual_max = res.max_solver_residual;
  s.solver_iterations_max = res.max_solver_iterations;

  const auto& samples = res.series.samples;
  s.terminal = samples.back();
  const double m0 = samples.front().m;
  const double q0 = samples.front().Q;
  const double b0 = samples.front().b_integral;
  double xi_prev = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& a = samples[i];
    s.m_drift_rel = std::max(s.m_drift_rel, std::abs(a.m - m0) / std::max(m0, 1e-12));
    s.q_drift = std::max(s.q_drift, std::abs(a.Q - q0) / std::max(1.0, std::abs(q0)));
    s.b_drift = std::max(s.b_drift, std::abs(a.b_integral - b0));
    s.neiji_max = std::max(s.neiji_max, a.neiji_residual);
    s.proj_residual_max = std::max(s.proj_residual_max, a.proj_residual);
    if (std::isfinite(a.balance1_residual))
      s.bal1_max = std::max(s.bal1_max, a.balance1_residual);
    if (std::isfinite(a.balance2_residual))
      s.bal2_max = std::max(s.bal2_max, a.balance2_residual);
    if (i > 0 && a.xi1 < xi_prev - 1e-15) s.xi1_monotone = false;
    xi_prev = a.xi1;
  }
  s.terminal_monitors = diagnostics::interpolation_monitors(res.trajectory.back());

  diagnostics::write_csv(res.series, (fs::path(cfg.output_dir) / "series.csv").string());

  if (cfg.scenario == Scenario::CertifyDivcurl && !s.aborted) {
    divcurl::BalanceSystem sys =
        divcurl::from_flow(res.trajectory, std::numeric_limits<double>::infinity());
    divcurl::DivCurlReport rep = divcurl::verify_periodic(sys, cfg.divcurl_tol);
    divcurl::save(sys, (fs::path(cfg.output_dir) / "system.smfdcv").string());
    divcurl::write_report(rep, (fs::path(cfg.output_dir) / "divcurl.json").string());
    s.divcurl_report = rep;
  }

  const GateTolerances tol;
  detail::add_gate(s, "completed", s.aborted ? 1.0 : 0.0, 0.0, !s.aborted);
  detail::add_gate(s, "m_drift_rel", s.m_drift_rel, tol.m_drift_rel,
                   s.m_drift_rel <= tol.m_drift_rel);
  detail::add_gate(s, "q_drift", s.q_drift, tol.q_drift, s.q_drift <= tol.q_drift);
  const double b_thr = tol.b_drift * std::max(1.0, std::abs(b0));
  detail::add_gate(s, "b_drift", s.b_drift, b_thr, s.b_drift <= b_thr);
  detail::add_gate(s, "neiji_identity", s.neiji_max, tol.neiji,
                   s.neiji_max <= tol.neiji);
  detail::add_gate(s, "xi1_monotone", s.xi1_monotone ? 0.0 : 1.0, 0.0,
                   s.xi1_monotone);
  if (s.divcurl_report) {
    detail::add_gate(s, "divcurl_valid", s.divcurl_report->valid ? 0.0 : 1.0, 0.0,
                     s.divcurl_report->valid);
    detail::add_gate(s, "divcurl_route_gap", s.divcurl_report->route_gap,
                     tol.divcurl_route_gap,
                     s.divcurl_report->route_gap <= tol.divcurl_route_gap);
    const double ratio = s.divcurl_report->empirical_ratio;
    const bool ratio_ok = !std::isfinite(ratio) || ratio <= tol.divcurl_ratio_cap;
    detail::add_gate(s, "divcurl_ratio", detail::nan_safe(ratio),
                     tol.divcurl_ratio_cap, ratio_ok);
  }
  s.pass = true;
  for (const auto& g : s.gates) s.pass = s.pass && g.pass;

  s.wall_time_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
  detail::write_file_atomic((fs::path(cfg.output_dir) / "summary.json").string(),
                            detail::summary_json(s).dump(2) + "\n");
  return s;
}

// -- sweep --------------------------------------------------------------------

struct SweepRow {
  std::string label;
  double m0 = 0.0;
  double E0 = 0.0;
  double sup_E = 0.0;
  double ratio = 0.0;  // sup_t E(t) / (E(0) + 1)
  bool aborted = false;
  bool pass = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by m0
  bool any_aborted = false;
};

/// Run every sweep cell (spin waves over theta x harmonics, plus
/// random_smooth over seeds), concurrently across cells, and emit the
/// a-priori-bound table sorted by m(0).
inline SweepResult sweep(const RunConfig& base) {
  std::vector<RunConfig> cells;
  int ti = 0;
  for (double th : base.sweep_thetas) {
    int ni = 0;
    for (int n : base.sweep_harmonics) {
      RunConfig c = base;
      c.scenario = Scenario::Simulate;
      c.initial_data = InitialData::SpinWave;
      c.theta = th;
      c.harmonic_n = n;
      char buf[64];
      std::snprintf(buf, sizeof buf, "spin_t%02d_n%d", ti, n);
      c.output_dir = (fs::path(base.output_dir) / "cells" / buf).string();
      cells.push_back(c);
      (void)ni;
      ++ni;
    }
    ++ti;
  }
  for (uint64_t seed : base.sweep_seeds) {
    RunConfig c = base;
    c.scenario = Scenario::Simulate;
    c.initial_data = InitialData::RandomSmooth;
    c.seed = seed;
    char buf[64];
    std::snprintf(buf, sizeof buf, "rand_seed%llu",
                  static_cast<unsigned long long>(seed));
    c.output_dir = (fs::path(base.output_dir) / "cells" / buf).string();
    cells.push_back(c);
  }

  std::vector<SweepRow> rows(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      SweepRow row;
      row.label = fs::path(cells[i].output_dir).filename().string();
      try {
        RunSummary s = run(cells[i]);
        const std::string csv =
            (fs::path(cells[i].output_dir) / "series.csv").string();
        // sup over stored samples
        double supE = 0.0, E0 = 0.0, m0 = 0.0;
        {
          std::ifstream in(csv);
          std::string line;
          std::getline(in, line);  // header
          bool first = true;
          while (std::getline(in, line)) {
            std::stringstream ls(line);
            std::string cell;
            std::vector<double> v;
            while (std::getline(ls, cell, ',')) v.push_back(std::atof(cell.c_str()));
            if (v.size() >= 3) {
              if (first) { m0 = v[1]; E0 = v[2]; first = false; }
              supE = std::max(supE, v[2]);
            }
          }
        }
        row.m0 = m0;
        row.E0 = E0;
        row.sup_E = supE;
        row.ratio = supE / (E0 + 1.0);
        row.aborted = s.aborted;
        row.pass = s.pass;
      } catch (const Error& e) {
        row.aborted = true;
        row.pass = false;
      }
      rows[i] = std::move(row);
    }
  };
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(cells.size())));
  std::vector<std::future<void>> futs;
  for (unsigned w = 0; w < n_workers; ++w)
    futs.push_back(std::async(std::launch::async, worker));
  for (auto& f : futs) f.get();

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.m0 != b.m0) return a.m0 < b.m0;
    return a.label < b.label;
  });

  SweepResult out;
  out.rows = std::move(rows);
  for (const auto& r : out.rows) out.any_aborted = out.any_aborted || r.aborted;

  fs::create_directories(base.output_dir);
  std::ostringstream csv;
  csv << "label,m0,E0,sup_E,ratio,aborted,pass\n";
  ordered_json jrows = ordered_json::array();
  for (const auto& r : out.rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  r.label.c_str(), r.m0, r.E0, r.sup_E, r.ratio,
                  r.aborted ? 1 : 0, r.pass ? 1 : 0);
    csv << buf;
    jrows.push_back({{"label", r.label},
                     {"m0", r.m0},
                     {"E0", r.E0},
                     {"sup_E", r.sup_E},
                     {"ratio", r.ratio},
                     {"aborted", r.aborted},
                     {"pass", r.pass}});
  }
  detail::write_file_atomic((fs::path(base.output_dir) / "sweep.csv").string(),
                            csv.str());
  ordered_json j;
  j["rows"] = jrows;
  j["any_aborted"] = out.any_aborted;
  detail::write_file_atomic((fs::path(base.output_dir) / "sweep.json").string(),
                            j.dump(2) + "\n");
  return out;
}

}  // namespace smf::cli
