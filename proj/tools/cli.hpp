#pragma once

#include "pielm/calibration.hpp"
#include "pielm/heston_hull_white.hpp"
#include "pielm/metrics.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pielm::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Config file reading

/// Strict view of one YAML mapping: every key must be consumed, so typos fail
/// loudly instead of silently keeping a default.
class Section {
 public:
  Section() = default;
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError("config section '" + path_ + "' must be a mapping");
  }

  bool present() const { return node_ && node_.IsMap(); }

  bool has(const std::string& key) const { return present() && node_[key]; }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    try {
      out = node_[key].template as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return has(key) ? Section(node_[key], qualified(key)) : Section(YAML::Node(), qualified(key));
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

struct BsSection {
  BsParams params;
  BsForwardConfig solver;
  std::size_t eval_s = 101;
  std::size_t eval_t = 101;
};

struct HhwSection {
  HhwParams params;
  HhwForwardConfig solver;
  // (v, r) pairs of the exported (S, t) slices.
  std::vector<std::array<double, 2>> slices{{0.04, 0.05}, {0.14, 0.03}, {0.5, 0.05}};
  std::size_t slice_s = 61;
  std::size_t slice_t = 41;
  McConfig mc;
  std::size_t mc_states = 10;
  std::uint64_t states_seed = 1;
  HhwState sweep_at{0.0, 1.0, 0.5, 0.05};
  std::vector<double> sigma_sweep{0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7};
  std::vector<double> rate_sweep{-0.02, 0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14};
  std::vector<double> profile_spots;  // empty: 0.4K to 2K in steps of 0.05K
  // (theta_v, theta_r) settings of the Black-Scholes reduction check.
  std::vector<std::array<double, 2>> degenerate{{0.04, 0.05}, {0.09, 0.02}};
  double degenerate_tol = 1e-2;
};

struct CalibrateSection {
  CalibConfig config;
  BsParams truth = [] {
    BsParams p;
    p.volatility = 0.62;
    p.rate = 0.035;
    return p;
  }();
  double noise_std = 1e-3;
  std::array<double, 2> s_range{0.5, 2.0};
  std::array<double, 2> t_range{0.0, 0.9};
  std::size_t n_s = 5;
  std::size_t n_t = 5;
  std::string observations;  // CSV path; empty means synthesize
};

struct BenchSection {
  std::vector<std::string> problems{"bs", "hhw"};
};

struct RunConfig {
  std::string problem;
  std::uint64_t seed = 1;
  fs::path output = "out";
  BsSection bs;
  HhwSection hhw;
  CalibrateSection calibrate;
  BenchSection bench;
};

namespace detail {

inline void read_weights(Section s, BlockWeights& w) {
  s.read("pde", w.pde);
  s.read("terminal", w.terminal);
  s.read("boundary", w.boundary);
  s.finish();
}

inline void read_method(Section& s, SolverConfig& solver) {
  std::string method = std::holds_alternative<Pinv>(solver.method) ? "pinv" : "ridge";
  double tol = 1e-10, lambda = 1e-8;
  if (const auto* p = std::get_if<Pinv>(&solver.method)) tol = p->tol;
  if (const auto* r = std::get_if<Ridge>(&solver.method)) lambda = r->lambda;
  s.read("method", method);
  s.read("tol", tol);
  s.read("lambda", lambda);
  s.read("fallback_lambda", solver.fallback_lambda);
  s.read("fallback_condition", solver.fallback_condition);
  if (method == "pinv")
    solver.method = Pinv{tol};
  else if (method == "ridge")
    solver.method = Ridge{lambda};
  else
    throw ConfigError("solver method must be 'pinv' or 'ridge', got '" + method + "'");
}

inline void read_bs_solver(Section s, BsForwardConfig& c) {
  s.read("n_neurons", c.n_neurons);
  s.read("weight_scale", c.weight_scale);
  s.read("interior_counts", c.interior_counts);
  s.read("facet_points", c.facet_points);
  read_weights(s.child("weights"), c.weights);
  read_method(s, c.solver);
  s.finish();
}

inline void read_hhw_solver(Section s, HhwForwardConfig& c) {
  s.read("n_neurons", c.n_neurons);
  s.read("weight_scale", c.weight_scale);
  s.read("axis_scales", c.axis_scales);
  s.read("interior_points", c.interior_points);
  s.read("terminal_counts", c.terminal_counts);
  s.read("s_facet_counts", c.s_facet_counts);
  s.read("v_facet_counts", c.v_facet_counts);
  s.read("saturation_weight", c.saturation_weight);
  read_weights(s.child("weights"), c.weights);
  read_method(s, c.solver);
  s.finish();
}

inline void read_bs_params(Section& s, BsParams& p) {
  s.read("strike", p.strike);
  s.read("maturity", p.maturity);
  s.read("rate", p.rate);
  s.read("volatility", p.volatility);
  s.read("s_max", p.s_max);
}

inline void read_bs(Section s, BsSection& b) {
  read_bs_params(s, b.params);
  s.read("eval_s", b.eval_s);
  s.read("eval_t", b.eval_t);
  read_bs_solver(s.child("solver"), b.solver);
  s.finish();
}

inline void read_hhw(Section s, HhwSection& h) {
  auto& p = h.params;
  s.read("strike", p.strike);
  s.read("maturity", p.maturity);
  s.read("r0", p.r0);
  s.read("kappa_r", p.kappa_r);
  s.read("theta_r", p.theta_r);
  s.read("sigma_r", p.sigma_r);
  s.read("v0", p.v0);
  s.read("kappa_v", p.kappa_v);
  s.read("theta_v", p.theta_v);
  s.read("sigma_v", p.sigma_v);
  s.read("rho_sv", p.rho_sv);
  s.read("rho_sr", p.rho_sr);
  s.read("rho_vr", p.rho_vr);
  s.read("s_max", p.s_max);
  s.read("v_max", p.v_max);
  s.read("r_min", p.r_min);
  s.read("r_max", p.r_max);
  s.read("slices", h.slices);
  s.read("slice_s", h.slice_s);
  s.read("slice_t", h.slice_t);
  s.read("mc_states", h.mc_states);
  s.read("states_seed", h.states_seed);
  s.read("sigma_sweep", h.sigma_sweep);
  s.read("rate_sweep", h.rate_sweep);
  s.read("profile_spots", h.profile_spots);
  s.read("degenerate", h.degenerate);
  s.read("degenerate_tol", h.degenerate_tol);
  {
    Section at = s.child("sweep_at");
    at.read("t", h.sweep_at.t);
    at.read("s", h.sweep_at.s);
    at.read("v", h.sweep_at.v);
    at.read("r", h.sweep_at.r);
    at.finish();
  }
  {
    Section mc = s.child("mc");
    mc.read("n_paths", h.mc.n_paths);
    mc.read("n_steps", h.mc.n_steps);
    mc.read("seed", h.mc.seed);
    mc.finish();
  }
  read_hhw_solver(s.child("solver"), h.solver);
  s.finish();
}

inline void read_calibrate(Section s, CalibrateSection& c) {
  auto& cfg = c.config;
  s.read("sigma_bounds", cfg.sigma_bounds);
  s.read("r_bounds", cfg.r_bounds);
  s.read("n_init", cfg.n_init);
  s.read("n_iter", cfg.n_iter);
  s.read("n_candidates", cfg.n_candidates);
  s.read("n_local", cfg.n_local);
  s.read("forward_seed", cfg.forward_seed);
  s.read("noise_std", c.noise_std);
  s.read("s_range", c.s_range);
  s.read("t_range", c.t_range);
  s.read("n_s", c.n_s);
  s.read("n_t", c.n_t);
  s.read("observations", c.observations);
  {
    Section truth = s.child("truth");
    truth.read("volatility", c.truth.volatility);
    truth.read("rate", c.truth.rate);
    truth.finish();
  }
  {
    // Contract terms shared by the truth and the forward model.
    Section contract = s.child("contract");
    contract.read("strike", cfg.contract.strike);
    contract.read("maturity", cfg.contract.maturity);
    contract.read("s_max", cfg.contract.s_max);
    contract.finish();
  }
  {
    Section gp = s.child("surrogate");
    gp.read("lengthscale_grid", cfg.surrogate.lengthscale_grid);
    gp.read("signal_variance_grid", cfg.surrogate.signal_variance_grid);
    gp.read("noise_variance", cfg.surrogate.noise_variance);
    gp.read("max_jitter", cfg.surrogate.max_jitter);
    gp.finish();
  }
  read_bs_solver(s.child("forward"), cfg.forward);
  s.finish();
  c.truth.strike = cfg.contract.strike;
  c.truth.maturity = cfg.contract.maturity;
  c.truth.s_max = cfg.contract.s_max;
}

}  // namespace detail

/// Loads `path` (YAML; JSON is accepted as a YAML subset) for the subcommand
/// `problem`. An empty path yields the defaults.
inline RunConfig load_config(const std::string& path, const std::string& problem) {
  RunConfig rc;
  rc.problem = problem;
  if (path.empty()) return rc;
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse config file " + path + ": " + e.what());
  }
  Section top(root, "");
  std::string declared;
  top.read("problem", declared);
  if (!declared.empty() && declared != problem)
    throw ConfigError("config declares problem '" + declared + "' but the command runs '" + problem + "'");
  top.read("seed", rc.seed);
  std::string out;
  top.read("output", out);
  if (!out.empty()) rc.output = out;

  std::vector<std::string> sections;
  for (const char* name : {"bs", "hhw", "calibrate"})
    if (top.has(name)) sections.emplace_back(name);
  if (problem == "bench") {
    for (const auto& s : sections)
      if (s == "calibrate") throw ConfigError("bench config cannot contain a calibrate section");
  } else {
    if (sections.size() > 1) throw ConfigError("config must contain exactly one problem section");
    if (sections.size() == 1 && sections[0] != problem)
      throw ConfigError("config section '" + sections[0] + "' does not match command '" + problem + "'");
  }
  if (top.has("bs")) detail::read_bs(top.child("bs"), rc.bs);
  if (top.has("hhw")) detail::read_hhw(top.child("hhw"), rc.hhw);
  if (top.has("calibrate")) detail::read_calibrate(top.child("calibrate"), rc.calibrate);
  if (top.has("bench")) {
    Section b = top.child("bench");
    b.read("problems", rc.bench.problems);
    b.finish();
    for (const auto& p : rc.bench.problems)
      if (p != "bs" && p != "hhw") throw ConfigError("bench problems must be 'bs' or 'hhw', got '" + p + "'");
  }
  top.finish();
  return rc;
}

// ---------------------------------------------------------------------------
// Config echo

inline Json solver_json(const SolverConfig& s) {
  Json j;
  if (const auto* p = std::get_if<Pinv>(&s.method)) {
    j["method"] = "pinv";
    j["tol"] = p->tol;
  } else {
    j["method"] = "ridge";
    j["lambda"] = std::get<Ridge>(s.method).lambda;
  }
  j["fallback_lambda"] = s.fallback_lambda;
  j["fallback_condition"] = s.fallback_condition;
  return j;
}

inline Json weights_json(const BlockWeights& w) {
  return Json{{"pde", w.pde}, {"terminal", w.terminal}, {"boundary", w.boundary}};
}

inline Json to_json(const BsForwardConfig& c) {
  Json j{{"n_neurons", c.n_neurons},
         {"weight_scale", c.weight_scale},
         {"interior_counts", c.interior_counts},
         {"facet_points", c.facet_points},
         {"weights", weights_json(c.weights)}};
  j.update(solver_json(c.solver));
  return j;
}

inline Json to_json(const HhwForwardConfig& c) {
  Json j{{"n_neurons", c.n_neurons},
         {"weight_scale", c.weight_scale},
         {"axis_scales", c.axis_scales},
         {"interior_points", c.interior_points},
         {"terminal_counts", c.terminal_counts},
         {"s_facet_counts", c.s_facet_counts},
         {"v_facet_counts", c.v_facet_counts},
         {"weights", weights_json(c.weights)},
         {"saturation_weight", c.saturation_weight}};
  j.update(solver_json(c.solver));
  return j;
}

inline Json to_json(const BsParams& p) {
  return Json{{"strike", p.strike}, {"maturity", p.maturity}, {"rate", p.rate},
              {"volatility", p.volatility}, {"s_max", p.s_max}};
}

inline Json to_json(const HhwParams& p) {
  return Json{{"strike", p.strike},   {"maturity", p.maturity}, {"r0", p.r0},
              {"kappa_r", p.kappa_r}, {"theta_r", p.theta_r},   {"sigma_r", p.sigma_r},
              {"v0", p.v0},           {"kappa_v", p.kappa_v},   {"theta_v", p.theta_v},
              {"sigma_v", p.sigma_v}, {"rho_sv", p.rho_sv},     {"rho_sr", p.rho_sr},
              {"rho_vr", p.rho_vr},   {"s_max", p.s_max},       {"v_max", p.v_max},
              {"r_min", p.r_min},     {"r_max", p.r_max}};
}

inline Json to_json(const McConfig& m) {
  return Json{{"n_paths", m.n_paths}, {"n_steps", m.n_steps}, {"seed", m.seed}};
}

inline Json echo_bs(const RunConfig& rc) {
  Json j = to_json(rc.bs.params);
  j["eval_s"] = rc.bs.eval_s;
  j["eval_t"] = rc.bs.eval_t;
  j["solver"] = to_json(rc.bs.solver);
  return Json{{"problem", "bs"}, {"seed", rc.seed}, {"bs", j}};
}

inline Json echo_hhw(const RunConfig& rc) {
  const auto& h = rc.hhw;
  Json j = to_json(h.params);
  j["slices"] = h.slices;
  j["slice_s"] = h.slice_s;
  j["slice_t"] = h.slice_t;
  j["mc"] = to_json(h.mc);
  j["mc_states"] = h.mc_states;
  j["states_seed"] = h.states_seed;
  j["sweep_at"] = Json{{"t", h.sweep_at.t}, {"s", h.sweep_at.s}, {"v", h.sweep_at.v}, {"r", h.sweep_at.r}};
  j["sigma_sweep"] = h.sigma_sweep;
  j["rate_sweep"] = h.rate_sweep;
  j["profile_spots"] = h.profile_spots;
  j["degenerate"] = h.degenerate;
  j["degenerate_tol"] = h.degenerate_tol;
  j["solver"] = to_json(h.solver);
  return Json{{"problem", "hhw"}, {"seed", rc.seed}, {"hhw", j}};
}

inline Json echo_calibrate(const RunConfig& rc) {
  const auto& c = rc.calibrate;
  const auto& cfg = c.config;
  Json j{{"sigma_bounds", cfg.sigma_bounds},
         {"r_bounds", cfg.r_bounds},
         {"n_init", cfg.n_init},
         {"n_iter", cfg.n_iter},
         {"n_candidates", cfg.n_candidates},
         {"n_local", cfg.n_local},
         {"forward_seed", cfg.forward_seed},
         {"noise_std", c.noise_std},
         {"s_range", c.s_range},
         {"t_range", c.t_range},
         {"n_s", c.n_s},
         {"n_t", c.n_t},
         {"observations", c.observations},
         {"truth", Json{{"volatility", c.truth.volatility}, {"rate", c.truth.rate}}},
         {"contract", Json{{"strike", cfg.contract.strike},
                           {"maturity", cfg.contract.maturity},
                           {"s_max", cfg.contract.s_max}}},
         {"surrogate", Json{{"lengthscale_grid", cfg.surrogate.lengthscale_grid},
                            {"signal_variance_grid", cfg.surrogate.signal_variance_grid},
                            {"noise_variance", cfg.surrogate.noise_variance},
                            {"max_jitter", cfg.surrogate.max_jitter}}},
         {"forward", to_json(cfg.forward)}};
  return Json{{"problem", "calibrate"}, {"seed", rc.seed}, {"calibrate", j}};
}

// ---------------------------------------------------------------------------
// Output helpers

/// CSV writer with 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << values), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline Json metrics_json(const MetricsReport& m) {
  return Json{{"mse", m.mse},
              {"rel_l2", m.rel_l2},
              {"max_abs_error", m.max_abs_error},
              {"wall_time_seconds", m.wall_time_seconds},
              {"n_eval_points", m.n_eval_points}};
}

inline Json solve_report_json(const SolveReport& r) {
  return Json{{"method", to_string(r.method)},
              {"rank_estimate", r.rank_estimate},
              {"condition_estimate", r.condition_estimate},
              {"normal_residual", r.normal_residual},
              {"rhs_projection_norm", r.rhs_projection_norm},
              {"normal_equations_ok", satisfies_normal_equations(r)},
              {"fell_back", r.fell_back}};
}

inline std::string fixed_label(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

/// Reads (S, t, price) rows; a non-numeric first line is taken as a header.
inline std::vector<Observation> read_observations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("observations file not found: " + path.string());
  std::vector<Observation> obs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Observation o;
    if (!(fields >> o.s >> o.t >> o.price)) {
      if (line_no == 1) continue;
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected S,t,price");
    }
    obs.push_back(o);
  }
  if (obs.empty()) throw ConfigError("observations file has no rows: " + path.string());
  return obs;
}

// ---------------------------------------------------------------------------
// Commands

struct BsRun {
  MetricsReport metrics;
  SolveReport solve;
};

inline BsRun run_solve_bs(const RunConfig& rc, std::ostream& log) {
  const auto& b = rc.bs;
  b.params.validate();
  fs::create_directories(rc.output);
  const auto run = timed([&] { return solve_bs(b.params, b.solver, rc.seed); });
  const auto [s_grid, t_grid] = bs_eval_grid(b.params, b.eval_s, b.eval_t);
  const PricingSurface surface = eval_surface(run.result, s_grid, t_grid);
  const Matrix exact = closed_form_surface(b.params, s_grid, t_grid);

  CsvWriter csv(rc.output / "bs_surface.csv", {"S", "t", "V_pielm", "V_closed_form", "abs_error"});
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    for (Eigen::Index j = 0; j < s_grid.size(); ++j)
      csv.row(s_grid[j], t_grid[i], surface.values(i, j), exact(i, j),
              std::abs(surface.values(i, j) - exact(i, j)));

  BsRun out{surface_error(surface, b.params), run.result.report()};
  out.metrics.wall_time_seconds = run.seconds;
  out.metrics.config_echo = echo_bs(rc).dump();
  Json j = metrics_json(out.metrics);
  j["solve"] = solve_report_json(out.solve);
  j["config"] = echo_bs(rc);
  write_json(rc.output / "bs_metrics.json", j);
  log << std::setprecision(4) << "solve-bs: mse=" << out.metrics.mse << " rel_l2=" << out.metrics.rel_l2
      << " time=" << out.metrics.wall_time_seconds << "s\n";
  return out;
}

struct McComparison {
  HhwState state;
  double pielm = 0.0;
  McEstimate mc;
  double bound = 0.0;
  bool pass = false;
};

inline std::vector<McComparison> compare_with_mc(const PielmSolution& solution, const HhwSection& h,
                                                 std::size_t n_workers = 0) {
  std::vector<McComparison> rows;
  for (const auto& st : hhw_query_states(h.params, h.mc_states, h.states_seed)) {
    McComparison c;
    c.state = st;
    c.pielm = solution.value_at({st.t, st.s, st.v, st.r});
    c.mc = mc_price_hhw(h.params, st, h.mc, n_workers);
    c.bound = 3.0 * c.mc.std_error + 5e-3;
    c.pass = std::abs(c.pielm - c.mc.price) <= c.bound;
    rows.push_back(c);
  }
  return rows;
}

inline std::vector<double> profile_spots(const HhwSection& h) {
  if (!h.profile_spots.empty()) return h.profile_spots;
  std::vector<double> spots;
  for (int k = 8; k <= 40; ++k) spots.push_back(0.05 * k * h.params.strike);
  return spots;
}

/// True when the largest |difference| of the profile sits strictly inside it.
inline bool peaks_inside(const std::vector<DifferenceRow>& rows) {
  if (rows.size() < 3) return false;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (std::abs(rows[i].difference) > std::abs(rows[arg].difference)) arg = i;
  return arg != 0 && arg + 1 != rows.size();
}

struct HhwRun {
  double solve_seconds = 0.0;
  std::vector<McComparison> mc;
  std::vector<DegeneracyReport> degenerate;
  bool degenerate_pass = true;
  bool bell_pass = true;
};

inline HhwRun run_solve_hhw(const RunConfig& rc, bool degenerate_check, bool with_mc, std::ostream& log) {
  const auto& h = rc.hhw;
  h.params.validate();
  fs::create_directories(rc.output);
  HhwRun out;
  const auto run = timed([&] { return solve_hhw(h.params, h.solver, rc.seed); });
  const PielmSolution& sol = run.result;
  out.solve_seconds = run.seconds;

  const Vector s_grid = pielm::detail::linspace(0.0, h.params.s_max, h.slice_s);
  const Vector t_grid = pielm::detail::linspace(0.0, h.params.maturity, h.slice_t);
  for (const auto& [v, r] : h.slices) {
    const PricingSurface slice = hhw_slice(sol, v, r, s_grid, t_grid);
    CsvWriter csv(rc.output / ("hhw_slice_v" + fixed_label(v) + "_r" + fixed_label(r) + ".csv"),
                  {"S", "t", "v", "r", "V_pielm"});
    for (Eigen::Index i = 0; i < t_grid.size(); ++i)
      for (Eigen::Index j = 0; j < s_grid.size(); ++j) csv.row(s_grid[j], t_grid[i], v, r, slice.values(i, j));
  }

  auto write_curve = [&](const std::string& name, const std::vector<DifferenceRow>& rows) {
    CsvWriter csv(rc.output / name, {"sweep_value", "hhw_price", "bs_price", "difference"});
    for (const auto& row : rows) csv.row(row.sweep_value, row.hhw_price, row.bs_price, row.difference);
  };
  write_curve("hhw_diff_sigma.csv", hhw_minus_bs_curve(sol, h.params, SweepAxis::sigma, h.sigma_sweep, h.sweep_at));
  write_curve("hhw_diff_rate.csv", hhw_minus_bs_curve(sol, h.params, SweepAxis::rate, h.rate_sweep, h.sweep_at));

  // Difference across spot for each initial volatility of the sweep.
  Json bell = Json::array();
  {
    CsvWriter csv(rc.output / "hhw_diff_profiles.csv", {"sigma", "S", "hhw_price", "bs_price", "difference"});
    const auto spots = profile_spots(h);
    for (double sigma : h.sigma_sweep) {
      const auto rows = hhw_minus_bs_profile(sol, h.params, sigma, spots, h.sweep_at);
      for (const auto& row : rows) csv.row(sigma, row.sweep_value, row.hhw_price, row.bs_price, row.difference);
      const bool inside = peaks_inside(rows);
      out.bell_pass = out.bell_pass && inside;
      bell.push_back(Json{{"sigma", sigma}, {"peak_inside", inside}});
    }
  }

  Json report{{"solve_seconds", out.solve_seconds},
              {"solve", solve_report_json(sol.report())},
              {"bell_shape", Json{{"pass", out.bell_pass}, {"profiles", bell}}},
              {"config", echo_hhw(rc)}};
  if (with_mc) {
    out.mc = compare_with_mc(sol, h);
    Json states = Json::array();
    bool all = true;
    for (const auto& c : out.mc) {
      all = all && c.pass;
      states.push_back(Json{{"t", c.state.t},
                            {"S", c.state.s},
                            {"v", c.state.v},
                            {"r", c.state.r},
                            {"pielm", c.pielm},
                            {"mc_price", c.mc.price},
                            {"mc_std_error", c.mc.std_error},
                            {"abs_difference", std::abs(c.pielm - c.mc.price)},
                            {"bound", c.bound},
                            {"pass", c.pass}});
    }
    write_json(rc.output / "hhw_mc.json",
               Json{{"n_paths", h.mc.n_paths}, {"n_steps", h.mc.n_steps}, {"all_pass", all}, {"states", states}});
    report["mc_all_pass"] = all;
  }
  if (degenerate_check) {
    Json checks = Json::array();
    for (const auto& [tv, tr] : h.degenerate) {
      DegeneracyReport d = degeneracy_check(h.params, tv, tr, h.solver, rc.seed, h.slice_s, h.slice_t);
      const bool pass = d.error.rel_l2 <= h.degenerate_tol;
      out.degenerate_pass = out.degenerate_pass && pass;
      checks.push_back(Json{{"theta_v", tv}, {"theta_r", tr}, {"pass", pass}, {"metrics", metrics_json(d.error)}});
      log << std::setprecision(4) << "degenerate-check theta_v=" << tv << " theta_r=" << tr
          << ": rel_l2=" << d.error.rel_l2 << (pass ? " PASS" : " FAIL") << "\n";
      out.degenerate.push_back(std::move(d));
    }
    write_json(rc.output / "hhw_degenerate.json", Json{{"tolerance", h.degenerate_tol}, {"checks", checks}});
  }
  write_json(rc.output / "hhw_report.json", report);
  log << std::setprecision(4) << "solve-hhw: solve=" << out.solve_seconds << "s";
  if (with_mc) {
    std::size_t ok = 0;
    for (const auto& c : out.mc) ok += c.pass;
    log << " mc_agreement=" << ok << "/" << out.mc.size();
  }
  log << " bell_shape=" << (out.bell_pass ? "yes" : "no") << "\n";
  return out;
}

inline std::vector<Observation> calibration_observations(const RunConfig& rc) {
  const auto& c = rc.calibrate;
  if (!c.observations.empty()) return read_observations(c.observations);
  return synth_observations(c.truth, observation_sites(c.s_range, c.t_range, c.n_s, c.n_t), c.noise_std,
                            rc.seed);
}

inline CalibResult run_calibrate(const RunConfig& rc, std::ostream& log) {
  fs::create_directories(rc.output);
  CalibConfig cfg = rc.calibrate.config;
  cfg.seed = rc.seed;
  const auto obs = calibration_observations(rc);
  {
    CsvWriter csv(rc.output / "calib_observations.csv", {"S", "t", "price"});
    for (const auto& o : obs) csv.row(o.s, o.t, o.price);
  }
  const CalibResult res = calibrate(obs, cfg);
  {
    CsvWriter csv(rc.output / "calib_trajectory.csv",
                  {"iteration", "sigma_trial", "r_trial", "objective", "sigma_best", "r_best", "objective_best"});
    for (const auto& t : res.trajectory)
      csv.row(t.iteration, t.sigma, t.r, t.objective, t.best_sigma, t.best_r, t.best_objective);
  }
  write_json(rc.output / "calib_summary.json", Json{{"sigma_hat", res.sigma_hat},
                                                     {"r_hat", res.r_hat},
                                                     {"best_objective", res.best_objective},
                                                     {"n_evals", res.n_evals},
                                                     {"wall_time_seconds", res.wall_time_seconds},
                                                     {"posterior_log_std", res.posterior_log_std},
                                                     {"config", echo_calibrate(rc)}});
  log << std::setprecision(6) << "calibrate: sigma_hat=" << res.sigma_hat << " r_hat=" << res.r_hat
      << " best_objective=" << res.best_objective << " evals=" << res.n_evals << " time=" << res.wall_time_seconds
      << "s\n";
  return res;
}

struct BenchRow {
  std::string method;
  double mse = 0.0;
  double rel_l2 = 0.0;
  double runtime_s = 0.0;
};

/// Table-shaped benchmark. The BS row is scored against the closed form over
/// the evaluation grid, the HHW row against the Monte Carlo oracle at the
/// seeded query states; runtime is the forward solve alone.
inline std::vector<BenchRow> run_bench(const RunConfig& rc, std::ostream& log) {
  fs::create_directories(rc.output);
  std::vector<BenchRow> rows;
  Json echo = Json::object();
  for (const auto& problem : rc.bench.problems) {
    if (problem == "bs") {
      const auto& b = rc.bs;
      const auto run = timed([&] { return solve_bs(b.params, b.solver, rc.seed); });
      const auto [s_grid, t_grid] = bs_eval_grid(b.params, b.eval_s, b.eval_t);
      const MetricsReport m = surface_error(eval_surface(run.result, s_grid, t_grid), b.params);
      rows.push_back({"pielm-bs", m.mse, m.rel_l2, run.seconds});
      echo["bs"] = echo_bs(rc)["bs"];
    } else {
      const auto& h = rc.hhw;
      const auto run = timed([&] { return solve_hhw(h.params, h.solver, rc.seed); });
      const auto cmp = compare_with_mc(run.result, h);
      Vector pred(static_cast<Eigen::Index>(cmp.size())), ref(pred.size());
      for (std::size_t i = 0; i < cmp.size(); ++i) {
        pred[static_cast<Eigen::Index>(i)] = cmp[i].pielm;
        ref[static_cast<Eigen::Index>(i)] = cmp[i].mc.price;
      }
      rows.push_back({"pielm-hhw", mse(pred, ref), rel_l2(pred, ref), run.seconds});
      echo["hhw"] = echo_hhw(rc)["hhw"];
    }
  }
  Json table = Json::array();
  CsvWriter csv(rc.output / "bench.csv", {"method", "mse", "rel_l2", "runtime_s"});
  for (const auto& r : rows) {
    table.push_back(Json{{"method", r.method}, {"mse", r.mse}, {"rel_l2", r.rel_l2}, {"runtime_s", r.runtime_s}});
    csv.row(r.method, r.mse, r.rel_l2, r.runtime_s);
    log << std::setprecision(4) << "bench " << r.method << ": mse=" << r.mse << " rel_l2=" << r.rel_l2
        << " runtime=" << r.runtime_s << "s\n";
  }
  echo["seed"] = rc.seed;
  write_json(rc.output / "bench.json", Json{{"rows", table}, {"config", echo}});
  return rows;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, char** argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Physics-informed extreme learning machine option pricer"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "YAML or JSON config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed override");

  auto* bs = app.add_subcommand("solve-bs", "Black-Scholes forward solve against the closed form");
  auto* hhw = app.add_subcommand("solve-hhw", "Heston-Hull-White forward solve, slices, difference curves, MC check");
  bool degenerate = false;
  bool skip_mc = false;
  hhw->add_flag("--degenerate-check", degenerate, "also run the Black-Scholes reduction check");
  hhw->add_flag("--no-mc", skip_mc, "skip the Monte Carlo comparison");
  auto* cal = app.add_subcommand("calibrate", "recover (sigma, r) from option prices by Bayesian optimization");
  std::string observations;
  cal->add_option("--observations", observations, "CSV of S,t,price rows (default: synthesize)");
  auto* bench = app.add_subcommand("bench", "accuracy and runtime table");
  for (auto* sub : {bs, hhw, cal, bench}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, log, err);
  }

  try {
    const std::string problem = bs->parsed()    ? "bs"
                                : hhw->parsed() ? "hhw"
                                : cal->parsed() ? "calibrate"
                                                : "bench";
    RunConfig rc = load_config(config_path, problem);
    if (!out_dir.empty()) rc.output = out_dir;
    if (seed) rc.seed = *seed;
    if (!observations.empty()) rc.calibrate.observations = observations;

    if (problem == "bs") {
      run_solve_bs(rc, log);
    } else if (problem == "hhw") {
      const HhwRun r = run_solve_hhw(rc, degenerate, !skip_mc, log);
      if (degenerate && !r.degenerate_pass) return 2;
    } else if (problem == "calibrate") {
      run_calibrate(rc, log);
    } else {
      run_bench(rc, log);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace pielm::cli
