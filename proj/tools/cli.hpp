#pragma once

// Batch runner: INI config, one subcommand per experiment, summary.json + CSV
// artifacts + a plotting script in the output directory.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfgtorus/mfgtorus.hpp"

namespace mfgtorus::cli {

using nlohmann::json;

struct RunConfig {
  // [model]
  std::string family = "quadratic-drift";
  double shift = 0.0;
  std::string potential = "cosine";
  double momentum_cutoff = 10.0;
  double velocity_cutoff = 10.0;
  // [coupling]
  std::string coupling = "cosine4pi";
  // [grid]
  std::size_t n = 512;
  double dt = 1e-3;
  std::size_t save_every = 10;
  std::size_t particles_per_cell = 8;
  double max_reach = 64.0;  // upper bound on Vmax dt / h
  // [run]
  double t_probe = 50.0;
  double horizon = 3.0;
  std::vector<double> horizons{5.0, 10.0, 20.0, 40.0};
  double window = 0.5;
  std::size_t periods = 2;
  std::size_t pairs = 50;
  std::size_t random_modes = 3;
  std::string a_grid = "-2a0:2a0:9";
  std::string phi = "zero";
  double c = 0.0;
  int example_n = 1;
  std::size_t example_grid = 256;
  std::string candidate = "periodic";
  // [measures]
  std::string m_T = "one-plus-cosine";
  std::string m1 = "delta(0)";
  std::string m2 = "delta(0.3)";
  // [tolerances]
  double tol_critical = 1e-2;
  double tol_periodicity = 1e-4;
  double tol_nontriviality = 1e-3;
  double tol_nontrivial_trigger = 1e-2;
  double tol_lipschitz = 1e-9;
  double tol_convergence = 5e-3;
  double tol_monotone_slack = 0.1;
  double tol_example = 1e-10;
  double tol_example_grid = 1e-3;
  double tol_mass_drift = 1e-4;
  double tol_convexity = 1e-2;
  double tol_v_floor = 1e-3;

  std::uint64_t seed = 0;

  HamiltonianModel model() const {
    Cutoffs cut;
    cut.momentum = momentum_cutoff;
    cut.velocity = velocity_cutoff;
    if (family == "quadratic-drift") return HamiltonianModel::quadratic_drift(1, cut);
    if (family == "mechanical") return HamiltonianModel::mechanical(shift, Potential::parse(potential), cut);
    throw Error(ErrorCode::invalid_input, "model.family must be 'quadratic-drift' or 'mechanical' (got '" + family + "')");
  }

  CouplingFunctional coupling_functional() const { return CouplingFunctional::parse(coupling); }

  /// Throws invalid_input naming the first violated invariant.
  void validate() const {
    require(n >= 64 && n <= 4096 && (n & (n - 1)) == 0, "grid.n must be a power of two between 64 and 4096");
    require(velocity_cutoff > 0.0 && momentum_cutoff > 0.0, "model cutoffs must be positive");
    require(max_reach >= 1.0, "grid.max_reach must be at least 1");
    const double h = 1.0 / static_cast<double>(n);
    require(dt > 0.0 && dt * velocity_cutoff >= h * (1.0 - 1e-9),
            "grid.dt must be at least grid spacing / velocity cutoff (" + mfgtorus::detail::format_double(h / velocity_cutoff) + ")");
    require(dt * velocity_cutoff <= max_reach * h * (1.0 + 1e-9),
            "grid.dt must not exceed max_reach * grid spacing / velocity cutoff (" +
                mfgtorus::detail::format_double(max_reach * h / velocity_cutoff) + ")");
    require(save_every >= 1 && particles_per_cell >= 1 && periods >= 1 && pairs >= 1 && random_modes >= 1,
            "grid/run counts must be at least 1");
    for (double tol : {tol_critical, tol_periodicity, tol_nontriviality, tol_nontrivial_trigger, tol_lipschitz,
                       tol_convergence, tol_monotone_slack, tol_example, tol_example_grid, tol_mass_drift,
                       tol_convexity, tol_v_floor}) {
      require(tol > 0.0, "all tolerances must be positive");
    }
    auto multiple_of = [](double t, double step) {
      const double k = std::round(t / step);
      return k >= 1.0 && std::abs(k * step - t) <= 1e-9 * std::max(1.0, t);
    };
    require(t_probe >= 20.0 && multiple_of(t_probe, 2.0 * dt), "run.t_probe must be >= 20 and a multiple of 2 dt");
    const double slice = dt * static_cast<double>(save_every);
    require(multiple_of(horizon, slice), "run.horizon must be a positive multiple of dt * save_every");
    require(!horizons.empty(), "run.horizons must not be empty");
    for (double T : horizons) require(multiple_of(T, slice), "run.horizons must be positive multiples of dt * save_every");
    require(window > 0.0 && window <= *std::min_element(horizons.begin(), horizons.end()),
            "run.window must lie in (0, min horizon]");
    require(example_n >= 1 && example_grid >= 4, "run.example_n must be >= 1 and run.example_grid >= 4");
    require(phi == "zero" || phi == "cosine" || phi == "sine" || phi == "u0", "run.phi must be zero, cosine, sine or u0");
    (void)model();
    (void)coupling_functional();
    (void)make_measure(m_T, n);
    (void)make_measure(m1, n);
    (void)make_measure(m2, n);
    (void)parse_candidate(candidate);
  }

  json to_json() const {
    return {
        {"model",
         {{"family", family}, {"shift", shift}, {"potential", potential}, {"momentum_cutoff", momentum_cutoff},
          {"velocity_cutoff", velocity_cutoff}}},
        {"coupling", {{"f", coupling}}},
        {"grid",
         {{"n", n}, {"dt", dt}, {"save_every", save_every}, {"particles_per_cell", particles_per_cell},
          {"max_reach", max_reach}}},
        {"run",
         {{"t_probe", t_probe}, {"horizon", horizon}, {"horizons", horizons}, {"window", window},
          {"periods", periods}, {"pairs", pairs}, {"random_modes", random_modes}, {"a_grid", a_grid},
          {"phi", phi}, {"c", c}, {"example_n", example_n}, {"example_grid", example_grid},
          {"candidate", candidate}, {"seed", seed}, {"test_modes", TestFunctionBank{}.modes}}},
        {"measures", {{"m_T", m_T}, {"m1", m1}, {"m2", m2}}},
        {"tolerances",
         {{"critical", tol_critical}, {"periodicity", tol_periodicity}, {"nontriviality", tol_nontriviality},
          {"nontrivial_trigger", tol_nontrivial_trigger}, {"lipschitz", tol_lipschitz},
          {"convergence", tol_convergence}, {"monotone_slack", tol_monotone_slack}, {"example", tol_example},
          {"example_grid", tol_example_grid}, {"mass_drift", tol_mass_drift}, {"convexity", tol_convexity},
          {"v_floor", tol_v_floor}}},
    };
  }
};

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
  const std::string s = mfgtorus::detail::trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty() && std::isfinite(v), key + ": '" + text + "' is not a number");
  return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  require(v >= 0.0 && v == std::floor(v) && v < 1e15, key + ": '" + text + "' is not a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
  require(!out.empty(), key + ": empty list");
  return out;
}

}  // namespace detail

/// INI sections [model] [coupling] [grid] [run] [measures] [tolerances]; unknown keys are rejected.
inline RunConfig parse_config(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::invalid_input, std::string("config: ") + e.what());
  }
  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = detail::parse_number(k, v); }; };
  auto cnt = [](std::size_t& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = detail::parse_count(k, v); }; };
  auto str = [](std::string& dst) -> Setter { return [&dst](const std::string&, const std::string& v) { dst = mfgtorus::detail::trim(v); }; };
  const std::map<std::string, Setter> setters{
      {"model.family", str(c.family)},
      {"model.shift", num(c.shift)},
      {"model.potential", str(c.potential)},
      {"model.momentum_cutoff", num(c.momentum_cutoff)},
      {"model.velocity_cutoff", num(c.velocity_cutoff)},
      {"coupling.f", str(c.coupling)},
      {"grid.n", cnt(c.n)},
      {"grid.dt", num(c.dt)},
      {"grid.save_every", cnt(c.save_every)},
      {"grid.particles_per_cell", cnt(c.particles_per_cell)},
      {"grid.max_reach", num(c.max_reach)},
      {"run.t_probe", num(c.t_probe)},
      {"run.horizon", num(c.horizon)},
      {"run.horizons", [&c](const std::string& k, const std::string& v) { c.horizons = detail::parse_list(k, v); }},
      {"run.window", num(c.window)},
      {"run.periods", cnt(c.periods)},
      {"run.pairs", cnt(c.pairs)},
      {"run.random_modes", cnt(c.random_modes)},
      {"run.a_grid", str(c.a_grid)},
      {"run.phi", str(c.phi)},
      {"run.c", num(c.c)},
      {"run.example_n", [&c](const std::string& k, const std::string& v) { c.example_n = static_cast<int>(detail::parse_count(k, v)); }},
      {"run.example_grid", cnt(c.example_grid)},
      {"run.candidate", str(c.candidate)},
      {"run.seed", [&c](const std::string& k, const std::string& v) { c.seed = detail::parse_count(k, v); }},
      {"measures.m_T", str(c.m_T)},
      {"measures.m1", str(c.m1)},
      {"measures.m2", str(c.m2)},
      {"tolerances.critical", num(c.tol_critical)},
      {"tolerances.periodicity", num(c.tol_periodicity)},
      {"tolerances.nontriviality", num(c.tol_nontriviality)},
      {"tolerances.nontrivial_trigger", num(c.tol_nontrivial_trigger)},
      {"tolerances.lipschitz", num(c.tol_lipschitz)},
      {"tolerances.convergence", num(c.tol_convergence)},
      {"tolerances.monotone_slack", num(c.tol_monotone_slack)},
      {"tolerances.example", num(c.tol_example)},
      {"tolerances.example_grid", num(c.tol_example_grid)},
      {"tolerances.mass_drift", num(c.tol_mass_drift)},
      {"tolerances.convexity", num(c.tol_convexity)},
      {"tolerances.v_floor", num(c.tol_v_floor)},
  };
  for (const auto& [section, body] : tree) {
    require(!body.empty(), "config: key '" + section + "' lies outside any section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = setters.find(full);
      require(it != setters.end(), "config: unknown key '" + full + "'");
      it->second(full, value.data());
    }
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), "config: cannot open '" + path.string() + "'");
  return parse_config(is);
}

/// "lo:hi:count" or "a,b,c"; each value may carry an "a0" factor ("1.5a0", "-a0").
inline std::vector<double> parse_a_grid(const std::string& text, double a0) {
  auto value = [&](std::string s) {
    s = mfgtorus::detail::trim(s);
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "a0") == 0) {
      std::string factor = s.substr(0, s.size() - 2);
      if (factor.empty() || factor == "+") return a0;
      if (factor == "-") return -a0;
      return detail::parse_number("a-grid", factor) * a0;
    }
    return detail::parse_number("a-grid", s);
  };
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(text);
  if (text.find(':') != std::string::npos) {
    while (std::getline(ss, item, ':')) parts.push_back(item);
    require(parts.size() == 3, "a-grid: expected lo:hi:count");
    const double lo = value(parts[0]), hi = value(parts[1]);
    const std::size_t count = detail::parse_count("a-grid", parts[2]);
    require(count >= 2 && hi > lo, "a-grid: need count >= 2 and hi > lo");
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    return out;
  }
  std::vector<double> out;
  while (std::getline(ss, item, ',')) out.push_back(value(item));
  require(!out.empty(), "a-grid: empty");
  return out;
}

namespace detail {

inline const char* plot_script = R"PY(#!/usr/bin/env python3
"""Plots whichever CSV artifacts of a run are present next to this script."""
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = pathlib.Path(__file__).resolve().parent


def load(name):
    path = HERE / name
    if not path.exists():
        return None
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else None


def heat(data, value, name, title):
    ts = sorted(set(data["t"]))
    xs = sorted(set(data["x"]))
    grid = [[0.0] * len(xs) for _ in ts]
    ti = {t: i for i, t in enumerate(ts)}
    xi = {x: i for i, x in enumerate(xs)}
    for t, x, v in zip(data["t"], data["x"], data[value]):
        grid[ti[t]][xi[x]] = v
    fig, ax = plt.subplots()
    im = ax.imshow(grid, aspect="auto", origin="lower", extent=[xs[0], xs[-1], ts[0], ts[-1]])
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(title)
    fig.colorbar(im)
    fig.savefig(HERE / name, dpi=120)


def line(data, x, ys, name, logy=False):
    fig, ax = plt.subplots()
    for y in ys:
        ax.plot(data[x], data[y], marker="o", label=y)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.legend()
    fig.savefig(HERE / name, dpi=120)


for csv_name, value, title in [("u.csv", "u", "u(x,t)"), ("m.csv", "mass", "m(x,t)")]:
    data = load(csv_name)
    if data:
        heat(data, value, csv_name.replace(".csv", ".png"), title)
data = load("u0.csv")
if data:
    line(data, "x", ["u0", "v"], "u0.png")
data = load("alpha.csv")
if data:
    line(data, "a", ["alpha"], "alpha.png")
data = load("convergence.csv")
if data:
    line(data, "T", ["d1_deviation", "u_deviation"], "convergence.png", logy=True)
data = load("lipschitz.csv")
if data:
    fig, ax = plt.subplots()
    ax.scatter(data["d1"], data["dc"])
    ax.set_xlabel("d1")
    ax.set_ylabel("|dc|")
    fig.savefig(HERE / "lipschitz.png", dpi=120)
)PY";

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write '" + path.string() + "'");
  os << text;
}

template <class Writer>
void write_csv(const std::filesystem::path& path, Writer&& w) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write '" + path.string() + "'");
  w(os);
}

inline void write_field(std::ostream& os, const ValueField& f, const char* name) {
  os << "t,x," << name << '\n';
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    for (std::size_t i = 0; i < f.n; ++i) {
      os << mfgtorus::detail::format_double(f.times[k]) << ','
         << mfgtorus::detail::format_double(static_cast<double>(i) * f.spacing()) << ','
         << mfgtorus::detail::format_double(f.slices[k][i]) << '\n';
    }
  }
}

inline std::vector<double> initial_value(const RunConfig& cfg, const std::function<std::vector<double>()>& u0) {
  std::vector<double> phi(cfg.n, 0.0);
  if (cfg.phi == "u0") return u0();
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(cfg.n);
    if (cfg.phi == "cosine") phi[i] = std::cos(two_pi * x);
    if (cfg.phi == "sine") phi[i] = std::sin(two_pi * x);
  }
  return phi;
}

inline PeriodicRegime regime(const RunConfig& cfg) {
  RegimeOptions ro;
  ro.n = cfg.n;
  ro.t_probe = cfg.t_probe;
  ro.critical.dt = cfg.dt;
  ro.critical.tolerance = cfg.tol_critical;
  ro.drift.v_floor = cfg.tol_v_floor;
  return periodic_regime(cfg.model(), ro);
}

inline PeriodicOptions periodic_options(const RunConfig& cfg) {
  PeriodicOptions po;
  po.dt = cfg.dt;
  po.save_every = cfg.save_every;
  po.periods = cfg.periods;
  po.push.max_mass_drift = cfg.tol_mass_drift;
  return po;
}

inline FiniteHorizonOptions finite_options(const RunConfig& cfg) {
  FiniteHorizonOptions fo;
  fo.dt = cfg.dt;
  fo.save_every = cfg.save_every;
  fo.particles_per_cell = cfg.particles_per_cell;
  return fo;
}

}  // namespace detail

/// Runs one subcommand; fills `summary` and returns whether every tolerance check passed.
/// (exceptions propagate to run()).
class Runner {
 public:
  Runner(RunConfig cfg, std::filesystem::path out, std::ostream& log) : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {}

  bool critical_value_cmd(json& s) {
    const auto model = cfg_.model();
    CriticalValueOptions co{cfg_.dt, cfg_.tol_critical};
    const auto cv = critical_value(model, cfg_.n, cfg_.t_probe, co);
    const auto wk = weak_kam_solution(model, cfg_.n, cv.c0, cfg_.t_probe, co);
    const auto df = drift_field(wk.u0, model, {cfg_.tol_v_floor});
    s["c0"] = cv.c0;
    s["mather_class"] = to_string(df.classification());
    if (df.periodic()) s["tau"] = df.tau();
    std::size_t kinks = 0;
    for (bool k : wk.kink) kinks += k ? 1 : 0;
    s["details"] = {{"critical_diagnostic", cv.diagnostic}, {"t_probe", cv.t_probe},
                    {"weak_kam_residual", wk.residual}, {"semiconcavity", wk.semiconcavity}, {"kinks", kinks}};
    detail::write_csv(out_ / "u0.csv", [&](std::ostream& os) {
      os << "x,u0,v\n";
      for (std::size_t i = 0; i < cfg_.n; ++i) {
        os << mfgtorus::detail::format_double(static_cast<double>(i) / static_cast<double>(cfg_.n)) << ','
           << mfgtorus::detail::format_double(wk.u0[i]) << ',' << mfgtorus::detail::format_double(df.nodes()[i]) << '\n';
      }
    });
    log_ << "c0 = " << mfgtorus::detail::format_double(cv.c0) << " (" << to_string(df.classification()) << ")\n";
    return cv.diagnostic <= cfg_.tol_critical;
  }

  bool alpha_cmd(json& s) {
    const auto model = cfg_.model();
    require(model.family() == HamiltonianModel::Family::mechanical, "alpha needs model.family = mechanical");
    const double a0 = plateau_half_width(model.potential());
    const auto grid = parse_a_grid(cfg_.a_grid, a0);
    CriticalValueOptions co{cfg_.dt, cfg_.tol_critical};
    std::vector<double> alpha;
    json table = json::array();
    for (double a : grid) {
      alpha.push_back(alpha_function(model, a, cfg_.n, cfg_.t_probe, co));
      table.push_back({{"a", a}, {"alpha", alpha.back()}});
      log_ << "alpha(" << mfgtorus::detail::format_double(a) << ") = " << mfgtorus::detail::format_double(alpha.back()) << '\n';
    }
    // second differences on a possibly non-uniform grid
    double min_second = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
      const double l = (alpha[k] - alpha[k - 1]) / (grid[k] - grid[k - 1]);
      const double r = (alpha[k + 1] - alpha[k]) / (grid[k + 1] - grid[k]);
      min_second = std::min(min_second, (r - l) * 0.5 * (grid[k + 1] - grid[k - 1]));
    }
    s["details"] = {{"a0", a0}, {"alpha_table", table}};
    s["details"]["min_second_difference"] = std::isfinite(min_second) ? json(min_second) : json(nullptr);
    detail::write_csv(out_ / "alpha.csv", [&](std::ostream& os) {
      os << "a,alpha\n";
      for (std::size_t k = 0; k < grid.size(); ++k) {
        os << mfgtorus::detail::format_double(grid[k]) << ',' << mfgtorus::detail::format_double(alpha[k]) << '\n';
      }
    });
    return !std::isfinite(min_second) || min_second >= -cfg_.tol_convexity;
  }

  bool solve_cmd(json& s) {
    const auto model = cfg_.model();
    const auto F = cfg_.coupling_functional();
    const auto m_T = make_measure(cfg_.m_T, cfg_.n);
    const auto phi = detail::initial_value(cfg_, [&] {
      const auto cv = critical_value(model, cfg_.n, cfg_.t_probe, {cfg_.dt, cfg_.tol_critical});
      return weak_kam_solution(model, cfg_.n, cv.c0, cfg_.t_probe, {cfg_.dt, cfg_.tol_critical}).u0;
    });
    const auto sol = solve_finite_horizon(phi, m_T, cfg_.c, cfg_.horizon, model, F, detail::finite_options(cfg_));
    double max_speed = 0.0;
    for (std::size_t k = 1; k < sol.m_path.size(); ++k) {
      max_speed = std::max(max_speed, wasserstein1(sol.m_path[k], sol.m_path[k - 1]) / (sol.u.times[k] - sol.u.times[k - 1]));
    }
    s["details"] = {{"horizon", cfg_.horizon}, {"c", cfg_.c}, {"slices", sol.u.times.size()},
                    {"coupling_final", sol.coupling_values.back()}, {"coupling_initial", sol.coupling_values.front()},
                    {"max_d1_speed", max_speed}, {"metadata", sol.metadata}};
    detail::write_csv(out_ / "u.csv", [&](std::ostream& os) { detail::write_field(os, sol.u, "u"); });
    detail::write_csv(out_ / "m.csv", [&](std::ostream& os) { sol.write_m_csv(os); });
    return true;
  }

  bool periodic_cmd(json& s) {
    const auto reg = detail::regime(cfg_);
    const auto F = cfg_.coupling_functional();
    const auto m_T = make_measure(cfg_.m_T, cfg_.n);
    const auto ps = periodic_solution(reg, m_T, F, detail::periodic_options(cfg_));
    s["c0"] = ps.c0;
    s["tau"] = ps.tau;
    s["c_mT"] = ps.c_mT;
    s["periodicity_defect"] = ps.periodicity_defect;
    s["nontriviality_gap"] = ps.nontriviality_gap;
    s["mather_class"] = to_string(reg.drift.classification());
    s["details"] = {{"invariant_distance", ps.invariant_distance}, {"mass_drift", ps.mass_drift},
                    {"mean_coupling", ps.mean_coupling}, {"metadata", ps.solution.metadata}};
    detail::write_csv(out_ / "u.csv", [&](std::ostream& os) { detail::write_field(os, ps.solution.u, "u"); });
    detail::write_csv(out_ / "m.csv", [&](std::ostream& os) { ps.solution.write_m_csv(os); });
    detail::write_csv(out_ / "flow.csv", [&](std::ostream& os) { reg.flow.write_csv(os); });
    log_ << "c(m_T) = " << mfgtorus::detail::format_double(ps.c_mT) << ", tau = " << mfgtorus::detail::format_double(ps.tau) << '\n';
    bool pass = ps.periodicity_defect <= cfg_.tol_periodicity;
    if (ps.invariant_distance >= cfg_.tol_nontrivial_trigger) pass = pass && ps.nontriviality_gap >= cfg_.tol_nontriviality;
    return pass;
  }

  bool lipschitz_cmd(json& s) {
    const auto reg = detail::regime(cfg_);
    const auto F = cfg_.coupling_functional();
    std::mt19937_64 rng(cfg_.seed);
    std::vector<std::pair<CircleMeasure, CircleMeasure>> pairs;
    for (std::size_t k = 0; k < cfg_.pairs; ++k) {
      auto a = random_fourier_density(rng, cfg_.n, cfg_.random_modes);
      auto b = random_fourier_density(rng, cfg_.n, cfg_.random_modes);
      pairs.emplace_back(std::move(a), std::move(b));
    }
    const auto rep = lipschitz_c_experiment(reg, pairs, F, detail::periodic_options(cfg_), cfg_.tol_lipschitz);
    s["c0"] = reg.c0();
    s["tau"] = reg.tau();
    s["mather_class"] = to_string(reg.drift.classification());
    s["lipschitz_ratio_max"] = rep.max_ratio;
    s["details"] = {{"k1", rep.k1}, {"c_f", rep.c_f}, {"bound", rep.bound}, {"violations", rep.violations},
                    {"pairs", rep.entries.size()}, {"excluded", rep.excluded}};
    detail::write_csv(out_ / "lipschitz.csv", [&](std::ostream& os) {
      os << "d1,dc,ratio\n";
      for (const auto& e : rep.entries) {
        os << mfgtorus::detail::format_double(e.d1) << ',' << mfgtorus::detail::format_double(e.dc) << ','
           << mfgtorus::detail::format_double(e.ratio) << '\n';
      }
    });
    log_ << "max |dc|/d1 = " << mfgtorus::detail::format_double(rep.max_ratio) << " (bound " << mfgtorus::detail::format_double(rep.bound) << ")\n";
    return rep.violations == 0;
  }

  bool converge_cmd(json& s) {
    const auto reg = detail::regime(cfg_);
    const auto F = cfg_.coupling_functional();
    const auto m_T = make_measure(cfg_.m_T, cfg_.n);
    const auto phi = detail::initial_value(cfg_, [&] { return std::vector<double>(reg.u0().begin(), reg.u0().end()); });
    ConvergenceOptions co;
    co.finite = detail::finite_options(cfg_);
    co.periodic = detail::periodic_options(cfg_);
    const auto rep = long_time_convergence_experiment(reg, phi, m_T, F, cfg_.horizons, cfg_.window, co);
    json table = json::array();
    bool monotone = true;
    for (std::size_t k = 0; k < rep.rows.size(); ++k) {
      const auto& r = rep.rows[k];
      table.push_back({{"T", r.horizon}, {"d1_deviation", r.d1_deviation}, {"u_deviation", r.u_deviation}});
      if (k > 0) {
        const auto& p = rep.rows[k - 1];
        monotone = monotone && r.d1_deviation <= (1.0 + cfg_.tol_monotone_slack) * p.d1_deviation &&
                   r.u_deviation <= (1.0 + cfg_.tol_monotone_slack) * p.u_deviation;
      }
      log_ << "T = " << mfgtorus::detail::format_double(r.horizon) << ": d1 " << mfgtorus::detail::format_double(r.d1_deviation)
           << ", u " << mfgtorus::detail::format_double(r.u_deviation) << '\n';
    }
    s["c0"] = reg.c0();
    s["tau"] = reg.tau();
    s["c_mT"] = rep.c_mT;
    s["mather_class"] = to_string(reg.drift.classification());
    s["convergence_table"] = table;
    const bool final_ok = rep.rows.back().d1_deviation <= cfg_.tol_convergence;
    s["details"] = {{"window", rep.window}, {"kappa", rep.kappa}, {"monotone", monotone}, {"final_within_tolerance", final_ok}};
    detail::write_csv(out_ / "convergence.csv", [&](std::ostream& os) {
      os << "T,d1_deviation,u_deviation\n";
      for (const auto& r : rep.rows) {
        os << mfgtorus::detail::format_double(r.horizon) << ',' << mfgtorus::detail::format_double(r.d1_deviation) << ','
           << mfgtorus::detail::format_double(r.u_deviation) << '\n';
      }
    });
    return monotone && final_ok;
  }

  bool wasserstein_cmd(json& s) {
    const auto a = make_measure(cfg_.m1, cfg_.n);
    const auto b = make_measure(cfg_.m2, cfg_.n);
    const double d = wasserstein1(a, b);
    s["details"] = {{"m1", cfg_.m1}, {"m2", cfg_.m2}, {"d1", d}};
    detail::write_csv(out_ / "m1.csv", [&](std::ostream& os) { a.write_csv(os); });
    detail::write_csv(out_ / "m2.csv", [&](std::ostream& os) { b.write_csv(os); });
    log_ << "d1 = " << mfgtorus::detail::format_double(d) << '\n';
    return true;
  }

  bool verify_example_cmd(json& s) {
    ExampleInstance e;
    e.n = cfg_.example_n;
    e.grid = cfg_.example_grid;
    e.time_steps = cfg_.example_grid;
    e.candidate = parse_candidate(cfg_.candidate);
    const double hjb = hjb_residual(e), cont = continuity_residual_example(e);
    const double hjb_g = hjb_residual(e, ResidualMode::finite_difference);
    const double cont_g = continuity_residual_example(e, ResidualMode::finite_difference);
    s["details"] = {{"n", e.n}, {"candidate", to_string(e.candidate)}, {"grid", e.grid},
                    {"hjb_residual", hjb}, {"continuity_residual", cont},
                    {"hjb_residual_grid", hjb_g}, {"continuity_residual_grid", cont_g}};
    log_ << "hjb residual        " << mfgtorus::detail::format_double(hjb) << " (grid " << mfgtorus::detail::format_double(hjb_g) << ")\n";
    log_ << "continuity residual " << mfgtorus::detail::format_double(cont) << " (grid " << mfgtorus::detail::format_double(cont_g) << ")\n";
    detail::write_csv(out_ / "example.csv", [&](std::ostream& os) {
      os << "mode,hjb,continuity\n";
      os << "closed-form," << mfgtorus::detail::format_double(hjb) << ',' << mfgtorus::detail::format_double(cont) << '\n';
      os << "grid," << mfgtorus::detail::format_double(hjb_g) << ',' << mfgtorus::detail::format_double(cont_g) << '\n';
    });
    if (e.n != 1) return true;
    const bool pass = hjb <= cfg_.tol_example && cont <= cfg_.tol_example && hjb_g <= cfg_.tol_example_grid &&
                      cont_g <= cfg_.tol_example_grid;
    log_ << (pass ? "PASS" : "FAIL") << '\n';
    return pass;
  }

 private:
  RunConfig cfg_;
  std::filesystem::path out_;
  std::ostream& log_;
};

/// Exit codes: 0 success, 1 numerical-tolerance failure, 2 invalid input.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Numerical lab for first-order mean field games on the circle"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for random measure pairs");

  std::optional<std::string> a_grid;
  std::optional<int> example_n;
  const std::map<std::string, std::string> help{
      {"critical-value", "critical value c0, weak KAM solution and Mather classification"},
      {"alpha", "alpha function on a grid of a"},
      {"solve", "finite-horizon solution (u, m)"},
      {"periodic", "time-periodic solution and c(m_T)"},
      {"lipschitz-c", "Lipschitz ratio of m_T -> c(m_T) on random pairs"},
      {"converge", "long-time convergence to the periodic solution"},
      {"wasserstein", "circular W1 between measures.m1 and measures.m2"},
      {"verify-example", "closed-form and grid residuals of the explicit example"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, text] : help) subs[name] = app.add_subcommand(name, text);
  subs["alpha"]->add_option("--a-grid", a_grid, "lo:hi:count or a comma list; values may end in a0");
  subs["verify-example"]->add_option("--n", example_n, "dimension of the torus");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::Success&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "invalid arguments: " << e.what() << '\n';
    return 2;
  }
  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }

  RunConfig cfg;
  const std::filesystem::path out_path(out_dir);
  json summary = {{"subcommand", name},
                  {"c0", nullptr},
                  {"tau", nullptr},
                  {"c_mT", nullptr},
                  {"periodicity_defect", nullptr},
                  {"nontriviality_gap", nullptr},
                  {"lipschitz_ratio_max", nullptr},
                  {"convergence_table", nullptr},
                  {"mather_class", nullptr},
                  {"details", nullptr},
                  {"error", nullptr}};
  auto finish = [&](const char* status, int code) {
    summary["status"] = status;
    try {
      std::filesystem::create_directories(out_path);
      detail::write_text(out_path / "summary.json", summary.dump(2) + "\n");
      detail::write_text(out_path / "plot.py", detail::plot_script);
    } catch (const std::exception& e) {
      err << "cannot write artifacts: " << e.what() << '\n';
      return 2;
    }
    return code;
  };

  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (a_grid) cfg.a_grid = *a_grid;
    if (example_n) cfg.example_n = *example_n;
    cfg.validate();
  } catch (const Error& e) {
    err << "invalid config: " << e.what() << '\n';
    summary["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
    return finish("invalid-input", 2);
  }
  summary["config"] = cfg.to_json();

  try {
    std::filesystem::create_directories(out_path);
    Runner r(cfg, out_path, out);
    const std::map<std::string, bool (Runner::*)(json&)> table{
        {"critical-value", &Runner::critical_value_cmd}, {"alpha", &Runner::alpha_cmd},
        {"solve", &Runner::solve_cmd},                   {"periodic", &Runner::periodic_cmd},
        {"lipschitz-c", &Runner::lipschitz_cmd},         {"converge", &Runner::converge_cmd},
        {"wasserstein", &Runner::wasserstein_cmd},       {"verify-example", &Runner::verify_example_cmd},
    };
    const bool pass = (r.*table.at(name))(summary);
    return finish(pass ? "pass" : "tolerance-failure", pass ? 0 : 1);
  } catch (const Error& e) {
    summary["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
    const bool input = e.code() == ErrorCode::invalid_input || e.code() == ErrorCode::cutoff_too_small ||
                       e.code() == ErrorCode::not_periodic_regime;
    err << (input ? "invalid input: " : "numerical failure: ") << e.what() << '\n';
    return finish(input ? "invalid-input" : "numerical-failure", input ? 2 : 1);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "output error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace mfgtorus::cli
