#pragma once

// Experiment runners behind the command-line tool: configuration (JSON file
// plus overrides), the five commands, deterministic CSV tables and SVG charts.
//
// Trial seeds: seed = master_seed * 1e6 + grid_index * 1e3 + trial_index.
// Work items run on a thread pool and land in pre-sized slots, so output
// never depends on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mkteq/closed_form.hpp"
#include "mkteq/dynamics.hpp"
#include "mkteq/errors.hpp"
#include "mkteq/exact_games.hpp"
#include "mkteq/repr_io.hpp"
#include "mkteq/svg.hpp"
#include "mkteq/synth.hpp"

namespace mkteq {

enum class Mode { kTheory, kExact, kDynamics, kBayesRisk, kGenData };

inline const char* mode_name(Mode mode) noexcept {
  switch (mode) {
    case Mode::kTheory: return "theory";
    case Mode::kExact: return "exact";
    case Mode::kDynamics: return "dynamics";
    case Mode::kBayesRisk: return "bayes-risk";
    case Mode::kGenData: return "gen-data";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kTheory, Mode::kExact, Mode::kDynamics, Mode::kBayesRisk, Mode::kGenData}) {
    if (s == mode_name(m)) return m;
  }
  throw ConfigError("unknown mode '" + s + "'");
}

struct ExperimentConfig {
  Mode mode = Mode::kTheory;

  // Data source: a swept synthetic setting, or repr files (one grid point each).
  std::optional<Axis> axis;
  std::vector<double> grid;
  std::vector<std::string> repr_files;
  int setting = 1;  // gen-data only
  double alpha = 0.2;
  Setting2 setting2{};
  Setting3 setting3{};
  std::size_t n_points = kDefaultPopulationSize;
  std::size_t n_samples = 100000;
  std::size_t embed_dim = 0;

  // Market.
  std::size_t m = 3;
  double c = 0.3;
  std::optional<double> w_min;

  // Dynamics (m, c and seed are filled in per run).
  DynamicsConfig dynamics{};
  std::size_t bayes_iterations = 10000;
  double bayes_lr = 1.0;

  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: MKTEQ_THREADS, else hardware concurrency

  std::string out_csv;
  std::string out_svg;
  std::string out;
};

// ---------------------------------------------------------------------------
// Grids

// "a,b,c" or "start:stop:step" (inclusive). Range values are rounded to 12
// significant digits so 0.1:0.5:0.1 yields exactly 0.3, not 0.30000000000000004.
inline std::vector<double> parse_grid(const std::string& text) {
  auto number = [&](std::string_view s) {
    const auto v = detail::parse_double(detail::trim(s));
    if (!v || !std::isfinite(*v)) throw ConfigError("bad grid value '" + std::string(s) + "'");
    return *v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string_view> parts;
    std::string_view rest = text;
    for (std::size_t pos; (pos = rest.find(':')) != std::string_view::npos;) {
      parts.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() != 3) throw ConfigError("range grid must be start:stop:step");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || stop < start) throw ConfigError("range grid needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    if (n > 1000000) throw ConfigError("range grid too large");
    for (std::size_t k = 0; k <= n; ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", start + static_cast<double>(k) * step);
      out.push_back(std::strtod(buf, nullptr));
    }
  } else {
    for (const auto field : detail::split_fields(text)) {
      if (!field.empty()) out.push_back(number(field));
    }
  }
  if (out.empty()) throw ConfigError("grid must be nonempty");
  return out;
}

inline std::vector<double> default_grid(Axis axis) {
  switch (axis) {
    case Axis::kAlpha: return parse_grid("0.01:0.49:0.02");
    case Axis::kNoise: return parse_grid("0.3:2.4:0.3");
    case Axis::kDimension: return {0, 1, 2, 3, 4};
  }
  return {};
}

// ---------------------------------------------------------------------------
// JSON configuration. Keys match the long flag names with '-' -> '_'.

namespace detail {

template <typename T>
T json_get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline std::vector<double> json_grid(const nlohmann::json& j, const std::string& key) {
  if (j.is_string()) return parse_grid(j.get<std::string>());
  auto v = json_get<std::vector<double>>(j, key);
  if (v.empty()) throw ConfigError("config key '" + key + "' must be a nonempty grid");
  return v;
}

inline void set_axis(ExperimentConfig& cfg, Axis axis, std::vector<double> grid) {
  if (cfg.axis && *cfg.axis != axis) {
    throw ConfigError("only one of alpha_grid, sigma_grid, dim_grid may be set");
  }
  cfg.axis = axis;
  cfg.grid = std::move(grid);
}

}  // namespace detail

inline LearningRate parse_learning_rate(const std::string& s) {
  if (s == "schedule") return LearningRate::schedule();
  const auto v = detail::parse_double(s);
  if (!v || !(*v > 0.0)) throw ConfigError("learning rate must be a positive number or 'schedule'");
  return LearningRate::fixed(*v);
}

inline void apply_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  using detail::json_get;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "mode") {
      cfg.mode = parse_mode(json_get<std::string>(v, key));
    } else if (key == "alpha_grid") {
      detail::set_axis(cfg, Axis::kAlpha, detail::json_grid(v, key));
    } else if (key == "sigma_grid") {
      detail::set_axis(cfg, Axis::kNoise, detail::json_grid(v, key));
    } else if (key == "dim_grid") {
      detail::set_axis(cfg, Axis::kDimension, detail::json_grid(v, key));
    } else if (key == "repr_file") {
      cfg.repr_files = v.is_string() ? std::vector<std::string>{v.get<std::string>()}
                                     : json_get<std::vector<std::string>>(v, key);
    } else if (key == "setting") {
      cfg.setting = json_get<int>(v, key);
    } else if (key == "alpha") {
      cfg.alpha = json_get<double>(v, key);
    } else if (key == "mu") {
      cfg.setting2.mu = json_get<double>(v, key);
    } else if (key == "sigma") {
      cfg.setting2.sigma = cfg.setting3.sigma = json_get<double>(v, key);
    } else if (key == "prior_y1") {
      cfg.setting2.prior_y1 = json_get<double>(v, key);
    } else if (key == "dim") {
      cfg.setting3.dim = json_get<std::size_t>(v, key);
    } else if (key == "n_points") {
      cfg.n_points = json_get<std::size_t>(v, key);
    } else if (key == "n_samples") {
      cfg.n_samples = json_get<std::size_t>(v, key);
    } else if (key == "embed_dim") {
      cfg.embed_dim = json_get<std::size_t>(v, key);
    } else if (key == "m") {
      cfg.m = json_get<std::size_t>(v, key);
    } else if (key == "c") {
      cfg.c = json_get<double>(v, key);
    } else if (key == "w_min") {
      if (v.is_null()) {
        cfg.w_min.reset();
      } else {
        cfg.w_min = json_get<double>(v, key);
      }
    } else if (key == "init_sigma") {
      cfg.dynamics.init_sigma = json_get<double>(v, key);
    } else if (key == "reinit_threshold") {
      cfg.dynamics.reinit_threshold = json_get<double>(v, key);
    } else if (key == "iterations") {
      cfg.dynamics.inner_iterations = json_get<std::size_t>(v, key);
    } else if (key == "lr") {
      cfg.dynamics.learning_rate = v.is_string() ? parse_learning_rate(v.get<std::string>())
                                                 : parse_learning_rate(std::to_string(json_get<double>(v, key)));
    } else if (key == "epsilon") {
      cfg.dynamics.stop_epsilon = json_get<double>(v, key);
    } else if (key == "tau") {
      cfg.dynamics.tau = json_get<double>(v, key);
    } else if (key == "max_stages") {
      cfg.dynamics.max_stages = json_get<std::size_t>(v, key);
    } else if (key == "bayes_iterations") {
      cfg.bayes_iterations = json_get<std::size_t>(v, key);
    } else if (key == "bayes_lr") {
      cfg.bayes_lr = json_get<double>(v, key);
    } else if (key == "trials") {
      cfg.trials = json_get<std::size_t>(v, key);
    } else if (key == "seed") {
      cfg.seed = json_get<std::uint64_t>(v, key);
    } else if (key == "threads") {
      cfg.threads = json_get<std::size_t>(v, key);
    } else if (key == "out_csv") {
      cfg.out_csv = json_get<std::string>(v, key);
    } else if (key == "out_svg") {
      cfg.out_svg = json_get<std::string>(v, key);
    } else if (key == "out") {
      cfg.out = json_get<std::string>(v, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

inline ExperimentConfig load_config_file(const std::string& path, ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  apply_json(cfg, j);
  return cfg;
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MKTEQ_THREADS")) {
    const auto v = detail::parse_double(env);
    if (!v || *v < 1 || *v != std::floor(*v)) throw ConfigError("MKTEQ_THREADS must be a positive integer");
    return static_cast<std::size_t>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void validate(const ExperimentConfig& cfg, Mode mode) {
  if (!cfg.axis && !cfg.grid.empty()) throw ConfigError("grid without axis");
  if (cfg.axis && cfg.grid.empty()) throw ConfigError("grid must be nonempty");
  if (cfg.trials < 1) throw ConfigError("trials must be at least 1");
  if (cfg.m < 2) throw ConfigError("m must be at least 2");
  if (!(cfg.c >= 0.0)) throw ConfigError("c must be nonnegative");
  if (cfg.w_min && !(*cfg.w_min > 0.0 && *cfg.w_min <= 0.5)) throw ConfigError("w_min must lie in (0, 0.5]");
  if (cfg.n_points < 1) throw ConfigError("n_points must be at least 1");
  if (cfg.n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (!cfg.repr_files.empty() && cfg.axis) {
    throw ConfigError("choose either a synthetic grid or repr files, not both");
  }
  if (cfg.seed > (std::numeric_limits<std::uint64_t>::max() - 999999999) / 1000000) {
    throw ConfigError("seed too large");
  }
  if (!(cfg.bayes_lr > 0.0)) throw ConfigError("bayes_lr must be positive");
  if (!cfg.out_svg.empty() && mode != Mode::kTheory && mode != Mode::kDynamics) {
    throw ConfigError(std::string("out_svg is not supported by ") + mode_name(mode));
  }
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t grid_index, std::size_t trial) {
  return master * 1000000ULL + static_cast<std::uint64_t>(grid_index) * 1000ULL + trial;
}

// ---------------------------------------------------------------------------
// Tables

// 12 significant digits; NaN prints as an empty field, -0 as 0.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  if (v == 0.0) v = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    auto field = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    };
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + field(r[k]);
      out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

struct Output {
  Table table;
  std::optional<Chart> chart;
};

// Runs fn(k) for k in [0, n) on `threads` workers. The first exception (by k)
// is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t t = std::max<std::size_t>(1, std::min(threads, n));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

inline Regime regime_of(const ExperimentConfig& cfg) {
  if (cfg.w_min) return TwoProviders{*cfg.w_min};
  return EqualReputations{cfg.m};
}

inline std::string regime_name(const Regime& r) {
  return std::holds_alternative<TwoProviders>(r) ? "two_providers" : "equal_reputations";
}

inline std::size_t regime_m(const Regime& r) {
  if (const auto* eq = std::get_if<EqualReputations>(&r)) return eq->m;
  return 2;
}

inline double regime_w_min(const Regime& r) {
  if (const auto* tp = std::get_if<TwoProviders>(&r)) return tp->w_min;
  return 1.0 / static_cast<double>(std::get<EqualReputations>(r).m);
}

inline std::pair<double, double> mean_and_2se(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {mean, 2.0 * sd / std::sqrt(static_cast<double>(v.size()))};
}

inline CurveBase curve_base(const ExperimentConfig& cfg) { return {cfg.setting2, cfg.setting3}; }

inline std::string axis_label(Axis axis) {
  switch (axis) {
    case Axis::kAlpha: return "alpha (Setting 1)";
    case Axis::kNoise: return "sigma (Setting 2)";
    case Axis::kDimension: return "representation dimension D (Setting 3)";
  }
  return "";
}

inline std::string source_name(Axis axis) {
  switch (axis) {
    case Axis::kAlpha: return "setting1";
    case Axis::kNoise: return "setting2";
    case Axis::kDimension: return "setting3";
  }
  return "";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

// Columns: axis, value, bayes_risk, bayes_risk_se, social_loss,
// social_loss_se, regime, m, w_min, degenerate.
inline Output cmd_theory(const ExperimentConfig& cfg) {
  validate(cfg, Mode::kTheory);
  if (!cfg.repr_files.empty()) throw ConfigError("theory needs a synthetic grid, not repr files");
  const Axis axis = cfg.axis.value_or(Axis::kAlpha);
  const auto grid = cfg.axis ? cfg.grid : default_grid(axis);
  const Regime regime = detail::regime_of(cfg);
  const auto base = detail::curve_base(cfg);

  std::vector<CurvePoint> points(grid.size());
  parallel_for(grid.size(), resolve_threads(cfg.threads), [&](std::size_t k) {
    // Same per-point seed as theory_curve: master seed + grid index.
    points[k] = theory_curve(axis, std::span<const double>(&grid[k], 1), regime,
                             axis == Axis::kAlpha ? 1 : cfg.n_samples, cfg.seed + k, base)[0];
  });

  Output out;
  out.table.header = {"axis", "value", "bayes_risk", "bayes_risk_se", "social_loss",
                      "social_loss_se", "regime", "m", "w_min", "degenerate"};
  Series br{"Bayes risk", "#1f77b4", {}, {}, {}};
  Series sl{"equilibrium social loss", "#d62728", {}, {}, {}};
  for (const auto& p : points) {
    out.table.rows.push_back({axis_name(axis), fmt(p.value), fmt(p.bayes_risk), fmt(p.bayes_risk_se),
                              fmt(p.social_loss), fmt(p.social_loss_se), detail::regime_name(regime),
                              std::to_string(detail::regime_m(regime)), fmt(detail::regime_w_min(regime)),
                              p.error ? "1" : "0"});
    br.x.push_back(p.value);
    br.y.push_back(p.bayes_risk);
    sl.x.push_back(p.value);
    sl.y.push_back(p.social_loss);
  }
  out.chart = Chart{"Equilibrium social loss vs representation quality", detail::axis_label(axis), "loss",
                    {br, sl}};
  return out;
}

// Columns: alpha, regime, m, w_min, n_pure_equilibria, bayes_counts (number of
// providers on the Bayes label in each pure equilibrium, ';'-separated), p1,
// p2 (two providers only), social_loss, degenerate.
inline Output cmd_exact(const ExperimentConfig& cfg) {
  validate(cfg, Mode::kExact);
  if (!cfg.repr_files.empty()) throw ConfigError("exact needs an alpha grid, not repr files");
  if (cfg.axis && *cfg.axis != Axis::kAlpha) throw ConfigError("exact sweeps alpha only");
  const auto grid = cfg.axis ? cfg.grid : default_grid(Axis::kAlpha);
  const Regime regime = detail::regime_of(cfg);
  const std::size_t m = detail::regime_m(regime);
  if (m > kMaxEnumerationProviders) {
    throw CapacityError("exact supports at most " + std::to_string(kMaxEnumerationProviders) + " providers");
  }
  for (double a : grid) {
    if (!(a >= 0.0 && a <= 0.5)) throw ConfigError("alpha grid values must lie in [0, 0.5]");
  }

  Output out;
  out.table.header = {"alpha", "regime", "m", "w_min", "n_pure_equilibria", "bayes_counts",
                      "p1", "p2", "social_loss", "degenerate"};
  out.table.rows.resize(grid.size());
  parallel_for(grid.size(), resolve_threads(cfg.threads), [&](std::size_t k) {
    const double alpha = grid[k];
    const PerRepGame game = std::holds_alternative<TwoProviders>(regime)
                                ? PerRepGame::two_providers(alpha, std::get<TwoProviders>(regime).w_min)
                                : PerRepGame::equal(alpha, m);
    const auto eqs = enumerate_pure_equilibria(game);
    std::string counts;
    for (const auto& p : eqs) counts += (counts.empty() ? "" : ";") + std::to_string(p.count(game.bayes_label));
    double p1 = std::numeric_limits<double>::quiet_NaN(), p2 = p1, sl = p1;
    bool degenerate = false;
    if (m == 2) {
      try {
        const auto mixed = solve_mixed_2p(game);
        p1 = mixed.p1;
        p2 = mixed.p2;
        sl = expected_social_loss_2p(game, mixed);
      } catch (const DegenerateInstanceError&) {
        degenerate = true;
      }
    } else if (std::abs(alpha - 1.0 / static_cast<double>(m)) <= kDegeneracyTolerance) {
      degenerate = true;
    } else if (!eqs.empty()) {
      sl = per_rep_social_loss(game, eqs.front());
    }
    out.table.rows[k] = {fmt(alpha), detail::regime_name(regime), std::to_string(m),
                         fmt(detail::regime_w_min(regime)), std::to_string(eqs.size()), counts,
                         fmt(p1), fmt(p2), fmt(sl), degenerate ? "1" : "0"};
  });
  return out;
}

namespace detail {

struct Source {
  std::string name;
  double value = 0.0;
  std::optional<SettingSpec> setting;  // empty for repr files
  std::shared_ptr<const Population> population;
};

inline Population load_population(const std::string& path) {
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  return csv ? read_csv_repr(path) : read_repr(path);
}

inline std::vector<Source> sources(const ExperimentConfig& cfg, Axis fallback) {
  std::vector<Source> out;
  if (!cfg.repr_files.empty()) {
    for (std::size_t k = 0; k < cfg.repr_files.size(); ++k) {
      out.push_back({cfg.repr_files[k], static_cast<double>(k), std::nullopt,
                     std::make_shared<const Population>(load_population(cfg.repr_files[k]))});
    }
    return out;
  }
  const Axis axis = cfg.axis.value_or(fallback);
  const auto grid = cfg.axis ? cfg.grid : default_grid(axis);
  for (double v : grid) {
    const SettingSpec s = setting_for(axis, v, curve_base(cfg));
    validate(s);
    out.push_back({source_name(axis), v, s, nullptr});
  }
  return out;
}

}  // namespace detail

// One row per (grid point, trial) with row_type "trial", then one "summary"
// row per grid point with means and two standard errors. Columns: row_type,
// grid_index, source, value, trial, seed, social_loss, bayes_risk, converged,
// stages, n_trials, n_converged, social_loss_2se, bayes_risk_2se.
// bayes_risk is the fitted single-provider risk (blank if bayes_iterations = 0).
inline Output cmd_dynamics(const ExperimentConfig& cfg) {
  validate(cfg, Mode::kDynamics);
  DynamicsConfig dyn = cfg.dynamics;
  dyn.m = cfg.m;
  dyn.choice_noise = cfg.c;
  if (cfg.w_min) {
    if (cfg.m != 2) throw ConfigError("w_min requires m = 2");
    dyn.reputations = {1.0 - *cfg.w_min, *cfg.w_min};
  }
  try {
    dyn.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto srcs = detail::sources(cfg, Axis::kAlpha);

  struct TrialResult {
    double social_loss = 0.0;
    double bayes_risk = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    std::size_t stages = 0;
  };
  const std::size_t n_jobs = srcs.size() * cfg.trials;
  std::vector<TrialResult> results(n_jobs);
  parallel_for(n_jobs, resolve_threads(cfg.threads), [&](std::size_t job) {
    const std::size_t g = job / cfg.trials, t = job % cfg.trials;
    const auto seed = trial_seed(cfg.seed, g, t);
    const Population pop = srcs[g].population ? *srcs[g].population
                                              : generate(*srcs[g].setting, cfg.n_points, seed);
    DynamicsConfig run = dyn;
    run.seed = seed;
    const auto eq = run_dynamics(pop, run);
    auto& r = results[job];
    r.social_loss = eq.social_loss;
    r.converged = eq.converged();
    r.stages = eq.trace.stages_run;
    if (cfg.bayes_iterations > 0) {
      r.bayes_risk = fit_bayes_optimal(pop, cfg.bayes_iterations, cfg.bayes_lr, seed, dyn.tau,
                                       dyn.init_sigma).risk;
    }
  });

  Output out;
  out.table.header = {"row_type", "grid_index", "source", "value", "trial", "seed", "social_loss",
                      "bayes_risk", "converged", "stages", "n_trials", "n_converged",
                      "social_loss_2se", "bayes_risk_2se"};
  std::vector<std::vector<std::string>> summaries;
  Series br{"Bayes risk (fitted)", "#1f77b4", {}, {}, {}};
  Series sl{"equilibrium social loss", "#d62728", {}, {}, {}};
  for (std::size_t g = 0; g < srcs.size(); ++g) {
    std::vector<double> sls, brs;
    std::size_t n_conv = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const auto& r = results[g * cfg.trials + t];
      out.table.rows.push_back({"trial", std::to_string(g), srcs[g].name, fmt(srcs[g].value),
                                std::to_string(t), std::to_string(trial_seed(cfg.seed, g, t)),
                                fmt(r.social_loss), fmt(r.bayes_risk), r.converged ? "1" : "0",
                                std::to_string(r.stages), "", "", "", ""});
      sls.push_back(r.social_loss);
      brs.push_back(r.bayes_risk);
      n_conv += r.converged;
    }
    const auto [sl_mean, sl_2se] = detail::mean_and_2se(sls);
    const auto [br_mean, br_2se] = detail::mean_and_2se(brs);
    summaries.push_back({"summary", std::to_string(g), srcs[g].name, fmt(srcs[g].value), "", "",
                         fmt(sl_mean), fmt(br_mean), "", "", std::to_string(cfg.trials),
                         std::to_string(n_conv), fmt(sl_2se), fmt(br_2se)});
    sl.x.push_back(srcs[g].value);
    sl.y.push_back(sl_mean);
    sl.err.push_back(sl_2se);
    br.x.push_back(srcs[g].value);
    br.y.push_back(br_mean);
    br.err.push_back(br_2se);
  }
  for (auto& s : summaries) out.table.rows.push_back(std::move(s));
  const std::string x_label = cfg.repr_files.empty()
                                  ? detail::axis_label(cfg.axis.value_or(Axis::kAlpha))
                                  : "representation file index";
  out.chart = Chart{"Best-response dynamics: equilibrium social loss", x_label, "loss", {br, sl}};
  return out;
}

// Columns: grid_index, source, value, analytic_bayes_risk, analytic_se,
// fitted_risk, iterations, lr, seed. Analytic values come from exact
// posteriors (Monte Carlo over n_samples representations for Settings 2-3)
// and are blank for repr files.
inline Output cmd_bayes_risk(const ExperimentConfig& cfg) {
  validate(cfg, Mode::kBayesRisk);
  if (cfg.bayes_iterations < 1) throw ConfigError("bayes_iterations must be at least 1");
  const auto srcs = detail::sources(cfg, Axis::kAlpha);
  Output out;
  out.table.header = {"grid_index", "source", "value", "analytic_bayes_risk", "analytic_se",
                      "fitted_risk", "iterations", "lr", "seed"};
  out.table.rows.resize(srcs.size());
  parallel_for(srcs.size(), resolve_threads(cfg.threads), [&](std::size_t g) {
    const auto seed = trial_seed(cfg.seed, g, 0);
    double analytic = std::numeric_limits<double>::quiet_NaN(), se = analytic;
    if (srcs[g].setting) {
      const bool s1 = std::holds_alternative<Setting1>(*srcs[g].setting);
      const auto profile = sample_alpha_profile(*srcs[g].setting, s1 ? 1 : cfg.n_samples, seed);
      const auto est = profile_estimate(profile, [](double a, std::size_t) { return a; });
      analytic = est.mean;
      se = est.se;
    }
    const Population pop = srcs[g].population ? *srcs[g].population
                                              : generate(*srcs[g].setting, cfg.n_points, seed);
    const auto fit = fit_bayes_optimal(pop, cfg.bayes_iterations, cfg.bayes_lr, seed,
                                       cfg.dynamics.tau, cfg.dynamics.init_sigma);
    out.table.rows[g] = {std::to_string(g), srcs[g].name, fmt(srcs[g].value), fmt(analytic), fmt(se),
                         fmt(fit.risk), std::to_string(cfg.bayes_iterations), fmt(cfg.bayes_lr),
                         std::to_string(seed)};
  });
  return out;
}

// Writes one synthetic population to cfg.out (CSV if it ends in .csv, binary
// repr otherwise), optionally through a random linear embedding. Returns a
// one-row summary table.
inline Output cmd_gen_data(const ExperimentConfig& cfg) {
  validate(cfg, Mode::kGenData);
  if (cfg.out.empty()) throw ConfigError("gen-data needs an output path (--out)");
  SettingSpec spec;
  switch (cfg.setting) {
    case 1: spec = Setting1{cfg.alpha}; break;
    case 2: spec = cfg.setting2; break;
    case 3: spec = cfg.setting3; break;
    default: throw ConfigError("setting must be 1, 2 or 3");
  }
  try {
    validate(spec);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  Population pop = generate(spec, cfg.n_points, cfg.seed);
  if (cfg.embed_dim > 0) pop = random_linear_embedding(pop, cfg.embed_dim, cfg.seed);
  const bool csv = cfg.out.size() >= 4 && cfg.out.compare(cfg.out.size() - 4, 4, ".csv") == 0;
  if (csv) {
    write_csv_repr(pop, cfg.out);
  } else {
    write_repr(pop, cfg.out);
  }
  Output out;
  out.table.header = {"path", "setting", "n_points", "dim", "seed"};
  out.table.rows.push_back({cfg.out, std::to_string(cfg.setting), std::to_string(pop.size()),
                            std::to_string(pop.dim()), std::to_string(cfg.seed)});
  return out;
}

inline Output run_command(const ExperimentConfig& cfg) {
  switch (cfg.mode) {
    case Mode::kTheory: return cmd_theory(cfg);
    case Mode::kExact: return cmd_exact(cfg);
    case Mode::kDynamics: return cmd_dynamics(cfg);
    case Mode::kBayesRisk: return cmd_bayes_risk(cfg);
    case Mode::kGenData: return cmd_gen_data(cfg);
  }
  throw ConfigError("unknown mode");
}

inline void write_text_file(const std::string& path, const std::string& text) {
  write_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace mkteq
