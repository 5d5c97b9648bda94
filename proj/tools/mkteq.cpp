#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mkteq/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> out_csv, out_svg, out, alpha_grid, sigma_grid, dim_grid, lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials, threads, m, n_points, n_samples, iterations, max_stages,
      bayes_iterations, embed_dim, dim;
  std::optional<double> c, w_min, epsilon, tau, bayes_lr, alpha, mu, sigma, prior_y1, init_sigma,
      reinit_threshold;
  std::optional<int> setting;
  std::vector<std::string> repr_files;
};

void add_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--out-csv", o.out_csv, "CSV output path (default: stdout)");
  app->add_option("--out-svg", o.out_svg, "SVG chart output path (theory and dynamics)");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--threads", o.threads, "worker threads (default: MKTEQ_THREADS or all cores)");
  app->add_option("--m", o.m, "number of providers");
  app->add_option("--c", o.c, "user choice noise");
  app->add_option("--w-min", o.w_min, "smaller reputation of two providers");
  app->add_option("--alpha-grid", o.alpha_grid, "Setting 1 grid: a,b,c or start:stop:step");
  app->add_option("--sigma-grid", o.sigma_grid, "Setting 2 noise grid");
  app->add_option("--dim-grid", o.dim_grid, "Setting 3 dimension grid");
  app->add_option("--repr-file", o.repr_files, "representation file (.csv or binary); repeatable");
  app->add_option("--mu", o.mu, "Setting 2 class mean");
  app->add_option("--sigma", o.sigma, "Setting 2/3 noise");
  app->add_option("--prior-y1", o.prior_y1, "Setting 2 prior of label 1");
  app->add_option("--dim", o.dim, "Setting 3 dimension");
  app->add_option("--n-points", o.n_points, "population size for generated data");
  app->add_option("--n-samples", o.n_samples, "Monte Carlo samples for analytic curves");
  app->add_option("--trials", o.trials, "trials per grid point");
  app->add_option("--iterations", o.iterations, "gradient steps per best response");
  app->add_option("--lr", o.lr, "learning rate: a number or 'schedule'");
  app->add_option("--epsilon", o.epsilon, "utility change stopping threshold");
  app->add_option("--tau", o.tau, "sigmoid temperature");
  app->add_option("--max-stages", o.max_stages, "maximum best-response stages");
  app->add_option("--init-sigma", o.init_sigma, "initialization standard deviation");
  app->add_option("--reinit-threshold", o.reinit_threshold, "risk above which a provider reinitializes");
  app->add_option("--bayes-iterations", o.bayes_iterations, "gradient steps for the Bayes-risk fit (0 skips)");
  app->add_option("--bayes-lr", o.bayes_lr, "learning rate for the Bayes-risk fit");
}

template <typename T, typename F>
void set_if(const std::optional<T>& v, F&& f) {
  if (v) f(*v);
}

mkteq::ExperimentConfig build_config(mkteq::Mode mode, const Overrides& o) {
  using namespace mkteq;
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config_file(o.config);
  cfg.mode = mode;
  nlohmann::json j = nlohmann::json::object();
  set_if(o.alpha_grid, [&](const auto& v) { j["alpha_grid"] = v; });
  set_if(o.sigma_grid, [&](const auto& v) { j["sigma_grid"] = v; });
  set_if(o.dim_grid, [&](const auto& v) { j["dim_grid"] = v; });
  if (!o.repr_files.empty()) {
    j["repr_file"] = o.repr_files;
    cfg.axis.reset();
    cfg.grid.clear();
  }
  if (o.alpha_grid || o.sigma_grid || o.dim_grid) {
    cfg.axis.reset();
    cfg.grid.clear();
    cfg.repr_files.clear();
  }
  set_if(o.out_csv, [&](const auto& v) { j["out_csv"] = v; });
  set_if(o.out_svg, [&](const auto& v) { j["out_svg"] = v; });
  set_if(o.out, [&](const auto& v) { j["out"] = v; });
  set_if(o.lr, [&](const auto& v) { j["lr"] = v; });
  set_if(o.seed, [&](auto v) { j["seed"] = v; });
  set_if(o.trials, [&](auto v) { j["trials"] = v; });
  set_if(o.threads, [&](auto v) { j["threads"] = v; });
  set_if(o.m, [&](auto v) { j["m"] = v; });
  set_if(o.n_points, [&](auto v) { j["n_points"] = v; });
  set_if(o.n_samples, [&](auto v) { j["n_samples"] = v; });
  set_if(o.iterations, [&](auto v) { j["iterations"] = v; });
  set_if(o.max_stages, [&](auto v) { j["max_stages"] = v; });
  set_if(o.bayes_iterations, [&](auto v) { j["bayes_iterations"] = v; });
  set_if(o.embed_dim, [&](auto v) { j["embed_dim"] = v; });
  set_if(o.dim, [&](auto v) { j["dim"] = v; });
  set_if(o.c, [&](auto v) { j["c"] = v; });
  set_if(o.w_min, [&](auto v) { j["w_min"] = v; });
  set_if(o.epsilon, [&](auto v) { j["epsilon"] = v; });
  set_if(o.tau, [&](auto v) { j["tau"] = v; });
  set_if(o.bayes_lr, [&](auto v) { j["bayes_lr"] = v; });
  set_if(o.alpha, [&](auto v) { j["alpha"] = v; });
  set_if(o.mu, [&](auto v) { j["mu"] = v; });
  set_if(o.sigma, [&](auto v) { j["sigma"] = v; });
  set_if(o.prior_y1, [&](auto v) { j["prior_y1"] = v; });
  set_if(o.init_sigma, [&](auto v) { j["init_sigma"] = v; });
  set_if(o.reinit_threshold, [&](auto v) { j["reinit_threshold"] = v; });
  set_if(o.setting, [&](auto v) { j["setting"] = v; });
  apply_json(cfg, j);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Market equilibria of competing ML providers: theory, exact games and dynamics"};
  app.require_subcommand(1);

  const std::vector<std::pair<mkteq::Mode, std::string>> modes = {
      {mkteq::Mode::kTheory, "closed-form social loss and Bayes risk along a data-quality axis"},
      {mkteq::Mode::kExact, "pure and mixed equilibria of the per-representation game"},
      {mkteq::Mode::kDynamics, "best-response dynamics on synthetic or file-based representations"},
      {mkteq::Mode::kBayesRisk, "analytic and fitted Bayes risk per data source"},
      {mkteq::Mode::kGenData, "write a synthetic population to a representation file"},
  };
  std::vector<Overrides> overrides(modes.size());
  std::vector<CLI::App*> subs;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    auto* sub = app.add_subcommand(mkteq::mode_name(modes[k].first), modes[k].second);
    add_flags(sub, overrides[k]);
    auto& o = overrides[k];
    if (modes[k].first == mkteq::Mode::kGenData) {
      sub->add_option("--setting", o.setting, "synthetic setting: 1, 2 or 3");
      sub->add_option("--alpha", o.alpha, "Setting 1 label-1 frequency");
      sub->add_option("--out", o.out, "output path (.csv for text, otherwise binary)");
      sub->add_option("--embed-dim", o.embed_dim, "random linear embedding dimension (0: none)");
    }
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (!subs[k]->parsed()) continue;
      const auto cfg = build_config(modes[k].first, overrides[k]);
      const auto out = mkteq::run_command(cfg);
      const std::string csv = out.table.csv();
      if (cfg.out_csv.empty()) {
        std::fwrite(csv.data(), 1, csv.size(), stdout);
      } else {
        mkteq::write_text_file(cfg.out_csv, csv);
      }
      if (!cfg.out_svg.empty()) {
        if (!out.chart) throw mkteq::ConfigError("this command does not produce a chart");
        mkteq::write_text_file(cfg.out_svg, mkteq::render_svg(*out.chart));
      }
    }
  } catch (const mkteq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
