#pragma once

// Approximate best-response dynamics over linear-sigmoid predictors.
//
// Providers start from N(0, init_sigma^2) parameters. Each stage visits
// providers 1..m in order; provider j is re-drawn from the init distribution
// when its risk exceeds the reinit threshold, then takes `inner_iterations`
// full-batch gradient-ascent steps on its market share against the others'
// fixed predictors. The run stops after the first stage at whose end every
// provider's utility moved by at most stop_epsilon since the previous stage
// end, or after max_stages. Stage 1 has no previous stage, so at least two
// stages run before convergence can be declared.
//
// Loss is |y - sigmoid((<w, x> + b) / tau)| and users choose by weighted logit
// with noise c > 0. Identical (x, y) points are merged before the run; every
// weighted average, and so the dynamics, is unchanged by this.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mkteq/errors.hpp"
#include "mkteq/market.hpp"
#include "mkteq/rng.hpp"

namespace mkteq {

// Step size keyed on the provider's current risk.
inline double lr_from_schedule(double risk) {
  if (!(risk >= 0.0 && risk <= 1.0)) throw DomainError("risk must lie in [0, 1]");
  if (risk >= 0.3) return 0.1;
  if (risk >= 0.2) return 0.5;
  if (risk >= 0.15) return 1.0;
  if (risk >= 0.1) return 2.0;
  if (risk >= 0.07) return 5.0;
  return 10.0;
}

class LearningRate {
 public:
  static LearningRate fixed(double eta) {
    if (!(eta > 0.0)) throw DomainError("learning rate must be positive");
    return LearningRate(eta, false);
  }
  static LearningRate schedule() { return LearningRate(0.0, true); }

  bool is_schedule() const noexcept { return schedule_; }
  double fixed_value() const noexcept { return eta_; }
  double at(double risk) const { return schedule_ ? lr_from_schedule(risk) : eta_; }

 private:
  LearningRate(double eta, bool schedule) : eta_(eta), schedule_(schedule) {}
  double eta_;
  bool schedule_;
};

struct DynamicsConfig {
  std::size_t m = 2;
  double init_sigma = 0.1;
  double reinit_threshold = 0.3;
  std::size_t inner_iterations = 5000;
  LearningRate learning_rate = LearningRate::fixed(0.1);
  double stop_epsilon = 0.01;
  double tau = 0.1;
  double choice_noise = 0.3;
  std::vector<double> reputations;  // empty: equal reputations
  std::size_t max_stages = 200;
  std::uint64_t seed = 0;

  MarketConfig market() const {
    if (reputations.empty()) return MarketConfig::equal(static_cast<int>(m), choice_noise);
    if (reputations.size() != m) throw DomainError("reputations length must equal m");
    return MarketConfig(reputations, choice_noise);
  }

  void validate() const {
    if (m < 2) throw DomainError("m must be at least 2");
    if (!(init_sigma >= 0.0)) throw DomainError("init_sigma must be nonnegative");
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    if (!(choice_noise > 0.0)) throw NonSmoothError("best-response dynamics need c > 0");
    if (!(stop_epsilon >= 0.0)) throw DomainError("stop_epsilon must be nonnegative");
    if (max_stages < 1) throw DomainError("max_stages must be at least 1");
    (void)market();
  }
};

// One provider's turn within a stage.
struct StageRecord {
  std::size_t stage = 0;     // 1-based
  std::size_t provider = 0;  // 0-based
  double utility_before = 0.0;
  double utility_after = 0.0;
  double risk_before = 0.0;
  double risk_after = 0.0;
  bool reinitialized = false;
  std::vector<double> utilities;  // all providers after this turn
};

struct DynamicsTrace {
  std::vector<StageRecord> records;
  std::vector<std::vector<double>> stage_utilities;  // [0] = initial, [s] = end of stage s
  bool converged = false;
  std::size_t stages_run = 0;
};

struct EquilibriumResult {
  std::vector<ProviderStrategy> strategies;
  std::vector<double> utilities;
  double social_loss = 0.0;
  DynamicsTrace trace;

  bool converged() const noexcept { return trace.converged; }
  const LinearStrategy& linear(std::size_t j) const { return std::get<LinearStrategy>(strategies[j]); }
};

struct LinearGradient {
  std::vector<double> w;
  double b = 0.0;
};

inline LinearStrategy init_linear(std::size_t dim, double init_sigma, double tau, Rng& rng) {
  LinearStrategy f;
  f.w.resize(dim);
  for (auto& v : f.w) v = init_sigma * rng.normal();
  f.b = init_sigma * rng.normal();
  f.tau = tau;
  return f;
}

namespace detail {

inline double log_sum_exp(std::span<const double> v) noexcept {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : v) hi = std::max(hi, t);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  double s = 0.0;
  for (double t : v) s += std::exp(t - hi);
  return hi + std::log(s);
}

// Market share of one provider as a smooth function of its own parameters,
// with the rivals' losses frozen. For point i,
//   p_i = sigmoid(a_i - l_i / c),  a_i = log w_j - log sum_{k != j} w_k exp(-l_ki / c).
class ProviderObjective {
 public:
  struct Value {
    double utility = 0.0;
    double risk = 0.0;
  };

  ProviderObjective(const Population& pop, std::span<const double> log_rival_odds, double c)
      : pop_(pop), a_(log_rival_odds), c_(c), z_(pop.size()) {}

  // Utility and risk of f; with `grad` set, also d utility / d (w, b).
  Value evaluate(const LinearStrategy& f, LinearGradient* grad) {
    const std::size_t n = pop_.size();
    const std::size_t dim = pop_.dim();
    const auto features = pop_.features();
    for (std::size_t i = 0; i < n; ++i) {
      z_[i] = dot(std::span<const double>(features.data() + i * dim, dim), f.w) + f.b;
    }
    if (grad) {
      grad->w.assign(dim, 0.0);
      grad->b = 0.0;
    }
    Value v;
    const double inv_total = 1.0 / pop_.total_weight();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigmoid(z_[i] / f.tau);
      const int y = pop_.label(i);
      const double loss = y == 1 ? 1.0 - s : s;
      const double p = sigmoid(a_[i] - loss / c_);
      const double w = pop_.weight(i) * inv_total;
      v.utility += w * p;
      v.risk += w * loss;
      if (grad) {
        // du/dl = -p(1-p)/c ; dl/dz = -+ s(1-s)/tau
        const double dl_dz = (y == 1 ? -1.0 : 1.0) * s * (1.0 - s) / f.tau;
        const double g = w * (-p * (1.0 - p) / c_) * dl_dz;
        if (g != 0.0) {
          const double* xi = features.data() + i * dim;
          for (std::size_t d = 0; d < dim; ++d) grad->w[d] += g * xi[d];
          grad->b += g;
        }
      }
    }
    return v;
  }

 private:
  const Population& pop_;
  std::span<const double> a_;
  double c_;
  std::vector<double> z_;
};

// Per-point losses of every provider; rows are providers.
class LossTable {
 public:
  LossTable(const Population& pop, std::size_t m) : pop_(pop), m_(m), loss_(m * pop.size()) {}

  void update(std::size_t j, const ProviderStrategy& s) {
    for (std::size_t i = 0; i < pop_.size(); ++i) {
      loss_[j * pop_.size() + i] = point_loss(predict(s, pop_, i), pop_.label(i));
    }
  }

  double at(std::size_t j, std::size_t i) const noexcept { return loss_[j * pop_.size() + i]; }

  // a_i for provider j against the others.
  std::vector<double> log_rival_odds(std::size_t j, const MarketConfig& market) const {
    std::vector<double> a(pop_.size());
    std::vector<double> terms;
    terms.reserve(m_ - 1);
    const auto& w = market.reputations();
    for (std::size_t i = 0; i < pop_.size(); ++i) {
      terms.clear();
      for (std::size_t k = 0; k < m_; ++k) {
        if (k != j) terms.push_back(std::log(w[k]) - at(k, i) / market.c());
      }
      a[i] = std::log(w[j]) - log_sum_exp(terms);
    }
    return a;
  }

  std::vector<double> utilities(const MarketConfig& market) const {
    std::vector<double> u(m_, 0.0);
    std::vector<double> logits(m_);
    const auto& w = market.reputations();
    for (std::size_t i = 0; i < pop_.size(); ++i) {
      for (std::size_t k = 0; k < m_; ++k) logits[k] = std::log(w[k]) - at(k, i) / market.c();
      const double norm = log_sum_exp(logits);
      for (std::size_t k = 0; k < m_; ++k) u[k] += pop_.weight(i) * std::exp(logits[k] - norm);
    }
    for (double& v : u) v /= pop_.total_weight();
    return u;
  }

  double risk(std::size_t j) const {
    double r = 0.0;
    for (std::size_t i = 0; i < pop_.size(); ++i) r += pop_.weight(i) * at(j, i);
    return r / pop_.total_weight();
  }

 private:
  const Population& pop_;
  std::size_t m_;
  std::vector<double> loss_;
};

inline void check_linear_market(std::span<const ProviderStrategy> strategies,
                                const Population& pop, const MarketConfig& market) {
  if (strategies.size() != market.m()) throw DomainError("strategies length must equal m");
  if (market.noiseless()) throw NonSmoothError("utility gradient needs c > 0");
  for (const auto& s : strategies) check_compatible(s, pop);
}

// One best response of provider j, whose current losses are in `table`.
// Returns whether f was re-drawn.
inline bool respond_in_place(std::size_t j, LinearStrategy& f, const Population& pop,
                             const LossTable& table, const MarketConfig& market,
                             const DynamicsConfig& config, Rng& rng, LinearGradient& g) {
  bool reinitialized = false;
  if (table.risk(j) > config.reinit_threshold) {
    f = init_linear(pop.dim(), config.init_sigma, config.tau, rng);
    reinitialized = true;
  }
  const auto a = table.log_rival_odds(j, market);
  ProviderObjective objective(pop, a, market.c());
  for (std::size_t it = 0; it < config.inner_iterations; ++it) {
    const auto value = objective.evaluate(f, &g);
    const double eta = config.learning_rate.at(std::clamp(value.risk, 0.0, 1.0));
    for (std::size_t d = 0; d < g.w.size(); ++d) f.w[d] += eta * g.w[d];
    f.b += eta * g.b;
  }
  return reinitialized;
}

}  // namespace detail

// Exact gradient of provider j's market share with respect to (w_j, b_j).
inline LinearGradient utility_gradient(std::size_t j, std::span<const ProviderStrategy> strategies,
                                       const Population& pop, const MarketConfig& market) {
  detail::check_linear_market(strategies, pop, market);
  if (j >= strategies.size()) throw DomainError("provider index out of range");
  const auto* f = std::get_if<LinearStrategy>(&strategies[j]);
  if (!f) throw StrategyKindError("utility gradient requires a linear strategy");
  detail::LossTable table(pop, market.m());
  for (std::size_t k = 0; k < strategies.size(); ++k) table.update(k, strategies[k]);
  const auto a = table.log_rival_odds(j, market);
  detail::ProviderObjective objective(pop, a, market.c());
  LinearGradient g;
  objective.evaluate(*f, &g);
  return g;
}

struct BestResponseOutcome {
  LinearStrategy strategy;
  bool reinitialized = false;
  double risk_before = 0.0;
};

// Reinitializes f_j when its risk exceeds the threshold, then runs the inner
// gradient-ascent loop. The step size is re-read from the schedule at every
// iteration.
inline BestResponseOutcome best_respond(std::size_t j, std::span<const ProviderStrategy> strategies,
                                        const Population& pop, const DynamicsConfig& config,
                                        Rng& rng) {
  const MarketConfig market = config.market();
  detail::check_linear_market(strategies, pop, market);
  if (j >= strategies.size()) throw DomainError("provider index out of range");
  const auto* current = std::get_if<LinearStrategy>(&strategies[j]);
  if (!current) throw StrategyKindError("best response requires a linear strategy");

  detail::LossTable table(pop, market.m());
  for (std::size_t k = 0; k < strategies.size(); ++k) table.update(k, strategies[k]);

  BestResponseOutcome out{*current, false, table.risk(j)};
  LinearGradient g;
  out.reinitialized = detail::respond_in_place(j, out.strategy, pop, table, market, config, rng, g);
  return out;
}

inline EquilibriumResult run_dynamics(const Population& population, const DynamicsConfig& config) {
  config.validate();
  const MarketConfig market = config.market();
  const Population pop = population.compressed();
  Rng rng(config.seed, Stream::kInit);

  std::vector<ProviderStrategy> strategies;
  strategies.reserve(config.m);
  for (std::size_t j = 0; j < config.m; ++j) {
    strategies.emplace_back(init_linear(pop.dim(), config.init_sigma, config.tau, rng));
  }
  detail::LossTable table(pop, config.m);
  for (std::size_t j = 0; j < config.m; ++j) table.update(j, strategies[j]);

  EquilibriumResult result;
  auto& trace = result.trace;
  trace.stage_utilities.push_back(table.utilities(market));

  LinearGradient g;
  for (std::size_t stage = 1; stage <= config.max_stages; ++stage) {
    for (std::size_t j = 0; j < config.m; ++j) {
      StageRecord rec;
      rec.stage = stage;
      rec.provider = j;
      rec.utility_before = table.utilities(market)[j];
      rec.risk_before = table.risk(j);
      auto& f = std::get<LinearStrategy>(strategies[j]);
      rec.reinitialized = detail::respond_in_place(j, f, pop, table, market, config, rng, g);
      table.update(j, strategies[j]);
      rec.utilities = table.utilities(market);
      rec.utility_after = rec.utilities[j];
      rec.risk_after = table.risk(j);
      trace.records.push_back(std::move(rec));
    }
    trace.stage_utilities.push_back(table.utilities(market));
    trace.stages_run = stage;
    if (stage == 1) continue;
    const auto& now = trace.stage_utilities[stage];
    const auto& before = trace.stage_utilities[stage - 1];
    bool stable = true;
    for (std::size_t j = 0; j < config.m; ++j) {
      if (std::abs(now[j] - before[j]) > config.stop_epsilon) stable = false;
    }
    if (stable) {
      trace.converged = true;
      break;
    }
  }

  result.utilities = trace.stage_utilities.back();
  result.social_loss = social_loss(strategies, pop, market);
  result.strategies = std::move(strategies);
  return result;
}

struct BayesFit {
  LinearStrategy predictor;
  double risk = 0.0;
};

// Single-provider risk minimization by full-batch gradient descent from
// N(0, init_sigma^2) parameters.
inline BayesFit fit_bayes_optimal(const Population& population, std::size_t iterations, double lr,
                                  std::uint64_t seed, double tau = 0.1, double init_sigma = 0.1) {
  if (iterations < 1) throw DomainError("iterations must be at least 1");
  if (!(lr > 0.0)) throw DomainError("learning rate must be positive");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const Population pop = population.compressed();
  Rng rng(seed, Stream::kBayesFit);
  BayesFit fit{init_linear(pop.dim(), init_sigma, tau, rng), 0.0};
  auto& f = fit.predictor;
  const std::size_t dim = pop.dim();
  const auto features = pop.features();
  const double inv_total = 1.0 / pop.total_weight();
  std::vector<double> gw(dim);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const double* xi = features.data() + i * dim;
      const double s = sigmoid((dot(std::span<const double>(xi, dim), f.w) + f.b) / tau);
      const double g = pop.weight(i) * inv_total * (pop.label(i) == 1 ? -1.0 : 1.0) * s *
                       (1.0 - s) / tau;
      if (g == 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) gw[d] += g * xi[d];
      gb += g;
    }
    for (std::size_t d = 0; d < dim; ++d) f.w[d] -= lr * gw[d];
    f.b -= lr * gb;
  }
  fit.risk = risk(ProviderStrategy{f}, pop);
  return fit;
}

}  // namespace mkteq
