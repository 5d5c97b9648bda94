#pragma once

// Exact analysis of the per-representation games.
//
// With the full function class and noiseless users, the market game splits
// into one independent 2-action game per distinct representation x: each
// provider labels x with y* (the Bayes label) or 1 - y*. On the conditional
// distribution at x, users with label y* carry mass 1 - alpha and users with
// label 1 - y* carry mass alpha; each user picks among the providers that got
// their label right (all providers if none did), proportionally to reputation.
//
// This header solves those games directly (payoffs, brute-force pure
// equilibria, the 2-provider mixed equilibrium) and reassembles population
// social loss from them, independently of the closed-form formulas.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mkteq/closed_form.hpp"
#include "mkteq/errors.hpp"
#include "mkteq/market.hpp"

namespace mkteq {

inline constexpr double kBestResponseTolerance = 1e-12;
inline constexpr std::size_t kMaxEnumerationProviders = 20;

struct PerRepGame {
  double alpha = 0.0;
  int bayes_label = 1;
  std::vector<double> reputations;

  PerRepGame(double alpha_, std::vector<double> reputations_, int bayes_label_ = 1)
      : alpha(alpha_), bayes_label(bayes_label_), reputations(std::move(reputations_)) {
    if (!(alpha >= 0.0 && alpha <= 0.5)) throw DomainError("alpha must lie in [0, 0.5]");
    if (bayes_label != 0 && bayes_label != 1) throw DomainError("bayes label must be 0 or 1");
    MarketConfig(reputations, 0.0);  // validates m >= 2 and normalization
  }

  static PerRepGame equal(double alpha, std::size_t m) {
    if (m < 2) throw DomainError("m must be at least 2");
    return PerRepGame(alpha, std::vector<double>(m, 1.0 / static_cast<double>(m)));
  }

  static PerRepGame two_providers(double alpha, double w_min) {
    if (!(w_min > 0.0 && w_min <= 0.5)) throw DomainError("w_min must lie in (0, 0.5]");
    return PerRepGame(alpha, {1.0 - w_min, w_min});
  }

  std::size_t m() const noexcept { return reputations.size(); }
  double w_min() const noexcept { return *std::min_element(reputations.begin(), reputations.end()); }
};

// Each provider's label for the single representation.
struct PureProfile {
  std::vector<int> labels;

  bool operator==(const PureProfile&) const = default;

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
};

// Probabilities that provider 1 / provider 2 play the Bayes label.
struct MixedProfile2P {
  double p1 = 1.0;
  double p2 = 1.0;
};

namespace detail {

inline void check_profile(const PerRepGame& game, const PureProfile& profile) {
  if (profile.labels.size() != game.m()) throw DomainError("profile length must equal m");
  for (int y : profile.labels) {
    if (y != 0 && y != 1) throw DomainError("profile labels must be 0 or 1");
  }
}

// Calls fn(mass, choice probabilities, losses) for the two label classes.
template <typename Fn>
void for_each_label_class(const PerRepGame& game, const PureProfile& profile, Fn&& fn) {
  const int classes[2] = {game.bayes_label, 1 - game.bayes_label};
  const double masses[2] = {1.0 - game.alpha, game.alpha};
  std::vector<double> losses(game.m());
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < game.m(); ++j) {
      losses[j] = profile.labels[j] == classes[c] ? 0.0 : 1.0;
    }
    fn(masses[c], noiseless_choice_probabilities(losses, game.reputations), losses);
  }
}

}  // namespace detail

// Expected market share of each provider on the conditional distribution at x.
inline std::vector<double> game_payoffs(const PerRepGame& game, const PureProfile& profile) {
  detail::check_profile(game, profile);
  std::vector<double> payoff(game.m(), 0.0);
  detail::for_each_label_class(
      game, profile, [&](double mass, const std::vector<double>& p, const std::vector<double>&) {
        for (std::size_t j = 0; j < payoff.size(); ++j) payoff[j] += mass * p[j];
      });
  return payoff;
}

// Expected loss of the chosen provider on the conditional distribution at x.
inline double per_rep_social_loss(const PerRepGame& game, const PureProfile& profile) {
  detail::check_profile(game, profile);
  double loss = 0.0;
  detail::for_each_label_class(
      game, profile,
      [&](double mass, const std::vector<double>& p, const std::vector<double>& losses) {
        for (std::size_t j = 0; j < p.size(); ++j) loss += mass * p[j] * losses[j];
      });
  return loss;
}

inline bool is_pure_equilibrium(const PerRepGame& game, const PureProfile& profile,
                                double tol = kBestResponseTolerance) {
  const auto current = game_payoffs(game, profile);
  PureProfile deviated = profile;
  for (std::size_t j = 0; j < game.m(); ++j) {
    deviated.labels[j] = 1 - profile.labels[j];
    const double alt = game_payoffs(game, deviated)[j];
    deviated.labels[j] = profile.labels[j];
    if (alt > current[j] + tol) return false;
  }
  return true;
}

namespace detail {

// Payoff of one provider from the reputation mass of the y* camp and the
// 1 - y* camp. Same numbers as game_payoffs, O(1) per query.
inline double camp_payoff(double alpha, double w_j, bool on_bayes, double bayes_mass,
                          double other_mass) {
  double u = 0.0;
  // Users with label y*: served by the y* camp, or everyone if it is empty.
  if (bayes_mass > 0.0) {
    if (on_bayes) u += (1.0 - alpha) * w_j / bayes_mass;
  } else {
    u += (1.0 - alpha) * w_j;
  }
  // Users with label 1 - y*.
  if (other_mass > 0.0) {
    if (!on_bayes) u += alpha * w_j / other_mass;
  } else {
    u += alpha * w_j;
  }
  return u;
}

}  // namespace detail

// Every pure profile in which no provider gains more than 1e-12 by flipping
// its label. Profiles are listed in increasing bitmask order, where bit j set
// means provider j plays the Bayes label.
inline std::vector<PureProfile> enumerate_pure_equilibria(const PerRepGame& game) {
  const std::size_t m = game.m();
  if (m > kMaxEnumerationProviders) {
    throw CapacityError("pure-equilibrium enumeration supports at most " +
                        std::to_string(kMaxEnumerationProviders) + " providers, got " +
                        std::to_string(m));
  }
  const auto& w = game.reputations;
  std::vector<PureProfile> out;
  const std::uint64_t n_profiles = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < n_profiles; ++mask) {
    double bayes_mass = 0.0;
    double other_mass = 0.0;
    for (std::size_t j = 0; j < m; ++j) ((mask >> j) & 1U ? bayes_mass : other_mass) += w[j];
    bool stable = true;
    for (std::size_t j = 0; j < m && stable; ++j) {
      const bool on_bayes = (mask >> j) & 1U;
      const double cur = detail::camp_payoff(game.alpha, w[j], on_bayes, bayes_mass, other_mass);
      // Flip j between camps; exact zero when a camp empties.
      const double nb = on_bayes ? (bayes_mass - w[j]) : (bayes_mass + w[j]);
      const double no = on_bayes ? (other_mass + w[j]) : (other_mass - w[j]);
      const bool nb_empty = on_bayes && (mask & ~(std::uint64_t{1} << j)) == 0;
      const bool no_empty = !on_bayes && ((~mask) & (n_profiles - 1) & ~(std::uint64_t{1} << j)) == 0;
      const double alt = detail::camp_payoff(game.alpha, w[j], !on_bayes, nb_empty ? 0.0 : nb,
                                             no_empty ? 0.0 : no);
      if (alt > cur + kBestResponseTolerance) stable = false;
    }
    if (stable) {
      PureProfile p{std::vector<int>(m)};
      for (std::size_t j = 0; j < m; ++j) {
        p.labels[j] = (mask >> j) & 1U ? game.bayes_label : 1 - game.bayes_label;
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

// Expected payoff to `provider` (0 or 1) for playing `label` while the other
// provider mixes according to `profile`.
inline double mixed_payoff_2p(const PerRepGame& game, const MixedProfile2P& profile,
                              std::size_t provider, int label) {
  if (game.m() != 2) throw DomainError("two-provider game required");
  if (provider > 1) throw DomainError("provider index must be 0 or 1");
  const int ys = game.bayes_label;
  const double q = provider == 0 ? profile.p2 : profile.p1;
  const std::size_t other = 1 - provider;
  PureProfile vs_bayes{{0, 0}};
  vs_bayes.labels[provider] = label;
  vs_bayes.labels[other] = ys;
  PureProfile vs_flip = vs_bayes;
  vs_flip.labels[other] = 1 - ys;
  return q * game_payoffs(game, vs_bayes)[provider] +
         (1.0 - q) * game_payoffs(game, vs_flip)[provider];
}

// Mixed equilibrium of a two-provider game. alpha < w_min: both play y*.
// alpha > w_min: each provider mixes so that the other is indifferent,
//   p1 = (w_1 - alpha) / (1 - 2 w_2),  p2 = (w_2 - alpha) / (1 - 2 w_1),
// which for w_1 = w_max is p1 = (w_max - alpha)/(1 - 2 w_min),
// p2 = (alpha - w_min)/(1 - 2 w_min).
inline MixedProfile2P solve_mixed_2p(const PerRepGame& game) {
  if (game.m() != 2) throw DomainError("solve_mixed_2p requires exactly two providers");
  const double w_min = game.w_min();
  if (std::abs(game.alpha - w_min) <= kDegeneracyTolerance) {
    throw DegenerateInstanceError("alpha = " + std::to_string(game.alpha) +
                                      " coincides with w_min: multiple equilibria",
                                  0);
  }
  if (game.alpha < w_min) return {1.0, 1.0};
  const double w1 = game.reputations[0];
  const double w2 = game.reputations[1];
  return {(w1 - game.alpha) / (1.0 - 2.0 * w2), (w2 - game.alpha) / (1.0 - 2.0 * w1)};
}

// Expected social loss when providers play y* with probabilities p1, p2:
// loss alpha when both play y*, 1 - alpha when both play 1 - y*, else 0.
inline double expected_social_loss_2p(const PerRepGame& game, const MixedProfile2P& profile) {
  if (game.m() != 2) throw DomainError("two-provider game required");
  if (!(profile.p1 >= 0.0 && profile.p1 <= 1.0 && profile.p2 >= 0.0 && profile.p2 <= 1.0)) {
    throw DomainError("mixing probabilities must lie in [0, 1]");
  }
  return game.alpha * profile.p1 * profile.p2 +
         (1.0 - game.alpha) * (1.0 - profile.p1) * (1.0 - profile.p2);
}

// ---------------------------------------------------------------------------
// Population assembly

struct RepEquilibrium {
  double alpha = 0.0;
  double weight = 0.0;
  double social_loss = 0.0;
  // Equal reputations: numbers of providers on y* at which a pure equilibrium exists.
  std::vector<std::size_t> bayes_counts;
  // Two providers: the mixed equilibrium.
  MixedProfile2P mixed{};
};

struct Assembly {
  double social_loss = 0.0;
  std::vector<RepEquilibrium> records;
};

// Pure equilibria of an equal-reputation game up to permutation: the counts
// k such that "k providers on y*, the rest on 1 - y*" is stable.
inline std::vector<std::size_t> equilibrium_bayes_counts(const PerRepGame& game) {
  std::vector<std::size_t> counts;
  for (std::size_t k = 0; k <= game.m(); ++k) {
    PureProfile p{std::vector<int>(game.m(), 1 - game.bayes_label)};
    for (std::size_t j = 0; j < k; ++j) p.labels[j] = game.bayes_label;
    if (is_pure_equilibrium(game, p)) counts.push_back(k);
  }
  return counts;
}

// Solves every representation's game on its own and averages the
// equilibrium social loss with the profile weights.
inline Assembly assemble_population(const AlphaProfile& profile, const Regime& regime) {
  Assembly out;
  out.records.reserve(profile.size());
  const auto& entries = profile.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    RepEquilibrium rec;
    rec.alpha = entries[i].alpha;
    rec.weight = entries[i].weight;
    if (const auto* eq = std::get_if<EqualReputations>(&regime)) {
      if (eq->m < 2) throw DomainError("m must be at least 2");
      if (std::abs(rec.alpha - 1.0 / static_cast<double>(eq->m)) <= kDegeneracyTolerance) {
        throw DegenerateInstanceError(
            "entry " + std::to_string(i) + " has alpha at the 1/m boundary", i);
      }
      const PerRepGame game = PerRepGame::equal(rec.alpha, eq->m);
      rec.bayes_counts = equilibrium_bayes_counts(game);
      if (rec.bayes_counts.empty()) {
        throw Error("entry " + std::to_string(i) + ": no pure equilibrium found");
      }
      PureProfile p{std::vector<int>(eq->m, 0)};
      for (std::size_t j = 0; j < rec.bayes_counts.front(); ++j) p.labels[j] = 1;
      rec.social_loss = per_rep_social_loss(game, p);
    } else {
      const double w_min = std::get<TwoProviders>(regime).w_min;
      const PerRepGame game = PerRepGame::two_providers(rec.alpha, w_min);
      try {
        rec.mixed = solve_mixed_2p(game);
      } catch (const DegenerateInstanceError&) {
        throw DegenerateInstanceError(
            "entry " + std::to_string(i) + " has alpha at the w_min boundary", i);
      }
      rec.social_loss = expected_social_loss_2p(game, rec.mixed);
    }
    out.social_loss += rec.weight * rec.social_loss;
    out.records.push_back(std::move(rec));
  }
  double total = 0.0;
  for (const auto& e : entries) total += e.weight;
  out.social_loss /= total;
  return out;
}

// Empirical per-representation statistics of a population.
struct RepRecord {
  std::size_t rep_id = 0;
  double weight = 0.0;  // share of total population weight
  double alpha = 0.0;
  int bayes_label = 1;  // ties (alpha = 0.5) resolve to 1
};

inline std::vector<RepRecord> representation_records(const Population& pop) {
  std::vector<double> mass(pop.distinct_count(), 0.0);
  std::vector<double> mass_y1(pop.distinct_count(), 0.0);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    mass[pop.rep_id(i)] += pop.weight(i);
    if (pop.label(i) == 1) mass_y1[pop.rep_id(i)] += pop.weight(i);
  }
  std::vector<RepRecord> out(pop.distinct_count());
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r].rep_id = r;
    out[r].weight = mass[r] / pop.total_weight();
    const double post = mass[r] > 0.0 ? mass_y1[r] / mass[r] : 0.5;
    out[r].alpha = per_rep_bayes_risk(post);
    out[r].bayes_label = post >= 0.5 ? 1 : 0;
  }
  return out;
}

// Representations with zero mass are dropped.
inline AlphaProfile alpha_profile_of(const Population& pop) {
  std::vector<AlphaEntry> entries;
  for (const auto& r : representation_records(pop)) {
    if (r.weight > 0.0) entries.push_back({r.alpha, r.weight});
  }
  return AlphaProfile(std::move(entries));
}

// A pure equilibrium over the whole population for equal reputations, mapped
// back to actual labels: at each representation the first k providers play
// the Bayes label, where k is the largest stable count.
inline std::vector<TabularStrategy> equilibrium_labeling(const Population& pop, std::size_t m) {
  std::vector<TabularStrategy> out(m, TabularStrategy{std::vector<int>(pop.distinct_count())});
  for (const auto& r : representation_records(pop)) {
    const PerRepGame game = PerRepGame(r.alpha, std::vector<double>(m, 1.0 / static_cast<double>(m)),
                                       r.bayes_label);
    const auto counts = equilibrium_bayes_counts(game);
    if (counts.empty()) throw Error("no pure equilibrium at representation " + std::to_string(r.rep_id));
    for (std::size_t j = 0; j < m; ++j) {
      out[j].labels[r.rep_id] = j < counts.back() ? r.bayes_label : 1 - r.bayes_label;
    }
  }
  return out;
}

// Whether tabular strategies form a pure equilibrium of the population game
// under noiseless choice: by decomposition, iff every representation's game is
// at equilibrium. Representations with zero mass are ignored.
inline bool is_population_equilibrium(const Population& pop,
                                      std::span<const TabularStrategy> strategies,
                                      std::span<const double> reputations) {
  for (const auto& s : strategies) check_compatible(ProviderStrategy{s}, pop);
  for (const auto& r : representation_records(pop)) {
    if (r.weight == 0.0) continue;
    const PerRepGame game(r.alpha, std::vector<double>(reputations.begin(), reputations.end()),
                          r.bayes_label);
    PureProfile p{std::vector<int>(strategies.size())};
    for (std::size_t j = 0; j < strategies.size(); ++j) p.labels[j] = strategies[j].labels[r.rep_id];
    if (!is_pure_equilibrium(game, p)) return false;
  }
  return true;
}

}  // namespace mkteq
