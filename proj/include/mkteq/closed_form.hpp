#pragma once

// Per-representation Bayes risk and the closed-form equilibrium social loss
// for noiseless users over the full (tabular) function class:
//
//   equal reputations, m providers:  E[ alpha * 1[alpha < 1/m] ]
//   two providers, w_min <= w_max:   E[ A(alpha) * 1[alpha > w_min] + alpha * 1[alpha < w_min] ]
//                                    A(alpha) = (alpha - w_min)(w_max - alpha) / (1 - 2 w_min)^2
//
// Both formulas are undefined on the boundary alpha == 1/m (resp. w_min)
// where multiple equilibria with different losses exist; such inputs raise
// DegenerateInstanceError.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mkteq/errors.hpp"
#include "mkteq/market.hpp"
#include "mkteq/synth.hpp"

namespace mkteq {

inline constexpr double kDegeneracyTolerance = 1e-9;

struct AlphaEntry {
  double alpha = 0.0;
  double weight = 0.0;
};

// Population distribution of per-representation Bayes risk.
class AlphaProfile {
 public:
  explicit AlphaProfile(std::vector<AlphaEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw DomainError("alpha profile must be nonempty");
    double sum = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (!(e.alpha >= 0.0 && e.alpha <= 0.5)) {
        throw DomainError("alpha of entry " + std::to_string(i) + " outside [0, 0.5]");
      }
      if (!(e.weight > 0.0)) {
        throw DomainError("weight of entry " + std::to_string(i) + " must be positive");
      }
      sum += e.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("alpha profile weights must sum to 1");
  }

  static AlphaProfile uniform(std::span<const double> alphas) {
    std::vector<AlphaEntry> entries;
    entries.reserve(alphas.size());
    const double w = alphas.empty() ? 0.0 : 1.0 / static_cast<double>(alphas.size());
    for (double a : alphas) entries.push_back({a, w});
    return AlphaProfile(std::move(entries));
  }

  static AlphaProfile single(double alpha) { return AlphaProfile({{alpha, 1.0}}); }

  const std::vector<AlphaEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<AlphaEntry> entries_;
};

// Weighted mean of a per-entry quantity with its standard error under i.i.d.
// sampling of entries.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

template <typename Fn>
Estimate profile_estimate(const AlphaProfile& profile, Fn&& term) {
  const auto& entries = profile.entries();
  std::vector<double> values(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) values[i] = term(entries[i].alpha, i);
  // Accumulated as offsets from the first value, so a constant profile
  // returns that constant exactly.
  const double base = values[0];
  double total_w = 0.0;
  double shift = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    shift += entries[i].weight * (values[i] - base);
    total_w += entries[i].weight;
  }
  const double mean = base + shift / total_w;
  double var = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double w = entries[i].weight / total_w;
    const double d = values[i] - mean;
    var += w * w * d * d;
  }
  return {mean, std::sqrt(var)};
}

// alpha(x) = min(P(y=1|x), P(y=0|x)).
inline double per_rep_bayes_risk(double posterior_y1) {
  if (!(posterior_y1 >= 0.0 && posterior_y1 <= 1.0)) {
    throw DomainError("posterior must lie in [0, 1]");
  }
  return std::min(posterior_y1, 1.0 - posterior_y1);
}

inline double bayes_risk(const AlphaProfile& profile) {
  return profile_estimate(profile, [](double a, std::size_t) { return a; }).mean;
}

namespace detail {

inline double prop1_term(double alpha, std::size_t m, std::size_t entry) {
  const double threshold = 1.0 / static_cast<double>(m);
  if (std::abs(alpha - threshold) <= kDegeneracyTolerance) {
    throw DegenerateInstanceError("entry " + std::to_string(entry) + " has alpha = " +
                                      std::to_string(alpha) + " at the 1/m boundary",
                                  entry);
  }
  return alpha < threshold ? alpha : 0.0;
}

inline double prop2_term(double alpha, double w_min, std::size_t entry) {
  if (std::abs(alpha - w_min) <= kDegeneracyTolerance) {
    throw DegenerateInstanceError("entry " + std::to_string(entry) + " has alpha = " +
                                      std::to_string(alpha) + " at the w_min boundary",
                                  entry);
  }
  if (alpha < w_min) return alpha;
  const double w_max = 1.0 - w_min;
  const double gap = 1.0 - 2.0 * w_min;
  return (alpha - w_min) * (w_max - alpha) / (gap * gap);
}

inline void check_m(std::size_t m) {
  if (m < 2) throw DomainError("m must be at least 2");
}

inline void check_w_min(double w_min) {
  if (!(w_min > 0.0 && w_min <= 0.5)) throw DomainError("w_min must lie in (0, 0.5]");
}

}  // namespace detail

// Equilibrium social loss, m providers with equal reputations.
inline double prop1_social_loss(const AlphaProfile& profile, std::size_t m) {
  detail::check_m(m);
  return profile_estimate(profile,
                          [m](double a, std::size_t i) { return detail::prop1_term(a, m, i); })
      .mean;
}

// Expected equilibrium social loss, two providers with reputations (1 - w_min, w_min).
inline double prop2_social_loss(const AlphaProfile& profile, double w_min) {
  detail::check_w_min(w_min);
  return profile_estimate(profile, [w_min](double a, std::size_t i) {
           return detail::prop2_term(a, w_min, i);
         }).mean;
}

// Class 1 has mean +mu, class 0 has mean -mu, shared isotropic sigma.
struct GaussianMixtureSpec {
  std::vector<double> mu;
  double sigma = 1.0;
  double prior_y1 = 0.5;
};

// alpha from the log-odds of the label posterior: 1 / (1 + exp(|log-odds|)).
inline double alpha_from_log_odds(double log_odds) noexcept {
  return 1.0 / (1.0 + std::exp(std::abs(log_odds)));
}

inline double gaussian_posterior_alpha(std::span<const double> x, const GaussianMixtureSpec& spec) {
  if (!(spec.sigma > 0.0)) throw DomainError("sigma must be positive");
  if (!(spec.prior_y1 > 0.0 && spec.prior_y1 < 1.0)) {
    throw DomainError("prior_y1 must lie in (0, 1)");
  }
  if (x.size() != spec.mu.size()) throw DomainError("x and mu dimensions differ");
  // log N(x; mu) - log N(x; -mu) = 2 <x, mu> / sigma^2
  const double log_odds = std::log(spec.prior_y1 / (1.0 - spec.prior_y1)) +
                          2.0 * dot(x, spec.mu) / (spec.sigma * spec.sigma);
  return alpha_from_log_odds(log_odds);
}

// Setting 3: label posterior given the first x.size() coordinates, pooled over
// the four equally likely subpopulations with a fair label prior.
inline double setting3_posterior_alpha(std::span<const double> x, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (x.size() > kSetting3BaseDim) throw DomainError("Setting 3 dimension must lie in [0, 4]");
  std::array<double, kSetting3BaseDim> log_pos{};
  std::array<double, kSetting3BaseDim> log_neg{};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 1; i <= kSetting3BaseDim; ++i) {
    const auto mu = setting3_mean(i);
    double dp = 0.0;
    double dn = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      dp += (x[d] - mu[d]) * (x[d] - mu[d]);
      dn += (x[d] + mu[d]) * (x[d] + mu[d]);
    }
    log_pos[i - 1] = -dp * inv;
    log_neg[i - 1] = -dn * inv;
  }
  auto log_sum_exp = [](const std::array<double, kSetting3BaseDim>& v) {
    double hi = v[0];
    for (double t : v) hi = std::max(hi, t);
    double s = 0.0;
    for (double t : v) s += std::exp(t - hi);
    return hi + std::log(s);
  };
  return alpha_from_log_odds(log_sum_exp(log_pos) - log_sum_exp(log_neg));
}

// Draws n_samples representations from the setting and records the exact
// posterior alpha of each (constant alpha for Setting 1). Uniform weights.
inline AlphaProfile sample_alpha_profile(const SettingSpec& spec, std::size_t n_samples,
                                         std::uint64_t seed) {
  if (n_samples < 1) throw DomainError("n_samples must be at least 1");
  validate(spec);
  std::vector<double> alphas(n_samples);
  if (const auto* s1 = std::get_if<Setting1>(&spec)) {
    std::fill(alphas.begin(), alphas.end(), s1->alpha);
  } else if (const auto* s2 = std::get_if<Setting2>(&spec)) {
    const Population pop = gen_setting2(*s2, n_samples, seed);
    const GaussianMixtureSpec g{{s2->mu}, s2->sigma, s2->prior_y1};
    for (std::size_t i = 0; i < n_samples; ++i) alphas[i] = gaussian_posterior_alpha(pop.x(i), g);
  } else {
    const auto& s3 = std::get<Setting3>(spec);
    const Population pop = gen_setting3(s3, n_samples, seed);
    for (std::size_t i = 0; i < n_samples; ++i) {
      alphas[i] = setting3_posterior_alpha(pop.x(i), s3.sigma);
    }
  }
  return AlphaProfile::uniform(alphas);
}

// ---------------------------------------------------------------------------
// Theory curves

struct EqualReputations {
  std::size_t m = 2;
};

struct TwoProviders {
  double w_min = 0.5;
};

using Regime = std::variant<EqualReputations, TwoProviders>;

enum class Axis { kAlpha, kNoise, kDimension };

inline const char* axis_name(Axis axis) noexcept {
  switch (axis) {
    case Axis::kAlpha: return "alpha";
    case Axis::kNoise: return "noise";
    case Axis::kDimension: return "dimension";
  }
  return "?";
}

// Equilibrium social loss estimate for a profile under a regime.
inline Estimate equilibrium_estimate(const AlphaProfile& profile, const Regime& regime) {
  if (const auto* eq = std::get_if<EqualReputations>(&regime)) {
    detail::check_m(eq->m);
    return profile_estimate(
        profile, [m = eq->m](double a, std::size_t i) { return detail::prop1_term(a, m, i); });
  }
  const double w_min = std::get<TwoProviders>(regime).w_min;
  detail::check_w_min(w_min);
  return profile_estimate(
      profile, [w_min](double a, std::size_t i) { return detail::prop2_term(a, w_min, i); });
}

// Fixed parameters of the settings that the swept axis does not vary.
struct CurveBase {
  Setting2 setting2{};
  Setting3 setting3{};
};

struct CurvePoint {
  double value = 0.0;
  double bayes_risk = 0.0;
  double bayes_risk_se = 0.0;
  double social_loss = std::numeric_limits<double>::quiet_NaN();
  double social_loss_se = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::string> error;  // set when the grid point is degenerate
};

// Setting for a grid value on an axis: alpha -> Setting 1, noise -> Setting 2
// with sigma = value, dimension -> Setting 3 with dim = value.
inline SettingSpec setting_for(Axis axis, double value, const CurveBase& base = {}) {
  switch (axis) {
    case Axis::kAlpha:
      return Setting1{value};
    case Axis::kNoise: {
      Setting2 s = base.setting2;
      s.sigma = value;
      return s;
    }
    case Axis::kDimension: {
      if (!(value >= 0.0 && value <= 4.0) || value != std::floor(value)) {
        throw DomainError("dimension grid values must be integers in [0, 4]");
      }
      Setting3 s = base.setting3;
      s.dim = static_cast<std::size_t>(value);
      return s;
    }
  }
  throw DomainError("unknown axis");
}

// Grid point k is sampled with seed + k. Degenerate grid points are recorded
// in CurvePoint::error and do not stop the sweep.
inline std::vector<CurvePoint> theory_curve(Axis axis, std::span<const double> grid,
                                            const Regime& regime, std::size_t n_samples,
                                            std::uint64_t seed, const CurveBase& base = {}) {
  if (grid.empty()) throw DomainError("grid must be nonempty");
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CurvePoint pt;
    pt.value = grid[k];
    const AlphaProfile profile = sample_alpha_profile(setting_for(axis, grid[k], base), n_samples,
                                                      seed + static_cast<std::uint64_t>(k));
    const Estimate br = profile_estimate(profile, [](double a, std::size_t) { return a; });
    pt.bayes_risk = br.mean;
    pt.bayes_risk_se = br.se;
    try {
      const Estimate sl = equilibrium_estimate(profile, regime);
      pt.social_loss = sl.mean;
      pt.social_loss_se = sl.se;
    } catch (const DegenerateInstanceError& e) {
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace mkteq
