#pragma once

// Market primitives: populations of labeled representations, market
// configuration, provider strategies, user choice rules, and the payoff and
// welfare functionals built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "mkteq/errors.hpp"

namespace mkteq {

struct LabeledPoint {
  std::vector<double> x;
  int y = 0;
  double weight = 1.0;
};

// A finite weighted dataset standing in for the user distribution.
// Feature vectors are stored row-major in one buffer. Points with identical
// feature vectors share a representation id (ids in first-appearance order).
class Population {
 public:
  explicit Population(std::span<const LabeledPoint> points) {
    if (points.empty()) throw DomainError("population must be nonempty");
    dim_ = points.front().x.size();
    features_.reserve(points.size() * dim_);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (p.x.size() != dim_) {
        throw DomainError("point " + std::to_string(i) + " has dimension " +
                          std::to_string(p.x.size()) + ", expected " + std::to_string(dim_));
      }
      features_.insert(features_.end(), p.x.begin(), p.x.end());
      labels_.push_back(check_label(p.y, i));
      weights_.push_back(check_weight(p.weight, i));
    }
    finish();
  }

  explicit Population(const std::vector<LabeledPoint>& points)
      : Population(std::span<const LabeledPoint>(points)) {}

  // Row-major features (size n * dim), labels, and weights.
  Population(std::size_t dim, std::vector<double> features, std::vector<int> labels,
             std::vector<double> weights)
      : dim_(dim), features_(std::move(features)), labels_(std::move(labels)),
        weights_(std::move(weights)) {
    if (labels_.empty()) throw DomainError("population must be nonempty");
    if (weights_.size() != labels_.size() || features_.size() != labels_.size() * dim_) {
      throw DomainError("population buffers have inconsistent sizes");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      check_label(labels_[i], i);
      check_weight(weights_[i], i);
    }
    finish();
  }

  // Each point gets weight 1/N.
  static Population uniform(std::size_t dim, std::vector<double> features,
                            std::vector<int> labels) {
    const std::size_t n = labels.size();
    std::vector<double> weights(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
    return Population(dim, std::move(features), std::move(labels), std::move(weights));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  double total_weight() const noexcept { return total_weight_; }

  std::span<const double> x(std::size_t i) const noexcept {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const noexcept { return labels_[i]; }
  double weight(std::size_t i) const noexcept { return weights_[i]; }

  std::span<const double> features() const noexcept { return features_; }
  std::span<const int> labels() const noexcept { return labels_; }
  std::span<const double> weights() const noexcept { return weights_; }

  LabeledPoint point(std::size_t i) const {
    auto xi = x(i);
    return {std::vector<double>(xi.begin(), xi.end()), labels_[i], weights_[i]};
  }

  std::size_t rep_id(std::size_t i) const noexcept { return rep_ids_[i]; }
  std::size_t distinct_count() const noexcept { return distinct_count_; }

  bool has_uniform_weights() const noexcept {
    return std::all_of(weights_.begin(), weights_.end(),
                       [&](double w) { return w == weights_.front(); });
  }

  // Merges points with identical (x, y), summing weights. Every weighted
  // average over the population is unchanged; first-appearance order is kept.
  Population compressed() const {
    std::vector<std::size_t> slot(distinct_count_ * 2, kNone);
    std::vector<double> features;
    std::vector<int> labels;
    std::vector<double> weights;
    for (std::size_t i = 0; i < size(); ++i) {
      std::size_t& s = slot[rep_ids_[i] * 2 + static_cast<std::size_t>(labels_[i])];
      if (s == kNone) {
        s = labels.size();
        auto xi = x(i);
        features.insert(features.end(), xi.begin(), xi.end());
        labels.push_back(labels_[i]);
        weights.push_back(weights_[i]);
      } else {
        weights[s] += weights_[i];
      }
    }
    return Population(dim_, std::move(features), std::move(labels), std::move(weights));
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  static int check_label(int y, std::size_t i) {
    if (y != 0 && y != 1) {
      throw DomainError("point " + std::to_string(i) + " has non-binary label " +
                        std::to_string(y));
    }
    return y;
  }

  static double check_weight(double w, std::size_t i) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("point " + std::to_string(i) + " has invalid weight");
    }
    return w;
  }

  void finish() {
    total_weight_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (!(total_weight_ > 0.0)) throw DomainError("population total weight must be positive");

    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
      auto xa = x(a);
      auto xb = x(b);
      if (std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end())) return true;
      if (std::lexicographical_compare(xb.begin(), xb.end(), xa.begin(), xa.end())) return false;
      return a < b;
    };
    std::sort(order.begin(), order.end(), less);

    // Groups of equal vectors are contiguous in `order`, leader = smallest index.
    rep_ids_.assign(size(), kNone);
    std::vector<std::pair<std::size_t, std::size_t>> leaders;  // (first index, group start)
    for (std::size_t k = 0; k < order.size();) {
      std::size_t end = k + 1;
      auto xk = x(order[k]);
      while (end < order.size()) {
        auto xe = x(order[end]);
        if (!std::equal(xk.begin(), xk.end(), xe.begin(), xe.end())) break;
        ++end;
      }
      leaders.emplace_back(order[k], k);
      for (std::size_t t = k; t < end; ++t) rep_ids_[order[t]] = leaders.size() - 1;
      k = end;
    }
    // Renumber groups by first appearance.
    std::vector<std::size_t> group_rank(leaders.size());
    std::vector<std::size_t> by_first(leaders.size());
    std::iota(by_first.begin(), by_first.end(), std::size_t{0});
    std::sort(by_first.begin(), by_first.end(),
              [&](std::size_t a, std::size_t b) { return leaders[a].first < leaders[b].first; });
    for (std::size_t r = 0; r < by_first.size(); ++r) group_rank[by_first[r]] = r;
    for (auto& id : rep_ids_) id = group_rank[id];
    distinct_count_ = leaders.size();
  }

  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<double> weights_;
  double total_weight_ = 0.0;
  std::vector<std::size_t> rep_ids_;
  std::size_t distinct_count_ = 0;
};

// Number of providers, choice noise c (0 = noiseless limit), and market
// reputations w_1..w_m summing to one.
class MarketConfig {
 public:
  MarketConfig(std::vector<double> reputations, double c)
      : reputations_(std::move(reputations)), c_(c) {
    if (reputations_.size() < 2) throw DomainError("market needs at least two providers");
    if (!(c_ >= 0.0) || !std::isfinite(c_)) throw DomainError("choice noise c must be >= 0");
    double sum = 0.0;
    for (double w : reputations_) {
      if (!(w > 0.0)) throw DomainError("market reputations must be positive");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError("market reputations must sum to 1");
  }

  static MarketConfig equal(int m, double c) {
    if (m < 2) throw DomainError("market needs at least two providers");
    return MarketConfig(std::vector<double>(static_cast<std::size_t>(m), 1.0 / m), c);
  }

  // Two providers with reputations (1 - w_min, w_min).
  static MarketConfig two_providers(double w_min, double c) {
    if (!(w_min > 0.0 && w_min <= 0.5)) throw DomainError("w_min must lie in (0, 0.5]");
    return MarketConfig({1.0 - w_min, w_min}, c);
  }

  std::size_t m() const noexcept { return reputations_.size(); }
  double c() const noexcept { return c_; }
  bool noiseless() const noexcept { return c_ == 0.0; }
  const std::vector<double>& reputations() const noexcept { return reputations_; }

 private:
  std::vector<double> reputations_;
  double c_;
};

// One label per distinct representation of the paired population.
struct TabularStrategy {
  std::vector<int> labels;
};

// f(x) = sigmoid((<w, x> + b) / tau).
struct LinearStrategy {
  std::vector<double> w;
  double b = 0.0;
  double tau = 1.0;
};

using ProviderStrategy = std::variant<TabularStrategy, LinearStrategy>;

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  // Four fixed accumulators: vectorizes without reassociation, stays deterministic.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline double predict(const LinearStrategy& f, std::span<const double> x) noexcept {
  return sigmoid((dot(f.w, x) + f.b) / f.tau);
}

inline void check_compatible(const ProviderStrategy& s, const Population& pop) {
  if (const auto* t = std::get_if<TabularStrategy>(&s)) {
    if (t->labels.size() != pop.distinct_count()) {
      throw DomainError("tabular strategy has " + std::to_string(t->labels.size()) +
                        " labels but population has " + std::to_string(pop.distinct_count()) +
                        " distinct representations");
    }
    for (int y : t->labels) {
      if (y != 0 && y != 1) throw DomainError("tabular labels must be 0 or 1");
    }
  } else {
    const auto& f = std::get<LinearStrategy>(s);
    if (f.w.size() != pop.dim()) {
      throw DomainError("linear strategy dimension " + std::to_string(f.w.size()) +
                        " does not match population dimension " + std::to_string(pop.dim()));
    }
    if (!(f.tau > 0.0)) throw DomainError("temperature must be positive");
  }
}

// Prediction of strategy s on point i of pop (caller checked compatibility).
inline double predict(const ProviderStrategy& s, const Population& pop, std::size_t i) {
  if (const auto* t = std::get_if<TabularStrategy>(&s)) {
    return static_cast<double>(t->labels[pop.rep_id(i)]);
  }
  return predict(std::get<LinearStrategy>(s), pop.x(i));
}

// l(f(x), y) = |y - f(x)|.
inline double point_loss(double prediction, int y) {
  if (!(prediction >= 0.0 && prediction <= 1.0)) {
    throw DomainError("prediction must lie in [0, 1]");
  }
  if (y != 0 && y != 1) throw DomainError("label must be 0 or 1");
  return y == 1 ? 1.0 - prediction : prediction;
}

// Weighted logit: p_j proportional to w_j * exp(-l_j / c). Requires c > 0.
inline std::vector<double> choice_probabilities(std::span<const double> losses,
                                                const MarketConfig& config) {
  if (losses.size() != config.m()) throw DomainError("losses length must equal m");
  if (config.noiseless()) {
    throw NonSmoothError("c = 0: use noiseless_choice_probabilities");
  }
  const double lmin = *std::min_element(losses.begin(), losses.end());
  std::vector<double> p(losses.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = config.reputations()[j] * std::exp(-(losses[j] - lmin) / config.c());
    z += p[j];
  }
  for (double& v : p) v /= z;
  return p;
}

// c -> 0 limit: all mass on the argmin of the losses, split proportionally to
// reputations. Losses are compared after rounding to 12 decimal digits.
inline std::vector<double> noiseless_choice_probabilities(std::span<const double> losses,
                                                          std::span<const double> reputations) {
  if (losses.size() != reputations.size() || losses.empty()) {
    throw DomainError("losses and reputations must have equal nonzero length");
  }
  std::vector<double> rounded(losses.size());
  for (std::size_t j = 0; j < losses.size(); ++j) rounded[j] = std::nearbyint(losses[j] * 1e12);
  const double best = *std::min_element(rounded.begin(), rounded.end());
  double mass = 0.0;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (rounded[j] == best) mass += reputations[j];
  }
  std::vector<double> p(losses.size(), 0.0);
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (rounded[j] == best) p[j] = reputations[j] / mass;
  }
  return p;
}

// Dispatches on c: noiseless rule when c == 0, weighted logit otherwise.
inline std::vector<double> user_choice(std::span<const double> losses,
                                       const MarketConfig& config) {
  if (config.noiseless()) return noiseless_choice_probabilities(losses, config.reputations());
  return choice_probabilities(losses, config);
}

namespace detail {

// Visits every point with its per-provider losses and choice probabilities.
template <typename Fn>
void for_each_choice(std::span<const ProviderStrategy> strategies, const Population& pop,
                     const MarketConfig& config, Fn&& fn) {
  if (strategies.size() != config.m()) {
    throw DomainError("expected " + std::to_string(config.m()) + " strategies, got " +
                      std::to_string(strategies.size()));
  }
  for (const auto& s : strategies) check_compatible(s, pop);
  std::vector<double> losses(strategies.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    for (std::size_t j = 0; j < strategies.size(); ++j) {
      losses[j] = point_loss(predict(strategies[j], pop, i), pop.label(i));
    }
    fn(i, std::span<const double>(losses), user_choice(losses, config));
  }
}

}  // namespace detail

// u_j = weighted population average of Prob[user picks j].
inline std::vector<double> provider_utilities(std::span<const ProviderStrategy> strategies,
                                              const Population& pop,
                                              const MarketConfig& config) {
  std::vector<double> u(config.m(), 0.0);
  detail::for_each_choice(strategies, pop, config,
                          [&](std::size_t i, std::span<const double>, const std::vector<double>& p) {
                            for (std::size_t j = 0; j < u.size(); ++j) u[j] += pop.weight(i) * p[j];
                          });
  for (double& v : u) v /= pop.total_weight();
  return u;
}

// Expected loss of the provider each user selects.
inline double social_loss(std::span<const ProviderStrategy> strategies, const Population& pop,
                          const MarketConfig& config) {
  double total = 0.0;
  detail::for_each_choice(
      strategies, pop, config,
      [&](std::size_t i, std::span<const double> losses, const std::vector<double>& p) {
        double point = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) point += p[j] * losses[j];
        total += pop.weight(i) * point;
      });
  return total / pop.total_weight();
}

// E[l(f(x), y)] for a single provider.
inline double risk(const ProviderStrategy& s, const Population& pop) {
  check_compatible(s, pop);
  double total = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    total += pop.weight(i) * point_loss(predict(s, pop, i), pop.label(i));
  }
  return total / pop.total_weight();
}

}  // namespace mkteq
