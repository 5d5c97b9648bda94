#pragma once

// Seeded generators for the three synthetic populations.
//
//   Setting 1: zero-dimensional representation, y ~ Bernoulli(alpha).
//   Setting 2: y ~ Bernoulli(prior_y1), x | y ~ N(+/-mu, sigma^2), one dimension.
//   Setting 3: four subpopulations with means mu_i, (mu_i)_d = 1[d >= i];
//              y fair coin, x_all | y ~ N(+/-mu_i, sigma^2 I_4), and the
//              representation is the first `dim` coordinates of x_all.
//
// Draws per point come from three streams of one seed (labels, subpopulation,
// features). Setting 3 always draws all four coordinates, so truncating a
// dim = 4 population equals generating with a smaller dim.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <variant>
#include <vector>

#include "mkteq/errors.hpp"
#include "mkteq/market.hpp"
#include "mkteq/rng.hpp"

namespace mkteq {

inline constexpr std::size_t kSetting3BaseDim = 4;
inline constexpr std::size_t kDefaultPopulationSize = 10000;

struct Setting1 {
  double alpha = 0.2;
};

struct Setting2 {
  double mu = 1.0;
  double sigma = 1.0;
  double prior_y1 = 0.4;
};

struct Setting3 {
  double sigma = 1.0;
  std::size_t dim = kSetting3BaseDim;
};

using SettingSpec = std::variant<Setting1, Setting2, Setting3>;

inline int setting_id(const SettingSpec& spec) noexcept {
  return static_cast<int>(spec.index()) + 1;
}

inline void validate(const SettingSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Setting1>) {
          if (!(s.alpha >= 0.0 && s.alpha <= 0.5)) throw DomainError("alpha must lie in [0, 0.5]");
        } else if constexpr (std::is_same_v<T, Setting2>) {
          if (!(s.sigma > 0.0)) throw DomainError("sigma must be positive");
          if (!(s.prior_y1 > 0.0 && s.prior_y1 < 1.0)) {
            throw DomainError("prior_y1 must lie in (0, 1)");
          }
        } else {
          if (!(s.sigma > 0.0)) throw DomainError("sigma must be positive");
          if (s.dim > kSetting3BaseDim) throw DomainError("Setting 3 dimension must lie in [0, 4]");
        }
      },
      spec);
}

// Mean of subpopulation i (1-based): coordinates d >= i are 1, earlier ones 0.
inline std::array<double, kSetting3BaseDim> setting3_mean(std::size_t i) {
  if (i < 1 || i > kSetting3BaseDim) throw DomainError("subpopulation index must lie in [1, 4]");
  std::array<double, kSetting3BaseDim> mu{};
  for (std::size_t d = 1; d <= kSetting3BaseDim; ++d) mu[d - 1] = d >= i ? 1.0 : 0.0;
  return mu;
}

inline void check_size(std::size_t n) {
  if (n < 1) throw DomainError("population size must be at least 1");
}

inline Population gen_setting1(double alpha, std::size_t n, std::uint64_t seed) {
  validate(Setting1{alpha});
  check_size(n);
  Rng labels(seed, Stream::kLabels);
  std::vector<int> y(n);
  for (auto& v : y) v = labels.bernoulli(alpha) ? 1 : 0;
  return Population::uniform(0, {}, std::move(y));
}

inline Population gen_setting2(const Setting2& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  check_size(n);
  Rng labels(seed, Stream::kLabels);
  Rng features(seed, Stream::kFeatures);
  std::vector<int> y(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels.bernoulli(spec.prior_y1) ? 1 : 0;
    x[i] = (y[i] == 1 ? spec.mu : -spec.mu) + spec.sigma * features.normal();
  }
  return Population::uniform(1, std::move(x), std::move(y));
}

inline Population gen_setting3(const Setting3& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  check_size(n);
  Rng labels(seed, Stream::kLabels);
  Rng subpop(seed, Stream::kSubpopulation);
  Rng features(seed, Stream::kFeatures);
  std::vector<int> y(n);
  std::vector<double> x;
  x.reserve(n * spec.dim);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels.bernoulli(0.5) ? 1 : 0;
    const auto mu = setting3_mean(1 + subpop.below(kSetting3BaseDim));
    const double sign = y[i] == 1 ? 1.0 : -1.0;
    for (std::size_t d = 0; d < kSetting3BaseDim; ++d) {
      const double v = sign * mu[d] + spec.sigma * features.normal();
      if (d < spec.dim) x.push_back(v);
    }
  }
  return Population::uniform(spec.dim, std::move(x), std::move(y));
}

inline Population generate(const SettingSpec& spec, std::size_t n, std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> Population {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Setting1>) {
          return gen_setting1(s.alpha, n, seed);
        } else if constexpr (std::is_same_v<T, Setting2>) {
          return gen_setting2(s, n, seed);
        } else {
          return gen_setting3(s, n, seed);
        }
      },
      spec);
}

// Keeps the first `dim` coordinates of every representation.
inline Population truncate(const Population& pop, std::size_t dim) {
  if (dim > pop.dim()) throw DomainError("cannot truncate to a larger dimension");
  std::vector<double> x;
  x.reserve(pop.size() * dim);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto xi = pop.x(i);
    x.insert(x.end(), xi.begin(), xi.begin() + static_cast<std::ptrdiff_t>(dim));
  }
  std::vector<int> y(pop.labels().begin(), pop.labels().end());
  std::vector<double> w(pop.weights().begin(), pop.weights().end());
  return Population(dim, std::move(x), std::move(y), std::move(w));
}

// Maps every representation through a fixed random matrix A (out_dim x dim)
// with i.i.d. N(0, 1/out_dim) entries, so norms are preserved on average.
inline Population random_linear_embedding(const Population& pop, std::size_t out_dim,
                                          std::uint64_t seed) {
  if (out_dim < 1) throw DomainError("embedding dimension must be at least 1");
  Rng rng(seed, Stream::kEmbedding);
  const std::size_t in_dim = pop.dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
  std::vector<double> a(out_dim * in_dim);
  for (auto& v : a) v = scale * rng.normal();
  std::vector<double> x(pop.size() * out_dim, 0.0);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto xi = pop.x(i);
    for (std::size_t r = 0; r < out_dim; ++r) {
      x[i * out_dim + r] = dot(std::span<const double>(a.data() + r * in_dim, in_dim), xi);
    }
  }
  std::vector<int> y(pop.labels().begin(), pop.labels().end());
  std::vector<double> w(pop.weights().begin(), pop.weights().end());
  return Population(out_dim, std::move(x), std::move(y), std::move(w));
}

}  // namespace mkteq
