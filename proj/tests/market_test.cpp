#include "mkteq/market.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"

namespace mkteq {
namespace {

using testing::Gen;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Population single_point(int y) { return Population(std::vector<LabeledPoint>{{{}, y, 1.0}}); }

TEST(PointLoss, AbsoluteDifference) {
  EXPECT_DOUBLE_EQ(point_loss(0.9, 1), 0.1);
  EXPECT_DOUBLE_EQ(point_loss(0.9, 0), 0.9);
  EXPECT_EQ(point_loss(1.0, 1), 0.0);
}

TEST(PointLoss, RejectsOutOfRangePrediction) {
  EXPECT_THROW(point_loss(1.5, 1), DomainError);
  EXPECT_THROW(point_loss(-0.1, 0), DomainError);
  EXPECT_THROW(point_loss(std::nan(""), 0), DomainError);
}

TEST(ChoiceProbabilities, EqualLossesSplitEvenly) {
  const auto p = choice_probabilities(std::vector{0.5, 0.5, 0.5}, MarketConfig::equal(3, 0.3));
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(ChoiceProbabilities, LogitWeights) {
  const auto p = choice_probabilities(std::vector{0.0, 1.0, 1.0}, MarketConfig::equal(3, 0.3));
  // Direct evaluation: weights 1, e^{-10/3}, e^{-10/3}.
  const double e = std::exp(-10.0 / 3.0);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + 2.0 * e), 1e-15);
  EXPECT_NEAR(p[1], e / (1.0 + 2.0 * e), 1e-15);
  EXPECT_NEAR(p[0], 0.9334, 1e-4);
  EXPECT_NEAR(p[1], 0.0333, 1e-4);
  EXPECT_NEAR(p[2], 0.0333, 1e-4);
}

TEST(ChoiceProbabilities, ReputationsWeightEqualLosses) {
  const auto p = choice_probabilities(std::vector{0.0, 0.0}, MarketConfig({0.7, 0.3}, 0.3));
  EXPECT_NEAR(p[0], 0.7, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
}

TEST(ChoiceProbabilities, Errors) {
  EXPECT_THROW(choice_probabilities(std::vector{0.0, 1.0}, MarketConfig::equal(2, 0.0)),
               NonSmoothError);
  EXPECT_THROW(choice_probabilities(std::vector{0.0, 1.0, 0.0}, MarketConfig::equal(2, 0.3)),
               DomainError);
}

TEST(NoiselessChoice, UniqueMinimizerTakesAll) {
  const auto p = noiseless_choice_probabilities(std::vector{0.0, 1.0}, std::vector{0.5, 0.5});
  EXPECT_EQ(p, (std::vector{1.0, 0.0}));
}

TEST(NoiselessChoice, TiesSplitRandomly) {
  const auto p = noiseless_choice_probabilities(std::vector{0.0, 0.0}, std::vector{0.5, 0.5});
  EXPECT_EQ(p, (std::vector{0.5, 0.5}));
}

TEST(NoiselessChoice, TiesSplitByReputation) {
  const auto p =
      noiseless_choice_probabilities(std::vector{0.2, 0.2, 0.9}, std::vector{0.6, 0.2, 0.2});
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  EXPECT_EQ(p[2], 0.0);
}

TEST(NoiselessChoice, TieDetectionRoundsTo12Digits) {
  const auto p = noiseless_choice_probabilities(std::vector{0.3, 0.3 + 1e-14},
                                                std::vector{0.5, 0.5});
  EXPECT_EQ(p, (std::vector{0.5, 0.5}));
  const auto q = noiseless_choice_probabilities(std::vector{0.3, 0.3 + 1e-11},
                                                std::vector{0.5, 0.5});
  EXPECT_EQ(q, (std::vector{1.0, 0.0}));
}

TEST(MarketConfig, Invariants) {
  EXPECT_THROW(MarketConfig({1.0}, 0.1), DomainError);
  EXPECT_THROW(MarketConfig({0.5, 0.6}, 0.1), DomainError);
  EXPECT_THROW(MarketConfig({0.5, 0.5}, -1.0), DomainError);
  EXPECT_THROW(MarketConfig({1.0, 0.0}, 0.1), DomainError);
  EXPECT_NO_THROW(MarketConfig::equal(7, 0.0));
  EXPECT_TRUE(MarketConfig::equal(2, 0.0).noiseless());
}

TEST(Population, InvariantsAndRepresentationIds) {
  std::vector<LabeledPoint> pts = {
      {{1.0, 2.0}, 1, 0.25}, {{0.0, 0.0}, 0, 0.25}, {{1.0, 2.0}, 0, 0.5}};
  const Population pop(pts);
  EXPECT_EQ(pop.size(), 3u);
  EXPECT_EQ(pop.dim(), 2u);
  EXPECT_DOUBLE_EQ(pop.total_weight(), 1.0);
  EXPECT_EQ(pop.distinct_count(), 2u);
  EXPECT_EQ(pop.rep_id(0), 0u);
  EXPECT_EQ(pop.rep_id(1), 1u);
  EXPECT_EQ(pop.rep_id(2), 0u);

  EXPECT_THROW(Population(std::vector<LabeledPoint>{}), DomainError);
  EXPECT_THROW(Population(std::vector<LabeledPoint>{{{1.0}, 0, 1.0}, {{1.0, 2.0}, 0, 1.0}}),
               DomainError);
  EXPECT_THROW(Population(std::vector<LabeledPoint>{{{1.0}, 2, 1.0}}), DomainError);
  EXPECT_THROW(Population(std::vector<LabeledPoint>{{{1.0}, 1, -1.0}}), DomainError);
  EXPECT_THROW(Population(std::vector<LabeledPoint>{{{1.0}, 1, 0.0}}), DomainError);
}

TEST(Population, CompressionMergesIdenticalPoints) {
  std::vector<LabeledPoint> pts = {{{}, 1, 0.25}, {{}, 0, 0.25}, {{}, 1, 0.5}};
  const Population c = Population(pts).compressed();
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.label(0), 1);
  EXPECT_DOUBLE_EQ(c.weight(0), 0.75);
  EXPECT_EQ(c.label(1), 0);
  EXPECT_DOUBLE_EQ(c.weight(1), 0.25);
}

TEST(ProviderUtilities, SymmetricStrategiesSplitEvenly) {
  Gen gen(3);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({{gen.normal(), gen.normal()}, gen.integer(0, 1), 1.0});
  const Population pop(pts);
  const LinearStrategy f{{0.3, -0.2}, 0.1, 0.5};
  for (int m : {2, 3}) {
    const std::vector<ProviderStrategy> s(m, f);
    for (double c : {0.0, 0.3}) {
      const auto u = provider_utilities(s, pop, MarketConfig::equal(m, c));
      for (double v : u) EXPECT_NEAR(v, 1.0 / m, 1e-15);
    }
  }
}

TEST(ProviderUtilities, NoiselessCorrectProviderWinsAll) {
  const Population pop = single_point(1);
  const std::vector<ProviderStrategy> s = {TabularStrategy{{1}}, TabularStrategy{{0}}};
  const auto u = provider_utilities(s, pop, MarketConfig::equal(2, 0.0));
  EXPECT_EQ(u, (std::vector{1.0, 0.0}));
  EXPECT_EQ(social_loss(s, pop, MarketConfig::equal(2, 0.0)), 0.0);
}

TEST(ProviderUtilities, DimensionMismatch) {
  const Population pop(std::vector<LabeledPoint>{{{1.0, 2.0}, 1, 1.0}});
  const std::vector<ProviderStrategy> bad = {LinearStrategy{{1.0}, 0.0, 1.0},
                                             LinearStrategy{{1.0, 1.0}, 0.0, 1.0}};
  EXPECT_THROW(provider_utilities(bad, pop, MarketConfig::equal(2, 0.3)), DomainError);
  EXPECT_THROW(social_loss(bad, pop, MarketConfig::equal(2, 0.3)), DomainError);
  const std::vector<ProviderStrategy> tab = {TabularStrategy{{1, 0}}, TabularStrategy{{1}}};
  EXPECT_THROW(provider_utilities(tab, pop, MarketConfig::equal(2, 0.0)), DomainError);
  const std::vector<ProviderStrategy> three(3, LinearStrategy{{1.0, 1.0}, 0.0, 1.0});
  EXPECT_THROW(provider_utilities(three, pop, MarketConfig::equal(2, 0.0)), DomainError);
}

TEST(SocialLoss, SingleProviderRiskAndIdenticalProviders) {
  Gen gen(5);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({{gen.normal()}, gen.integer(0, 1), gen.uniform(0.1, 1)});
  const Population pop(pts);
  const LinearStrategy f{{1.3}, -0.4, 0.7};
  // Direct risk: weighted mean of |y - f(x)|.
  double direct = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-(1.3 * pop.x(i)[0] - 0.4) / 0.7));
    direct += pop.weight(i) * std::abs(pop.label(i) - s);
  }
  direct /= pop.total_weight();
  EXPECT_NEAR(risk(f, pop), direct, 1e-14);
  for (int m : {2, 4}) {
    for (double c : {0.0, 0.1}) {
      const std::vector<ProviderStrategy> s(m, f);
      EXPECT_NEAR(social_loss(s, pop, MarketConfig::equal(m, c)), direct, 1e-14);
    }
  }
}

// Properties over random instances.

TEST(Properties, ChoiceRulesAreDistributions) {
  Gen gen(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = gen.integer(2, 7);
    const auto losses = gen.losses(m);
    const auto w = gen.simplex(m);
    const double c = gen.uniform(0.01, 2.0);
    for (const auto& p : {choice_probabilities(losses, MarketConfig(w, c)),
                          noiseless_choice_probabilities(losses, w)}) {
      EXPECT_NEAR(sum(p), 1.0, 1e-12);
      for (double v : p) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Properties, SmallNoiseApproachesNoiselessRule) {
  Gen gen(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = gen.integer(2, 6);
    const auto losses = gen.losses(m);
    const auto w = gen.simplex(m);
    const auto noisy = choice_probabilities(losses, MarketConfig(w, 1e-6));
    const auto exact = noiseless_choice_probabilities(losses, w);
    for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(noisy[j], exact[j], 1e-3);
  }
}

TEST(Properties, UtilitiesConstantSumAndPermutationEquivariant) {
  Gen gen(13);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = gen.integer(2, 5);
    const std::size_t dim = gen.integer(0, 3);
    std::vector<LabeledPoint> pts;
    for (int i = 0; i < 15; ++i) {
      std::vector<double> x(dim);
      for (auto& v : x) v = gen.normal();
      pts.push_back({x, gen.integer(0, 1), gen.uniform(0.1, 1.0)});
    }
    const Population pop(pts);
    std::vector<ProviderStrategy> s;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> w(dim);
      for (auto& v : w) v = gen.normal();
      s.emplace_back(LinearStrategy{w, gen.normal(), gen.uniform(0.1, 1.0)});
    }
    const auto reps = gen.simplex(m);
    const double c = gen.coin() ? 0.0 : gen.uniform(0.05, 1.0);
    const MarketConfig config(reps, c);
    const auto u = provider_utilities(s, pop, config);
    EXPECT_NEAR(sum(u), 1.0, 1e-12);

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), gen.engine());
    std::vector<ProviderStrategy> ps;
    std::vector<double> preps;
    for (std::size_t j : perm) {
      ps.push_back(s[j]);
      preps.push_back(reps[j]);
    }
    const auto pu = provider_utilities(ps, pop, MarketConfig(preps, c));
    for (std::size_t k = 0; k < m; ++k) EXPECT_NEAR(pu[k], u[perm[k]], 1e-12);

    // Social loss bounds.
    const double sl = social_loss(s, pop, config);
    double worst = 0.0;
    for (const auto& f : s) worst = std::max(worst, risk(f, pop));
    EXPECT_LE(sl, worst + 1e-12);
    if (c == 0.0) {
      double best = 0.0;
      for (std::size_t i = 0; i < pop.size(); ++i) {
        double lo = 1.0;
        for (const auto& f : s) lo = std::min(lo, point_loss(predict(f, pop, i), pop.label(i)));
        best += pop.weight(i) * lo;
      }
      EXPECT_GE(sl, best / pop.total_weight() - 1e-12);
    }
  }
}

}  // namespace
}  // namespace mkteq
