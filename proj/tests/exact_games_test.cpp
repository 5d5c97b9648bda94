#include "mkteq/exact_games.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mkteq/synth.hpp"
#include "test_support.hpp"

namespace mkteq {
namespace {

using testing::Gen;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Brute-force oracle: enumerate profiles and check every unilateral flip
// through game_payoffs, without the O(1) camp shortcut.
std::vector<PureProfile> brute_force_equilibria(const PerRepGame& game) {
  std::vector<PureProfile> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << game.m()); ++mask) {
    PureProfile p{std::vector<int>(game.m())};
    for (std::size_t j = 0; j < game.m(); ++j) p.labels[j] = (mask >> j) & 1U ? 1 : 0;
    if (is_pure_equilibrium(game, p)) out.push_back(p);
  }
  return out;
}

TEST(GamePayoffs, Examples) {
  const auto a = game_payoffs(PerRepGame::equal(0.4, 2), PureProfile{{1, 0}});
  EXPECT_NEAR(a[0], 0.6, 1e-15);
  EXPECT_NEAR(a[1], 0.4, 1e-15);
  const auto b = game_payoffs(PerRepGame::two_providers(0.4, 0.3), PureProfile{{1, 1}});
  EXPECT_NEAR(b[0], 0.7, 1e-15);
  EXPECT_NEAR(b[1], 0.3, 1e-15);
  const auto c = game_payoffs(PerRepGame::equal(0.4, 3), PureProfile{{1, 1, 0}});
  EXPECT_NEAR(c[0], 0.3, 1e-15);
  EXPECT_NEAR(c[1], 0.3, 1e-15);
  EXPECT_NEAR(c[2], 0.4, 1e-15);
  EXPECT_THROW(game_payoffs(PerRepGame::equal(0.4, 3), PureProfile{{1, 1}}), DomainError);
}

TEST(GamePayoffs, BayesLabelZeroMirrorsLabelOne) {
  const PerRepGame g1(0.3, {0.5, 0.3, 0.2}, 1);
  const PerRepGame g0(0.3, {0.5, 0.3, 0.2}, 0);
  EXPECT_EQ(game_payoffs(g1, PureProfile{{1, 0, 1}}), game_payoffs(g0, PureProfile{{0, 1, 0}}));
}

TEST(PerRepGame, Invariants) {
  EXPECT_THROW(PerRepGame(0.6, {0.5, 0.5}), DomainError);
  EXPECT_THROW(PerRepGame(0.2, {1.0}), DomainError);
  EXPECT_THROW(PerRepGame(0.2, {0.6, 0.6}), DomainError);
  EXPECT_THROW(PerRepGame(0.2, {0.5, 0.5}, 2), DomainError);
}

TEST(EnumeratePure, Examples) {
  const auto a = enumerate_pure_equilibria(PerRepGame::equal(0.2, 3));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].labels, (std::vector{1, 1, 1}));

  const auto b = enumerate_pure_equilibria(PerRepGame::equal(0.4, 3));
  ASSERT_EQ(b.size(), 3u);
  for (const auto& p : b) EXPECT_EQ(p.count(1), 2u);

  EXPECT_TRUE(enumerate_pure_equilibria(PerRepGame::two_providers(0.4, 0.3)).empty());
}

TEST(EnumeratePure, Capacity) {
  EXPECT_THROW(enumerate_pure_equilibria(PerRepGame::equal(0.1, 21)), CapacityError);
  EXPECT_NO_THROW(enumerate_pure_equilibria(PerRepGame::equal(0.1, 12)));
}

TEST(SolveMixed, Examples) {
  const auto g = PerRepGame::two_providers(0.4, 0.3);
  const auto p = solve_mixed_2p(g);
  EXPECT_NEAR(p.p1, 0.75, 1e-15);
  EXPECT_NEAR(p.p2, 0.25, 1e-15);
  EXPECT_NEAR(p.p1 + p.p2, 1.0, 1e-15);
  const auto q = solve_mixed_2p(PerRepGame::two_providers(0.2, 0.3));
  EXPECT_EQ(q.p1, 1.0);
  EXPECT_EQ(q.p2, 1.0);
  const auto h = solve_mixed_2p(PerRepGame::two_providers(0.3, 0.5));
  EXPECT_EQ(h.p1, 1.0);
  EXPECT_EQ(h.p2, 1.0);
}

TEST(SolveMixed, Errors) {
  EXPECT_THROW(solve_mixed_2p(PerRepGame::two_providers(0.3, 0.3)), DegenerateInstanceError);
  EXPECT_THROW(solve_mixed_2p(PerRepGame::equal(0.3, 3)), DomainError);
}

TEST(SolveMixed, ReversedReputationOrder) {
  // Provider 1 holds w_min here; the solution mirrors.
  const auto p = solve_mixed_2p(PerRepGame(0.4, {0.3, 0.7}));
  EXPECT_NEAR(p.p1, 0.25, 1e-15);
  EXPECT_NEAR(p.p2, 0.75, 1e-15);
}

TEST(ExpectedSocialLoss, Examples) {
  const auto g = PerRepGame::two_providers(0.4, 0.3);
  EXPECT_NEAR(expected_social_loss_2p(g, solve_mixed_2p(g)), 0.1875, 1e-15);
  EXPECT_NEAR(expected_social_loss_2p(PerRepGame::two_providers(0.2, 0.3), {1, 1}), 0.2, 1e-15);
  EXPECT_EQ(expected_social_loss_2p(g, {1, 0}), 0.0);
  EXPECT_THROW(expected_social_loss_2p(g, {1.5, 0}), DomainError);
}

TEST(Assemble, Examples) {
  const AlphaProfile p({{0.2, 0.5}, {0.4, 0.5}});
  EXPECT_NEAR(assemble_population(p, EqualReputations{3}).social_loss, 0.1, 1e-15);
  EXPECT_NEAR(assemble_population(p, TwoProviders{0.3}).social_loss, 0.19375, 1e-15);
  EXPECT_NEAR(assemble_population(p, EqualReputations{2}).social_loss, bayes_risk(p), 1e-15);
}

TEST(Assemble, DegenerateEntryNamed) {
  const AlphaProfile p({{0.1, 0.25}, {0.2, 0.25}, {0.3, 0.5}});
  try {
    assemble_population(p, TwoProviders{0.3});
    FAIL();
  } catch (const DegenerateInstanceError& e) {
    EXPECT_EQ(e.entry(), 2u);
  }
  try {
    assemble_population(AlphaProfile({{0.1, 0.5}, {0.25, 0.5}}), EqualReputations{4});
    FAIL();
  } catch (const DegenerateInstanceError& e) {
    EXPECT_EQ(e.entry(), 1u);
  }
}

TEST(PopulationLevel, RepresentationRecords) {
  std::vector<LabeledPoint> pts = {
      {{0.0}, 1, 1}, {{0.0}, 0, 1}, {{0.0}, 0, 1}, {{0.0}, 0, 1}, {{1.0}, 1, 1}, {{1.0}, 1, 1}};
  const auto recs = representation_records(Population(pts));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_NEAR(recs[0].alpha, 0.25, 1e-15);
  EXPECT_EQ(recs[0].bayes_label, 0);
  EXPECT_NEAR(recs[0].weight, 4.0 / 6.0, 1e-15);
  EXPECT_EQ(recs[1].alpha, 0.0);
  EXPECT_EQ(recs[1].bayes_label, 1);
}

TEST(PopulationLevel, EquilibriumLabelingIsEquilibrium) {
  const Population pop = gen_setting1(0.2, 500, 3);
  for (std::size_t m : {2, 3, 4}) {
    const auto s = equilibrium_labeling(pop, m);
    const std::vector<double> reps(m, 1.0 / static_cast<double>(m));
    EXPECT_TRUE(is_population_equilibrium(pop, s, reps));
    std::vector<ProviderStrategy> ps(s.begin(), s.end());
    const double sl = social_loss(ps, pop, MarketConfig::equal(static_cast<int>(m), 0.0));
    EXPECT_NEAR(sl, prop1_social_loss(alpha_profile_of(pop), m), 1e-12);
  }
}

TEST(PopulationLevel, NonEquilibriumDetected) {
  // Everybody on the minority label is never stable at small alpha.
  const Population pop = gen_setting1(0.1, 200, 4);
  const std::vector<TabularStrategy> s(3, TabularStrategy{{1}});
  EXPECT_FALSE(is_population_equilibrium(pop, s, std::vector<double>(3, 1.0 / 3)));
}

// Properties.

TEST(Properties, FastEnumerationMatchesBruteForce) {
  Gen gen(41);
  for (int t = 0; t < 300; ++t) {
    const std::size_t m = gen.integer(2, 6);
    const double alpha = gen.coin() ? gen.integer(0, 10) / 20.0 : gen.uniform(0, 0.5);
    const PerRepGame g(alpha, gen.coin() ? std::vector<double>(m, 1.0 / m) : gen.simplex(m));
    EXPECT_EQ(enumerate_pure_equilibria(g), brute_force_equilibria(g))
        << "alpha " << alpha << " m " << m;
  }
}

TEST(Properties, EqualReputationExistenceAndUniqueLoss) {
  for (std::size_t m = 2; m <= 6; ++m) {
    for (int k = 0; k <= 100; ++k) {
      const double alpha = 0.005 * k;
      if (std::abs(alpha - 1.0 / m) <= kDegeneracyTolerance) continue;
      const auto g = PerRepGame::equal(alpha, m);
      const auto eqs = enumerate_pure_equilibria(g);
      ASSERT_FALSE(eqs.empty()) << alpha << " " << m;
      const double expected = alpha < 1.0 / m ? alpha : 0.0;
      for (const auto& p : eqs) EXPECT_NEAR(per_rep_social_loss(g, p), expected, 1e-12);
    }
  }
}

TEST(Properties, PayoffsSumToOne) {
  Gen gen(42);
  for (int t = 0; t < 500; ++t) {
    const std::size_t m = gen.integer(2, 7);
    const PerRepGame g(gen.uniform(0, 0.5), gen.simplex(m), gen.integer(0, 1));
    PureProfile p{std::vector<int>(m)};
    for (auto& y : p.labels) y = gen.integer(0, 1);
    EXPECT_NEAR(sum(game_payoffs(g, p)), 1.0, 1e-12);
  }
}

TEST(Properties, MixedSolutionIndifferentAndMatchesProp2) {
  for (double w_min : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    for (int k = 0; k <= 100; ++k) {
      const double alpha = 0.005 * k;
      if (std::abs(alpha - w_min) <= kDegeneracyTolerance) continue;
      const auto g = PerRepGame::two_providers(alpha, w_min);
      const auto p = solve_mixed_2p(g);
      for (std::size_t j = 0; j < 2; ++j) {
        const double on = mixed_payoff_2p(g, p, j, 1);
        const double off = mixed_payoff_2p(g, p, j, 0);
        const double mix = j == 0 ? p.p1 : p.p2;
        if (mix > 0.0 && mix < 1.0) {
          EXPECT_NEAR(on, off, 1e-12);
        } else {
          EXPECT_GE(on, off - 1e-12);
        }
      }
      EXPECT_NEAR(expected_social_loss_2p(g, p),
                  prop2_social_loss(AlphaProfile::single(alpha), w_min), 1e-12);
    }
  }
}

TEST(Properties, AssemblyMatchesClosedForm) {
  Gen gen(43);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = gen.integer(1, 20);
    const auto w = gen.simplex(n);
    std::vector<AlphaEntry> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = {gen.uniform(0, 0.5), w[i]};
    const AlphaProfile profile(e);
    const std::size_t m = gen.integer(2, 6);
    const double w_min = gen.uniform(0.05, 0.5);
    EXPECT_NEAR(assemble_population(profile, EqualReputations{m}).social_loss,
                prop1_social_loss(profile, m), 1e-12);
    EXPECT_NEAR(assemble_population(profile, TwoProviders{w_min}).social_loss,
                prop2_social_loss(profile, w_min), 1e-12);
  }
}

}  // namespace
}  // namespace mkteq
