#include <gtest/gtest.h>

#include "offswitch/payoff.hpp"
#include "oracles.hpp"

using namespace offswitch;

namespace {

BivariatePosterior random_posterior(std::mt19937& rng) {
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::uniform_real_distribution<double> r(-0.95, 0.95);
  const double kxx = u(rng), koo = u(rng);
  return {n(rng), n(rng), kxx, koo, r(rng) * std::sqrt(kxx * koo)};
}

struct NoiseEstimates {
  oracle::Stat def, block, imm, don;
};

NoiseEstimates noise_oracle(const BivariatePosterior& bp, double sigma, std::uint64_t seed, int draws = 1000000) {
  oracle::BivariateSampler s(bp.mu_x, bp.mu_o, bp.k_xx, bp.k_oo, bp.k_xo, seed);
  oracle::Accumulator def, block, imm, don;
  for (int i = 0; i < draws; ++i) {
    const auto d = s();
    const bool x_wins = d.a + sigma * d.na > d.b + sigma * d.nb;
    def.add(x_wins ? d.a : d.b);
    block.add(x_wins ? d.a : 0.0);
    imm.add(d.a);
    don.add(d.b);
  }
  return {def.stat(), block.stat(), imm.stat(), don.stat()};
}

std::pair<oracle::Stat, oracle::Stat> threshold_oracle(const BivariatePosterior& bp, double sigma, double eps,
                                                       std::uint64_t seed) {
  oracle::BivariateSampler s(bp.mu_x, bp.mu_o, bp.k_xx, bp.k_oo, bp.k_xo, seed);
  oracle::Accumulator kx, ko;
  for (int i = 0; i < 1000000; ++i) {
    const auto d = s();
    if (d.a - d.b > sigma) {
      kx.add(d.a);
      ko.add(d.a);
    } else if (d.b - d.a > sigma) {
      kx.add(d.b);
      ko.add(d.b);
    } else {
      kx.add(d.a - eps);
      ko.add(d.b - eps);
    }
  }
  return {kx.stat(), ko.stat()};
}

}  // namespace

TEST(DefBuildingBlock, Examples) {
  const BivariatePosterior iid{0, 0, 1, 1, 0};
  EXPECT_NEAR(def_building_block(iid, 0.0), 0.28209479177387814, 1e-15);

  const BivariatePosterior point{1, 0, 0, 0, 0};
  const double b = def_building_block(point, 1.0);
  EXPECT_NEAR(b, oracle::cdf(1 / std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(b, 0.76025, 1e-5);
  const auto mc = noise_oracle(point, 1.0, 1);
  EXPECT_TRUE(mc.block.covers(b)) << mc.block.mean << " +- " << mc.block.se;
}

TEST(DefBuildingBlock, MatchesMonteCarlo) {
  std::mt19937 rng(31);
  int misses = 0;
  for (int t = 0; t < 5; ++t) {
    const auto bp = random_posterior(rng);
    const auto mc = noise_oracle(bp, 0.7, 100 + t);
    misses += !mc.block.covers(def_building_block(bp, 0.7));
  }
  EXPECT_LE(misses, 1);
}

TEST(DefBuildingBlock, Degenerate) {
  EXPECT_EQ(def_building_block({2, 1, 0, 0, 0}, 0.0), 2.0);
  EXPECT_EQ(def_building_block({1, 2, 0, 0, 0}, 0.0), 0.0);
  EXPECT_THROW(def_building_block({1, 1, 0, 0, 0}, 0.0), InvalidArgument);
  // perfectly correlated equal variances: the difference is deterministic
  EXPECT_EQ(def_building_block({3, 1, 1, 1, 1}, 0.0), 3.0);
  EXPECT_THROW(def_building_block({0, 0, 1, 1, 0}, -1.0), InvalidArgument);
  EXPECT_THROW(def_building_block({0, 0, 1, 1, 2}, 0.0), InvalidArgument);
}

TEST(PayoffsNoise, Examples) {
  const auto p = payoffs_noise({0, 0, 1, 1, 0}, 0.0);
  EXPECT_NEAR(p.def_scalar(), 1 / std::sqrt(M_PI), 1e-15);
  EXPECT_EQ(p.imm_value, 0.0);
  EXPECT_EQ(p.don_value, 0.0);
  EXPECT_EQ(p.beta, 0.0);
  EXPECT_FALSE(p.set_valued());

  const auto q = payoffs_noise({1, 0, 0, 0, 0}, 1.0);
  EXPECT_NEAR(q.def_scalar(), oracle::cdf(1 / std::sqrt(2.0)), 1e-12);
  EXPECT_LT(q.def_scalar(), q.imm_value);
  EXPECT_THROW((void)q.def_set(), InvalidArgument);
}

TEST(PayoffsNoise, SumOfBuildingBlocks) {
  std::mt19937 rng(2);
  for (int t = 0; t < 500; ++t) {
    const auto bp = random_posterior(rng);
    const double sigma = t % 5 == 0 ? 0.0 : std::abs(std::normal_distribution<double>(0, 1)(rng));
    const auto p = payoffs_noise(bp, sigma);
    const double sum = def_building_block(bp, sigma) + def_building_block(swapped(bp), sigma);
    EXPECT_NEAR(p.def_scalar(), sum, 1e-12 * (1 + std::abs(sum)));
    EXPECT_GE(p.p, 0.0);
    EXPECT_LE(p.p, 1.0);
    // def = p mu_x + (1 - p) mu_o + e (the building blocks regrouped)
    EXPECT_NEAR(p.def_scalar(), p.p * bp.mu_x + (1 - p.p) * bp.mu_o + p.e, 1e-12 * (1 + std::abs(sum)));
  }
}

TEST(PayoffsNoise, MatchesMonteCarlo) {
  std::mt19937 rng(41);
  int misses = 0;
  for (int t = 0; t < 5; ++t) {
    const auto bp = random_posterior(rng);
    const double sigma = 0.2 * t;
    const auto p = payoffs_noise(bp, sigma);
    const auto mc = noise_oracle(bp, sigma, 200 + t);
    misses += !mc.def.covers(p.def_scalar());
    misses += !mc.imm.covers(p.imm_value);
    misses += !mc.don.covers(p.don_value);
  }
  EXPECT_LE(misses, 1);
}

TEST(PayoffsNoise, JensenBoundWhenRational) {
  std::mt19937 rng(5);
  for (int t = 0; t < 1000; ++t) {
    const auto bp = random_posterior(rng);
    const auto p = payoffs_noise(bp, 0.0);
    EXPECT_GE(p.def_scalar(), std::max(p.imm_value, p.don_value) - 1e-10);
  }
  // far tail: the bonus stays non-negative
  const auto far = payoffs_noise({40, 0, 1e-6, 1e-6, 0}, 0.0);
  EXPECT_GE(far.def_scalar(), 40.0);
}

TEST(PayoffsNoise, NonIncreasingInSigmaAtEqualMeans) {
  std::mt19937 rng(6);
  for (int t = 0; t < 50; ++t) {
    auto bp = random_posterior(rng);
    bp.mu_o = bp.mu_x;
    double prev = payoffs_noise(bp, 0.0).def_scalar();
    for (double sigma = 0.05; sigma <= 5.0; sigma += 0.05) {
      const double v = payoffs_noise(bp, sigma).def_scalar();
      EXPECT_LE(v, prev + 1e-14);
      prev = v;
    }
    EXPECT_GE(prev, bp.mu_x);
  }
}

TEST(BetaCost, Examples) {
  EXPECT_EQ(beta_cost({0, 3, 1, 1, 0}, {0.0, 30}), 0.0);
  EXPECT_NEAR(beta_cost({0, 0, 1, 1, 0}, {1.0, 30}), std::sqrt(2 / M_PI), 1e-15);
  EXPECT_EQ(beta_cost({0, -2, 1, 0, 0}, {0.5, 1}), 1.0);

  oracle::BivariateSampler s(0, 2, 1, 0.25, 0, 9);
  oracle::Accumulator acc;
  for (int i = 0; i < 1000000; ++i) acc.add(0.5 * std::abs(s().b));
  EXPECT_TRUE(acc.stat().covers(beta_cost({0, 2, 1, 0.25, 0}, {0.5, 3})));
  EXPECT_THROW(beta_cost({0, 0, 1, 1, 0}, {-1.0, 1}), InvalidArgument);
}

TEST(PayoffsWithCost, ReducesAndPenalizes) {
  std::mt19937 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto bp = random_posterior(rng);
    const double sigma = 0.1 * (t % 10);
    EXPECT_EQ(payoffs_with_cost(bp, sigma, {0.0, 30}), payoffs_noise(bp, sigma));
    const auto c = payoffs_with_cost(bp, 0.0, {1e6, 30});
    EXPECT_LT(c.def_scalar() - c.beta, std::max(c.imm_value, c.don_value));
    EXPECT_EQ(c.common_cost, c.beta * 30);
  }
}

TEST(PayoffsWithCost, DifferenceMatchesMonteCarlo) {
  const BivariatePosterior bp{0.3, -0.2, 0.8, 1.1, 0.2};
  const double sigma = 0.4, gamma = 0.3;
  const auto p = payoffs_with_cost(bp, sigma, {gamma, 5});
  oracle::BivariateSampler s(bp.mu_x, bp.mu_o, bp.k_xx, bp.k_oo, bp.k_xo, 77);
  oracle::Accumulator acc;
  for (int i = 0; i < 1000000; ++i) {
    const auto d = s();
    const double def = d.a + sigma * d.na > d.b + sigma * d.nb ? d.a : d.b;
    acc.add(def - gamma * std::abs(d.b));
  }
  EXPECT_TRUE(acc.stat().covers(p.def_scalar() - p.beta)) << acc.stat().mean << " vs " << p.def_scalar() - p.beta;
}

TEST(PayoffsThreshold, RationalLimit) {
  std::mt19937 rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto bp = random_posterior(rng);
    const auto p = payoffs_threshold(bp, 1e-9, 1e-9);
    const double ref = payoffs_noise(bp, 0.0).def_scalar();
    EXPECT_NEAR(p.def_set().keep_x, ref, 1e-6);
    EXPECT_NEAR(p.def_set().keep_o, ref, 1e-6);
  }
}

TEST(PayoffsThreshold, IndiscerniblePointMass) {
  const auto p = payoffs_threshold({1.0, 0.7, 0, 0, 0}, 0.5, 0.2);
  EXPECT_EQ(p.def_set(), (DefSet{1.0 - 0.2, 0.7 - 0.2}));
  EXPECT_EQ(payoffs_threshold({1.0, 0.2, 0, 0, 0}, 0.5, 0.2).def_set(), (DefSet{1.0, 1.0}));
  EXPECT_EQ(payoffs_threshold({0.0, 0.9, 0, 0, 0}, 0.5, 0.2).def_set(), (DefSet{0.9, 0.9}));
  EXPECT_THROW(payoffs_threshold({0, 1, 1, 1, 0}, 0.5, 0.6), InvalidArgument);
  EXPECT_THROW(payoffs_threshold({0, 1, 1, 1, 0}, 0.0, 0.0), InvalidArgument);
}

TEST(PayoffsThreshold, MatchesMonteCarlo) {
  std::mt19937 rng(9);
  int misses = 0;
  for (int t = 0; t < 5; ++t) {
    const auto bp = random_posterior(rng);
    const auto p = payoffs_threshold(bp, 0.5, 0.2);
    const auto [kx, ko] = threshold_oracle(bp, 0.5, 0.2, 300 + t);
    misses += !kx.covers(p.def_set().keep_x);
    misses += !ko.covers(p.def_set().keep_o);
    EXPECT_GE(p.p, 0.0);
    EXPECT_LE(p.p, 1.0);
  }
  EXPECT_LE(misses, 1);
}

TEST(PayoffsFor, DispatchesOnModel) {
  const BivariatePosterior bp{0.5, 0.1, 1, 1, 0.3};
  EXPECT_EQ(payoffs_for(bp, Exact{}, {}), payoffs_noise(bp, 0.0));
  EXPECT_EQ(payoffs_for(bp, GaussianNoise{0.3}, {}), payoffs_noise(bp, 0.3));
  const auto t = payoffs_for(bp, DiscernibilityThreshold{0.5, 0.2}, {0.1, 4});
  EXPECT_TRUE(t.set_valued());
  EXPECT_EQ(t.beta, beta_cost(bp, {0.1, 4}));
}

TEST(PayoffsVector, OneDimensionMatchesClosedForm) {
  const BivariatePosterior bp{0.4, 0.1, 0.7, 1.2, 0.3};
  Rng rng(1);
  const std::vector<BivariatePosterior> one{bp};
  const auto v = payoffs_vector_mc(one, 0.6, VectorDominance::pareto, 400000, rng);
  const double ref = payoffs_noise(bp, 0.6).def_scalar();
  EXPECT_LE(std::abs(v.def_vector[0] - ref), 3 * v.mc_stderr[0]);
  EXPECT_EQ(v.imm_vector[0], 0.4);
  EXPECT_EQ(v.don_vector[0], 0.1);
}

TEST(PayoffsVector, DeterministicDominance) {
  const std::vector<BivariatePosterior> two{{2.0, 1.0, 1e-14, 1e-14, 0}, {3.0, 0.5, 1e-14, 1e-14, 0}};
  for (auto dom : {VectorDominance::pareto, VectorDominance::e_admissible}) {
    Rng rng(2);
    const auto v = payoffs_vector_mc(two, 1e-10, dom, 10000, rng);
    EXPECT_NEAR(v.def_vector[0], 2.0, 1e-6);
    EXPECT_NEAR(v.def_vector[1], 3.0, 1e-6);
  }
}

TEST(PayoffsVector, SymmetricDimensions) {
  const BivariatePosterior bp{0.2, 0.0, 1, 1, 0.1};
  const std::vector<BivariatePosterior> two{bp, bp};
  Rng rng(3);
  const auto v = payoffs_vector_mc(two, 0.5, VectorDominance::pareto, 200000, rng);
  const double se = std::hypot(v.mc_stderr[0], v.mc_stderr[1]);
  EXPECT_LE(std::abs(v.def_vector[0] - v.def_vector[1]), 3 * se);
}

TEST(PayoffsVector, IncomparablePolicies) {
  // anti-correlated dimensions make incomparable draws common
  const std::vector<BivariatePosterior> two{{1.0, 1.0, 1, 1, 0}, {1.0, 1.0, 1, 1, 0}};
  Rng a(4), b(4);
  const auto sq = payoffs_vector_mc(two, 0.5, VectorDominance::pareto, 20000, a);
  const auto zero = payoffs_vector_mc(two, 0.5, VectorDominance::pareto, 20000, b, IncomparablePolicy::literal_zero);
  EXPECT_GT(sq.def_vector[0], zero.def_vector[0] + 0.2);
  Rng c(5);
  EXPECT_THROW(payoffs_vector_mc(two, 0.5, VectorDominance::pareto, 9999, c), InvalidArgument);
  EXPECT_THROW(payoffs_vector_mc(std::vector<BivariatePosterior>{}, 0.5, VectorDominance::pareto, 10000, c),
               InvalidArgument);
}
