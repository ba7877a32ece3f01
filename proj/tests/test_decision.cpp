#include <gtest/gtest.h>

#include "offswitch/decision.hpp"

using namespace offswitch;

namespace {

ExpectedPayoffs scalar(double def, double imm, double don, double beta = 0.0) {
  ExpectedPayoffs p;
  p.def_value = def;
  p.imm_value = imm;
  p.don_value = don;
  p.beta = beta;
  return p;
}

ExpectedPayoffs set(double a, double b, double imm, double don) {
  ExpectedPayoffs p;
  p.def_value = DefSet{a, b};
  p.imm_value = imm;
  p.don_value = don;
  return p;
}

}  // namespace

TEST(DecideScalar, Examples) {
  EXPECT_EQ(decide_scalar(scalar(0.564, 0, 0)), ReceiverAction::DEF);
  EXPECT_EQ(decide_scalar(payoffs_noise({1, 0, 0, 0, 0}, 1.0)), ReceiverAction::IMM);
  EXPECT_EQ(decide_scalar(scalar(0.3, 0.3, 0.3)), ReceiverAction::DEF);
  EXPECT_EQ(decide_scalar(scalar(0.1, 0.3, 0.3)), ReceiverAction::DoN);
  EXPECT_EQ(decide_scalar(scalar(0.1, 0.2, 0.5)), ReceiverAction::DoN);
  EXPECT_EQ(decide_scalar(scalar(0.6, 0.2, 0.5, 0.2)), ReceiverAction::DoN);
  EXPECT_THROW(decide_scalar(set(0, 1, 0, 0)), InvalidArgument);
}

TEST(DecideThreshold, Examples) {
  EXPECT_EQ(decide_threshold(set(0.5, 0.9, 0.7, 0.1), DominanceCriterion::PessimisticA), ReceiverAction::IMM);
  EXPECT_EQ(decide_threshold(set(0.5, 0.9, 0.7, 0.1), DominanceCriterion::OptimisticB), ReceiverAction::DEF);
  EXPECT_EQ(decide_threshold(set(0.9, 0.5, 0.7, 0.1), DominanceCriterion::PessimisticA), ReceiverAction::IMM);
  for (auto c : {DominanceCriterion::PessimisticA, DominanceCriterion::OptimisticB})
    EXPECT_EQ(decide_threshold(set(1.0, 1.2, 0.3, 0.3), c), ReceiverAction::DEF);
  EXPECT_THROW(decide_threshold(scalar(1, 0, 0), DominanceCriterion::OptimisticB), InvalidArgument);
  EXPECT_EQ(decide(scalar(1, 0, 0), DominanceCriterion::PessimisticA), ReceiverAction::DEF);
}

TEST(DecideThreshold, PessimisticImpliesOptimistic) {
  std::mt19937 rng(1);
  std::normal_distribution<double> n;
  for (int t = 0; t < 2000; ++t) {
    const auto p = set(n(rng), n(rng), n(rng), n(rng));
    if (decide_threshold(p, DominanceCriterion::PessimisticA) == ReceiverAction::DEF) {
      EXPECT_EQ(decide_threshold(p, DominanceCriterion::OptimisticB), ReceiverAction::DEF);
    }
  }
}

TEST(DecideScalar, CostNeverCreatesDeferral) {
  std::mt19937 rng(2);
  std::normal_distribution<double> n;
  for (int t = 0; t < 2000; ++t) {
    const auto base = scalar(n(rng), n(rng), n(rng));
    const auto costly = scalar(base.def_scalar(), base.imm_value, base.don_value, std::abs(n(rng)));
    if (decide_scalar(base) != ReceiverAction::DEF) {
      EXPECT_NE(decide_scalar(costly), ReceiverAction::DEF);
    }
  }
}

TEST(DecideScalar, RegimeLaws) {
  std::mt19937 rng(3);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.05, 2);
  for (int t = 0; t < 500; ++t) {
    // no uncertainty, noisy sender: never DEF
    const BivariatePosterior point{n(rng), n(rng), 0, 0, 0};
    EXPECT_NE(decide_scalar(payoffs_noise(point, u(rng))), ReceiverAction::DEF);
    // rational sender, uncertain receiver: always DEF
    const double kxx = u(rng), koo = u(rng);
    const BivariatePosterior unc{n(rng), n(rng), kxx, koo, 0.5 * std::sqrt(kxx * koo)};
    EXPECT_EQ(decide_scalar(payoffs_noise(unc, 0.0)), ReceiverAction::DEF);
  }
}

TEST(DecideScalar, TinyNegativeBonusStillLoses) {
  // the gap below max(mu) is far under one ulp of def
  const auto p = payoffs_noise({3, 0, 0, 0, 0}, 0.05);
  EXPECT_EQ(p.def_scalar(), 3.0);
  ASSERT_TRUE(p.bonus.has_value());
  EXPECT_TRUE(std::signbit(*p.bonus));
  EXPECT_EQ(decide_scalar(p), ReceiverAction::IMM);
  EXPECT_EQ(decide_scalar(payoffs_noise({0, 3, 0, 0, 0}, 0.05)), ReceiverAction::DoN);

  std::mt19937 rng(4);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.05, 2);
  for (int t = 0; t < 500; ++t) {
    const double kxx = u(rng), koo = u(rng);
    const auto q = payoffs_noise({n(rng), n(rng), kxx, koo, 0.3 * std::sqrt(kxx * koo)}, u(rng));
    EXPECT_NEAR(*q.bonus, q.def_scalar() - std::max(q.imm_value, q.don_value), 1e-12);
  }
}

TEST(DecideVector, Cases) {
  VectorExpectedPayoffs v;
  v.def_vector = {0.7};
  v.imm_vector = {0.3};
  v.don_vector = {0.5};
  EXPECT_EQ(decide_vector(v), decide_scalar(scalar(0.7, 0.3, 0.5)));
  v.def_vector = {0.2};
  EXPECT_EQ(decide_vector(v), decide_scalar(scalar(0.2, 0.3, 0.5)));

  v.def_vector = {1, 1};
  v.imm_vector = {0, 2};
  v.don_vector = {0, 0};
  EXPECT_FALSE(decide_vector(v).has_value());

  v.def_vector = {3, 3};
  EXPECT_EQ(decide_vector(v), ReceiverAction::DEF);

  v.def_vector = {-1, -1};
  v.imm_vector = {0, 2};
  EXPECT_EQ(decide_vector(v), ReceiverAction::IMM);

  v.don_vector = {0};
  EXPECT_THROW(decide_vector(v), InvalidArgument);
}

TEST(ClassifyRegime, Examples) {
  EXPECT_EQ(classify_regime({1, 0, 0, 0, 0}, GaussianNoise{1.0}), (Regime{false, false}));
  EXPECT_EQ(classify_regime({1, 0, 0.3, 0.4, 0.1}, GaussianNoise{1e-12}), (Regime{true, true}));
  EXPECT_EQ(classify_regime({0, 0, 0, 0, 0}, GaussianNoise{1.0}), (Regime{false, false}));
  EXPECT_EQ(classify_regime({0, 0, 0, 0, 0}, Exact{}), (Regime{true, false}));
  EXPECT_EQ(classify_regime({0, 0, 1e-13, 1e-13, 0}, DiscernibilityThreshold{}), (Regime{false, false}));
}

TEST(ActionNames, RoundTrip) {
  for (auto a : {ReceiverAction::IMM, ReceiverAction::DEF, ReceiverAction::DoN})
    EXPECT_EQ(parse_action(action_name(a)), a);
  EXPECT_THROW(parse_action("OFF"), InvalidArgument);
}
