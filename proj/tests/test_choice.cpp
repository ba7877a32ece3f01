#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <set>

#include "offswitch/experiments.hpp"
#include "oracles.hpp"

using namespace offswitch;

namespace {

std::vector<std::vector<double>> random_vectors(std::size_t n, std::size_t d, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> v(n, std::vector<double>(d));
  for (auto& row : v)
    for (auto& c : row) c = u(rng);
  return v;
}

// O(n^2 d) scan: i survives unless some j beats it in every component
std::vector<std::size_t> pareto_scan(const std::vector<std::vector<double>>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    bool beaten = false;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (i == j) continue;
      std::size_t wins = 0;
      for (std::size_t k = 0; k < v[i].size(); ++k) wins += v[j][k] > v[i][k];
      if (wins == v[i].size()) beaten = true;
    }
    if (!beaten) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST(ExactChoice, Examples) {
  const std::vector<Act> set{Act{6.5}, Act{3.5}};
  EXPECT_EQ(exact_choice(risotto_taste, set), std::vector<Act>{Act{6.5}});
  const std::vector<Act> single{Act{2.0}};
  EXPECT_EQ(exact_choice(risotto_taste, single), single);
  const std::vector<double> tied{1.0, 2.0, 1.0};
  EXPECT_THROW(exact_choice_indices(tied), InvalidArgument);
  EXPECT_THROW(exact_choice_indices(std::vector<double>{}), InvalidArgument);
}

TEST(ExactChoice, MatchesMaxScan) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(5);
    for (auto& x : v) x = u(rng);
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;
    EXPECT_EQ(exact_choice_indices(v), std::vector<std::size_t>{best});
  }
}

TEST(NoisyPairChoice, Frequencies) {
  Rng rng(7);
  const int n = 100000;
  int z = 0;
  for (int i = 0; i < n; ++i) z += noisy_pair_choice(0.3, 0.3, 1.0, rng) == PairOutcome::first;
  EXPECT_NEAR(z / double(n), 0.5, 0.006);

  z = 0;
  for (int i = 0; i < n; ++i) z += noisy_pair_choice(10.0, 0.0, 1.0, rng) == PairOutcome::first;
  EXPECT_GE(z, 99990);

  z = 0;
  for (int i = 0; i < n; ++i) z += noisy_pair_choice(1.5, 0.5, 1.0, rng) == PairOutcome::first;
  const double p = oracle::cdf(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(z / double(n), p, 3.0 * std::sqrt(p * (1 - p) / n));
  EXPECT_THROW(noisy_pair_choice(0, 0, 0.0, rng), InvalidArgument);
}

TEST(NoisyPairChoice, ChiSquaredOnGrid) {
  Rng rng(2024);
  const double sigma = 0.8;
  const int n = 100000;
  double stat = 0.0;
  for (double delta : {-1.0, -0.4, 0.0, 0.5, 1.2}) {
    int z = 0;
    for (int i = 0; i < n; ++i) z += noisy_pair_choice(delta, 0.0, sigma, rng) == PairOutcome::first;
    const double p = oracle::cdf(delta / (sigma * std::sqrt(2.0)));
    const double e1 = n * p, e2 = n * (1 - p);
    stat += (z - e1) * (z - e1) / e1 + ((n - z) - e2) * ((n - z) - e2) / e2;
  }
  const double crit = boost::math::quantile(boost::math::chi_squared(5.0), 0.999);
  EXPECT_LT(stat, crit);
}

TEST(ThresholdChoice, Examples) {
  EXPECT_EQ(threshold_choice(1.0, 0.0, 0.5), PairOutcome::first);
  EXPECT_EQ(threshold_choice(0.3, 0.0, 0.5), PairOutcome::both);
  EXPECT_EQ(threshold_choice(0.0, 1.0, 0.5), PairOutcome::second);
  EXPECT_THROW(threshold_choice(0, 1, -1), InvalidArgument);
}

TEST(ThresholdChoice, SymmetryAndSuperset) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 1000; ++t) {
    const double a = u(rng), b = u(rng), s = std::abs(u(rng)) + 0.01;
    const auto ab = threshold_choice(a, b, s);
    const auto ba = threshold_choice(b, a, s);
    if (ab == PairOutcome::both) {
      EXPECT_EQ(ba, PairOutcome::both);
    } else {
      EXPECT_EQ(ba, ab == PairOutcome::first ? PairOutcome::second : PairOutcome::first);
    }
    if (a == b) continue;
    const auto exact = respond_to_pair(a, b, Exact{}, 0, 0);
    if (std::abs(a - b) > s) {
      EXPECT_EQ(ab, exact);
    } else {
      EXPECT_EQ(ab, PairOutcome::both);
    }
  }
}

TEST(ParetoChoice, Examples) {
  const std::vector<std::vector<double>> scalar{{0.2}, {1.4}, {-3.0}};
  EXPECT_EQ(pareto_choice_indices(scalar), std::vector<std::size_t>{1});
  const std::vector<std::vector<double>> incomparable{{1, 0}, {0, 1}};
  EXPECT_EQ(pareto_choice_indices(incomparable), (std::vector<std::size_t>{0, 1}));

  std::mt19937 rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto v = random_vectors(6, 3, rng);
    EXPECT_EQ(pareto_choice_indices(v), pareto_scan(v));
  }
  const VectorUtilityFunction nu = [](const Act& a) { return std::vector<double>{a[0], -a[0] * a[0]}; };
  const std::vector<Act> acts{Act{-1.0}, Act{0.0}, Act{1.0}};
  EXPECT_EQ(pareto_choice(nu, acts), (std::vector<Act>{Act{0.0}, Act{1.0}}));
}

TEST(EAdmissibleChoice, Examples) {
  const std::vector<std::vector<double>> scalar{{0.2}, {1.4}, {-3.0}};
  EXPECT_EQ(e_admissible_choice_indices(scalar), std::vector<std::size_t>{1});
  const std::vector<std::vector<double>> three{{1, 0}, {0, 1}, {0.4, 0.4}};
  EXPECT_EQ(e_admissible_choice_indices(three), (std::vector<std::size_t>{0, 1}));

  std::mt19937 rng(6);
  for (int t = 0; t < 500; ++t) {
    const auto v = random_vectors(1 + t % 8, 1 + t % 4, rng);
    const auto e = e_admissible_choice_indices(v);
    const auto p = pareto_scan(v);
    EXPECT_TRUE(std::includes(p.begin(), p.end(), e.begin(), e.end()));
  }
}

TEST(HonestMessage, ListedRisottoPairsReproduceTheDataset) {
  const auto listed = risotto_listed_preferences();
  std::vector<ActPair> pairs;
  for (const auto& obs : listed.observations) pairs.push_back({obs.choice_set[0], obs.choice_set[1]});
  Rng rng(0);
  const auto msg = message_for_pairs(risotto_taste, Exact{}, pairs, rng);
  EXPECT_EQ(msg, listed);
  EXPECT_EQ(msg.observations.front().chosen, std::vector<Act>{Act{6.5}});
}

TEST(HonestMessage, ModelsAndDeterminism) {
  const auto pool = linear_grid(1, 9, 17);
  Rng a(42), b(42), c(42);
  const auto exact = honest_message(risotto_taste, Exact{}, pool, 20, a);
  const auto noisy = honest_message(risotto_taste, GaussianNoise{1e-9}, pool, 20, b);
  EXPECT_EQ(exact, noisy);
  EXPECT_EQ(exact.length(), 20u);
  const auto again = honest_message(risotto_taste, Exact{}, pool, 20, c);
  EXPECT_EQ(exact, again);

  std::set<std::pair<Act, Act>> seen;
  for (const auto& obs : exact.observations) {
    EXPECT_TRUE(obs.is_strict_pair());
    auto key = std::minmax(obs.choice_set[0], obs.choice_set[1]);
    EXPECT_TRUE(seen.insert({key.first, key.second}).second) << "pair drawn twice";
  }

  Rng d(1);
  const auto vague = honest_message(risotto_taste, DiscernibilityThreshold{100.0, 1.0}, pool, 15, d);
  for (const auto& obs : vague.observations) EXPECT_TRUE(obs.is_indifferent_pair());

  Rng e(1);
  EXPECT_THROW(honest_message(risotto_taste, Exact{}, pool, 0, e), InvalidArgument);
  EXPECT_THROW(honest_message(risotto_taste, Exact{}, std::vector<Act>{Act{1.0}}, 1, e), InvalidArgument);
  EXPECT_THROW(honest_message(risotto_taste, GaussianNoise{0.0}, pool, 1, e), InvalidArgument);
}

TEST(RationalityModel, Validation) {
  EXPECT_NO_THROW(validate(RationalityModel{DiscernibilityThreshold{1.0, 1.0}}));
  EXPECT_THROW(validate(RationalityModel{DiscernibilityThreshold{1.0, 1.5}}), InvalidArgument);
  EXPECT_THROW(validate(RationalityModel{DiscernibilityThreshold{1.0, 0.0}}), InvalidArgument);
  EXPECT_THROW(validate(RationalityModel{GaussianNoise{-1.0}}), InvalidArgument);
  EXPECT_EQ(model_sigma(Exact{}), 0.0);
  EXPECT_EQ(model_name(DiscernibilityThreshold{}), "threshold");
}

TEST(PathIndependence, ThreeMechanisms) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<double> scalar(n);
    for (auto& v : scalar) v = u(rng);
    EXPECT_TRUE(check_path_independence(exact_rule(scalar), n));
    const auto vec = random_vectors(n, 2, rng);
    EXPECT_TRUE(check_path_independence(pareto_rule(vec), n)) << n;
    EXPECT_TRUE(check_path_independence(e_admissible_rule(vec), n)) << n;
  }
  const std::vector<std::vector<double>> four{{0, 1}, {1, 0}, {0.5, 0.5}, {0.2, 0.2}};
  EXPECT_TRUE(check_path_independence(pareto_rule(four), 4));
}

TEST(PathIndependence, CyclicRuleFails) {
  // 0 beats 1, 1 beats 2, 2 beats 0; larger sets keep everything
  const ChoiceRule cyclic = [](const std::vector<std::size_t>& s) -> std::vector<std::size_t> {
    if (s.size() != 2) return s;
    const auto a = s[0], b = s[1];
    if ((a + 1) % 3 == b) return {a};
    return {b};
  };
  EXPECT_FALSE(check_path_independence(cyclic, 3));
  EXPECT_THROW(check_path_independence(exact_rule(std::vector<double>(13, 0.0)), 13), InvalidArgument);
}

TEST(DatasetText, RoundTrip) {
  ChoiceDataset d;
  d.observations.push_back({{Act{0.1, 1e-300}, Act{-2.5, 3.0}}, {Act{-2.5, 3.0}}});
  d.observations.push_back({{Act{1.0 / 3.0, 7.0}, Act{4.0, 5.0}}, {Act{1.0 / 3.0, 7.0}, Act{4.0, 5.0}}});
  const auto text = format_dataset(d);
  EXPECT_EQ(parse_dataset(text), d);
  EXPECT_EQ(format_dataset(parse_dataset(text)), text);

  const auto r = risotto_preferences(30, 4);
  EXPECT_EQ(parse_dataset(format_dataset(r)), r);
  EXPECT_EQ(format_observation(r.observations[0]), "set: 6.5 3.5 | chosen: 6.5");
  EXPECT_TRUE(parse_dataset("").empty());
  EXPECT_EQ(parse_dataset("# comment\n\nset: 1 2 | chosen: 2\r\n").length(), 1u);
}

TEST(DatasetText, Errors) {
  auto message = [](const std::string& text) {
    try {
      parse_dataset(text);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("set: 1 2 chosen: 1").find("line 1"), std::string::npos);
  EXPECT_NE(message("set: 1 2 | chosen: 1\nset: 1 x | chosen: 1").find("line 2"), std::string::npos);
  EXPECT_NE(message("set: 1 2 | chosen: 3").find("not in the choice set"), std::string::npos);
  EXPECT_NE(message("set: 1 2 | chosen:").find("empty chosen"), std::string::npos);
  EXPECT_NE(message("set: 1 2,1 | chosen: 1").find("mixed"), std::string::npos);
  EXPECT_NE(message("set: 1 2 | chosen: 1\nset: 1,1 2,2 | chosen: 1,1").find("dataset"), std::string::npos);
}
