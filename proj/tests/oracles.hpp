#pragma once

// Reference computations for the tests. None of these call into the library
// under test.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Adaptive Gauss-Kronrod quadrature; infinite limits are mapped internally.
inline double quad(const std::function<double(double)>& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12, &err);
}

inline double pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

inline double cdf(double z) { return boost::math::cdf(boost::math::normal_distribution<double>(), z); }

struct Stat {
  double mean = 0.0;
  double se = 0.0;

  [[nodiscard]] bool covers(double v, double k = 3.0) const { return std::abs(v - mean) <= k * se; }
};

/// Mean and standard error of a sample accumulated one value at a time.
class Accumulator {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }
  [[nodiscard]] Stat stat() const {
    const double n = static_cast<double>(n_);
    return {mean_, n > 1 ? std::sqrt(m2_ / (n - 1.0) / n) : 0.0};
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Draw of (a, b) from a bivariate normal plus two iid N(0, 1) noises.
struct BivariateDraw {
  double a;
  double b;
  double na;
  double nb;
};

class BivariateSampler {
 public:
  BivariateSampler(double mu_a, double mu_b, double kaa, double kbb, double kab, std::uint64_t seed)
      : mu_a_(mu_a), mu_b_(mu_b), rng_(seed) {
    l11_ = std::sqrt(kaa);
    l21_ = l11_ > 0 ? kab / l11_ : 0.0;
    l22_ = std::sqrt(std::max(kbb - l21_ * l21_, 0.0));
  }
  BivariateDraw operator()() {
    const double z1 = n_(rng_);
    const double z2 = n_(rng_);
    return {mu_a_ + l11_ * z1, mu_b_ + l21_ * z1 + l22_ * z2, n_(rng_), n_(rng_)};
  }

 private:
  double mu_a_, mu_b_, l11_, l21_, l22_;
  std::mt19937 rng_;
  std::normal_distribution<double> n_;
};

}  // namespace oracle
