#pragma once

// Standard normal primitives and the closed-form Gaussian integrals that the
// payoff engine is built from.

#include <cmath>
#include <limits>
#include <numbers>

#include "offswitch/common.hpp"

namespace offswitch {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite input");
}

// Unchecked versions; infinite arguments give the limiting values.
inline double phi(double z) {
  if (std::isinf(z)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

inline double cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

inline double log_phi(double z) { return -0.5 * z * z - 0.91893853320467274178032973640562; }

// Continued fraction for the Mills ratio Phi(-z)/phi(z), z >= 5.
inline double mills_cf(double z) {
  double t = z;
  for (int k = 120; k >= 1; --k) t = z + k / t;
  return 1.0 / t;
}

// 1 - z * R(z) for z >= 5 without cancellation: equals R(z) / Q(z) with
// Q(z) = z + 2/(z + 3/(z + ...)).
inline double mills_complement_cf(double z) {
  double t = z;
  for (int k = 120; k >= 2; --k) t = z + k / t;
  return mills_cf(z) / t;
}

}  // namespace detail

/// Standard normal density.
inline double std_normal_pdf(double z) {
  detail::require_finite(z, "std_normal_pdf");
  return detail::phi(z);
}

/// Standard normal CDF. Delegates to erfc, which keeps relative accuracy in
/// the lower tail.
inline double std_normal_cdf(double z) {
  detail::require_finite(z, "std_normal_cdf");
  return detail::cdf(z);
}

/// log Phi(z), finite down to the far lower tail.
inline double log_normal_cdf(double z) {
  if (z == kInf) return 0.0;
  if (z == -kInf) return -kInf;
  if (z > 0.0) return std::log1p(-detail::cdf(-z));
  if (z > -30.0) return std::log(detail::cdf(z));
  return detail::log_phi(z) + std::log(detail::mills_cf(-z));
}

/// phi(z) / Phi(z) (inverse Mills ratio of the lower tail).
inline double inverse_mills(double z) {
  if (z <= -5.0) return 1.0 / detail::mills_cf(-z);
  return detail::phi(z) / detail::cdf(z);
}

/// Gaussian loss h(z) = phi(z) - z * Phi(-z) = E[max(Z - z, 0)]; always > 0.
inline double gaussian_loss(double z) {
  if (z < 0.0) return gaussian_loss(-z) - z;
  if (z < 5.0) return detail::phi(z) - z * detail::cdf(-z);
  return detail::phi(z) * detail::mills_complement_cf(z);
}

/// Integral of phi(x) phi(a + b x) over the real line.
inline double integral_phi_phi(double a, double b) {
  detail::require_finite(a, "integral_phi_phi");
  detail::require_finite(b, "integral_phi_phi");
  const double r = std::sqrt(1.0 + b * b);
  return detail::phi(a / r) / r;
}

/// Integral of Phi(a + b x) phi(x) over the real line.
inline double integral_Phi_phi(double a, double b) {
  detail::require_finite(a, "integral_Phi_phi");
  detail::require_finite(b, "integral_Phi_phi");
  return detail::cdf(a / std::sqrt(1.0 + b * b));
}

/// Integral of x Phi(a + b x) phi(x) over the real line.
inline double integral_xPhi_phi(double a, double b) {
  detail::require_finite(a, "integral_xPhi_phi");
  detail::require_finite(b, "integral_xPhi_phi");
  const double r = std::sqrt(1.0 + b * b);
  return b / r * detail::phi(a / r);
}

/// N(mean, stddev^2); stddev == 0 is a point mass.
struct UnivariateGaussian {
  double mean = 0.0;
  double stddev = 1.0;

  UnivariateGaussian() = default;
  UnivariateGaussian(double m, double s) : mean(m), stddev(s) {
    if (!std::isfinite(m) || !std::isfinite(s) || s < 0.0)
      throw InvalidArgument("UnivariateGaussian: need finite mean and stddev >= 0");
  }
};

/// Integration limit with explicit infinities.
class Limit {
 public:
  enum class Kind { minus_infinity, finite, plus_infinity };

  static Limit minus_infinity() { return Limit(Kind::minus_infinity, 0.0); }
  static Limit plus_infinity() { return Limit(Kind::plus_infinity, 0.0); }
  static Limit at(double v) {
    if (!std::isfinite(v)) throw InvalidArgument("Limit::at: use the explicit infinite limits");
    return Limit(Kind::finite, v);
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] bool is_finite() const { return kind_ == Kind::finite; }
  /// The limit as an extended real.
  [[nodiscard]] double value() const {
    switch (kind_) {
      case Kind::minus_infinity: return -kInf;
      case Kind::plus_infinity: return kInf;
      default: return value_;
    }
  }

  friend bool operator<=(const Limit& a, const Limit& b) { return a.value() <= b.value(); }

 private:
  Limit(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

/// E[x 1{a <= x <= b}] for x ~ g.
inline double partial_expectation(const UnivariateGaussian& g, const Limit& a, const Limit& b) {
  if (!(a <= b)) throw InvalidArgument("partial_expectation: lower limit exceeds upper limit");
  const double lo = a.value();
  const double hi = b.value();
  if (g.stddev == 0.0) return (lo <= g.mean && g.mean <= hi) ? g.mean : 0.0;
  const double za = (lo - g.mean) / g.stddev;
  const double zb = (hi - g.mean) / g.stddev;
  // Difference of CDFs taken on the side with no cancellation.
  const double mass = za > 0.0 ? detail::cdf(-za) - detail::cdf(-zb) : detail::cdf(zb) - detail::cdf(za);
  return g.mean * mass - g.stddev * (detail::phi(zb) - detail::phi(za));
}

/// E|x| for x ~ g (folded normal mean).
inline double expected_abs(const UnivariateGaussian& g) {
  if (g.stddev == 0.0) return std::abs(g.mean);
  const double z = -g.mean / g.stddev;
  return g.mean * (1.0 - 2.0 * detail::cdf(z)) + 2.0 * g.stddev * detail::phi(z);
}

/// Standardized truncation of a normal to [alpha, beta]:
/// log Z = log(Phi(beta) - Phi(alpha)),
/// r1 = (phi(alpha) - phi(beta)) / Z,
/// r2 = (beta phi(beta) - alpha phi(alpha)) / Z.
struct Truncation {
  double log_z;
  double r1;
  double r2;
};

inline Truncation truncate_standard(double alpha, double beta) {
  if (alpha > beta) throw InvalidArgument("truncate_standard: empty interval");
  if (alpha > 0.0) {
    Truncation t = truncate_standard(-beta, -alpha);
    return {t.log_z, -t.r1, t.r2};
  }
  const double lb = log_normal_cdf(beta);
  const double la = log_normal_cdf(alpha);
  const double log_z = lb + std::log1p(-std::exp(la - lb));
  const double pa = std::isinf(alpha) ? 0.0 : std::exp(detail::log_phi(alpha) - log_z);
  const double pb = std::isinf(beta) ? 0.0 : std::exp(detail::log_phi(beta) - log_z);
  const double r2 = (std::isinf(beta) ? 0.0 : beta * pb) - (std::isinf(alpha) ? 0.0 : alpha * pa);
  return {log_z, pa - pb, r2};
}

}  // namespace offswitch
