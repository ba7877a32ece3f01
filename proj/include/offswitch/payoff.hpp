#pragma once

// Expected payoffs of the receiver's three actions given the bivariate
// posterior of (nu(x), nu(o)).

#include <optional>
#include <variant>

#include "offswitch/choice.hpp"
#include "offswitch/gauss.hpp"
#include "offswitch/inference.hpp"

namespace offswitch {

/// Set-valued deferral payoff under the discernibility threshold: the value
/// when the indiscernible sender keeps x, and when it keeps o.
struct DefSet {
  double keep_x = 0.0;
  double keep_o = 0.0;

  [[nodiscard]] double low() const { return std::min(keep_x, keep_o); }
  [[nodiscard]] double high() const { return std::max(keep_x, keep_o); }
  friend bool operator==(const DefSet&, const DefSet&) = default;
};

struct ExpectedPayoffs {
  std::variant<double, DefSet> def_value = 0.0;
  double imm_value = 0.0;
  double don_value = 0.0;
  /// Extra expected cost charged to DEF only.
  double beta = 0.0;
  /// Expected cost common to all actions; excluded from decisions.
  double common_cost = 0.0;
  /// Probability that the sender keeps x, and the uncertainty bonus.
  double p = 0.0;
  double e = 0.0;
  /// def - max(imm, don) computed directly (noise model). Its sign stays
  /// exact when the gap is far below the resolution of def_value.
  std::optional<double> bonus;

  [[nodiscard]] bool set_valued() const { return std::holds_alternative<DefSet>(def_value); }
  [[nodiscard]] double def_scalar() const {
    if (const auto* v = std::get_if<double>(&def_value)) return *v;
    throw InvalidArgument("set-valued DEF payoff where a scalar was expected");
  }
  [[nodiscard]] const DefSet& def_set() const {
    if (const auto* v = std::get_if<DefSet>(&def_value)) return *v;
    throw InvalidArgument("scalar DEF payoff where a set was expected");
  }

  friend bool operator==(const ExpectedPayoffs&, const ExpectedPayoffs&) = default;
};

struct CostParams {
  double gamma = 0.0;
  std::size_t message_len = 0;
};

inline void validate(const CostParams& c) {
  if (!(c.gamma >= 0.0) || !std::isfinite(c.gamma)) throw InvalidArgument("cost gamma must be finite and >= 0");
}

namespace detail {

inline void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be finite and >= 0");
}

inline double difference_variance(const BivariatePosterior& bp) { return bp.k_xx + bp.k_oo - 2.0 * bp.k_xo; }

}  // namespace detail

/// E[nu(x) 1{nu(x) + n(x) > nu(o) + n(o)}].
inline double def_building_block(const BivariatePosterior& bp, double sigma) {
  validate(bp);
  detail::check_sigma(sigma);
  const double d = detail::difference_variance(bp) + 2.0 * sigma * sigma;
  if (!(d > 0.0)) {
    if (bp.mu_x == bp.mu_o) throw InvalidArgument("def_building_block: ill-posed (no variance and equal means)");
    return bp.mu_x > bp.mu_o ? bp.mu_x : 0.0;
  }
  const double s = std::sqrt(d);
  const double z = (bp.mu_o - bp.mu_x) / s;
  return bp.mu_x * detail::cdf(-z) + (bp.k_xx - bp.k_xo) / s * detail::phi(z);
}

inline BivariatePosterior swapped(const BivariatePosterior& bp) {
  return {bp.mu_o, bp.mu_x, bp.k_oo, bp.k_xx, bp.k_xo};
}

/// Payoffs when the sender answers a deferral by noisy comparison. DEF is
/// the sum of the two building blocks, evaluated in a form that keeps the
/// bonus over max(mu_x, mu_o) exact.
inline ExpectedPayoffs payoffs_noise(const BivariatePosterior& bp, double sigma) {
  validate(bp);
  detail::check_sigma(sigma);
  ExpectedPayoffs out;
  out.imm_value = bp.mu_x;
  out.don_value = bp.mu_o;
  const double dt = detail::difference_variance(bp);
  const double d = dt + 2.0 * sigma * sigma;
  const double delta = bp.mu_x - bp.mu_o;
  if (!(d > 0.0)) {
    if (delta == 0.0) throw InvalidArgument("payoffs_noise: ill-posed (no variance and equal means)");
    out.def_value = std::max(bp.mu_x, bp.mu_o);
    out.p = delta > 0.0 ? 1.0 : 0.0;
    out.bonus = 0.0;
    return out;
  }
  const double s = std::sqrt(d);
  const double z = delta / s;
  const double dens = detail::phi(z);
  out.p = detail::cdf(z);
  out.e = std::max(dt, 0.0) / s * dens;
  // bonus = s phi(z) (dt / d - |z| R(|z|)) with R the Mills ratio; the
  // bracket carries the sign even when s phi(z) underflows.
  const double a = std::abs(z);
  const double zr = a < 5.0 ? a * detail::cdf(-a) / dens : a * detail::mills_cf(a);
  const double bracket = std::max(dt, 0.0) / d - zr;
  out.bonus = s * dens * bracket;
  out.def_value = std::max(bp.mu_x, bp.mu_o) + (s * gaussian_loss(a) - 2.0 * sigma * sigma / s * dens);
  return out;
}

/// gamma * E|nu(o)|.
inline double beta_cost(const BivariatePosterior& bp, const CostParams& cost) {
  validate(bp);
  validate(cost);
  if (cost.gamma == 0.0) return 0.0;
  return cost.gamma * expected_abs(UnivariateGaussian(bp.mu_o, std::sqrt(bp.k_oo)));
}

/// Noise-model payoffs with message costs: beta is charged to DEF, and the
/// cost of the message itself is recorded as common to all actions.
inline ExpectedPayoffs payoffs_with_cost(const BivariatePosterior& bp, double sigma, const CostParams& cost) {
  ExpectedPayoffs out = payoffs_noise(bp, sigma);
  out.beta = beta_cost(bp, cost);
  out.common_cost = out.beta * static_cast<double>(cost.message_len);
  return out;
}

/// Payoffs when the sender answers a deferral through the discernibility
/// threshold. Indiscernible outcomes pay {nu(x) - eps, nu(o) - eps}.
inline ExpectedPayoffs payoffs_threshold(const BivariatePosterior& bp, double sigma, double epsilon) {
  validate(bp);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("payoffs_threshold: sigma must be > 0");
  if (!(epsilon > 0.0) || epsilon > sigma) throw InvalidArgument("payoffs_threshold: epsilon must lie in (0, sigma]");
  ExpectedPayoffs out;
  out.imm_value = bp.mu_x;
  out.don_value = bp.mu_o;
  const double dt = detail::difference_variance(bp);
  const double delta = bp.mu_x - bp.mu_o;
  if (!(dt > 0.0)) {
    if (delta > sigma) {
      out.def_value = DefSet{bp.mu_x, bp.mu_x};
      out.p = 1.0;
    } else if (-delta > sigma) {
      out.def_value = DefSet{bp.mu_o, bp.mu_o};
    } else {
      out.def_value = DefSet{bp.mu_x - epsilon, bp.mu_o - epsilon};
    }
    return out;
  }
  const double s = std::sqrt(dt);
  const double a = (sigma - delta) / s;  // x clearly wins iff (nu(x) - nu(o) - delta) / s > a
  const double b = (sigma + delta) / s;  // o clearly wins iff (nu(o) - nu(x) + delta) / s > b
  const double pa = detail::phi(a);
  const double pb = detail::phi(b);
  const double p_x = detail::cdf(-a);
  const double p_o = detail::cdf(-b);
  // P(-b <= Z <= a) without cancellation
  const double p_ind = a > 0.0 && b > 0.0 ? 1.0 - p_x - p_o : (a <= 0.0 ? detail::cdf(a) - p_o : detail::cdf(b) - p_x);
  const double cx = (bp.k_xx - bp.k_xo) / s;
  const double co = (bp.k_oo - bp.k_xo) / s;
  const double clear = bp.mu_x * p_x + cx * pa + bp.mu_o * p_o + co * pb;
  const double keep_x = bp.mu_x * p_ind + cx * (pb - pa);
  const double keep_o = bp.mu_o * p_ind + co * (pa - pb);
  out.def_value = DefSet{clear + keep_x - epsilon * p_ind, clear + keep_o - epsilon * p_ind};
  out.p = p_x;
  return out;
}

/// Payoffs under the sender's model (Exact is the sigma = 0 noise model).
inline ExpectedPayoffs payoffs_for(const BivariatePosterior& bp, const RationalityModel& model, const CostParams& cost) {
  if (const auto* t = std::get_if<DiscernibilityThreshold>(&model)) {
    ExpectedPayoffs out = payoffs_threshold(bp, t->sigma, t->epsilon);
    out.beta = beta_cost(bp, cost);
    out.common_cost = out.beta * static_cast<double>(cost.message_len);
    return out;
  }
  return payoffs_with_cost(bp, model_sigma(model), cost);
}

// ---------------------------------------------------------------------------
// Vector-valued utilities

enum class VectorDominance { pareto, e_admissible };
/// DEF payoff when the sender's noisy utility vectors are incomparable.
enum class IncomparablePolicy { status_quo, literal_zero };

struct VectorExpectedPayoffs {
  std::vector<double> def_vector;
  std::vector<double> imm_vector;
  std::vector<double> don_vector;
  std::vector<double> mc_stderr;
};

inline constexpr std::size_t kMinVectorDraws = 10000;

/// Monte Carlo DEF payoff vector over independent per-dimension posteriors.
inline VectorExpectedPayoffs payoffs_vector_mc(std::span<const BivariatePosterior> posteriors, double sigma,
                                               VectorDominance dominance, std::size_t n_mc, Rng& rng,
                                               IncomparablePolicy policy = IncomparablePolicy::status_quo) {
  if (posteriors.empty()) throw InvalidArgument("payoffs_vector_mc: need at least one dimension");
  if (n_mc < kMinVectorDraws) throw InvalidArgument("payoffs_vector_mc: n_mc must be >= 10000");
  detail::check_sigma(sigma);
  const std::size_t d = posteriors.size();
  struct Factor {
    double sx, c, so;  // lower Cholesky factor of the 2x2 covariance
  };
  std::vector<Factor> chol;
  VectorExpectedPayoffs out;
  for (const auto& bp : posteriors) {
    validate(bp);
    const double sx = std::sqrt(bp.k_xx);
    const double c = sx > 0.0 ? bp.k_xo / sx : 0.0;
    chol.push_back({sx, c, std::sqrt(std::max(bp.k_oo - c * c, 0.0))});
    out.imm_vector.push_back(bp.mu_x);
    out.don_vector.push_back(bp.mu_o);
  }
  std::normal_distribution<double> normal;
  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  std::vector<std::vector<double>> noisy(2, std::vector<double>(d));
  std::vector<double> nx(d), no(d);
  for (std::size_t it = 0; it < n_mc; ++it) {
    for (std::size_t k = 0; k < d; ++k) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      nx[k] = posteriors[k].mu_x + chol[k].sx * z1;
      no[k] = posteriors[k].mu_o + chol[k].c * z1 + chol[k].so * z2;
      noisy[0][k] = nx[k] + sigma * normal(rng);
      noisy[1][k] = no[k] + sigma * normal(rng);
    }
    const auto chosen = dominance == VectorDominance::pareto ? pareto_choice_indices(noisy)
                                                             : e_admissible_choice_indices(noisy);
    for (std::size_t k = 0; k < d; ++k) {
      double v = 0.0;
      if (chosen.size() == 1) {
        v = chosen.front() == 0 ? nx[k] : no[k];
      } else if (policy == IncomparablePolicy::status_quo) {
        v = no[k];
      }
      sum[k] += v;
      sum_sq[k] += v * v;
    }
  }
  const double n = static_cast<double>(n_mc);
  for (std::size_t k = 0; k < d; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(sum_sq[k] / n - mean * mean, 0.0) * n / (n - 1.0);
    out.def_vector.push_back(mean);
    out.mc_stderr.push_back(std::sqrt(var / n));
  }
  return out;
}

}  // namespace offswitch
