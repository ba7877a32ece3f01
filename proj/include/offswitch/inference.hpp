#pragma once

// Posterior inference over latent utilities from pairwise choice data.
//
// Every observation becomes a factor on the latent difference
// d = f(first) - f(second) of the form P(lower < d + e < upper) with
// e ~ N(0, scale^2); scale == 0 is the hard indicator 1{lower < d < upper}.
// Strict choices under the exact and noise models use (0, inf); under the
// threshold model a strict choice uses (sigma, inf) and an indifferent
// choice uses [-sigma, sigma].
//
// Gaussian approximations are stored in site form: with A the factor
// incidence matrix and W = L^T L (L = diag(sqrt(w)) A) the site precision,
//   mean = m + K alpha,   cov = (K^-1 + W)^-1 = K - (L K)^T B^-1 (L K),
// where B = I + L K L^T. This avoids inverting K, which is badly conditioned
// for long lengthscales.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <variant>

#include "offswitch/choice.hpp"
#include "offswitch/gauss.hpp"
#include "offswitch/kernel.hpp"

namespace offswitch {

struct MapMethod {};
struct LaplaceMethod {};
struct EpMethod {
  double damping = 0.8;
  double tol = 1e-6;
  int max_sweeps = 200;
};
struct SamplingMethod {
  std::size_t n_samples = 10000;
  std::size_t burn_in = 1000;
};

using InferenceMethod = std::variant<MapMethod, LaplaceMethod, EpMethod, SamplingMethod>;

enum class MethodTag { map, laplace, ep, sampling };

inline MethodTag method_tag(const InferenceMethod& m) { return static_cast<MethodTag>(m.index()); }

inline std::string method_name(MethodTag tag) {
  switch (tag) {
    case MethodTag::map: return "map";
    case MethodTag::laplace: return "laplace";
    case MethodTag::ep: return "ep";
    case MethodTag::sampling: return "sampling";
  }
  return "?";
}
inline std::string method_name(const InferenceMethod& m) { return method_name(method_tag(m)); }

inline void validate(const InferenceMethod& method) {
  if (const auto* ep = std::get_if<EpMethod>(&method)) {
    if (!(ep->damping > 0.0 && ep->damping <= 1.0)) throw InvalidArgument("EP damping must lie in (0, 1]");
    if (!(ep->tol > 0.0)) throw InvalidArgument("EP tol must be > 0");
    if (ep->max_sweeps < 1) throw InvalidArgument("EP max_sweeps must be >= 1");
  } else if (const auto* s = std::get_if<SamplingMethod>(&method)) {
    if (!(s->n_samples > s->burn_in)) throw InvalidArgument("sampling: n_samples must exceed burn_in");
  }
}

// ---------------------------------------------------------------------------
// Likelihood specification

inline constexpr double kSurrogateScale = 1e-3;

enum class LikelihoodKind { probit, indicator, threshold };

struct LikelihoodSpec {
  LikelihoodKind kind = LikelihoodKind::probit;
  /// Probit scale (probit) or discernibility margin (threshold).
  double sigma = 1.0;
  /// Smoothing scale that gradient-based methods use for hard constraints.
  double surrogate_scale = kSurrogateScale;

  static LikelihoodSpec probit(double scale) { return {LikelihoodKind::probit, scale, kSurrogateScale}; }
  static LikelihoodSpec indicator(double surrogate = kSurrogateScale) {
    return {LikelihoodKind::indicator, 0.0, surrogate};
  }
  static LikelihoodSpec threshold(double margin, double surrogate = kSurrogateScale) {
    return {LikelihoodKind::threshold, margin, surrogate};
  }

  /// Scale used by MAP, Laplace and EP.
  [[nodiscard]] double smooth_scale() const { return kind == LikelihoodKind::probit ? sigma : surrogate_scale; }
  /// Scale used by the sampler (0 = exact indicator).
  [[nodiscard]] double exact_scale() const { return kind == LikelihoodKind::probit ? sigma : 0.0; }
};

/// Likelihood matching the mechanism that generated a message. The noise
/// model's two independent noises give a probit of scale sigma * sqrt(2);
/// scales below the surrogate fall back to it so Newton stays well posed.
inline LikelihoodSpec likelihood_for(const RationalityModel& model, double surrogate = kSurrogateScale) {
  if (const auto* g = std::get_if<GaussianNoise>(&model))
    return LikelihoodSpec::probit(std::max(g->sigma * std::numbers::sqrt2, surrogate));
  if (const auto* t = std::get_if<DiscernibilityThreshold>(&model)) return LikelihoodSpec::threshold(t->sigma, surrogate);
  return LikelihoodSpec::indicator(surrogate);
}

struct PairFactor {
  Eigen::Index first = 0;
  Eigen::Index second = 0;
  double lower = 0.0;
  double upper = kInf;
  bool closed = false;
};

struct FactorValue {
  double log_l;
  double grad;
  double neg_hess;
};

/// log P(lower < d + e < upper), e ~ N(0, scale^2), with first and second
/// derivatives in d.
inline FactorValue evaluate_factor(const PairFactor& f, double d, double scale) {
  const double alpha = (f.lower - d) / scale;
  const double beta = (f.upper - d) / scale;
  const Truncation t = truncate_standard(alpha, beta);
  return {t.log_z, t.r1 / scale, std::max(0.0, (t.r2 + t.r1 * t.r1) / (scale * scale))};
}

inline bool factor_satisfied(const PairFactor& f, double d) {
  return f.closed ? (f.lower <= d && d <= f.upper) : (f.lower < d && d < f.upper);
}

/// Latent acts (first-appearance order) and one factor per observation.
struct LatentProblem {
  std::vector<Act> acts;
  std::vector<PairFactor> factors;
};

inline LatentProblem build_problem(const ChoiceDataset& data, const LikelihoodSpec& spec) {
  validate(data);
  LatentProblem p;
  auto index_of = [&](const Act& a) {
    auto it = std::find(p.acts.begin(), p.acts.end(), a);
    if (it != p.acts.end()) return static_cast<Eigen::Index>(it - p.acts.begin());
    p.acts.push_back(a);
    return static_cast<Eigen::Index>(p.acts.size() - 1);
  };
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& obs = data.observations[i];
    const std::string where = "observation " + std::to_string(i + 1) + ": ";
    if (obs.choice_set.size() != 2 || obs.choice_set[0] == obs.choice_set[1])
      throw InvalidArgument(where + "only choices between two distinct acts are supported");
    if (obs.is_strict_pair()) {
      const Act& winner = obs.chosen.front();
      const Act& loser = obs.choice_set[0] == winner ? obs.choice_set[1] : obs.choice_set[0];
      const double lower = spec.kind == LikelihoodKind::threshold ? spec.sigma : 0.0;
      const Eigen::Index w = index_of(winner);
      const Eigen::Index l = index_of(loser);
      p.factors.push_back({w, l, lower, kInf, false});
    } else if (obs.is_indifferent_pair()) {
      if (spec.kind != LikelihoodKind::threshold)
        throw InvalidArgument(where + "indifferent choices need the threshold likelihood");
      const Eigen::Index a = index_of(obs.choice_set[0]);
      const Eigen::Index b = index_of(obs.choice_set[1]);
      p.factors.push_back({a, b, -spec.sigma, spec.sigma, true});
    } else {
      throw InvalidArgument(where + "malformed pair observation");
    }
  }
  return p;
}

/// Sum over observations of log Phi((f(winner) - f(loser)) / sigma_fit).
inline double probit_log_likelihood(const UtilityFunction& f, const ChoiceDataset& data, double sigma_fit) {
  if (!(sigma_fit > 0.0)) throw InvalidArgument("probit_log_likelihood: sigma_fit must be > 0");
  double ll = 0.0;
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& obs = data.observations[i];
    validate(obs);
    if (!obs.is_strict_pair() || obs.choice_set[0] == obs.choice_set[1])
      throw InvalidArgument("probit_log_likelihood: observation " + std::to_string(i + 1) +
                            " is not a pair with a single chosen act");
    const Act& w = obs.chosen.front();
    const Act& l = obs.choice_set[0] == w ? obs.choice_set[1] : obs.choice_set[0];
    ll += log_normal_cdf((f(w) - f(l)) / sigma_fit);
  }
  return ll;
}

/// Exact log-likelihood of the discernibility-threshold mechanism: 0 when
/// every observation matches the branch f induces, -inf otherwise.
inline double threshold_log_likelihood(const UtilityFunction& f, const ChoiceDataset& data, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("threshold_log_likelihood: sigma must be > 0");
  for (const auto& obs : data.observations) {
    validate(obs);
    if (obs.choice_set.size() != 2) throw InvalidArgument("threshold_log_likelihood: pairwise data required");
    const ActPair pair{obs.choice_set[0], obs.choice_set[1]};
    const auto expected = make_observation(pair, threshold_choice(f(pair.first), f(pair.second), sigma));
    auto same = [](std::vector<Act> a, std::vector<Act> b) {
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      return a == b;
    };
    if (!same(expected.chosen, obs.chosen)) return -kInf;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Log posterior over the latent values at the training acts

class LogPosterior {
 public:
  LogPosterior(const LatentProblem& problem, const GramMatrix& prior, double scale)
      : problem_(problem), prior_(prior), scale_(scale) {}

  [[nodiscard]] double log_likelihood(const Eigen::VectorXd& f) const {
    double ll = 0.0;
    for (const auto& fac : problem_.factors) {
      const double d = f(fac.first) - f(fac.second);
      if (scale_ == 0.0) {
        if (!factor_satisfied(fac, d)) return -kInf;
      } else {
        ll += evaluate_factor(fac, d, scale_).log_l;
      }
    }
    return ll;
  }

  [[nodiscard]] Eigen::VectorXd log_likelihood_gradient(const Eigen::VectorXd& f) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.size());
    for (const auto& fac : problem_.factors) {
      const double gi = evaluate_factor(fac, f(fac.first) - f(fac.second), scale_).grad;
      g(fac.first) += gi;
      g(fac.second) -= gi;
    }
    return g;
  }

  /// W = -Hessian of the log-likelihood.
  [[nodiscard]] Eigen::MatrixXd likelihood_precision(const Eigen::VectorXd& f) const {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(f.size(), f.size());
    for (const auto& fac : problem_.factors) {
      const double wi = evaluate_factor(fac, f(fac.first) - f(fac.second), scale_).neg_hess;
      w(fac.first, fac.first) += wi;
      w(fac.second, fac.second) += wi;
      w(fac.first, fac.second) -= wi;
      w(fac.second, fac.first) -= wi;
    }
    return w;
  }

  [[nodiscard]] double value(const Eigen::VectorXd& f) const {
    const Eigen::VectorXd r = f - prior_.mean();
    return -0.5 * r.dot(prior_.solve(r)) + log_likelihood(f);
  }

  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& f) const {
    return -prior_.solve(f - prior_.mean()) + log_likelihood_gradient(f);
  }

  [[nodiscard]] Eigen::MatrixXd hessian(const Eigen::VectorXd& f) const {
    const auto n = f.size();
    return -prior_.solve(Eigen::MatrixXd::Identity(n, n)) - likelihood_precision(f);
  }

 private:
  const LatentProblem& problem_;
  const GramMatrix& prior_;
  double scale_;
};

// ---------------------------------------------------------------------------
// Posterior types

struct FitDiagnostics {
  int iterations = 0;
  double gradient_norm = 0.0;
  double max_site_change = 0.0;
  std::size_t slice_evaluations = 0;
};

/// Joint posterior of the utilities at x and o.
struct BivariatePosterior {
  double mu_x = 0.0;
  double mu_o = 0.0;
  double k_xx = 0.0;
  double k_oo = 0.0;
  double k_xo = 0.0;

  friend bool operator==(const BivariatePosterior&, const BivariatePosterior&) = default;
};

inline void validate(const BivariatePosterior& bp) {
  if (!std::isfinite(bp.mu_x) || !std::isfinite(bp.mu_o) || !std::isfinite(bp.k_xx) || !std::isfinite(bp.k_oo) ||
      !std::isfinite(bp.k_xo))
    throw InvalidArgument("bivariate posterior: non-finite entry");
  if (bp.k_xx < 0.0 || bp.k_oo < 0.0) throw InvalidArgument("bivariate posterior: negative variance");
  if (bp.k_xx * bp.k_oo - bp.k_xo * bp.k_xo < -1e-10)
    throw InvalidArgument("bivariate posterior: covariance is not positive semi-definite");
}

/// Mean vector and covariance matrix at a set of points.
struct Prediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

class LatentPosterior {
 public:
  MethodTag method = MethodTag::laplace;
  std::vector<Act> training_acts;
  /// Posterior mean and covariance at the training acts (zero cov for MAP).
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  /// Retained sampler draws, one row per draw (sampling only).
  Eigen::MatrixXd samples;
  FitDiagnostics diagnostics;

  Kernel kernel;
  MeanFunction prior_mean;
  std::optional<GramMatrix> prior;  // over training_acts; empty without data
  Eigen::VectorXd alpha;            // mean = m + K alpha
  Eigen::MatrixXd root;             // L = diag(sqrt(site precision)) A
  Eigen::LLT<Eigen::MatrixXd> b_llt;

  [[nodiscard]] bool has_data() const { return !training_acts.empty(); }
  [[nodiscard]] double jitter() const { return prior ? prior->jitter() : 0.0; }
};

namespace detail {

inline Eigen::MatrixXd incidence(const LatentProblem& p) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.factors.size()),
                                            static_cast<Eigen::Index>(p.acts.size()));
  for (std::size_t i = 0; i < p.factors.size(); ++i) {
    a(static_cast<Eigen::Index>(i), p.factors[i].first) += 1.0;
    a(static_cast<Eigen::Index>(i), p.factors[i].second) -= 1.0;
  }
  return a;
}

/// Site-form pieces for a diagonal site precision `tau` on the factors.
struct SiteForm {
  Eigen::MatrixXd root;
  Eigen::LLT<Eigen::MatrixXd> b_llt;
  Eigen::MatrixXd root_k;  // L K
};

inline SiteForm site_form(const Eigen::MatrixXd& a, const Eigen::VectorXd& tau, const Eigen::MatrixXd& k) {
  SiteForm s;
  s.root = tau.array().max(0.0).sqrt().matrix().asDiagonal() * a;
  s.root_k = s.root * k;
  Eigen::MatrixXd b = s.root_k * s.root.transpose();
  b.diagonal().array() += 1.0;
  s.b_llt.compute(b);
  if (s.b_llt.info() != Eigen::Success) throw NumericalError("site system I + L K L^T is not positive definite");
  return s;
}

inline Eigen::MatrixXd site_covariance(const SiteForm& s, const Eigen::MatrixXd& k) {
  Eigen::MatrixXd cov = k - s.root_k.transpose() * s.b_llt.solve(s.root_k);
  return 0.5 * (cov + cov.transpose());
}

struct Mode {
  Eigen::VectorXd f;
  Eigen::VectorXd alpha;
  FitDiagnostics diag;
};

inline constexpr int kNewtonMaxIter = 200;
inline constexpr double kNewtonTol = 1e-6;

/// Newton iterations with backtracking on the log posterior, parametrized by
/// alpha with f = m + K alpha.
inline Mode newton_mode(const LatentProblem& p, const GramMatrix& prior, double scale) {
  const Eigen::MatrixXd& k = prior.entries();
  const Eigen::VectorXd& m = prior.mean();
  const Eigen::MatrixXd a = incidence(p);
  const auto n_obs = a.rows();
  LogPosterior post(p, prior, scale);

  auto psi = [&](const Eigen::VectorXd& al, const Eigen::VectorXd& f) {
    return -0.5 * al.dot(f - m) + post.log_likelihood(f);
  };

  Mode mode{m, Eigen::VectorXd::Zero(m.size()), {}};
  double value = psi(mode.alpha, mode.f);
  for (int it = 0; it < kNewtonMaxIter; ++it) {
    Eigen::VectorXd g(n_obs), w(n_obs);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
      const auto& fac = p.factors[static_cast<std::size_t>(i)];
      const auto fv = evaluate_factor(fac, mode.f(fac.first) - mode.f(fac.second), scale);
      g(i) = fv.grad;
      w(i) = fv.neg_hess;
    }
    const Eigen::VectorXd grad_ll = a.transpose() * g;
    const Eigen::VectorXd grad = grad_ll - mode.alpha;
    mode.diag.iterations = it;
    mode.diag.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (mode.diag.gradient_norm <= kNewtonTol) return mode;

    const SiteForm s = site_form(a, w, k);
    const Eigen::VectorXd b = s.root.transpose() * (s.root * (mode.f - m)) + grad_ll;
    const Eigen::VectorXd alpha_new = b - s.root.transpose() * s.b_llt.solve(s.root_k * b);
    const Eigen::VectorXd dir = alpha_new - mode.alpha;
    const Eigen::VectorXd df = k * dir;
    const double slope = grad.dot(df);

    double t = 1.0;
    bool moved = false;
    while (t > 1e-14) {
      const Eigen::VectorXd al = mode.alpha + t * dir;
      const Eigen::VectorXd f = m + k * al;
      const double v = psi(al, f);
      if (std::isfinite(v) && v >= value + 1e-4 * t * slope) {
        moved = v > value || t == 1.0;
        mode.alpha = al;
        mode.f = f;
        value = v;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // Round-off floor: accept only if the gradient is small relative to
      // the likelihood forces acting on the mode.
      if (mode.diag.gradient_norm <= kNewtonTol * std::max(1.0, grad_ll.lpNorm<Eigen::Infinity>())) return mode;
      throw NumericalError("Newton: line search stalled at iteration " + std::to_string(it) +
                           " with gradient norm " + format_double(mode.diag.gradient_norm));
    }
  }
  throw NumericalError("Newton: no convergence after " + std::to_string(kNewtonMaxIter) +
                       " iterations (gradient norm " + format_double(mode.diag.gradient_norm) + ")");
}

inline Eigen::VectorXd factor_precisions(const LatentProblem& p, const Eigen::VectorXd& f, double scale) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(p.factors.size()));
  for (std::size_t i = 0; i < p.factors.size(); ++i) {
    const auto& fac = p.factors[i];
    w(static_cast<Eigen::Index>(i)) = evaluate_factor(fac, f(fac.first) - f(fac.second), scale).neg_hess;
  }
  return w;
}

inline void fill_gaussian(LatentPosterior& post, const Eigen::MatrixXd& a, const Eigen::VectorXd& tau) {
  const Eigen::MatrixXd& k = post.prior->entries();
  SiteForm s = site_form(a, tau, k);
  post.cov = site_covariance(s, k);
  post.root = std::move(s.root);
  post.b_llt = std::move(s.b_llt);
}

/// Expectation propagation with one site per factor, in centred coordinates
/// g = f - m.
inline void run_ep(LatentPosterior& post, const LatentProblem& p, double scale, const EpMethod& cfg) {
  const Eigen::MatrixXd& k = post.prior->entries();
  const Eigen::VectorXd& m0 = post.prior->mean();
  const Eigen::MatrixXd a = incidence(p);
  const auto n_obs = a.rows();
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(n_obs);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(n_obs);
  Eigen::MatrixXd sigma = k;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(k.rows());

  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < n_obs; ++i) {
      const auto& fac = p.factors[static_cast<std::size_t>(i)];
      const Eigen::Index u = fac.first;
      const Eigen::Index v = fac.second;
      const double var = sigma(u, u) + sigma(v, v) - 2.0 * sigma(u, v);
      const double mean = mu(u) - mu(v);
      const double tau_c = 1.0 / var - tau(i);
      if (!(tau_c > 0.0)) continue;
      const double nu_c = mean / var - nu(i);
      const double v_c = 1.0 / tau_c;
      const double m_c = nu_c * v_c;
      const double offset = m0(u) - m0(v);
      const double total = v_c + scale * scale;
      const double sd = std::sqrt(total);
      const Truncation t = truncate_standard((fac.lower - offset - m_c) / sd, (fac.upper - offset - m_c) / sd);
      const double mean_t = m_c + v_c / sd * t.r1;
      const double var_t = std::max(v_c - v_c * v_c / total * (t.r2 + t.r1 * t.r1), 1e-14 * v_c);
      const double tau_new = std::max(1.0 / var_t - tau_c, 0.0);
      const double nu_new = mean_t / var_t - nu_c;
      const double tau_d = cfg.damping * tau_new + (1.0 - cfg.damping) * tau(i);
      const double nu_d = cfg.damping * nu_new + (1.0 - cfg.damping) * nu(i);
      max_change = std::max({max_change, std::abs(tau_d - tau(i)), std::abs(nu_d - nu(i))});
      const double dtau = tau_d - tau(i);
      tau(i) = tau_d;
      nu(i) = nu_d;
      const Eigen::VectorXd col = sigma.col(u) - sigma.col(v);
      sigma -= (dtau / (1.0 + dtau * var)) * col * col.transpose();
      mu = sigma * (a.transpose() * nu);
    }
    // Refresh from the sites to stop round-off accumulating in the rank-1 updates.
    const SiteForm s = site_form(a, tau, k);
    sigma = site_covariance(s, k);
    mu = sigma * (a.transpose() * nu);
    post.diagnostics.iterations = sweep;
    post.diagnostics.max_site_change = max_change;
    if (max_change < cfg.tol) {
      const Eigen::VectorXd h = a.transpose() * nu;
      post.alpha = h - s.root.transpose() * s.b_llt.solve(s.root_k * h);
      post.mean = m0 + k * post.alpha;
      fill_gaussian(post, a, tau);
      return;
    }
  }
  throw NumericalError("EP: no convergence after " + std::to_string(cfg.max_sweeps) +
                       " sweeps (max site change " + format_double(post.diagnostics.max_site_change) + ")");
}

/// Elliptical slice sampling of f under the exact likelihood.
inline void run_sampler(LatentPosterior& post, const LatentProblem& p, double exact_scale, const Eigen::VectorXd& start,
                        const SamplingMethod& cfg, Rng& rng) {
  const GramMatrix& prior = *post.prior;
  const Eigen::VectorXd& m = prior.mean();
  LogPosterior lp(p, prior, exact_scale);
  const Eigen::MatrixXd chol = prior.lower();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  Eigen::VectorXd g = start - m;
  double ll = lp.log_likelihood(start);
  if (!std::isfinite(ll)) throw NumericalError("sampler: starting state violates the observed choices");

  const std::size_t kept = cfg.n_samples - cfg.burn_in;
  post.samples.resize(static_cast<Eigen::Index>(kept), m.size());
  std::size_t evaluations = 0;
  for (std::size_t it = 0; it < cfg.n_samples; ++it) {
    const Eigen::VectorXd ellipse = chol * standard_normal_vector(m.size(), rng);
    const double log_y = ll + std::log(unif(rng));
    double theta = two_pi * unif(rng);
    double lo = theta - two_pi;
    double hi = theta;
    for (int shrink = 0; shrink < 200; ++shrink) {
      const Eigen::VectorXd cand = g * std::cos(theta) + ellipse * std::sin(theta);
      const double l = lp.log_likelihood(m + cand);
      ++evaluations;
      if (l > log_y) {
        g = cand;
        ll = l;
        break;
      }
      (theta < 0.0 ? lo : hi) = theta;
      theta = lo + (hi - lo) * unif(rng);
    }
    if (it >= cfg.burn_in) post.samples.row(static_cast<Eigen::Index>(it - cfg.burn_in)) = (m + g).transpose();
  }
  post.diagnostics.slice_evaluations = evaluations;
  post.mean = post.samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = post.samples.rowwise() - post.mean.transpose();
  post.cov = centered.transpose() * centered / static_cast<double>(std::max<std::size_t>(kept - 1, 1));
}

}  // namespace detail

/// Fits the posterior over latent utilities at the acts appearing in `data`.
inline LatentPosterior fit(const ChoiceDataset& data, const Kernel& kernel, const MeanFunction& mean,
                           const LikelihoodSpec& likelihood, const InferenceMethod& method, Rng& rng) {
  validate(kernel);
  validate(method);
  const LatentProblem problem = build_problem(data, likelihood);
  LatentPosterior post;
  post.method = method_tag(method);
  post.kernel = kernel;
  post.prior_mean = mean;
  post.training_acts = problem.acts;
  if (problem.factors.empty()) return post;

  post.prior.emplace(kernel, mean, problem.acts);
  const GramMatrix& prior = *post.prior;
  const auto n = prior.size();
  const Eigen::MatrixXd a = detail::incidence(problem);
  const double scale = likelihood.smooth_scale();

  switch (post.method) {
    case MethodTag::map:
    case MethodTag::laplace: {
      const auto mode = detail::newton_mode(problem, prior, scale);
      post.diagnostics = mode.diag;
      post.mean = mode.f;
      post.alpha = mode.alpha;
      if (post.method == MethodTag::map) {
        post.cov = Eigen::MatrixXd::Zero(n, n);
      } else {
        detail::fill_gaussian(post, a, detail::factor_precisions(problem, mode.f, scale));
      }
      break;
    }
    case MethodTag::ep:
      detail::run_ep(post, problem, scale, std::get<EpMethod>(method));
      break;
    case MethodTag::sampling: {
      const auto mode = detail::newton_mode(problem, prior, scale);
      detail::run_sampler(post, problem, likelihood.exact_scale(), mode.f, std::get<SamplingMethod>(method), rng);
      break;
    }
  }
  return post;
}

/// Log posterior (up to a constant) of a fitted problem; exposed for checks.
inline LogPosterior log_posterior(const LatentProblem& problem, const GramMatrix& prior, double scale) {
  return LogPosterior(problem, prior, scale);
}

/// Predictive mean and covariance of the latent utility at `points`.
inline Prediction predict(const LatentPosterior& post, std::span<const Act> points) {
  const Eigen::VectorXd m_star = mean_vector(post.prior_mean, points);
  const double jitter = post.jitter();
  const Eigen::MatrixXd k_ss = cross_covariance(post.kernel, points, points, jitter);
  if (!post.has_data()) return {m_star, k_ss};

  const Eigen::MatrixXd k_s = cross_covariance(post.kernel, post.training_acts, points, jitter);
  const auto p = static_cast<Eigen::Index>(points.size());
  Prediction out;
  switch (post.method) {
    case MethodTag::map:
      out.mean = m_star + k_s.transpose() * post.alpha;
      out.cov = Eigen::MatrixXd::Zero(p, p);
      break;
    case MethodTag::laplace:
    case MethodTag::ep: {
      out.mean = m_star + k_s.transpose() * post.alpha;
      const Eigen::MatrixXd v = post.root * k_s;
      out.cov = k_ss - v.transpose() * post.b_llt.solve(v);
      break;
    }
    case MethodTag::sampling: {
      const Eigen::MatrixXd c = post.prior->solve(k_s);
      out.mean = m_star + c.transpose() * (post.mean - post.prior->mean());
      out.cov = k_ss - k_s.transpose() * c + c.transpose() * post.cov * c;
      break;
    }
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

inline BivariatePosterior to_bivariate(const Prediction& pred) {
  return {pred.mean(0), pred.mean(1), std::max(pred.cov(0, 0), 0.0), std::max(pred.cov(1, 1), 0.0), pred.cov(0, 1)};
}

/// Joint posterior of the utilities at the new act x and the status quo o.
inline BivariatePosterior predict_pair(const LatentPosterior& post, const Act& x, const Act& o) {
  if (x == o) throw InvalidArgument("predict_pair: x and o must differ");
  const std::vector<Act> pts{x, o};
  return to_bivariate(predict(post, pts));
}

/// Sampling only: bivariate moments from `batches` consecutive blocks of the
/// retained draws, for batch-means error estimates.
inline std::vector<BivariatePosterior> predict_pair_batches(const LatentPosterior& post, const Act& x, const Act& o,
                                                            std::size_t batches) {
  if (post.method != MethodTag::sampling || !post.has_data())
    throw InvalidArgument("predict_pair_batches: needs a sampling posterior with data");
  const auto rows = post.samples.rows();
  const auto size = rows / static_cast<Eigen::Index>(batches);
  if (batches < 2 || size < 2) throw InvalidArgument("predict_pair_batches: too few draws per batch");
  std::vector<BivariatePosterior> out;
  for (std::size_t b = 0; b < batches; ++b) {
    LatentPosterior part = post;
    part.samples = post.samples.middleRows(static_cast<Eigen::Index>(b) * size, size);
    part.mean = part.samples.colwise().mean().transpose();
    const Eigen::MatrixXd c = part.samples.rowwise() - part.mean.transpose();
    part.cov = c.transpose() * c / static_cast<double>(size - 1);
    out.push_back(predict_pair(part, x, o));
  }
  return out;
}

/// Draws from N(mean, cov) via an eigen-decomposition (cov may be singular).
inline Eigen::MatrixXd gaussian_draws(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().array().max(0.0).sqrt().matrix().asDiagonal();
  Eigen::MatrixXd out(mean.size(), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    out.col(static_cast<Eigen::Index>(j)) = mean + root * standard_normal_vector(mean.size(), rng);
  return out;
}

/// Posterior sample paths at `points`, one column per path.
inline Eigen::MatrixXd sample_paths(const LatentPosterior& post, std::span<const Act> points, std::size_t n_paths,
                                    Rng& rng) {
  if (post.method != MethodTag::sampling || !post.has_data()) {
    const Prediction pred = predict(post, points);
    return gaussian_draws(pred.mean, pred.cov, n_paths, rng);
  }
  const double jitter = post.jitter();
  const Eigen::MatrixXd k_s = cross_covariance(post.kernel, post.training_acts, points, jitter);
  const Eigen::MatrixXd c = post.prior->solve(k_s);
  Eigen::MatrixXd cond = cross_covariance(post.kernel, points, points, jitter) - k_s.transpose() * c;
  cond = 0.5 * (cond + cond.transpose());
  const Eigen::VectorXd m_star = mean_vector(post.prior_mean, points);
  std::uniform_int_distribution<Eigen::Index> pick(0, post.samples.rows() - 1);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(n_paths));
  for (std::size_t j = 0; j < n_paths; ++j) {
    const Eigen::VectorXd f = post.samples.row(pick(rng)).transpose();
    const Eigen::VectorXd mean = m_star + c.transpose() * (f - post.prior->mean());
    out.col(static_cast<Eigen::Index>(j)) = gaussian_draws(mean, cond, 1, rng).col(0);
  }
  return out;
}

/// CSV of act coordinates, posterior mean and posterior variance.
inline void write_posterior_csv(std::ostream& out, std::span<const Act> points, const Prediction& pred) {
  const std::size_t dim = points.empty() ? 1 : points.front().dim();
  if (dim == 1) {
    out << "x";
  } else {
    for (std::size_t k = 0; k < dim; ++k) out << (k ? ",x" : "x") << k + 1;
  }
  out << ",mean,variance\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << format_act(points[i]) << ',' << format_double(pred.mean(ii)) << ','
        << format_double(std::max(pred.cov(ii, ii), 0.0)) << '\n';
  }
}

}  // namespace offswitch
