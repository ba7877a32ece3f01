#pragma once

// Batch studies built on the game engine: decision frequencies across the
// four inference methods, the risotto curves, a Monte Carlo payoff oracle and
// parameter sweeps.

#include <array>
#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "offswitch/game.hpp"

namespace offswitch {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct StudyConfig {
  std::size_t n_runs = 200;
  std::size_t n_prefs = 30;
  double sigma = 1.0;
  std::vector<InferenceMethod> methods{MapMethod{}, LaplaceMethod{}, EpMethod{}, SamplingMethod{}};
  Range lengthscale{0.5, 3.0};
  Range variance{0.5, 2.0};
  double grid_lo = 1.0;
  double grid_hi = 9.0;
  std::size_t grid_points = 17;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

inline void validate(const StudyConfig& c) {
  if (c.n_runs < 1) throw InvalidArgument("study: n_runs must be >= 1");
  if (c.methods.empty()) throw InvalidArgument("study: no methods selected");
  if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw InvalidArgument("study: sigma must be finite and >= 0");
  for (const Range* r : {&c.lengthscale, &c.variance})
    if (!(r->lo > 0.0) || !(r->lo <= r->hi) || !std::isfinite(r->hi))
      throw InvalidArgument("study: hyperparameter ranges must be positive and ordered");
  if (c.grid_points < 2 || !(c.grid_lo < c.grid_hi)) throw InvalidArgument("study: grid needs two or more points");
  if (c.n_prefs < 1 || c.n_prefs > pair_count(c.grid_points))
    throw InvalidArgument("study: n_prefs must lie in [1, number of grid pairs]");
  if (!(c.gamma >= 0.0)) throw InvalidArgument("study: gamma must be >= 0");
  for (const auto& m : c.methods) validate(m);
}

/// The sender model of a study: sigma = 0 means an exact sender.
inline RationalityModel study_model(double sigma) {
  if (sigma == 0.0) return Exact{};
  return GaussianNoise{sigma};
}

/// Game for run `run` of a study; hyperparameters and (x, o) are drawn from
/// the run's own stream.
inline GameConfig study_game(const StudyConfig& c, std::size_t run) {
  const std::uint64_t run_seed = derive_seed(c.seed, run);
  Rng rng(derive_seed(run_seed, 7));
  std::uniform_real_distribution<double> ls(c.lengthscale.lo, c.lengthscale.hi);
  std::uniform_real_distribution<double> var(c.variance.lo, c.variance.hi);
  GameConfig g;
  g.grid = linear_grid(c.grid_lo, c.grid_hi, c.grid_points);
  const double l = ls(rng);
  const double v = var(rng);
  g.kernel = SquaredExponential{v, l};
  std::uniform_int_distribution<std::size_t> pick(0, c.grid_points - 1);
  const std::size_t i = pick(rng);
  std::size_t j = pick(rng);
  while (j == i) j = pick(rng);
  g.x = g.grid[i];
  g.o = g.grid[j];
  g.model = study_model(c.sigma);
  g.n_prefs = c.n_prefs;
  g.gamma = c.gamma;
  g.seed = run_seed;
  return g;
}

inline constexpr std::array<ReceiverAction, 3> kActions{ReceiverAction::IMM, ReceiverAction::DEF, ReceiverAction::DoN};

struct MethodTally {
  std::string method;
  std::array<std::size_t, 3> counts{};  // indexed by ReceiverAction
  std::size_t aborted = 0;
  std::size_t runs = 0;

  [[nodiscard]] std::size_t count(ReceiverAction a) const { return counts[static_cast<std::size_t>(a)]; }
  [[nodiscard]] double fraction(ReceiverAction a) const {
    return runs == 0 ? 0.0 : static_cast<double>(count(a)) / static_cast<double>(runs);
  }
};

/// Decision of one method on one run, with the DEF margin
/// def - beta - max(imm, don) and its Monte Carlo standard error (0 for the
/// closed-form methods).
struct RunDecision {
  ReceiverAction action = ReceiverAction::DoN;
  bool aborted = false;
  double margin = 0.0;
  double margin_se = 0.0;
};

struct FrequencyTable {
  std::vector<MethodTally> methods;
  /// runs[r][m]: decision of method m on run r.
  std::vector<std::vector<RunDecision>> runs;

  [[nodiscard]] bool partial() const {
    return std::any_of(methods.begin(), methods.end(), [](const MethodTally& t) { return t.aborted > 0; });
  }
  [[nodiscard]] const MethodTally& tally(std::string_view method) const {
    for (const auto& t : methods)
      if (t.method == method) return t;
    throw InvalidArgument("frequency table has no method '" + std::string(method) + "'");
  }
};

inline constexpr std::size_t kMarginBatches = 10;

inline double def_margin(const ExpectedPayoffs& p, DominanceCriterion crit) {
  if (p.bonus && !p.set_valued()) return *p.bonus - p.beta;
  const double def = p.set_valued()
                         ? (crit == DominanceCriterion::PessimisticA ? p.def_set().low() : p.def_set().high())
                         : p.def_scalar();
  return def - p.beta - std::max(p.imm_value, p.don_value);
}

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Decision of one method on a prepared game.
inline RunDecision decide_run(const GameConfig& cfg, const GameSetup& setup) {
  RunDecision d;
  LatentPosterior post;
  const GameTranscript tr = receive(cfg, setup, &post);
  d.action = tr.receiver_action;
  d.aborted = tr.aborted;
  if (tr.aborted) return d;
  d.margin = def_margin(tr.payoffs, cfg.criterion);
  if (std::holds_alternative<SamplingMethod>(cfg.method)) {
    // batch means over the retained draws
    std::vector<double> m;
    for (const auto& bp : predict_pair_batches(post, cfg.x, cfg.o, kMarginBatches))
      m.push_back(def_margin(payoffs_for(bp, cfg.model, cfg.cost()), cfg.criterion));
    double mean = 0.0;
    for (double v : m) mean += v;
    mean /= static_cast<double>(m.size());
    double ss = 0.0;
    for (double v : m) ss += (v - mean) * (v - mean);
    d.margin_se = std::sqrt(ss / static_cast<double>(m.size() - 1) / static_cast<double>(m.size()));
  }
  return d;
}

/// Every method plays the same type and message on each run.
inline FrequencyTable run_frequency_study(const StudyConfig& cfg,
                                          const std::function<void(std::size_t)>& progress = {}) {
  validate(cfg);
  FrequencyTable table;
  for (const auto& m : cfg.methods) table.methods.push_back({method_name(m), {}, 0, cfg.n_runs});
  table.runs.assign(cfg.n_runs, std::vector<RunDecision>(cfg.methods.size()));
  std::atomic<std::size_t> done{0};
  parallel_for(cfg.n_runs, cfg.jobs, [&](std::size_t r) {
    GameConfig game = study_game(cfg, r);
    const GameSetup setup = prepare_game(game);
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      game.method = cfg.methods[m];
      table.runs[r][m] = decide_run(game, setup);
    }
    if (progress) progress(++done);
  });
  for (const auto& row : table.runs)
    for (std::size_t m = 0; m < row.size(); ++m) {
      table.methods[m].counts[static_cast<std::size_t>(row[m].action)] += 1;
      table.methods[m].aborted += row[m].aborted ? 1 : 0;
    }
  return table;
}

/// frequency.csv; a trailing `partial` column appears when any run aborted.
inline void write_frequency_csv(std::ostream& out, const FrequencyTable& t) {
  const bool partial = t.partial();
  out << "method,action,count,fraction" << (partial ? ",partial" : "") << "\n";
  for (const auto& m : t.methods)
    for (ReceiverAction a : kActions) {
      out << m.method << ',' << action_name(a) << ',' << m.count(a) << ',' << format_double(m.fraction(a));
      if (partial) out << ',' << (m.aborted > 0 ? 1 : 0);
      out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Risotto curves

/// Synthetic bimodal taste over the butter amount; generates the eight
/// listed preferences.
inline double risotto_taste(const Act& a) {
  const double x = a[0];
  return std::exp(-0.5 * (x - 6.8) * (x - 6.8) / 0.16) + 0.7 * std::exp(-0.5 * (x - 3.2) * (x - 3.2));
}

inline ChoiceDataset risotto_listed_preferences() {
  const std::array<std::pair<double, double>, 8> prefs{
      {{6.5, 3.5}, {7.0, 5.0}, {6.5, 5.5}, {3.5, 8.5}, {1.0, 9.0}, {7.0, 1.5}, {4.5, 7.5}, {3.5, 4.0}}};
  ChoiceDataset d;
  for (const auto& [w, l] : prefs) d.observations.push_back({{Act{w}, Act{l}}, {Act{w}}});
  return d;
}

inline std::vector<Act> risotto_pool() { return linear_grid(1.0, 9.0, 17); }

/// The eight listed preferences, extended to `n_prefs` with exact choices on
/// further distinct pairs of the butter pool.
inline ChoiceDataset risotto_preferences(std::size_t n_prefs, std::uint64_t seed) {
  ChoiceDataset d = risotto_listed_preferences();
  if (n_prefs <= d.length()) {
    d.observations.resize(n_prefs);
    return d;
  }
  const auto pool = risotto_pool();
  Rng rng(derive_seed(seed, 11));
  auto pairs = sample_pairs(pool, pair_count(pool.size()), rng);
  for (const auto& p : pairs) {
    if (d.length() >= n_prefs) break;
    const bool used = std::any_of(d.observations.begin(), d.observations.end(), [&](const ChoiceObservation& o) {
      return (o.choice_set[0] == p.first && o.choice_set[1] == p.second) ||
             (o.choice_set[0] == p.second && o.choice_set[1] == p.first);
    });
    if (used) continue;
    d.observations.push_back(make_observation(p, respond_to_pair(risotto_taste(p.first), risotto_taste(p.second),
                                                                 Exact{}, 0.0, 0.0)));
  }
  if (d.length() < n_prefs) throw InvalidArgument("risotto: not enough distinct pairs in the butter pool");
  return d;
}

inline Kernel risotto_kernel() { return SquaredExponential{1.0, 1.0}; }

inline constexpr std::size_t kCurveSamples = 10;

struct CurveTable {
  std::vector<Act> points;
  Prediction prediction;
  Eigen::MatrixXd samples;  // points x kCurveSamples
  ChoiceDataset data;
  LatentPosterior posterior;
};

inline CurveTable curves(const ChoiceDataset& data, const InferenceMethod& method, std::uint64_t seed,
                         std::size_t grid_points = 81) {
  CurveTable c;
  c.data = data;
  c.points = linear_grid(1.0, 9.0, grid_points);
  Rng rng(derive_seed(seed, 12));
  c.posterior = fit(data, risotto_kernel(), ConstantMean{}, LikelihoodSpec::indicator(), method, rng);
  c.prediction = predict(c.posterior, c.points);
  c.samples = sample_paths(c.posterior, c.points, kCurveSamples, rng);
  return c;
}

inline CurveTable run_risotto_demo(std::size_t n_prefs, const InferenceMethod& method, std::uint64_t seed = 0) {
  return curves(risotto_preferences(n_prefs, seed), method, seed);
}

/// curves.csv: x, mean, 95% half width, ten sample paths.
inline void write_curves_csv(std::ostream& out, const CurveTable& c) {
  out << "x,mean,half_width";
  for (std::size_t k = 1; k <= kCurveSamples; ++k) out << ",sample_" << k;
  out << "\n";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << format_act(c.points[i]) << ',' << format_double(c.prediction.mean(ii)) << ','
        << format_double(1.959963984540054 * std::sqrt(std::max(c.prediction.cov(ii, ii), 0.0)));
    for (Eigen::Index k = 0; k < c.samples.cols(); ++k) out << ',' << format_double(c.samples(ii, k));
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo payoff oracle

struct OracleEstimate {
  double mean = 0.0;
  double se = 0.0;
};

struct PayoffOracle {
  OracleEstimate def;     // noise mechanism
  OracleEstimate keep_x;  // threshold mechanism, indiscernible sender keeps x
  OracleEstimate keep_o;  // threshold mechanism, indiscernible sender keeps o
  OracleEstimate imm;
  OracleEstimate don;
  OracleEstimate block_x;  // E[nu(x) 1{nu(x) + n(x) > nu(o) + n(o)}]
  OracleEstimate abs_o;    // E|nu(o)|
};

enum class Mechanism { noise, threshold };

namespace detail {

/// Welford accumulator; identical inputs give an exactly zero error.
struct Running {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) {
    n += 1.0;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  [[nodiscard]] OracleEstimate estimate() const {
    return {mean, n > 1.0 ? std::sqrt(std::max(m2, 0.0) / (n - 1.0) / n) : 0.0};
  }
};

}  // namespace detail

inline constexpr std::size_t kMinOracleDraws = 10000;

/// Plain Monte Carlo over (nu(x), nu(o)) ~ N(mu, K) and the sender's noises.
/// `epsilon` is used by the threshold mechanism only.
inline PayoffOracle mc_payoff_oracle(const BivariatePosterior& bp, double sigma, Mechanism mechanism,
                                     std::size_t n_draws, Rng& rng, double epsilon = 0.0) {
  validate(bp);
  if (n_draws < kMinOracleDraws) throw InvalidArgument("mc_payoff_oracle: n_draws must be >= 10000");
  if (!(sigma >= 0.0)) throw InvalidArgument("mc_payoff_oracle: sigma must be >= 0");
  const double sx = std::sqrt(bp.k_xx);
  const double c = sx > 0.0 ? bp.k_xo / sx : 0.0;
  const double so = std::sqrt(std::max(bp.k_oo - c * c, 0.0));
  std::normal_distribution<double> normal;
  detail::Running def, kx, ko, imm, don, block, abs_o;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double n1 = normal(rng);
    const double n2 = normal(rng);
    const double nx = bp.mu_x + sx * z1;
    const double no = bp.mu_o + c * z1 + so * z2;
    imm.add(nx);
    don.add(no);
    abs_o.add(std::abs(no));
    if (mechanism == Mechanism::noise) {
      const bool keep_x = nx + sigma * n1 > no + sigma * n2;
      def.add(keep_x ? nx : no);
      block.add(keep_x ? nx : 0.0);
    } else {
      if (nx > no + sigma) {
        kx.add(nx);
        ko.add(nx);
      } else if (no > nx + sigma) {
        kx.add(no);
        ko.add(no);
      } else {
        kx.add(nx - epsilon);
        ko.add(no - epsilon);
      }
    }
  }
  return {def.estimate(), kx.estimate(), ko.estimate(),   imm.estimate(),
          don.estimate(), block.estimate(), abs_o.estimate()};
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParam { sigma, gamma };

struct SweepRow {
  double value = 0.0;
  std::string method;
  double def_fraction = 0.0;
  bool partial = false;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  /// Per method: whether the DEF fraction is non-increasing along the grid.
  std::vector<std::pair<std::string, bool>> non_increasing;
};

inline SweepTable sweep(SweepParam param, const std::vector<double>& grid, const StudyConfig& base,
                        const std::function<void(std::size_t)>& progress = {}) {
  if (grid.empty()) throw InvalidArgument("sweep: grid is empty");
  SweepTable out;
  std::vector<std::vector<double>> series(base.methods.size());
  for (double v : grid) {
    StudyConfig c = base;
    (param == SweepParam::sigma ? c.sigma : c.gamma) = v;
    const FrequencyTable t = run_frequency_study(c, progress);
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
      const double f = t.methods[m].fraction(ReceiverAction::DEF);
      out.rows.push_back({v, t.methods[m].method, f, t.methods[m].aborted > 0});
      series[m].push_back(f);
    }
  }
  for (std::size_t m = 0; m < base.methods.size(); ++m) {
    bool mono = true;
    for (std::size_t i = 1; i < series[m].size(); ++i) mono = mono && series[m][i] <= series[m][i - 1];
    out.non_increasing.emplace_back(method_name(base.methods[m]), mono);
  }
  return out;
}

inline void write_sweep_csv(std::ostream& out, const SweepTable& t) {
  const bool partial = std::any_of(t.rows.begin(), t.rows.end(), [](const SweepRow& r) { return r.partial; });
  out << "param_value,method,def_fraction" << (partial ? ",partial" : "") << "\n";
  for (const auto& r : t.rows) {
    out << format_double(r.value) << ',' << r.method << ',' << format_double(r.def_fraction);
    if (partial) out << ',' << (r.partial ? 1 : 0);
    out << "\n";
  }
}

}  // namespace offswitch
