#pragma once

// One play of the off-switch signalling game: Nature draws the sender's
// type, the sender emits its honest message, the receiver fits a posterior
// and acts, and on DEF the sender decides whether to switch the robot off.

#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "offswitch/decision.hpp"

namespace offswitch {

struct GameConfig {
  std::vector<Act> grid = linear_grid(1.0, 9.0, 17);
  Act x{6.0};
  Act o{4.0};
  Kernel kernel = SquaredExponential{1.0, 1.0};
  MeanFunction mean{};
  RationalityModel model = GaussianNoise{1.0};
  std::size_t n_prefs = 30;
  InferenceMethod method = LaplaceMethod{};
  double gamma = 0.0;
  DominanceCriterion criterion = DominanceCriterion::PessimisticA;
  double surrogate_scale = kSurrogateScale;
  std::uint64_t seed = 0;

  [[nodiscard]] CostParams cost() const { return {gamma, n_prefs}; }
};

inline std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

inline void validate(const GameConfig& cfg) {
  if (cfg.grid.size() < 2) throw InvalidArgument("game: grid needs at least two acts");
  const std::size_t dim = cfg.grid.front().dim();
  if (dim == 0) throw InvalidArgument("game: acts need at least one coordinate");
  std::vector<double> lo(cfg.grid.front().coords), hi(cfg.grid.front().coords);
  for (const auto& a : cfg.grid) {
    if (a.dim() != dim) throw InvalidArgument("game: grid acts of mixed dimension");
    for (std::size_t k = 0; k < dim; ++k) {
      if (!std::isfinite(a[k])) throw InvalidArgument("game: non-finite grid coordinate");
      lo[k] = std::min(lo[k], a[k]);
      hi[k] = std::max(hi[k], a[k]);
    }
  }
  for (const Act* a : {&cfg.x, &cfg.o}) {
    if (a->dim() != dim) throw InvalidArgument("game: x and o must match the grid dimension");
    for (std::size_t k = 0; k < dim; ++k)
      if (!((*a)[k] >= lo[k] && (*a)[k] <= hi[k])) throw InvalidArgument("game: x and o must lie inside the grid");
  }
  if (cfg.x == cfg.o) throw InvalidArgument("game: x and o must differ");
  if (cfg.n_prefs < 1) throw InvalidArgument("game: n_prefs must be >= 1");
  if (cfg.n_prefs > pair_count(cfg.grid.size()))
    throw InvalidArgument("game: n_prefs exceeds the number of distinct grid pairs");
  validate(cfg.kernel);
  validate(cfg.model);
  validate(cfg.method);
  validate(cfg.cost());
  if (!(cfg.surrogate_scale > 0.0)) throw InvalidArgument("game: surrogate scale must be > 0");
}

/// Canonical key=value rendering; the config hash is taken over it.
inline std::string canonical_config(const GameConfig& cfg) {
  std::ostringstream s;
  const auto& se = std::get<SquaredExponential>(cfg.kernel);
  s << "grid=";
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) s << (i ? ";" : "") << format_act(cfg.grid[i]);
  s << "\nx=" << format_act(cfg.x) << "\no=" << format_act(cfg.o) << "\nkernel.variance=" << format_double(se.variance)
    << "\nkernel.lengthscale=" << format_double(se.lengthscale) << "\nmean=" << format_double(cfg.mean.value)
    << "\nmodel=" << model_name(cfg.model) << "\nsigma=" << format_double(model_sigma(cfg.model));
  if (const auto* t = std::get_if<DiscernibilityThreshold>(&cfg.model)) s << "\nepsilon=" << format_double(t->epsilon);
  s << "\nn_prefs=" << cfg.n_prefs << "\nmethod=" << method_name(cfg.method);
  if (const auto* ep = std::get_if<EpMethod>(&cfg.method))
    s << "\nep.damping=" << format_double(ep->damping) << "\nep.tol=" << format_double(ep->tol)
      << "\nep.max_sweeps=" << ep->max_sweeps;
  if (const auto* sm = std::get_if<SamplingMethod>(&cfg.method))
    s << "\nsampling.n_samples=" << sm->n_samples << "\nsampling.burn_in=" << sm->burn_in;
  s << "\ngamma=" << format_double(cfg.gamma)
    << "\ncriterion=" << (cfg.criterion == DominanceCriterion::PessimisticA ? "A" : "B")
    << "\nsurrogate=" << format_double(cfg.surrogate_scale) << "\nseed=" << cfg.seed << "\n";
  return s.str();
}

inline std::string config_hash(const GameConfig& cfg) { return hex64(fnv1a(canonical_config(cfg))); }

// ---------------------------------------------------------------------------
// Nature

/// The sender's type: utilities on the grid and at x, o, plus its noises.
struct TypeRealization {
  std::vector<Act> points;
  std::vector<double> utility;
  /// N(0, sigma^2) noises, two per message observation.
  std::vector<double> message_noise;
  /// Noises on nu(x) and nu(o) for the response to DEF.
  double response_noise_x = 0.0;
  double response_noise_o = 0.0;

  [[nodiscard]] double utility_at(const Act& a) const {
    auto it = std::find(points.begin(), points.end(), a);
    if (it == points.end()) throw InvalidArgument("type: act " + format_act(a) + " outside the realized support");
    return utility[static_cast<std::size_t>(it - points.begin())];
  }
};

inline std::vector<Act> type_support(const GameConfig& cfg) {
  std::vector<Act> pts = cfg.grid;
  for (const Act* a : {&cfg.x, &cfg.o})
    if (std::find(pts.begin(), pts.end(), *a) == pts.end()) pts.push_back(*a);
  return pts;
}

inline TypeRealization draw_type(const GameConfig& cfg, Rng& rng) {
  validate(cfg);
  TypeRealization t;
  t.points = type_support(cfg);
  const GramMatrix k(cfg.kernel, cfg.mean, t.points);
  const Eigen::VectorXd nu = mvn_sample(k.mean(), k, rng);
  t.utility.assign(nu.data(), nu.data() + nu.size());
  const double sigma = std::holds_alternative<GaussianNoise>(cfg.model) ? model_sigma(cfg.model) : 0.0;
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < 2 * cfg.n_prefs; ++i) t.message_noise.push_back(sigma * normal(rng));
  t.response_noise_x = sigma * normal(rng);
  t.response_noise_o = sigma * normal(rng);
  return t;
}

/// Honest message on the given pairs, using the type's own noises.
inline ChoiceDataset type_message(const TypeRealization& t, const RationalityModel& model,
                                  std::span<const ActPair> pairs) {
  if (t.message_noise.size() < 2 * pairs.size()) throw InvalidArgument("type: not enough message noises");
  ChoiceDataset data;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double a = t.utility_at(pairs[i].first);
    const double b = t.utility_at(pairs[i].second);
    PairOutcome out;
    if (std::holds_alternative<GaussianNoise>(model)) {
      out = a + t.message_noise[2 * i] > b + t.message_noise[2 * i + 1] ? PairOutcome::first : PairOutcome::second;
    } else {
      out = respond_to_pair(a, b, model, 0.0, 0.0);
    }
    data.observations.push_back(make_observation(pairs[i], out));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Sender response and realized payoffs

enum class SenderAction { None, OFF, NotOFF };

inline std::string sender_action_name(SenderAction a) {
  switch (a) {
    case SenderAction::None: return "None";
    case SenderAction::OFF: return "OFF";
    case SenderAction::NotOFF: return "NotOFF";
  }
  return "?";
}

struct SenderResponse {
  SenderAction action = SenderAction::OFF;
  /// Set when the threshold sender cannot discern x from o.
  bool indiscernible = false;
};

/// The sender's answer to DEF. The indiscernible threshold sender keeps the
/// status quo.
inline SenderResponse sender_response(const TypeRealization& t, const RationalityModel& model, const Act& x,
                                      const Act& o) {
  const double nx = t.utility_at(x);
  const double no = t.utility_at(o);
  if (std::holds_alternative<GaussianNoise>(model))
    return {nx + t.response_noise_x > no + t.response_noise_o ? SenderAction::NotOFF : SenderAction::OFF, false};
  if (const auto* th = std::get_if<DiscernibilityThreshold>(&model)) {
    switch (threshold_choice(nx, no, th->sigma)) {
      case PairOutcome::first: return {SenderAction::NotOFF, false};
      case PairOutcome::second: return {SenderAction::OFF, false};
      case PairOutcome::both: return {SenderAction::OFF, true};
    }
  }
  return {nx > no ? SenderAction::NotOFF : SenderAction::OFF, false};
}

struct RealizedPayoff {
  double utility = 0.0;
  std::optional<DefSet> set;  // {nu(x) - eps, nu(o) - eps} in the indiscernible case
};

inline RealizedPayoff realized_payoff(const TypeRealization& t, const RationalityModel& model, const Act& x,
                                      const Act& o, ReceiverAction action, const SenderResponse& resp) {
  const double nx = t.utility_at(x);
  const double no = t.utility_at(o);
  switch (action) {
    case ReceiverAction::IMM: return {nx, std::nullopt};
    case ReceiverAction::DoN: return {no, std::nullopt};
    case ReceiverAction::DEF:
      if (resp.indiscernible) {
        const double eps = std::get<DiscernibilityThreshold>(model).epsilon;
        return {no - eps, DefSet{nx - eps, no - eps}};
      }
      return {resp.action == SenderAction::NotOFF ? nx : no, std::nullopt};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Transcripts

struct GameTranscript {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string model;
  std::string method;
  Act x;
  Act o;
  double nu_x = 0.0;
  double nu_o = 0.0;
  ChoiceDataset message;
  BivariatePosterior posterior;
  ExpectedPayoffs payoffs;
  ReceiverAction receiver_action = ReceiverAction::DoN;
  SenderAction sender_action = SenderAction::None;
  double realized_utility = 0.0;
  std::optional<DefSet> realized_set;
  /// Communication cost actually paid, gamma |nu(o)| (n_prefs + [DEF]).
  double realized_cost = 0.0;
  /// Sender and receiver share the realized utility of the human.
  double sender_utility = 0.0;
  double receiver_utility = 0.0;
  bool aborted = false;
  std::string abort_reason;
  FitDiagnostics diagnostics;
};

inline nlohmann::ordered_json to_json(const GameTranscript& tr) {
  using nlohmann::ordered_json;
  auto def = ordered_json();
  if (const auto* s = std::get_if<DefSet>(&tr.payoffs.def_value)) {
    def = ordered_json{{"keep_x", s->keep_x}, {"keep_o", s->keep_o}};
  } else {
    def = std::get<double>(tr.payoffs.def_value);
  }
  auto message = ordered_json::array();
  for (const auto& obs : tr.message.observations) message.push_back(format_observation(obs));
  ordered_json j;
  j["config_hash"] = tr.config_hash;
  j["seed"] = tr.seed;
  j["model"] = tr.model;
  j["method"] = tr.method;
  j["x"] = tr.x.coords;
  j["o"] = tr.o.coords;
  j["type"] = ordered_json{{"nu_x", tr.nu_x}, {"nu_o", tr.nu_o}};
  j["message"] = message;
  j["posterior"] = ordered_json{{"mu_x", tr.posterior.mu_x},
                                {"mu_o", tr.posterior.mu_o},
                                {"k_xx", tr.posterior.k_xx},
                                {"k_oo", tr.posterior.k_oo},
                                {"k_xo", tr.posterior.k_xo}};
  j["payoffs"] = ordered_json{{"def", def},
                              {"imm", tr.payoffs.imm_value},
                              {"don", tr.payoffs.don_value},
                              {"beta", tr.payoffs.beta},
                              {"common_cost", tr.payoffs.common_cost},
                              {"p", tr.payoffs.p},
                              {"e", tr.payoffs.e}};
  j["receiver_action"] = action_name(tr.receiver_action);
  j["sender_action"] = sender_action_name(tr.sender_action);
  j["realized_utility"] = tr.realized_utility;
  if (tr.realized_set) {
    j["realized_set"] = ordered_json::array({tr.realized_set->keep_x, tr.realized_set->keep_o});
  } else {
    j["realized_set"] = nullptr;
  }
  j["realized_cost"] = tr.realized_cost;
  j["sender_utility"] = tr.sender_utility;
  j["receiver_utility"] = tr.receiver_utility;
  j["aborted"] = tr.aborted;
  j["abort_reason"] = tr.abort_reason;
  j["diagnostics"] = ordered_json{{"iterations", tr.diagnostics.iterations},
                                  {"gradient_norm", tr.diagnostics.gradient_norm},
                                  {"max_site_change", tr.diagnostics.max_site_change},
                                  {"slice_evaluations", tr.diagnostics.slice_evaluations}};
  return j;
}

/// One JSON object per line.
inline std::string transcript_line(const GameTranscript& tr) { return to_json(tr).dump() + "\n"; }

inline std::string transcript_hash(const GameTranscript& tr) { return hex64(fnv1a(transcript_line(tr))); }

// ---------------------------------------------------------------------------
// Play

/// Everything the sender side produces before the receiver moves.
struct GameSetup {
  TypeRealization type;
  std::vector<ActPair> pairs;
  ChoiceDataset message;
};

enum class Stream : std::uint64_t { type = 0, pairs = 1, inference = 2 };

inline GameSetup prepare_game(const GameConfig& cfg) {
  validate(cfg);
  GameSetup s;
  Rng type_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::type)));
  s.type = draw_type(cfg, type_rng);
  Rng pair_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::pairs)));
  s.pairs = sample_pairs(cfg.grid, cfg.n_prefs, pair_rng);
  s.message = type_message(s.type, cfg.model, s.pairs);
  return s;
}

/// Receiver's move and the sender's reply, given the sender side of the game.
/// Inference failures produce an aborted transcript that records DoN.
inline GameTranscript receive(const GameConfig& cfg, const GameSetup& setup, LatentPosterior* posterior = nullptr) {
  GameTranscript tr;
  tr.config_hash = config_hash(cfg);
  tr.seed = cfg.seed;
  tr.model = model_name(cfg.model);
  tr.method = method_name(cfg.method);
  tr.x = cfg.x;
  tr.o = cfg.o;
  tr.nu_x = setup.type.utility_at(cfg.x);
  tr.nu_o = setup.type.utility_at(cfg.o);
  tr.message = setup.message;
  try {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::inference)));
    const LatentPosterior post = fit(setup.message, cfg.kernel, cfg.mean,
                                     likelihood_for(cfg.model, cfg.surrogate_scale), cfg.method, rng);
    tr.diagnostics = post.diagnostics;
    tr.posterior = predict_pair(post, cfg.x, cfg.o);
    if (posterior) *posterior = post;
    validate(tr.posterior);
    tr.payoffs = payoffs_for(tr.posterior, cfg.model, cfg.cost());
    tr.receiver_action = decide(tr.payoffs, cfg.criterion);
  } catch (const NumericalError& e) {
    tr.aborted = true;
    tr.abort_reason = e.what();
    tr.receiver_action = ReceiverAction::DoN;
  }
  SenderResponse resp{SenderAction::None, false};
  if (tr.receiver_action == ReceiverAction::DEF) {
    resp = sender_response(setup.type, cfg.model, cfg.x, cfg.o);
    tr.sender_action = resp.action;
  }
  const RealizedPayoff r = realized_payoff(setup.type, cfg.model, cfg.x, cfg.o, tr.receiver_action, resp);
  tr.realized_utility = r.utility;
  tr.realized_set = r.set;
  const double units = static_cast<double>(cfg.n_prefs) + (tr.receiver_action == ReceiverAction::DEF ? 1.0 : 0.0);
  tr.realized_cost = cfg.gamma * std::abs(tr.nu_o) * units;
  tr.sender_utility = tr.realized_utility;
  tr.receiver_utility = tr.realized_utility;
  return tr;
}

inline GameTranscript play(const GameConfig& cfg) { return receive(cfg, prepare_game(cfg)); }

/// Plays with the seed taken from the caller's stream.
inline GameTranscript play(GameConfig cfg, Rng& rng) {
  cfg.seed = rng();
  return play(cfg);
}

// ---------------------------------------------------------------------------
// Honest-message verification

struct MessageScore {
  ChoiceDataset message;
  ReceiverAction receiver_action = ReceiverAction::DoN;
  double sender_payoff = 0.0;
  bool honest = false;
};

struct HonestMessageReport {
  std::vector<MessageScore> messages;
  double honest_payoff = 0.0;
  double best_payoff = 0.0;
  std::size_t n_best = 0;

  [[nodiscard]] bool honest_is_best() const { return honest_payoff >= best_payoff; }
};

inline constexpr std::size_t kMaxVerifyPrefs = 4;

/// Enumerates every message over n_prefs repetitions of the pair {x, o} and
/// scores each by the sender's realized utility under the receiver's best
/// response. Under the threshold model an indiscernible sender is indifferent
/// between all outcomes.
inline HonestMessageReport verify_honest_message(const GameConfig& cfg, double nu_x, double nu_o) {
  if (std::holds_alternative<GaussianNoise>(cfg.model))
    throw InvalidArgument("verify: only the exact and threshold models have a deterministic honest message");
  if (cfg.n_prefs < 1 || cfg.n_prefs > kMaxVerifyPrefs)
    throw InvalidArgument("verify: n_prefs must lie in [1, 4] for exhaustive enumeration");
  if (cfg.x == cfg.o) throw InvalidArgument("verify: x and o must differ");
  validate(cfg.model);
  validate(cfg.method);
  const bool threshold = std::holds_alternative<DiscernibilityThreshold>(cfg.model);
  const std::size_t arity = threshold ? 3 : 2;

  TypeRealization t;
  t.points = {cfg.x, cfg.o};
  t.utility = {nu_x, nu_o};
  t.message_noise.assign(2 * cfg.n_prefs, 0.0);
  const ActPair pair{cfg.x, cfg.o};
  const PairOutcome honest = respond_to_pair(nu_x, nu_o, cfg.model, 0.0, 0.0);
  const bool indifferent = threshold && std::abs(nu_x - nu_o) <= model_sigma(cfg.model);

  std::size_t total = 1;
  for (std::size_t i = 0; i < cfg.n_prefs; ++i) total *= arity;

  HonestMessageReport report;
  report.best_payoff = -kInf;
  for (std::size_t code = 0; code < total; ++code) {
    MessageScore score;
    score.honest = true;
    std::size_t c = code;
    for (std::size_t i = 0; i < cfg.n_prefs; ++i, c /= arity) {
      const auto out = static_cast<PairOutcome>(c % arity);
      score.honest = score.honest && out == honest;
      score.message.observations.push_back(make_observation(pair, out));
    }
    try {
      Rng rng(derive_seed(cfg.seed, code));
      const auto post =
          fit(score.message, cfg.kernel, cfg.mean, likelihood_for(cfg.model, cfg.surrogate_scale), cfg.method, rng);
      score.receiver_action = decide(payoffs_for(predict_pair(post, cfg.x, cfg.o), cfg.model, {}), cfg.criterion);
    } catch (const NumericalError&) {
      score.receiver_action = ReceiverAction::DoN;
    }
    if (indifferent) {
      score.sender_payoff = 0.0;
    } else {
      const auto resp = score.receiver_action == ReceiverAction::DEF ? sender_response(t, cfg.model, cfg.x, cfg.o)
                                                                     : SenderResponse{SenderAction::None, false};
      score.sender_payoff = realized_payoff(t, cfg.model, cfg.x, cfg.o, score.receiver_action, resp).utility;
    }
    if (score.honest) report.honest_payoff = score.sender_payoff;
    report.best_payoff = std::max(report.best_payoff, score.sender_payoff);
    report.messages.push_back(std::move(score));
  }
  for (const auto& m : report.messages) report.n_best += m.sender_payoff == report.best_payoff ? 1 : 0;
  return report;
}

}  // namespace offswitch
