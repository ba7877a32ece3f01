#pragma once

// Acts, choice data, and the choice mechanisms a sender may follow.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <variant>

#include "offswitch/common.hpp"

namespace offswitch {

struct ChoiceObservation {
  std::vector<Act> choice_set;
  std::vector<Act> chosen;

  friend bool operator==(const ChoiceObservation&, const ChoiceObservation&) = default;

  /// Two-act set with a single chosen act.
  [[nodiscard]] bool is_strict_pair() const { return choice_set.size() == 2 && chosen.size() == 1; }
  /// Two-act set with both acts chosen.
  [[nodiscard]] bool is_indifferent_pair() const { return choice_set.size() == 2 && chosen.size() == 2; }
};

/// The sender's message: a list of observed choices. Its length is the
/// number of observations.
struct ChoiceDataset {
  std::vector<ChoiceObservation> observations;

  [[nodiscard]] std::size_t length() const { return observations.size(); }
  [[nodiscard]] bool empty() const { return observations.empty(); }

  friend bool operator==(const ChoiceDataset&, const ChoiceDataset&) = default;
};

inline void validate(const ChoiceObservation& obs) {
  if (obs.choice_set.empty()) throw InvalidArgument("observation: empty choice set");
  if (obs.chosen.empty()) throw InvalidArgument("observation: empty chosen subset");
  const std::size_t dim = obs.choice_set.front().dim();
  for (const auto& a : obs.choice_set) {
    if (a.dim() != dim || dim == 0) throw InvalidArgument("observation: acts of mixed dimension");
    for (double c : a.coords)
      if (!std::isfinite(c)) throw InvalidArgument("observation: non-finite coordinate");
  }
  for (const auto& c : obs.chosen)
    if (std::find(obs.choice_set.begin(), obs.choice_set.end(), c) == obs.choice_set.end())
      throw InvalidArgument("observation: chosen act " + format_act(c) + " is not in the choice set");
}

inline void validate(const ChoiceDataset& data) {
  std::size_t dim = 0;
  for (const auto& obs : data.observations) {
    validate(obs);
    const std::size_t d = obs.choice_set.front().dim();
    if (dim == 0) dim = d;
    if (d != dim) throw InvalidArgument("dataset: observations of mixed act dimension");
  }
}

// ---------------------------------------------------------------------------
// Rationality models

struct Exact {};
struct GaussianNoise {
  double sigma = 1.0;
};
struct DiscernibilityThreshold {
  double sigma = 1.0;
  double epsilon = 0.5;
};

using RationalityModel = std::variant<Exact, GaussianNoise, DiscernibilityThreshold>;

inline void validate(const RationalityModel& model) {
  if (const auto* g = std::get_if<GaussianNoise>(&model)) {
    if (!(g->sigma > 0.0) || !std::isfinite(g->sigma)) throw InvalidArgument("GaussianNoise: sigma must be > 0");
  } else if (const auto* t = std::get_if<DiscernibilityThreshold>(&model)) {
    if (!(t->sigma > 0.0) || !std::isfinite(t->sigma))
      throw InvalidArgument("DiscernibilityThreshold: sigma must be > 0");
    if (!(t->epsilon > 0.0) || t->epsilon > t->sigma)
      throw InvalidArgument("DiscernibilityThreshold: epsilon must lie in (0, sigma]");
  }
}

/// The model's sigma; zero for the exact model.
inline double model_sigma(const RationalityModel& model) {
  if (const auto* g = std::get_if<GaussianNoise>(&model)) return g->sigma;
  if (const auto* t = std::get_if<DiscernibilityThreshold>(&model)) return t->sigma;
  return 0.0;
}

inline std::string model_name(const RationalityModel& model) {
  if (std::holds_alternative<GaussianNoise>(model)) return "noise";
  if (std::holds_alternative<DiscernibilityThreshold>(model)) return "threshold";
  return "exact";
}

using UtilityFunction = std::function<double(const Act&)>;
using VectorUtilityFunction = std::function<std::vector<double>(const Act&)>;

// ---------------------------------------------------------------------------
// Choice mechanisms on values aligned with a choice set; results are indices.

/// Scalar optimisation choice. Values must be pairwise distinct.
inline std::vector<std::size_t> exact_choice_indices(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("exact_choice: empty choice set");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidArgument("exact_choice: tied utilities violate the distinctness assumption");
  const auto best = std::max_element(values.begin(), values.end());
  return {static_cast<std::size_t>(best - values.begin())};
}

/// a strictly dominates b in every component.
inline bool strictly_dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("dominance: dimension mismatch");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!(a[k] > b[k])) return false;
  return true;
}

/// Vector optimisation choice: acts not strictly dominated by another act.
inline std::vector<std::size_t> pareto_choice_indices(std::span<const std::vector<double>> values) {
  if (values.empty()) throw InvalidArgument("pareto_choice: empty choice set");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < values.size() && !dominated; ++j)
      dominated = j != i && strictly_dominates(values[j], values[i]);
    if (!dominated) out.push_back(i);
  }
  return out;
}

/// Union over components of the argmax sets.
inline std::vector<std::size_t> e_admissible_choice_indices(std::span<const std::vector<double>> values) {
  if (values.empty()) throw InvalidArgument("e_admissible_choice: empty choice set");
  const std::size_t d = values.front().size();
  std::vector<bool> keep(values.size(), false);
  for (std::size_t k = 0; k < d; ++k) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : values) {
      if (v.size() != d) throw InvalidArgument("e_admissible_choice: dimension mismatch");
      best = std::max(best, v[k]);
    }
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i][k] == best) keep[i] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

namespace detail {
inline std::vector<Act> pick(std::span<const Act> acts, const std::vector<std::size_t>& idx) {
  std::vector<Act> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(acts[i]);
  return out;
}
}  // namespace detail

inline std::vector<Act> exact_choice(const UtilityFunction& nu, std::span<const Act> choice_set) {
  std::vector<double> v;
  for (const auto& a : choice_set) v.push_back(nu(a));
  return detail::pick(choice_set, exact_choice_indices(v));
}

inline std::vector<Act> pareto_choice(const VectorUtilityFunction& nu, std::span<const Act> choice_set) {
  std::vector<std::vector<double>> v;
  for (const auto& a : choice_set) v.push_back(nu(a));
  return detail::pick(choice_set, pareto_choice_indices(v));
}

inline std::vector<Act> e_admissible_choice(const VectorUtilityFunction& nu, std::span<const Act> choice_set) {
  std::vector<std::vector<double>> v;
  for (const auto& a : choice_set) v.push_back(nu(a));
  return detail::pick(choice_set, e_admissible_choice_indices(v));
}

/// Outcome of a two-act choice {z, y}.
enum class PairOutcome { first, second, both };

/// Random-utility choice: z is chosen iff nu_z + n_z > nu_y + n_y with
/// independent N(0, sigma^2) noises. Two normals are consumed per call.
inline PairOutcome noisy_pair_choice(double nu_z, double nu_y, double sigma, Rng& rng) {
  if (!(sigma > 0.0)) throw InvalidArgument("noisy_pair_choice: sigma must be > 0");
  std::normal_distribution<double> normal;
  const double nz = sigma * normal(rng);
  const double ny = sigma * normal(rng);
  return nu_z + nz > nu_y + ny ? PairOutcome::first : PairOutcome::second;
}

/// Discernibility-threshold choice.
inline PairOutcome threshold_choice(double nu_z, double nu_y, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("threshold_choice: sigma must be > 0");
  if (nu_z > nu_y + sigma) return PairOutcome::first;
  if (nu_y > nu_z + sigma) return PairOutcome::second;
  return PairOutcome::both;
}

// ---------------------------------------------------------------------------
// Honest messages

struct ActPair {
  Act first;
  Act second;
};

/// Pair outcome under `model` given the two utilities and the sender's noises
/// (noises are ignored unless the model is GaussianNoise).
inline PairOutcome respond_to_pair(double nu_first, double nu_second, const RationalityModel& model,
                                   double noise_first, double noise_second) {
  return std::visit(
      [&](const auto& m) -> PairOutcome {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Exact>) {
          if (nu_first == nu_second) throw InvalidArgument("exact choice: tied utilities");
          return nu_first > nu_second ? PairOutcome::first : PairOutcome::second;
        } else if constexpr (std::is_same_v<M, GaussianNoise>) {
          return nu_first + m.sigma * noise_first > nu_second + m.sigma * noise_second ? PairOutcome::first
                                                                                       : PairOutcome::second;
        } else {
          return threshold_choice(nu_first, nu_second, m.sigma);
        }
      },
      model);
}

inline ChoiceObservation make_observation(const ActPair& pair, PairOutcome outcome) {
  ChoiceObservation obs{{pair.first, pair.second}, {}};
  switch (outcome) {
    case PairOutcome::first: obs.chosen = {pair.first}; break;
    case PairOutcome::second: obs.chosen = {pair.second}; break;
    case PairOutcome::both: obs.chosen = {pair.first, pair.second}; break;
  }
  return obs;
}

/// Uniform draw of `n` distinct unordered pairs from the pool.
inline std::vector<ActPair> sample_pairs(std::span<const Act> pool, std::size_t n, Rng& rng) {
  std::vector<ActPair> all;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) all.push_back({pool[i], pool[j]});
  if (pool.size() < 2) throw InvalidArgument("sample_pairs: need at least two acts");
  if (n > all.size()) throw InvalidArgument("sample_pairs: more pairs requested than the pool provides");
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(n);
  return all;
}

/// Honest observations on fixed pairs. Two standard normals are consumed per
/// pair whatever the model, so every model sees the same stream alignment.
inline ChoiceDataset message_for_pairs(const UtilityFunction& utility, const RationalityModel& model,
                                       std::span<const ActPair> pairs, Rng& rng) {
  validate(model);
  std::normal_distribution<double> normal;
  ChoiceDataset data;
  for (const auto& p : pairs) {
    const double n1 = normal(rng);
    const double n2 = normal(rng);
    data.observations.push_back(make_observation(p, respond_to_pair(utility(p.first), utility(p.second), model, n1, n2)));
  }
  return data;
}

inline ChoiceDataset honest_message(const UtilityFunction& utility, const RationalityModel& model,
                                    std::span<const Act> pool, std::size_t n_pairs, Rng& rng) {
  if (n_pairs == 0) throw InvalidArgument("honest_message: n_pairs must be >= 1");
  const auto pairs = sample_pairs(pool, n_pairs, rng);
  return message_for_pairs(utility, model, pairs, rng);
}

// ---------------------------------------------------------------------------
// Path independence

/// A choice rule over subsets of a universe {0, ..., n-1}; input and output
/// are sorted index lists.
using ChoiceRule = std::function<std::vector<std::size_t>(const std::vector<std::size_t>&)>;

inline ChoiceRule exact_rule(std::vector<double> values) {
  return [values = std::move(values)](const std::vector<std::size_t>& subset) {
    std::vector<double> v;
    for (auto i : subset) v.push_back(values[i]);
    std::vector<std::size_t> out;
    for (auto k : exact_choice_indices(v)) out.push_back(subset[k]);
    return out;
  };
}

namespace detail {
template <typename F>
ChoiceRule vector_rule(std::vector<std::vector<double>> values, F choose) {
  return [values = std::move(values), choose](const std::vector<std::size_t>& subset) {
    std::vector<std::vector<double>> v;
    for (auto i : subset) v.push_back(values[i]);
    std::vector<std::size_t> out;
    for (auto k : choose(v)) out.push_back(subset[k]);
    return out;
  };
}
}  // namespace detail

inline ChoiceRule pareto_rule(std::vector<std::vector<double>> values) {
  return detail::vector_rule(std::move(values),
                             [](std::span<const std::vector<double>> v) { return pareto_choice_indices(v); });
}

inline ChoiceRule e_admissible_rule(std::vector<std::vector<double>> values) {
  return detail::vector_rule(std::move(values),
                             [](std::span<const std::vector<double>> v) { return e_admissible_choice_indices(v); });
}

inline constexpr std::size_t kMaxPathIndependenceUniverse = 12;

/// Exhaustively checks C(A u B) == C(C(A) u B) over all subset pairs.
inline bool check_path_independence(const ChoiceRule& rule, std::size_t universe_size) {
  if (universe_size > kMaxPathIndependenceUniverse)
    throw InvalidArgument("check_path_independence: universe too large for exhaustive enumeration");
  const std::size_t n_sets = std::size_t{1} << universe_size;
  auto to_list = [&](std::size_t mask) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < universe_size; ++i)
      if (mask & (std::size_t{1} << i)) out.push_back(i);
    return out;
  };
  std::vector<std::size_t> chosen(n_sets, 0);
  for (std::size_t mask = 1; mask < n_sets; ++mask) {
    std::size_t c = 0;
    for (auto i : rule(to_list(mask))) c |= std::size_t{1} << i;
    if ((c & ~mask) != 0) return false;  // a rule must choose from its input
    chosen[mask] = c;
  }
  for (std::size_t a = 0; a < n_sets; ++a)
    for (std::size_t b = 0; b < n_sets; ++b)
      if (chosen[a | b] != chosen[chosen[a] | b]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Text format: one observation per line,
//   set: <act> <act> ... | chosen: <act> ...
// with each act written as comma-separated coordinates.

inline std::string format_observation(const ChoiceObservation& obs) {
  std::string line = "set:";
  for (const auto& a : obs.choice_set) line += ' ' + format_act(a);
  line += " | chosen:";
  for (const auto& a : obs.chosen) line += ' ' + format_act(a);
  return line;
}

inline std::string format_dataset(const ChoiceDataset& data) {
  std::string out;
  for (const auto& obs : data.observations) out += format_observation(obs) + '\n';
  return out;
}

namespace detail {
inline std::vector<Act> parse_acts(std::string_view text) {
  std::vector<Act> acts;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) {
    std::vector<double> coords;
    std::size_t start = 0;
    while (true) {
      const auto comma = token.find(',', start);
      coords.push_back(parse_double(std::string_view(token).substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    acts.emplace_back(std::move(coords));
  }
  return acts;
}
}  // namespace detail

/// Parses the text format. Blank lines and '#' comments are skipped; errors
/// name the offending line.
inline ChoiceDataset parse_dataset(std::string_view text) {
  ChoiceDataset data;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') {
      if (end == text.size()) break;
      continue;
    }
    try {
      const auto set_pos = line.find("set:");
      const auto bar = line.find('|');
      const auto chosen_pos = line.find("chosen:");
      if (set_pos == std::string_view::npos || bar == std::string_view::npos ||
          chosen_pos == std::string_view::npos || !(set_pos < bar && bar < chosen_pos))
        throw InvalidArgument("expected 'set: ... | chosen: ...'");
      ChoiceObservation obs;
      obs.choice_set = detail::parse_acts(line.substr(set_pos + 4, bar - set_pos - 4));
      obs.chosen = detail::parse_acts(line.substr(chosen_pos + 7));
      validate(obs);
      data.observations.push_back(std::move(obs));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  try {
    validate(data);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("dataset: ") + e.what());
  }
  return data;
}

}  // namespace offswitch
