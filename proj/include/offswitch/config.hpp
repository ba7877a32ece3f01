#pragma once

// Flat key=value configuration. One entry per line; '#' starts a comment.
// Unknown keys are rejected and values are validated when read.

#include <fstream>
#include <map>
#include <optional>

#include "offswitch/experiments.hpp"

namespace offswitch {

struct ConfigKey {
  std::string_view name;
  std::string_view fallback;
  std::string_view help;
};

inline constexpr std::array<ConfigKey, 29> kConfigKeys{{
    {"seed", "0", "base seed of every random stream"},
    {"grid.lo", "1", "lower end of the act grid"},
    {"grid.hi", "9", "upper end of the act grid"},
    {"grid.points", "17", "number of grid acts"},
    {"x", "6", "new act proposed by the robot"},
    {"o", "4", "status-quo act"},
    {"kernel.variance", "1", "squared-exponential variance"},
    {"kernel.lengthscale", "1", "squared-exponential lengthscale"},
    {"mean", "0", "constant prior mean"},
    {"model", "noise", "exact | noise | threshold"},
    {"sigma", "1", "noise scale or discernibility threshold"},
    {"epsilon", "0.5", "imprecision penalty of the threshold model"},
    {"n_prefs", "30", "message length (pairs)"},
    {"method", "laplace", "map | laplace | ep | sampling"},
    {"ep.damping", "0.8", "EP damping"},
    {"ep.tol", "1e-6", "EP tolerance on site parameters"},
    {"ep.max_sweeps", "200", "EP sweep limit"},
    {"sampling.n_samples", "10000", "sampler iterations"},
    {"sampling.burn_in", "1000", "sampler burn-in"},
    {"gamma", "0", "message cost per unit, relative to |nu(o)|"},
    {"criterion", "A", "A (pessimistic) | B (optimistic) for set-valued DEF"},
    {"surrogate", "0.001", "smoothing scale for hard likelihoods"},
    {"runs", "200", "study runs"},
    {"methods", "map,laplace,ep,sampling", "study methods"},
    {"lengthscale.lo", "0.5", "study lengthscale range"},
    {"lengthscale.hi", "3", "study lengthscale range"},
    {"variance.lo", "0.5", "study variance range"},
    {"variance.hi", "2", "study variance range"},
    {"jobs", "1", "worker threads for studies"},
}};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

class Config {
 public:
  Config() = default;

  static bool known(std::string_view key) {
    return std::any_of(kConfigKeys.begin(), kConfigKeys.end(), [&](const ConfigKey& k) { return k.name == key; });
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw InvalidArgument("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Applies a `key=value` assignment.
  void assign(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidArgument("expected key=value, got '" + std::string(line) + "'");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  static Config parse(std::string_view text) {
    Config c;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = std::min(text.find('\n', pos), text.size());
      ++line_no;
      std::string line = trim(text.substr(pos, end - pos));
      pos = end + 1;
      if (line.empty() || line.front() == '#') continue;
      try {
        c.assign(line);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument("config line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
  }

  [[nodiscard]] bool has(std::string_view key) const { return values_.count(std::string(key)) > 0; }

  [[nodiscard]] std::string get(std::string_view key) const {
    if (auto it = values_.find(std::string(key)); it != values_.end()) return it->second;
    for (const auto& k : kConfigKeys)
      if (k.name == key) return std::string(k.fallback);
    throw InvalidArgument("unknown config key '" + std::string(key) + "'");
  }

  [[nodiscard]] double real(std::string_view key) const {
    try {
      const double v = parse_double(get(key));
      if (!std::isfinite(v)) throw InvalidArgument("not finite");
      return v;
    } catch (const InvalidArgument&) {
      throw InvalidArgument("config '" + std::string(key) + "': expected a number, got '" + get(key) + "'");
    }
  }

  [[nodiscard]] std::uint64_t count(std::string_view key) const {
    const std::string v = get(key);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
      throw InvalidArgument("config '" + std::string(key) + "': expected a non-negative integer, got '" + v + "'");
    return out;
  }

  [[nodiscard]] Act act(std::string_view key) const {
    std::vector<double> coords;
    std::string v = get(key);
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const auto end = std::min(v.find(',', pos), v.size());
      try {
        coords.push_back(parse_double(trim(std::string_view(v).substr(pos, end - pos))));
      } catch (const InvalidArgument&) {
        throw InvalidArgument("config '" + std::string(key) + "': malformed act '" + v + "'");
      }
      pos = end + 1;
    }
    return Act(std::move(coords));
  }

 private:
  std::map<std::string, std::string> values_;
};

inline RationalityModel model_from(const Config& c) {
  const std::string name = c.get("model");
  const double sigma = c.real("sigma");
  RationalityModel m;
  if (name == "exact") {
    m = Exact{};
  } else if (name == "noise") {
    // a noise-free sender is the exact model
    m = sigma == 0.0 ? RationalityModel{Exact{}} : RationalityModel{GaussianNoise{sigma}};
  } else if (name == "threshold") {
    m = DiscernibilityThreshold{sigma, c.real("epsilon")};
  } else {
    throw InvalidArgument("config 'model': expected exact, noise or threshold, got '" + name + "'");
  }
  validate(m);
  return m;
}

inline InferenceMethod method_from_name(std::string_view name, const Config& c) {
  InferenceMethod m;
  if (name == "map") {
    m = MapMethod{};
  } else if (name == "laplace") {
    m = LaplaceMethod{};
  } else if (name == "ep") {
    m = EpMethod{c.real("ep.damping"), c.real("ep.tol"), static_cast<int>(c.count("ep.max_sweeps"))};
  } else if (name == "sampling") {
    m = SamplingMethod{c.count("sampling.n_samples"), c.count("sampling.burn_in")};
  } else {
    throw InvalidArgument("unknown inference method '" + std::string(name) + "'");
  }
  validate(m);
  return m;
}

inline std::vector<InferenceMethod> methods_from(std::string_view list, const Config& c) {
  std::vector<InferenceMethod> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto end = std::min(list.find(',', pos), list.size());
    const std::string name = trim(list.substr(pos, end - pos));
    if (!name.empty()) out.push_back(method_from_name(name, c));
    pos = end + 1;
  }
  if (out.empty()) throw InvalidArgument("no inference methods given");
  return out;
}

inline DominanceCriterion criterion_from(const Config& c) {
  const std::string v = c.get("criterion");
  if (v == "A") return DominanceCriterion::PessimisticA;
  if (v == "B") return DominanceCriterion::OptimisticB;
  throw InvalidArgument("config 'criterion': expected A or B, got '" + v + "'");
}

inline std::vector<Act> grid_from(const Config& c) {
  const auto n = c.count("grid.points");
  if (n < 2) throw InvalidArgument("config 'grid.points' must be >= 2");
  const double lo = c.real("grid.lo");
  const double hi = c.real("grid.hi");
  if (!(lo < hi)) throw InvalidArgument("config: grid.lo must be below grid.hi");
  return linear_grid(lo, hi, n);
}

inline GameConfig game_config(const Config& c) {
  GameConfig g;
  g.grid = grid_from(c);
  g.x = c.act("x");
  g.o = c.act("o");
  g.kernel = SquaredExponential{c.real("kernel.variance"), c.real("kernel.lengthscale")};
  g.mean = ConstantMean{c.real("mean")};
  g.model = model_from(c);
  g.n_prefs = c.count("n_prefs");
  g.method = method_from_name(c.get("method"), c);
  g.gamma = c.real("gamma");
  g.criterion = criterion_from(c);
  g.surrogate_scale = c.real("surrogate");
  g.seed = c.count("seed");
  validate(g);
  return g;
}

inline StudyConfig study_config(const Config& c) {
  StudyConfig s;
  s.n_runs = c.count("runs");
  s.n_prefs = c.count("n_prefs");
  s.sigma = c.real("sigma");
  s.methods = methods_from(c.get("methods"), c);
  s.lengthscale = {c.real("lengthscale.lo"), c.real("lengthscale.hi")};
  s.variance = {c.real("variance.lo"), c.real("variance.hi")};
  s.grid_lo = c.real("grid.lo");
  s.grid_hi = c.real("grid.hi");
  s.grid_points = c.count("grid.points");
  s.gamma = c.real("gamma");
  s.seed = c.count("seed");
  s.jobs = c.count("jobs");
  if (c.get("model") != "noise" && c.get("model") != "exact")
    throw InvalidArgument("study: only the exact and noise models are supported");
  if (c.get("model") == "exact") s.sigma = 0.0;
  validate(s);
  return s;
}

}  // namespace offswitch
