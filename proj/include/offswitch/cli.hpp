#pragma once

// Command-line front end. Exit codes: 0 success, 2 input or config error,
// 3 numerical failure (including studies with aborted runs).

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "offswitch/config.hpp"

namespace offswitch {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

namespace detail {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<std::size_t> jobs;
  std::optional<std::string> methods;
  std::optional<std::size_t> runs;
  std::string param = "sigma";
  std::string grid;
  std::size_t prefs = 8;
  bool strict = false;
  std::vector<std::string> overrides;
  std::string dataset;
};

inline Config load_config(const CliOptions& o) {
  Config c = o.config_path.empty() ? Config{} : Config::load(o.config_path);
  for (const auto& kv : o.overrides) c.assign(kv);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (o.jobs) c.set("jobs", std::to_string(*o.jobs));
  if (o.methods) c.set("methods", *o.methods);
  if (o.runs) c.set("runs", std::to_string(*o.runs));
  return c;
}

inline void require_seed(const CliOptions& o, const Config& c, const char* cmd) {
  if (o.strict && !c.has("seed"))
    throw InvalidArgument(std::string(cmd) + ": --strict requires a seed (--seed or seed=...)");
}

inline std::filesystem::path output_path(const CliOptions& o, const char* name) {
  std::filesystem::path dir(o.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create output directory '" + o.out_dir + "': " + ec.message());
  return dir / name;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write '" + p.string() + "'");
  return f;
}

inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const std::string item = trim(std::string_view(text).substr(pos, end - pos));
    if (!item.empty()) out.push_back(parse_double(item));
    pos = end + 1;
  }
  if (out.empty()) throw InvalidArgument("--grid: no values");
  return out;
}

inline int cmd_fit(const CliOptions& o, std::ostream& out, std::ostream& err) {
  const Config c = load_config(o);
  std::ifstream in(o.dataset, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read dataset '" + o.dataset + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const ChoiceDataset data = parse_dataset(text);
  if (data.empty()) err << "warning: dataset is empty; writing the prior\n";
  const RationalityModel model = model_from(c);
  const InferenceMethod method = method_from_name(c.get("method"), c);
  const Kernel kernel = SquaredExponential{c.real("kernel.variance"), c.real("kernel.lengthscale")};
  Rng rng(derive_seed(c.count("seed"), static_cast<std::uint64_t>(Stream::inference)));
  const auto post = fit(data, kernel, ConstantMean{c.real("mean")}, likelihood_for(model, c.real("surrogate")),
                        method, rng);
  const auto grid = grid_from(c);
  const auto path = output_path(o, "posterior.csv");
  auto f = open_output(path);
  write_posterior_csv(f, grid, predict(post, grid));
  out << path.string() << "\n";
  return kExitOk;
}

inline int cmd_play(const CliOptions& o, std::ostream& out, std::ostream&) {
  const Config c = load_config(o);
  require_seed(o, c, "play");
  const GameConfig g = game_config(c);
  const GameTranscript tr = play(g);
  const auto path = output_path(o, "transcript.jsonl");
  auto f = open_output(path);
  f << transcript_line(tr);
  out << "receiver_action=" << action_name(tr.receiver_action)
      << " sender_action=" << sender_action_name(tr.sender_action)
      << " realized_utility=" << format_double(tr.realized_utility) << " hash=" << transcript_hash(tr) << "\n";
  return tr.aborted ? kExitNumerical : kExitOk;
}

inline std::function<void(std::size_t)> progress_to(std::ostream& err, std::size_t total) {
  return [&err, total](std::size_t done) {
    if (done % 10 == 0 || done == total) err << "run " << done << "/" << total << "\n";
  };
}

inline int cmd_study(const CliOptions& o, std::ostream& out, std::ostream& err) {
  const Config c = load_config(o);
  require_seed(o, c, "study");
  const StudyConfig s = study_config(c);
  const FrequencyTable t = run_frequency_study(s, progress_to(err, s.n_runs));
  const auto path = output_path(o, "frequency.csv");
  auto f = open_output(path);
  write_frequency_csv(f, t);
  write_frequency_csv(out, t);
  if (t.partial()) err << "warning: some runs aborted; they are counted as DoN and flagged in the partial column\n";
  return t.partial() ? kExitNumerical : kExitOk;
}

inline int cmd_sweep(const CliOptions& o, std::ostream& out, std::ostream& err) {
  const Config c = load_config(o);
  require_seed(o, c, "sweep");
  SweepParam param;
  if (o.param == "sigma") {
    param = SweepParam::sigma;
  } else if (o.param == "gamma") {
    param = SweepParam::gamma;
  } else {
    throw InvalidArgument("--param: expected sigma or gamma, got '" + o.param + "'");
  }
  if (o.grid.empty()) throw InvalidArgument("sweep: --grid is required");
  const auto grid = parse_grid(o.grid);
  const StudyConfig s = study_config(c);
  const SweepTable t = sweep(param, grid, s, progress_to(err, s.n_runs));
  const auto path = output_path(o, "sweep.csv");
  auto f = open_output(path);
  write_sweep_csv(f, t);
  write_sweep_csv(out, t);
  for (const auto& [method, mono] : t.non_increasing)
    err << "trend " << method << ": DEF fraction " << (mono ? "non-increasing" : "not monotone") << " along "
        << o.param << "\n";
  const bool partial = std::any_of(t.rows.begin(), t.rows.end(), [](const SweepRow& r) { return r.partial; });
  return partial ? kExitNumerical : kExitOk;
}

inline int cmd_demo(const CliOptions& o, std::ostream& out, std::ostream&) {
  const Config c = load_config(o);
  const InferenceMethod method = method_from_name(c.has("method") ? c.get("method") : "ep", c);
  const CurveTable t = run_risotto_demo(o.prefs, method, c.count("seed"));
  const auto path = output_path(o, "curves.csv");
  auto f = open_output(path);
  write_curves_csv(f, t);
  out << path.string() << "\n";
  return kExitOk;
}

inline int cmd_verify(const CliOptions& o, std::ostream& out, std::ostream&) {
  const Config c = load_config(o);
  GameConfig g;
  g.x = c.act("x");
  g.o = c.act("o");
  g.kernel = SquaredExponential{c.real("kernel.variance"), c.real("kernel.lengthscale")};
  g.mean = ConstantMean{c.real("mean")};
  g.model = model_from(c);
  g.n_prefs = c.has("n_prefs") ? c.count("n_prefs") : 2;
  g.method = method_from_name(c.get("method"), c);
  g.criterion = criterion_from(c);
  g.surrogate_scale = c.real("surrogate");
  g.seed = c.count("seed");
  const std::size_t cases = c.has("runs") ? c.count("runs") : 20;
  const std::vector<Act> pts{g.x, g.o};
  const GramMatrix prior(g.kernel, g.mean, pts);
  const auto path = output_path(o, "verify.csv");
  auto f = open_output(path);
  f << "case,nu_x,nu_o,messages,honest_payoff,best_payoff,n_best,honest_is_best\n";
  std::size_t honest_best = 0;
  for (std::size_t i = 0; i < cases; ++i) {
    Rng rng(derive_seed(g.seed, 1000 + i));
    const Eigen::VectorXd nu = mvn_sample(prior.mean(), prior, rng);
    const auto r = verify_honest_message(g, nu(0), nu(1));
    honest_best += r.honest_is_best() ? 1 : 0;
    f << i << ',' << format_double(nu(0)) << ',' << format_double(nu(1)) << ',' << r.messages.size() << ','
      << format_double(r.honest_payoff) << ',' << format_double(r.best_payoff) << ',' << r.n_best << ','
      << (r.honest_is_best() ? 1 : 0) << "\n";
  }
  out << "cases=" << cases << " honest_best=" << honest_best << "\n";
  return kExitOk;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Off-switch signalling game simulator"};
  app.require_subcommand(1);
  detail::CliOptions o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value config file");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_flag("--strict", o.strict, "require an explicit seed");
    sub->add_option("overrides", o.overrides, "key=value overrides");
  };
  auto study_flags = [&](CLI::App* sub) {
    sub->add_option("--jobs", o.jobs, "worker threads");
    sub->add_option("--methods", o.methods, "comma-separated inference methods");
    sub->add_option("--runs", o.runs, "number of runs");
  };

  auto* fit_cmd = app.add_subcommand("fit", "fit a posterior to a choice dataset and write posterior.csv");
  fit_cmd->add_option("dataset", o.dataset, "dataset file")->required();
  common(fit_cmd);
  auto* play_cmd = app.add_subcommand("play", "play one game and write transcript.jsonl");
  common(play_cmd);
  auto* study_cmd = app.add_subcommand("study", "decision-frequency study, writes frequency.csv");
  common(study_cmd);
  study_flags(study_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "DEF fraction across sigma or gamma, writes sweep.csv");
  common(sweep_cmd);
  study_flags(sweep_cmd);
  sweep_cmd->add_option("--param", o.param, "sigma or gamma");
  sweep_cmd->add_option("--grid", o.grid, "comma-separated parameter values");
  auto* demo_cmd = app.add_subcommand("demo", "risotto posterior curves, writes curves.csv");
  common(demo_cmd);
  demo_cmd->add_option("--prefs", o.prefs, "8 listed preferences, or more with synthetic extras");
  auto* verify_cmd = app.add_subcommand("verify", "exhaustive honest-message check, writes verify.csv");
  common(verify_cmd);
  verify_cmd->add_option("--runs", o.runs, "number of sampled types");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  try {
    if (*fit_cmd) return detail::cmd_fit(o, out, err);
    if (*play_cmd) return detail::cmd_play(o, out, err);
    if (*study_cmd) return detail::cmd_study(o, out, err);
    if (*sweep_cmd) return detail::cmd_sweep(o, out, err);
    if (*demo_cmd) return detail::cmd_demo(o, out, err);
    if (*verify_cmd) return detail::cmd_verify(o, out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace offswitch
