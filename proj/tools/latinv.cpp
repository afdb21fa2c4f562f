#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latinv/config.hpp"
#include "latinv/error.hpp"
#include "latinv/harness.hpp"
#include "latinv/report.hpp"

namespace fs = std::filesystem;
using namespace latinv;

namespace {

enum Exit : int { ok = 0, other = 1, config_error = 2, oracle_error = 3, numeric_error = 4 };

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string oracle;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::size_t jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON config file (comments allowed)");
  cmd->add_option("--set", c.overrides, "Override a config value, e.g. agent.tau=0.02 (repeatable)");
  cmd->add_option("--oracle", c.oracle, "synth:key=value,... or cmd:<adapter command line>");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&c](std::uint64_t s) {
        c.seed = s;
        c.seed_set = true;
      },
      "Run seed (agent and episode streams; the world seed is unchanged)");
  cmd->add_option("-o,--out", c.out, "Output directory");
  cmd->add_option("-j,--jobs", c.jobs, "Classes trained in parallel");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Loaded {
  ExperimentConfig config;
  std::string echo;
  fs::path out;
};

Loaded load(const Common& c) {
  Loaded l;
  if (!c.config_path.empty()) {
    l.echo = slurp(c.config_path);
    l.config = parse_config(l.echo);
  }
  if (!c.oracle.empty()) apply_oracle_flag(l.config, c.oracle);
  for (const auto& o : c.overrides) apply_override(l.config, o);
  if (c.seed_set) {
    l.config.seeds.agent = c.seed;
    l.config.seeds.episodes = derive_seed(c.seed, {1});
  }
  if (c.jobs > 0) l.config.jobs = c.jobs;
  if (!c.out.empty()) l.config.output_dir = c.out;
  if (l.config.output_dir.empty()) l.config.output_dir = "latinv_out";
  l.config.validate();
  l.out = l.config.output_dir;
  return l;
}

std::string effective(const ExperimentConfig& c) { return nlohmann::json(c).dump(2) + "\n"; }

int finish(const RunSummary& s, const fs::path& out) {
  std::cout << render_summary(s);
  std::cout << "reports written to " << out.string() << "\n";
  if (!s.partial) return ok;
  std::cerr << "error: " << s.failure << "\n";
  return s.failure_kind == "numeric" ? numeric_error : oracle_error;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box latent-space inversion with reinforcement learning"};
  app.set_version_flag("--version", version_stamp());
  app.require_subcommand(1);

  Common attack_opts, baseline_opts, alpha_opts, episodes_opts;
  bool resume = false;
  std::uint64_t budget = 0;
  std::string against;
  std::vector<Real> alphas;
  std::vector<std::size_t> checkpoints;
  std::size_t samples = 0;
  std::string report_dir;

  auto* attack = app.add_subcommand("attack", "Train one agent per target class and evaluate the best reconstructions");
  add_common(attack, attack_opts);
  attack->add_flag("--resume", resume, "Continue from checkpoints in <out>/checkpoints");

  auto* baseline = app.add_subcommand("baseline", "Random search over the latent prior at a matched query budget");
  add_common(baseline, baseline_opts);
  baseline->add_option("--budget", budget, "Queries per class (default: what attack would spend)");
  baseline->add_option("--against", against, "Attack output directory; matches its per-class query count and "
                                             "writes comparison.csv");

  auto* sweep_a = app.add_subcommand("sweep-alpha", "Accuracy, density and coverage across diversity factors");
  add_common(sweep_a, alpha_opts);
  sweep_a->add_option("--alphas", alphas, "Diversity factors (default from config)")->delimiter(',');
  sweep_a->add_option("--samples", samples, "Exploit-mode samples per class");

  auto* sweep_e = app.add_subcommand("sweep-episodes", "Accuracy at increasing training budgets");
  add_common(sweep_e, episodes_opts);
  sweep_e->add_option("--checkpoints", checkpoints, "Ascending episode counts (default from config)")
      ->delimiter(',');
  sweep_e->add_option("--samples", samples, "Exploit-mode samples per class");

  auto* report = app.add_subcommand("report", "Print the summary of a finished run");
  report->add_option("dir", report_dir, "Output directory of a run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*attack) {
      auto l = load(attack_opts);
      auto backend = make_backend(l.config);
      RunOptions opts;
      opts.resume = resume;
      opts.checkpoint_dir = l.out / "checkpoints";
      const RunSummary s = run_attack(l.config, *backend, l.echo, opts);
      emit_reports(s, l.out, effective(l.config));
      return finish(s, l.out);
    }
    if (*baseline) {
      auto l = load(baseline_opts);
      auto backend = make_backend(l.config);
      std::uint64_t per_class = budget ? budget : attack_query_budget(l.config);
      std::optional<RunSummary> reference;
      if (!against.empty()) {
        reference = load_reports(against);
        if (reference->classes.empty()) throw ConfigError("no classes in " + against);
        per_class = reference->classes.front().ledger.total();
        for (const auto& c : reference->classes) {
          if (c.ledger.total() != per_class) throw ConfigError("uneven per-class query counts in " + against);
        }
      }
      const RunSummary s = random_search_baseline(l.config, *backend, per_class, l.echo);
      emit_reports(s, l.out, effective(l.config));
      if (reference) write_comparison(*reference, s, l.out / "comparison.csv");
      return finish(s, l.out);
    }
    if (*sweep_a) {
      auto l = load(alpha_opts);
      auto backend = make_backend(l.config);
      const auto rows = sweep_alpha(l.config, *backend, alphas.empty() ? l.config.sweep.alphas : alphas,
                                    samples ? samples : l.config.sweep.samples_per_class);
      fs::create_directories(l.out);
      write_alpha_table(rows, l.out / "sweep_alpha.csv");
      std::cout << "alpha,attack_acc,density,coverage\n";
      for (const auto& r : rows) {
        std::cout << format_real(r.alpha) << ',' << format_real(r.attack_accuracy) << ','
                  << format_real(r.density) << ',' << format_real(r.coverage) << "\n";
      }
      return ok;
    }
    if (*sweep_e) {
      auto l = load(episodes_opts);
      auto backend = make_backend(l.config);
      const auto rows = sweep_episodes(l.config, *backend,
                                       checkpoints.empty() ? l.config.sweep.episode_checkpoints : checkpoints,
                                       samples ? samples : l.config.sweep.samples_per_class);
      fs::create_directories(l.out);
      write_episode_table(rows, l.out / "sweep_episodes.csv");
      std::cout << "episodes,attack_acc\n";
      for (const auto& r : rows) std::cout << r.episodes << ',' << format_real(r.attack_accuracy) << "\n";
      return ok;
    }
    if (*report) {
      std::cout << render_summary(load_reports(report_dir));
      return ok;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const OracleFailure& e) {
    std::cerr << "oracle error: " << e.what() << "\n";
    return oracle_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return numeric_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return other;
  }
  return other;
}
