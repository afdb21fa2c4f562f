#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latinv/agents.hpp"
#include "latinv/mdp.hpp"
#include "latinv/synthetic.hpp"

namespace latinv {

inline constexpr int kConfigVersion = 1;

struct OracleSpec {
  enum class Kind { synthetic, external };
  Kind kind = Kind::synthetic;
  SyntheticParams synthetic;  // latent_dim / num_classes mirror the env section
  std::string command;         // external: attack-time adapter
  std::string eval_command;    // external: evaluation adapter (trusted features optional)
  std::string private_features;  // external: CSV "class,f0,f1,..." of private samples
};

struct Seeds {
  std::uint64_t world = 1;
  std::uint64_t agent = 2;
  std::uint64_t episodes = 3;
};

struct EvalSpec {
  std::size_t dc_samples = 1000;      // exploit-mode reconstructions per class for density/coverage
  std::size_t neighbor_k = 5;
  std::size_t private_samples = 500;  // synthetic private set size per class
};

struct SweepSpec {
  std::vector<Real> alphas{0.0, 0.3, 0.6, 0.9, 0.97};
  std::size_t samples_per_class = 1000;
  std::vector<std::size_t> episode_checkpoints{0, 1000, 2000, 3000, 4000};
};

struct ExperimentConfig {
  EnvConfig env;  // target_class is set per attacked class
  AgentHyperparams agent;
  OracleSpec oracle;
  std::vector<std::size_t> classes;  // empty: every class
  std::size_t max_episodes = 4000;
  std::size_t warmup_steps = 256;
  Seeds seeds;
  EvalSpec eval;
  SweepSpec sweep;
  std::size_t checkpoint_every = 1000;  // 0 disables
  std::string output_dir;
  std::size_t jobs = 1;

  void validate() const;
  std::vector<std::size_t> target_classes() const;
  /// SyntheticParams with k/K taken from the env section.
  SyntheticParams world_params() const;
};

void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);
void to_json(nlohmann::json& j, const AgentHyperparams& h);
void from_json(const nlohmann::json& j, AgentHyperparams& h);
void to_json(nlohmann::json& j, const SyntheticParams& p);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Parses a config document. Unknown keys are rejected so typos surface.
ExperimentConfig parse_config(const std::string& text);

/// Applies an `--oracle` flag: "synth:key=value,..." or "cmd:<command line>".
void apply_oracle_flag(ExperimentConfig& c, const std::string& flag);

/// Applies a dotted-path override such as "agent.tau=0.02" or "env.alpha=0.5".
void apply_override(ExperimentConfig& c, const std::string& assignment);

}  // namespace latinv
