#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latinv/agents.hpp"
#include "latinv/config.hpp"
#include "latinv/metrics.hpp"
#include "latinv/oracle.hpp"
#include "latinv/replay.hpp"

namespace latinv {

/// Everything the harness needs from the model side. Attack oracles are
/// query-only; features come through the separate trusted channel.
class WorldBackend {
 public:
  virtual ~WorldBackend() = default;
  virtual std::unique_ptr<Oracle> attack_oracle() = 0;
  virtual std::unique_ptr<Oracle> evaluation_oracle() = 0;
  /// Trusted feature channel, one row per latent. Throws Unavailable when the
  /// backend exposes no features.
  virtual Matrix features(const Matrix& latents) = 0;
  /// Private samples of `label`. Throws Unavailable when none are configured.
  virtual const FeatureSet& private_features(std::size_t label) = 0;
};

std::unique_ptr<WorldBackend> make_backend(const ExperimentConfig& config);

struct EpisodeLog {
  std::size_t episode = 0;            // 1-based
  std::uint64_t initial_seed = 0;     // seed of the engine that drew s0
  Real reward = 0;                    // last step's reward
  Real r1 = 0;
  Real r2 = 0;
  Real r3 = 0;
  Real episode_return = 0;            // undiscounted sum over the episode's steps
  Real target_confidence = 0;         // attack-time confidence of the last next_state
  Real best_confidence = 0;           // running best up to and including this episode
  std::uint64_t cumulative_queries = 0;

  friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

struct ClassResult {
  std::size_t target_class = 0;
  bool has_reconstruction = false;
  LatentVector best_latent;
  Real best_confidence = 0;
  std::size_t best_episode = 0;
  bool eval_hit = false;
  MetricsReport metrics;  // attack_accuracy is 0 or 1 for the single reconstruction
  LedgerSnapshot ledger;
  std::uint64_t eval_queries = 0;
  std::size_t episodes_run = 0;
  std::vector<EpisodeLog> episodes;

  friend bool operator==(const ClassResult&, const ClassResult&) = default;
};

struct RunSummary {
  std::string method;  // "sac", "td3", "ddpg" or "random_search"
  std::vector<ClassResult> classes;
  MetricsReport metrics;  // means over classes; queries_used is the total
  std::uint64_t queries_total = 0;
  Real mean_best_confidence = 0;
  double wall_clock_seconds = 0;
  std::string config_echo;
  std::string version;
  bool partial = false;
  std::string failure;
  std::string failure_kind;  // "", "oracle", "numeric"

  /// Equality that ignores wall-clock time.
  bool same_results(const RunSummary& o) const;
};

const char* version_stamp();

/// Training loop for one target class: episodes of select_action -> env_step
/// -> replay push -> one update. Tracks the best attack-time confidence over
/// every episode's next_state (earliest wins ties).
class ClassTrainer {
 public:
  ClassTrainer(const ExperimentConfig& config, std::size_t target_class, Oracle& oracle);

  /// Random-action steps that fill the replay memory. Runs at most once.
  void warmup();
  /// Runs episodes until `episodes_done() == target` (warm-up first if needed).
  void train_until(std::size_t target);

  std::size_t episodes_done() const { return episodes_done_; }
  bool warmed_up() const { return warmed_up_; }
  const AgentBundle& agent() const { return agent_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<EpisodeLog>& logs() const { return logs_; }
  bool has_best() const { return has_best_; }
  const LatentVector& best_latent() const { return best_latent_; }
  Real best_confidence() const { return best_conf_; }
  std::size_t best_episode() const { return best_episode_; }
  const EnvConfig& env() const { return env_; }

  /// Called after every finished episode.
  std::function<void(const ClassTrainer&)> on_episode;

  nlohmann::json checkpoint() const;
  void restore(const nlohmann::json& doc);

 private:
  void run_episode();

  ExperimentConfig config_;
  EnvConfig env_;
  Oracle& oracle_;
  AgentBundle agent_;
  ReplayBuffer buffer_;
  Rng sample_rng_;
  std::size_t episodes_done_ = 0;
  bool warmed_up_ = false;
  std::vector<EpisodeLog> logs_;
  bool has_best_ = false;
  LatentVector best_latent_;
  Real best_conf_ = 0;
  std::size_t best_episode_ = 0;
};

/// Deterministic reconstructions: fresh s0 per sample, max_step exploit-mode
/// transitions, final states returned row-wise. Spends no queries.
Matrix exploit_reconstructions(const AgentBundle& agent, const EnvConfig& env, std::size_t count, std::uint64_t seed);

struct RunOptions {
  bool resume = false;
  /// Where per-class checkpoints go; empty disables checkpointing.
  std::filesystem::path checkpoint_dir;
};

RunSummary run_attack(const ExperimentConfig& config, WorldBackend& backend, const std::string& config_echo,
                      const RunOptions& options = {});

/// Matched-budget control: `query_budget` prior draws per class, each queried
/// once, best target confidence kept.
RunSummary random_search_baseline(const ExperimentConfig& config, WorldBackend& backend, std::uint64_t query_budget,
                                  const std::string& config_echo);

/// Queries per class spent by run_attack with deduplication off:
/// 2 * episodes * max_step + 2 * warm-up steps.
std::uint64_t attack_query_budget(const ExperimentConfig& config);

struct AlphaRow {
  Real alpha = 0;
  Real attack_accuracy = 0;
  Real density = 0;
  Real coverage = 0;
};

std::vector<AlphaRow> sweep_alpha(const ExperimentConfig& config, WorldBackend& backend,
                                  const std::vector<Real>& alphas, std::size_t samples_per_class);

struct EpisodeRow {
  std::size_t episodes = 0;
  Real attack_accuracy = 0;
};

/// Trains once per class and scores exploit-mode samples at every checkpoint.
std::vector<EpisodeRow> sweep_episodes(const ExperimentConfig& config, WorldBackend& backend,
                                       const std::vector<std::size_t>& checkpoints, std::size_t samples_per_class);

}  // namespace latinv
