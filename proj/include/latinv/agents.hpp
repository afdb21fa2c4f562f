#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latinv/adam.hpp"
#include "latinv/mdp.hpp"
#include "latinv/mlp.hpp"
#include "latinv/random.hpp"
#include "latinv/replay.hpp"
#include "latinv/squashed_gaussian.hpp"

namespace latinv {

enum class Algorithm { sac, td3, ddpg };
const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class ActionMode { explore, exploit };

struct SacParams {
  bool auto_temperature = true;
  Real initial_temperature = Real(1);
  /// Defaults to -k when unset.
  std::optional<Real> target_entropy;
  LogStdRange log_std;
};

struct Td3Params {
  std::size_t policy_delay = 2;
  Real target_noise = Real(0.2);
  Real noise_clip = Real(0.5);
  Real exploration_noise = Real(0.1);
};

struct DdpgParams {
  Real exploration_noise = Real(0.1);
};

struct AgentHyperparams {
  Algorithm algorithm = Algorithm::sac;
  Real gamma = Real(0.99);
  Real tau = Real(0.01);
  Real learning_rate = Real(5e-4);
  std::size_t batch_size = 256;
  std::size_t replay_capacity = 1'000'000;
  std::vector<std::size_t> hidden_layers{256, 256};
  Activation activation = Activation::relu;
  /// Squashed actions in (-1, 1)^k are multiplied by this before reaching the environment.
  Real action_scale = Real(1);
  SacParams sac;
  Td3Params td3;
  DdpgParams ddpg;

  void validate() const;
};

/// Networks, optimizers and randomness of one agent. SAC and TD3 keep two
/// critics, DDPG one. SAC has no target policy.
struct AgentBundle {
  Algorithm algorithm = Algorithm::sac;
  AgentHyperparams hyper;
  std::size_t latent_dim = 0;

  MlpNetwork policy;         // SAC: k -> 2k (mean, log_std); TD3/DDPG: k -> k pre-tanh
  MlpNetwork target_policy;  // TD3/DDPG only
  std::vector<MlpNetwork> critics;         // 2k -> 1 on (state, unit action)
  std::vector<MlpNetwork> target_critics;

  AdamState policy_opt;
  std::vector<AdamState> critic_opts;

  Real log_temperature = 0;  // SAC
  AdamState temperature_opt;

  std::uint64_t update_count = 0;
  Rng rng;

  Real temperature() const;
  Real target_entropy() const;
};

struct LossReport {
  std::vector<Real> critic_losses;
  bool policy_updated = false;
  Real policy_loss = std::numeric_limits<Real>::quiet_NaN();
  Real entropy = std::numeric_limits<Real>::quiet_NaN();  // SAC: -mean log pi
  Real temperature = std::numeric_limits<Real>::quiet_NaN();
};

AgentBundle make_agent(std::size_t latent_dim, const AgentHyperparams& hyper, std::uint64_t seed);

/// Explore: SAC samples its policy, TD3/DDPG add Gaussian noise before
/// clipping. Exploit: deterministic tanh(mean). Result lies in
/// action_scale * [-1, 1]^k.
LatentVector select_action(AgentBundle& agent, std::span<const Real> state, ActionMode mode);
/// Deterministic actions for every row of `states`.
Matrix exploit_actions(const AgentBundle& agent, const Matrix& states);

/// target <- (1 - tau) * target + tau * online, parameter-wise.
void soft_update(MlpNetwork& target, const MlpNetwork& online, Real tau);

/// Each update computes every loss and gradient first and applies nothing if
/// any of them is non-finite (NumericError).
LossReport sac_update(AgentBundle& agent, const TransitionBatch& batch);
/// Policy and target networks move only when update_index % policy_delay == 0.
LossReport td3_update(AgentBundle& agent, const TransitionBatch& batch, std::uint64_t update_index);
LossReport ddpg_update(AgentBundle& agent, const TransitionBatch& batch);

/// Dispatches on agent.algorithm and advances update_count.
LossReport agent_update(AgentBundle& agent, const TransitionBatch& batch);

/// Critic estimate Q_i(state, action) for an environment-scale action.
Real critic_value(const AgentBundle& agent, std::size_t critic, std::span<const Real> state,
                  std::span<const Real> action);

}  // namespace latinv
