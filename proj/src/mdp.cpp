#include "latinv/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "latinv/error.hpp"

namespace latinv {

void EnvConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (target_class >= num_classes) {
    throw ConfigError("target class " + std::to_string(target_class) + " outside [0, " + std::to_string(num_classes) +
                      ")");
  }
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (max_step < 1) throw ConfigError("max_step must be >= 1");
  if (!(action_scale > 0)) throw ConfigError("action_scale must be positive");
}

LatentVector init_state(std::size_t k, Rng& rng) { return standard_normal_vector(rng, k); }

LatentVector transition(std::span<const Real> state, std::span<const Real> action, Real alpha) {
  if (state.size() != action.size()) {
    throw InvalidInput("transition: state has dimension " + std::to_string(state.size()) + ", action " +
                       std::to_string(action.size()));
  }
  LatentVector next(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) next[i] = alpha * state[i] + (Real(1) - alpha) * action[i];
  return next;
}

RewardTerms reward_terms(std::span<const Real> state_conf, std::span<const Real> action_conf, std::size_t target,
                         Real epsilon) {
  if (state_conf.size() != action_conf.size()) throw InvalidInput("reward_terms: confidence lengths differ");
  if (target >= state_conf.size()) {
    throw InvalidInput("reward_terms: class " + std::to_string(target) + " outside " +
                       std::to_string(state_conf.size()) + " classes");
  }
  if (!(epsilon > 0)) throw InvalidInput("reward_terms: epsilon must be positive");
  Real runner_up = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < state_conf.size(); ++i) {
    if (i != target) runner_up = std::max(runner_up, state_conf[i]);
  }
  // K == 1: no competitor, the margin is the confidence itself.
  if (state_conf.size() == 1) runner_up = 0;
  RewardTerms r;
  r.state_score = std::log(std::max(epsilon, state_conf[target]));
  r.action_score = std::log(std::max(epsilon, action_conf[target]));
  r.margin_score = std::log(std::max(epsilon, state_conf[target] - runner_up));
  return r;
}

Real total_reward(const RewardTerms& r, const RewardWeights& w) {
  return w.state * r.state_score + w.action * r.action_score + w.margin * r.margin_score;
}

StepOutcome env_step(std::span<const Real> state, std::span<const Real> action, Oracle& oracle,
                     const EnvConfig& config, std::size_t step_index, QueryPurpose purpose) {
  if (state.size() != config.latent_dim || action.size() != config.latent_dim) {
    throw InvalidInput("env_step: state/action dimension differs from latent_dim " +
                       std::to_string(config.latent_dim));
  }
  if (oracle.descriptor().latent_dim != config.latent_dim || oracle.descriptor().num_classes != config.num_classes) {
    throw ConfigError("env_step: oracle shape (k=" + std::to_string(oracle.descriptor().latent_dim) +
                      ", K=" + std::to_string(oracle.descriptor().num_classes) + ") differs from config (k=" +
                      std::to_string(config.latent_dim) + ", K=" + std::to_string(config.num_classes) + ")");
  }
  StepOutcome out;
  out.next_state = transition(state, action, config.alpha);
  out.state_confidences = oracle.query(out.next_state, purpose).confidence;
  out.queries_spent = 1;
  if (config.dedup_queries && config.alpha == Real(0)) {
    out.action_confidences = out.state_confidences;
  } else {
    out.action_confidences = oracle.query(action, purpose).confidence;
    out.queries_spent += 1;
  }
  out.terms = reward_terms(out.state_confidences, out.action_confidences, config.target_class, config.epsilon);
  out.reward = total_reward(out.terms, config.weights);
  out.done = step_index == config.max_step;
  return out;
}

}  // namespace latinv
