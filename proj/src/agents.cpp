#include "latinv/agents.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latinv/error.hpp"

namespace latinv {
namespace {

std::vector<std::size_t> layer_plan(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

constexpr Real kOutputInit = Real(3e-3);

Matrix unit_actions(const Matrix& actions, Real scale) {
  Matrix out = actions;
  as_eigen(out) /= scale;
  return out;
}

// Draws from the squashed policy for every row of `states`, keeping what the
// reparameterized gradient needs.
struct PolicySample {
  ForwardRecord record;
  Matrix action;  // unit scale, B x k
  Matrix std_dev;
  Matrix noise;
  Matrix clamped;  // 1 where log_std was inside the clamp range
  std::vector<Real> log_prob;
};

PolicySample sample_policy(const AgentBundle& agent, const Matrix& states, Rng& rng) {
  const std::size_t k = agent.latent_dim;
  PolicySample ps;
  ps.record = agent.policy.forward(states);
  const Matrix& out = ps.record.output();
  const std::size_t n = states.rows;
  ps.action = Matrix(n, k);
  ps.std_dev = Matrix(n, k);
  ps.noise = standard_normal_matrix(rng, n, k);
  ps.clamped = Matrix(n, k);
  ps.log_prob.resize(n);
  const auto range = agent.hyper.sac.log_std;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = out.row(r);
    auto s = squashed_gaussian_sample(row.subspan(0, k), row.subspan(k, k), ps.noise.row(r), range);
    std::copy(s.action.begin(), s.action.end(), ps.action.row(r).begin());
    std::copy(s.std_dev.begin(), s.std_dev.end(), ps.std_dev.row(r).begin());
    for (std::size_t i = 0; i < k; ++i) {
      const Real ls = row[k + i];
      ps.clamped(r, i) = (ls >= range.min && ls <= range.max) ? Real(1) : Real(0);
    }
    ps.log_prob[r] = s.log_prob;
  }
  return ps;
}

Matrix tanh_of(const Matrix& m) {
  Matrix out = m;
  as_eigen(out) = as_eigen(m).array().tanh().matrix();
  return out;
}

std::vector<Real> column0(const Matrix& m) {
  std::vector<Real> v(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) v[r] = m(r, 0);
  return v;
}

struct CriticStep {
  Real loss = 0;
  MlpGradients grads;
};

// 0.5 * mean (Q - y)^2 and its parameter gradient.
CriticStep critic_regression(const MlpNetwork& critic, const Matrix& inputs, const std::vector<Real>& targets) {
  auto rec = critic.forward(inputs);
  const std::size_t n = inputs.rows;
  Matrix grad(n, 1);
  CriticStep cs;
  for (std::size_t r = 0; r < n; ++r) {
    const Real diff = rec.output()(r, 0) - targets[r];
    cs.loss += Real(0.5) * diff * diff;
    grad(r, 0) = diff / static_cast<Real>(n);
  }
  cs.loss /= static_cast<Real>(n);
  cs.grads = critic.backward(rec, grad).params;
  return cs;
}

// d(sum_r w_r Q(s_r, a_r)) / d a, for the action columns only.
Matrix critic_action_grad(const MlpNetwork& critic, const ForwardRecord& rec, const Matrix& weights, std::size_t k) {
  auto back = critic.backward(rec, weights, /*with_params=*/false);
  return column_slice(back.input_grad, k, k);
}

void require_finite(Real v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite; update aborted");
}

void require_finite(const MlpGradients& g, const char* what) {
  if (!g.all_finite()) throw NumericError(std::string(what) + " gradient is not finite; update aborted");
}

void check_batch(const AgentBundle& agent, const TransitionBatch& batch) {
  if (batch.size() == 0) throw InvalidInput("agent update: empty batch");
  if (batch.states.cols != agent.latent_dim || batch.actions.cols != agent.latent_dim ||
      batch.next_states.cols != agent.latent_dim) {
    throw InvalidInput("agent update: batch dimension differs from agent latent_dim");
  }
}

// y = r + gamma * (1 - done) * next_value
std::vector<Real> bellman_targets(const TransitionBatch& b, const std::vector<Real>& next_value, Real gamma) {
  std::vector<Real> y(b.size());
  for (std::size_t r = 0; r < b.size(); ++r) y[r] = b.rewards[r] + gamma * (Real(1) - b.dones[r]) * next_value[r];
  return y;
}

Matrix deterministic_unit_actions(const MlpNetwork& policy, const Matrix& states) {
  return tanh_of(policy.predict(states));
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sac:
      return "sac";
    case Algorithm::td3:
      return "td3";
    case Algorithm::ddpg:
      return "ddpg";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "sac") return Algorithm::sac;
  if (s == "td3") return Algorithm::td3;
  if (s == "ddpg") return Algorithm::ddpg;
  throw ConfigError("unknown algorithm '" + s + "' (expected sac, td3 or ddpg)");
}

void AgentHyperparams::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(tau > 0 && tau <= 1)) throw ConfigError("tau must lie in (0, 1]");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
  if (!(action_scale > 0)) throw ConfigError("action_scale must be positive");
  for (auto h : hidden_layers) {
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  }
  if (td3.policy_delay < 1) throw ConfigError("td3 policy_delay must be >= 1");
  if (sac.log_std.min > sac.log_std.max) throw ConfigError("log_std range is empty");
  if (!(sac.initial_temperature > 0)) throw ConfigError("SAC temperature must be positive");
}

Real AgentBundle::temperature() const { return std::exp(log_temperature); }

Real AgentBundle::target_entropy() const {
  return hyper.sac.target_entropy.value_or(-static_cast<Real>(latent_dim));
}

AgentBundle make_agent(std::size_t latent_dim, const AgentHyperparams& hyper, std::uint64_t seed) {
  if (latent_dim == 0) throw InvalidInput("agent latent_dim must be positive");
  AgentBundle a;
  a.algorithm = hyper.algorithm;
  a.hyper = hyper;
  a.latent_dim = latent_dim;
  a.rng.seed(seed);
  const std::size_t k = latent_dim;
  const std::size_t policy_out = hyper.algorithm == Algorithm::sac ? 2 * k : k;
  a.policy = MlpNetwork(layer_plan(k, hyper.hidden_layers, policy_out), hyper.activation, a.rng, kOutputInit);
  if (hyper.algorithm != Algorithm::sac) a.target_policy = a.policy;
  const std::size_t n_critics = hyper.algorithm == Algorithm::ddpg ? 1 : 2;
  for (std::size_t i = 0; i < n_critics; ++i) {
    a.critics.emplace_back(layer_plan(2 * k, hyper.hidden_layers, 1), hyper.activation, a.rng, kOutputInit);
    a.critic_opts.push_back(AdamState::for_network(a.critics.back(), hyper.learning_rate));
  }
  a.target_critics = a.critics;
  a.policy_opt = AdamState::for_network(a.policy, hyper.learning_rate);
  a.log_temperature = std::log(hyper.sac.initial_temperature);
  std::vector<std::span<const Real>> temp_param{std::span<const Real>(&a.log_temperature, 1)};
  a.temperature_opt = AdamState::for_parameters(temp_param, hyper.learning_rate);
  return a;
}

LatentVector select_action(AgentBundle& agent, std::span<const Real> state, ActionMode mode) {
  const std::size_t k = agent.latent_dim;
  if (state.size() != k) throw InvalidInput("select_action: state dimension differs from agent latent_dim");
  const Matrix out = agent.policy.predict(Matrix::row_vector(state));
  LatentVector action(k);
  const Real scale = agent.hyper.action_scale;
  if (agent.algorithm == Algorithm::sac) {
    auto row = out.row(0);
    if (mode == ActionMode::exploit) {
      for (std::size_t i = 0; i < k; ++i) action[i] = std::tanh(row[i]);
    } else {
      auto noise = standard_normal_vector(agent.rng, k);
      action = squashed_gaussian_sample(row.subspan(0, k), row.subspan(k, k), noise, agent.hyper.sac.log_std).action;
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) action[i] = std::tanh(out(0, i));
    if (mode == ActionMode::explore) {
      const Real sd = agent.algorithm == Algorithm::td3 ? agent.hyper.td3.exploration_noise
                                                        : agent.hyper.ddpg.exploration_noise;
      std::normal_distribution<Real> noise(Real(0), sd);
      for (auto& x : action) x = std::clamp(x + noise(agent.rng), Real(-1), Real(1));
    }
  }
  for (auto& x : action) x *= scale;
  return action;
}

Matrix exploit_actions(const AgentBundle& agent, const Matrix& states) {
  const std::size_t k = agent.latent_dim;
  if (states.cols != k) throw InvalidInput("exploit_actions: state dimension differs from agent latent_dim");
  Matrix out = agent.policy.predict(states);
  if (agent.algorithm == Algorithm::sac) out = column_slice(out, 0, k);
  as_eigen(out) = (as_eigen(out).array().tanh() * agent.hyper.action_scale).matrix();
  return out;
}

void soft_update(MlpNetwork& target, const MlpNetwork& online, Real tau) {
  if (!target.same_shape(online)) throw InvalidInput("soft_update: network shapes differ");
  auto t = target.parameters();
  auto o = online.parameters();
  for (std::size_t g = 0; g < t.size(); ++g) {
    for (std::size_t i = 0; i < t[g].size(); ++i) t[g][i] = (Real(1) - tau) * t[g][i] + tau * o[g][i];
  }
}

static LossReport sac_step(AgentBundle& agent, const TransitionBatch& batch) {
  check_batch(agent, batch);
  const std::size_t k = agent.latent_dim;
  const std::size_t n = batch.size();
  const Real temp = agent.temperature();
  const Real gamma = agent.hyper.gamma;

  // Soft Bellman target from the target critics.
  auto next = sample_policy(agent, batch.next_states, agent.rng);
  const Matrix next_in = hconcat(batch.next_states, next.action);
  const auto tq1 = column0(agent.target_critics[0].predict(next_in));
  const auto tq2 = column0(agent.target_critics[1].predict(next_in));
  std::vector<Real> next_value(n);
  for (std::size_t r = 0; r < n; ++r) next_value[r] = std::min(tq1[r], tq2[r]) - temp * next.log_prob[r];
  const auto targets = bellman_targets(batch, next_value, gamma);

  const Matrix critic_in = hconcat(batch.states, unit_actions(batch.actions, agent.hyper.action_scale));
  LossReport report;
  std::vector<MlpGradients> critic_grads;
  for (std::size_t c = 0; c < 2; ++c) {
    auto cs = critic_regression(agent.critics[c], critic_in, targets);
    require_finite(cs.loss, "critic loss");
    require_finite(cs.grads, "critic");
    report.critic_losses.push_back(cs.loss);
    critic_grads.push_back(std::move(cs.grads));
  }

  // Policy loss mean(temp * log pi - min Q) through the reparameterized sample.
  auto cur = sample_policy(agent, batch.states, agent.rng);
  const Matrix pol_in = hconcat(batch.states, cur.action);
  auto q1 = agent.critics[0].forward(pol_in);
  auto q2 = agent.critics[1].forward(pol_in);
  Matrix w1(n, 1);
  Matrix w2(n, 1);
  Real policy_loss = 0;
  Real mean_log_prob = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const Real a = q1.output()(r, 0);
    const Real b = q2.output()(r, 0);
    const bool first = a <= b;
    policy_loss += temp * cur.log_prob[r] - (first ? a : b);
    mean_log_prob += cur.log_prob[r];
    (first ? w1 : w2)(r, 0) = Real(1);
  }
  policy_loss /= static_cast<Real>(n);
  mean_log_prob /= static_cast<Real>(n);
  require_finite(policy_loss, "policy loss");
  Matrix dq_da = critic_action_grad(agent.critics[0], q1, w1, k);
  as_eigen(dq_da) += as_eigen(critic_action_grad(agent.critics[1], q2, w2, k));

  Matrix out_grad(n, 2 * k);
  const Real inv_n = Real(1) / static_cast<Real>(n);
  const Real dlogp = temp * inv_n;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      const Real a = cur.action(r, i);
      const Real da = -dq_da(r, i) * inv_n;
      const Real dpre = da * (Real(1) - a * a) + dlogp * Real(2) * a;  // d loss / d pre-tanh
      const Real sd_eps = cur.std_dev(r, i) * cur.noise(r, i);
      out_grad(r, i) = dpre;
      out_grad(r, k + i) = cur.clamped(r, i) * (dpre * sd_eps - dlogp);
    }
  }
  auto policy_grads = agent.policy.backward(cur.record, out_grad).params;
  require_finite(policy_grads, "policy");

  Real temp_grad = 0;
  if (agent.hyper.sac.auto_temperature) {
    temp_grad = -(mean_log_prob + agent.target_entropy());
    require_finite(temp_grad, "temperature gradient");
  }

  for (std::size_t c = 0; c < 2; ++c) adam_step(agent.critics[c], critic_grads[c], agent.critic_opts[c]);
  adam_step(agent.policy, policy_grads, agent.policy_opt);
  if (agent.hyper.sac.auto_temperature) {
    std::vector<std::span<Real>> p{std::span<Real>(&agent.log_temperature, 1)};
    std::vector<std::span<const Real>> g{std::span<const Real>(&temp_grad, 1)};
    adam_step(p, g, agent.temperature_opt);
  }
  for (std::size_t c = 0; c < 2; ++c) soft_update(agent.target_critics[c], agent.critics[c], agent.hyper.tau);

  report.policy_updated = true;
  report.policy_loss = policy_loss;
  report.entropy = -mean_log_prob;
  report.temperature = agent.temperature();
  return report;
}

namespace {

// Shared actor step for TD3/DDPG: maximize Q_0(s, tanh(policy(s))).
std::pair<Real, MlpGradients> deterministic_policy_grads(const AgentBundle& agent, const Matrix& states) {
  const std::size_t k = agent.latent_dim;
  const std::size_t n = states.rows;
  auto rec = agent.policy.forward(states);
  const Matrix act = tanh_of(rec.output());
  auto q = agent.critics[0].forward(hconcat(states, act));
  Real loss = 0;
  for (std::size_t r = 0; r < n; ++r) loss -= q.output()(r, 0);
  loss /= static_cast<Real>(n);
  Matrix ones(n, 1, Real(1));
  Matrix dq_da = critic_action_grad(agent.critics[0], q, ones, k);
  Matrix out_grad(n, k);
  const Real inv_n = Real(1) / static_cast<Real>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      const Real a = act(r, i);
      out_grad(r, i) = -dq_da(r, i) * inv_n * (Real(1) - a * a);
    }
  }
  return {loss, agent.policy.backward(rec, out_grad).params};
}

}  // namespace

static LossReport td3_step(AgentBundle& agent, const TransitionBatch& batch, std::uint64_t update_index) {
  check_batch(agent, batch);
  const std::size_t n = batch.size();
  const auto& p = agent.hyper.td3;

  Matrix next_act = deterministic_unit_actions(agent.target_policy, batch.next_states);
  if (p.noise_clip > 0 && p.target_noise > 0) {
    std::normal_distribution<Real> noise(Real(0), p.target_noise);
    for (auto& x : next_act.values) {
      x = std::clamp(x + std::clamp(noise(agent.rng), -p.noise_clip, p.noise_clip), Real(-1), Real(1));
    }
  }
  const Matrix next_in = hconcat(batch.next_states, next_act);
  const auto tq1 = column0(agent.target_critics[0].predict(next_in));
  const auto tq2 = column0(agent.target_critics[1].predict(next_in));
  std::vector<Real> next_value(n);
  for (std::size_t r = 0; r < n; ++r) next_value[r] = std::min(tq1[r], tq2[r]);
  const auto targets = bellman_targets(batch, next_value, agent.hyper.gamma);

  const Matrix critic_in = hconcat(batch.states, unit_actions(batch.actions, agent.hyper.action_scale));
  LossReport report;
  std::vector<MlpGradients> critic_grads;
  for (std::size_t c = 0; c < 2; ++c) {
    auto cs = critic_regression(agent.critics[c], critic_in, targets);
    require_finite(cs.loss, "critic loss");
    require_finite(cs.grads, "critic");
    report.critic_losses.push_back(cs.loss);
    critic_grads.push_back(std::move(cs.grads));
  }

  const bool policy_turn = update_index % p.policy_delay == 0;
  MlpGradients policy_grads;
  if (policy_turn) {
    auto [loss, grads] = deterministic_policy_grads(agent, batch.states);
    require_finite(loss, "policy loss");
    require_finite(grads, "policy");
    report.policy_loss = loss;
    policy_grads = std::move(grads);
  }

  for (std::size_t c = 0; c < 2; ++c) adam_step(agent.critics[c], critic_grads[c], agent.critic_opts[c]);
  if (policy_turn) {
    adam_step(agent.policy, policy_grads, agent.policy_opt);
    soft_update(agent.target_policy, agent.policy, agent.hyper.tau);
    for (std::size_t c = 0; c < 2; ++c) soft_update(agent.target_critics[c], agent.critics[c], agent.hyper.tau);
    report.policy_updated = true;
  }
  return report;
}

static LossReport ddpg_step(AgentBundle& agent, const TransitionBatch& batch) {
  check_batch(agent, batch);
  const Matrix next_act = deterministic_unit_actions(agent.target_policy, batch.next_states);
  const auto next_value = column0(agent.target_critics[0].predict(hconcat(batch.next_states, next_act)));
  const auto targets = bellman_targets(batch, next_value, agent.hyper.gamma);

  const Matrix critic_in = hconcat(batch.states, unit_actions(batch.actions, agent.hyper.action_scale));
  auto cs = critic_regression(agent.critics[0], critic_in, targets);
  require_finite(cs.loss, "critic loss");
  require_finite(cs.grads, "critic");
  auto [loss, grads] = deterministic_policy_grads(agent, batch.states);
  require_finite(loss, "policy loss");
  require_finite(grads, "policy");

  adam_step(agent.critics[0], cs.grads, agent.critic_opts[0]);
  adam_step(agent.policy, grads, agent.policy_opt);
  soft_update(agent.target_policy, agent.policy, agent.hyper.tau);
  soft_update(agent.target_critics[0], agent.critics[0], agent.hyper.tau);

  LossReport report;
  report.critic_losses.push_back(cs.loss);
  report.policy_updated = true;
  report.policy_loss = loss;
  return report;
}

// A rejected update must not even advance the noise stream.
template <typename Step>
static LossReport guarded(AgentBundle& agent, Step&& step) {
  const Rng saved = agent.rng;
  try {
    return step();
  } catch (const NumericError&) {
    agent.rng = saved;
    throw;
  }
}

LossReport sac_update(AgentBundle& agent, const TransitionBatch& batch) {
  return guarded(agent, [&] { return sac_step(agent, batch); });
}

LossReport td3_update(AgentBundle& agent, const TransitionBatch& batch, std::uint64_t update_index) {
  return guarded(agent, [&] { return td3_step(agent, batch, update_index); });
}

LossReport ddpg_update(AgentBundle& agent, const TransitionBatch& batch) {
  return guarded(agent, [&] { return ddpg_step(agent, batch); });
}

LossReport agent_update(AgentBundle& agent, const TransitionBatch& batch) {
  LossReport r;
  switch (agent.algorithm) {
    case Algorithm::sac:
      r = sac_update(agent, batch);
      break;
    case Algorithm::td3:
      r = td3_update(agent, batch, agent.update_count);
      break;
    case Algorithm::ddpg:
      r = ddpg_update(agent, batch);
      break;
  }
  agent.update_count += 1;
  return r;
}

Real critic_value(const AgentBundle& agent, std::size_t critic, std::span<const Real> state,
                  std::span<const Real> action) {
  if (critic >= agent.critics.size()) throw InvalidInput("critic index out of range");
  Matrix a = Matrix::row_vector(action);
  as_eigen(a) /= agent.hyper.action_scale;
  return agent.critics[critic].predict(hconcat(Matrix::row_vector(state), a))(0, 0);
}

}  // namespace latinv
