#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "latinv/agents.hpp"
#include "latinv/checkpoint.hpp"
#include "latinv/error.hpp"
#include "latinv/replay.hpp"

using namespace latinv;

namespace {

TransitionRecord record(Real tag, std::size_t k = 2) {
  return {LatentVector(k, tag), LatentVector(k, -tag), tag, LatentVector(k, tag + 1), false};
}

AgentHyperparams small_hyper(Algorithm algo) {
  AgentHyperparams h;
  h.algorithm = algo;
  h.hidden_layers = {32, 32};
  h.batch_size = 64;
  return h;
}

// One-state bandit: every transition starts at the same state, pays `reward`
// and terminates, so every critic's fixed point is Q(s, a) = reward.
// Fixed uniform actions; used where only the update mechanics matter.
ReplayBuffer bandit_buffer(std::size_t k, Real reward, Rng& rng) {
  ReplayBuffer buf(1000, k);
  std::uniform_real_distribution<Real> u(-1, 1);
  const LatentVector s(k, Real(0.3));
  for (int i = 0; i < 1000; ++i) {
    LatentVector a(k);
    for (auto& x : a) x = u(rng);
    buf.push({s, a, reward, a, true});
  }
  return buf;
}

bool same_agent(const AgentBundle& a, const AgentBundle& b) {
  return a.policy == b.policy && a.target_policy == b.target_policy && a.critics == b.critics &&
         a.target_critics == b.target_critics && a.policy_opt == b.policy_opt && a.critic_opts == b.critic_opts &&
         a.log_temperature == b.log_temperature && a.update_count == b.update_count && a.rng == b.rng;
}

}  // namespace

TEST_CASE("replay memory is a bounded FIFO") {
  ReplayBuffer buf(3, 2);
  for (int i = 0; i < 5; ++i) buf.push(record(i));
  REQUIRE(buf.size() == 3);
  CHECK(buf.at(0).reward == 2);
  CHECK(buf.at(1).reward == 3);
  CHECK(buf.at(2).reward == 4);
  CHECK_THROWS_AS(buf.push(record(1, 3)), InvalidInput);
  Rng rng(1);
  CHECK_THROWS_AS(ReplayBuffer(4, 2).sample(8, rng), Unavailable);
}

TEST_CASE("replay sampling is uniform with replacement") {
  ReplayBuffer buf(10, 1);
  for (int i = 0; i < 10; ++i) buf.push(record(i, 1));
  Rng rng(7);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int rep = 0; rep < n / 100; ++rep) {
    const auto batch = buf.sample(100, rng);
    REQUIRE(batch.size() == 100);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int tag = static_cast<int>(batch.rewards[i]);
      CHECK(batch.states(i, 0) == tag);
      CHECK(batch.next_states(i, 0) == tag + 1);
      ++counts[tag];
    }
  }
  const double p = 0.1;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 3 * sigma);
}

TEST_CASE("replay restore reproduces the ring") {
  ReplayBuffer buf(4, 2);
  for (int i = 0; i < 6; ++i) buf.push(record(i));
  const auto copy = buffer_from_json(buffer_to_json(buf));
  REQUIRE(copy.size() == buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) CHECK(copy.at(i) == buf.at(i));
  Rng r1(3), r2(3);
  CHECK(copy.sample_records(16, r1) == buf.sample_records(16, r2));
}

TEST_CASE("soft update follows the geometric blend") {
  Rng rng(5);
  MlpNetwork online({3, 4, 2}, Activation::relu, rng);
  MlpNetwork target = online;
  for (auto s : online.parameters()) std::fill(s.begin(), s.end(), Real(1));
  for (auto s : target.parameters()) std::fill(s.begin(), s.end(), Real(0));
  for (int i = 0; i < 100; ++i) soft_update(target, online, 0.01);
  const Real expected = 1 - std::pow(0.99, 100);
  CHECK(expected == doctest::Approx(0.634).epsilon(1e-3));
  for (auto s : target.parameters()) {
    for (Real v : s) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  }
  MlpNetwork copy = target;
  soft_update(copy, online, 0);
  CHECK(copy == target);
  soft_update(copy, online, 1);
  CHECK(copy == online);
}

TEST_CASE("actions stay inside the scaled box") {
  for (Algorithm algo : {Algorithm::sac, Algorithm::td3, Algorithm::ddpg}) {
    const std::string name = to_string(algo);
    CAPTURE(name);
    auto h = small_hyper(algo);
    h.action_scale = 2.5;
    auto agent = make_agent(4, h, 9);
    Rng rng(2);
    for (int i = 0; i < 500; ++i) {
      LatentVector s(4);
      fill_standard_normal(rng, s);
      for (Real& x : s) x *= 5;
      const auto a = select_action(agent, s, ActionMode::explore);
      REQUIRE(a.size() == 4);
      for (Real x : a) CHECK(std::abs(x) <= 2.5);
      const auto e1 = select_action(agent, s, ActionMode::exploit);
      const auto e2 = select_action(agent, s, ActionMode::exploit);
      CHECK(e1 == e2);
      const Matrix batch = exploit_actions(agent, Matrix::row_vector(s));
      for (std::size_t j = 0; j < 4; ++j) CHECK(batch(0, j) == doctest::Approx(e1[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("agents are reproducible from their seed") {
  const auto h = small_hyper(Algorithm::sac);
  auto a = make_agent(3, h, 42);
  auto b = make_agent(3, h, 42);
  CHECK(same_agent(a, b));
  auto c = make_agent(3, h, 43);
  CHECK_FALSE(c.policy == a.policy);
  const LatentVector s{0.1, 0.2, 0.3};
  CHECK(select_action(a, s, ActionMode::explore) == select_action(b, s, ActionMode::explore));
}

TEST_CASE("network shapes per algorithm") {
  auto sac = make_agent(5, small_hyper(Algorithm::sac), 1);
  CHECK(sac.policy.layer_sizes() == std::vector<std::size_t>{5, 32, 32, 10});
  CHECK(sac.critics.size() == 2);
  CHECK(sac.critics[0].layer_sizes() == std::vector<std::size_t>{10, 32, 32, 1});
  auto td3 = make_agent(5, small_hyper(Algorithm::td3), 1);
  CHECK(td3.policy.layer_sizes() == std::vector<std::size_t>{5, 32, 32, 5});
  CHECK(td3.critics.size() == 2);
  CHECK(td3.target_policy == td3.policy);
  auto ddpg = make_agent(5, small_hyper(Algorithm::ddpg), 1);
  CHECK(ddpg.critics.size() == 1);
  CHECK(ddpg.target_critics[0] == ddpg.critics[0]);
}

TEST_CASE("critics reach the bandit fixed point") {
  const Real reward = 1.5;
  for (Algorithm algo : {Algorithm::sac, Algorithm::td3, Algorithm::ddpg}) {
    const std::string name = to_string(algo);
    CAPTURE(name);
    AgentHyperparams h;
    h.algorithm = algo;
    h.hidden_layers = {64, 64};
    auto agent = make_agent(2, h, 17);
    Rng rng(23);
    const LatentVector s(2, Real(0.3));
    ReplayBuffer buf(10000, 2);
    std::uniform_real_distribution<Real> u(-1, 1);
    for (std::size_t i = 0; i < h.batch_size; ++i) {
      LatentVector a{u(rng), u(rng)};
      buf.push({s, a, reward, a, true});
    }
    for (int i = 0; i < 2000; ++i) {
      const auto a = select_action(agent, s, ActionMode::explore);
      buf.push({s, a, reward, a, true});
      agent_update(agent, buf.sample(h.batch_size, rng));
    }
    const auto a = select_action(agent, s, ActionMode::exploit);
    for (std::size_t c = 0; c < agent.critics.size(); ++c) {
      CHECK(std::abs(critic_value(agent, c, s, a) - reward) < 1e-2);
    }
  }
}

TEST_CASE("non-finite batches leave the agent untouched") {
  for (Algorithm algo : {Algorithm::sac, Algorithm::td3, Algorithm::ddpg}) {
    const std::string name = to_string(algo);
    CAPTURE(name);
    auto agent = make_agent(2, small_hyper(algo), 4);
    Rng rng(8);
    auto buf = bandit_buffer(2, 1.0, rng);
    agent_update(agent, buf.sample(64, rng));
    auto batch = buf.sample(64, rng);
    batch.rewards[3] = std::numeric_limits<Real>::quiet_NaN();
    const auto before = agent;
    CHECK_THROWS_AS(agent_update(agent, batch), NumericError);
    CHECK(same_agent(agent, before));
  }
}

TEST_CASE("td3 delays policy and target updates") {
  auto agent = make_agent(2, small_hyper(Algorithm::td3), 4);
  Rng rng(8);
  const auto buf = bandit_buffer(2, 1.0, rng);
  const auto policy0 = agent.policy;
  const auto target0 = agent.target_critics;
  auto report = td3_update(agent, buf.sample(64, rng), 1);
  CHECK_FALSE(report.policy_updated);
  CHECK(agent.policy == policy0);
  CHECK(agent.target_critics == target0);
  CHECK_FALSE(agent.critics[0] == target0[0]);
  report = td3_update(agent, buf.sample(64, rng), 2);
  CHECK(report.policy_updated);
  CHECK_FALSE(agent.policy == policy0);
  CHECK_FALSE(agent.target_critics == target0);
}

TEST_CASE("sac temperature adapts only when enabled") {
  auto h = small_hyper(Algorithm::sac);
  auto agent = make_agent(2, h, 4);
  Rng rng(8);
  const auto buf = bandit_buffer(2, 1.0, rng);
  CHECK(agent.temperature() == doctest::Approx(1.0));
  CHECK(agent.target_entropy() == -2);
  const auto report = agent_update(agent, buf.sample(64, rng));
  CHECK(std::isfinite(report.entropy));
  CHECK(agent.log_temperature != 0);

  h.sac.auto_temperature = false;
  h.sac.initial_temperature = 0.2;
  auto fixed = make_agent(2, h, 4);
  agent_update(fixed, buf.sample(64, rng));
  CHECK(fixed.temperature() == doctest::Approx(0.2));
}

TEST_CASE("agent checkpoints restore bit-for-bit") {
  for (Algorithm algo : {Algorithm::sac, Algorithm::td3, Algorithm::ddpg}) {
    const std::string name = to_string(algo);
    CAPTURE(name);
    auto agent = make_agent(3, small_hyper(algo), 12);
    Rng rng(8);
    const auto buf = bandit_buffer(3, 0.5, rng);
    for (int i = 0; i < 5; ++i) agent_update(agent, buf.sample(64, rng));
    auto copy = agent_from_json(nlohmann::json::from_cbor(nlohmann::json::to_cbor(agent_to_json(agent))));
    CHECK(same_agent(agent, copy));
    const LatentVector s{0.4, -0.2, 1.0};
    CHECK(select_action(agent, s, ActionMode::explore) == select_action(copy, s, ActionMode::explore));
    Rng r1(99), r2(99);
    agent_update(agent, buf.sample(64, r1));
    agent_update(copy, buf.sample(64, r2));
    CHECK(same_agent(agent, copy));
  }
}

TEST_CASE("hyperparameter validation") {
  AgentHyperparams h;
  CHECK_NOTHROW(h.validate());
  h.gamma = 1.5;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h = {};
  h.tau = 0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h = {};
  h.batch_size = 0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  CHECK(algorithm_from_string("td3") == Algorithm::td3);
  CHECK_THROWS_AS(algorithm_from_string("ppo"), ConfigError);
}
