#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "latinv/error.hpp"
#include "latinv/mdp.hpp"
#include "latinv/random.hpp"

using namespace latinv;

TEST_CASE("initial states follow a standard normal") {
  Rng rng(11);
  const std::size_t k = 4;
  const std::size_t n = 100000;
  std::vector<double> sum(k, 0.0), sq(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = init_state(k, rng);
    REQUIRE(s.size() == k);
    for (std::size_t j = 0; j < k; ++j) {
      sum[j] += s[j];
      sq[j] += s[j] * s[j];
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double mean = sum[j] / n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sq[j] / n - mean * mean - 1.0) < 0.05);
  }
}

TEST_CASE("transition endpoints and interpolation") {
  const std::vector<Real> s{1.5, -2.0, 0.25};
  const std::vector<Real> a{-0.5, 0.75, 0.0};
  CHECK(transition(s, a, 0) == a);
  CHECK(transition(s, a, 1) == s);
  const auto mid = transition(s, a, 0.25);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(mid[i] == doctest::Approx(0.25 * s[i] + 0.75 * a[i]));
  CHECK_THROWS_AS(transition(s, std::vector<Real>{1.0}, 0.5), InvalidInput);
}

TEST_CASE("reward terms on a worked example") {
  const std::vector<Real> cs{0.5, 0.3, 0.2};
  const std::vector<Real> ca{0.1, 0.4, 0.5};
  const auto r = reward_terms(cs, ca, 0, 1e-7);
  CHECK(r.state_score == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(r.action_score == doctest::Approx(std::log(0.1)).epsilon(1e-12));
  CHECK(r.margin_score == doctest::Approx(std::log(0.2)).epsilon(1e-12));
  CHECK(r.state_score == doctest::Approx(-0.6931).epsilon(1e-4));
  CHECK(r.margin_score == doctest::Approx(-1.6094).epsilon(1e-4));
  const Real total = total_reward(r, RewardWeights{});
  CHECK(total == doctest::Approx(2 * std::log(0.5) + 2 * std::log(0.1) + 8 * std::log(0.2)));
}

TEST_CASE("reward clamps at epsilon") {
  const std::vector<Real> cs{0.2, 0.8};
  const std::vector<Real> ca{0.0, 1.0};
  const auto r = reward_terms(cs, ca, 0, 1e-7);
  CHECK(r.action_score == std::log(Real(1e-7)));
  CHECK(r.margin_score == std::log(Real(1e-7)));
  CHECK(r.action_score == doctest::Approx(-16.118).epsilon(1e-4));
  CHECK(r.state_score == std::log(Real(0.2)));
}

TEST_CASE("single-class margin uses a zero runner-up") {
  const std::vector<Real> c{1.0};
  const auto r = reward_terms(c, c, 0, 1e-7);
  CHECK(r.margin_score == 0);
}

TEST_CASE("total reward is linear in the weights") {
  const RewardTerms t{-0.7, -1.1, -3.2};
  const RewardWeights a{1.0, 2.0, 3.0};
  const RewardWeights b{0.5, -1.0, 4.0};
  const RewardWeights sum{1.5, 1.0, 7.0};
  CHECK(total_reward(t, sum) == total_reward(t, a) + total_reward(t, b));
  const RewardWeights scaled{2.0, 4.0, 6.0};
  CHECK(total_reward(t, scaled) == 2 * total_reward(t, a));
  CHECK(total_reward(t, RewardWeights{0, 0, 0}) == 0);
}

TEST_CASE("env_step bills two queries and reports terminal steps") {
  auto oracle = test::fixed_oracle(3, {0.6, 0.3, 0.1});
  EnvConfig cfg;
  cfg.latent_dim = 3;
  cfg.num_classes = 3;
  cfg.max_step = 2;
  const std::vector<Real> s{0.1, 0.2, 0.3};
  const std::vector<Real> a{-0.1, 0.5, 0.9};
  for (std::size_t n = 1; n <= 5; ++n) {
    const auto before = oracle.ledger().total();
    const auto out = env_step(s, a, oracle, cfg, 1);
    CHECK(out.queries_spent == 2);
    CHECK(oracle.ledger().total() == before + 2);
    CHECK_FALSE(out.done);
    CHECK(out.next_state == a);
  }
  CHECK(env_step(s, a, oracle, cfg, 2).done);
  CHECK(oracle.ledger().count(QueryPurpose::training) == 12);

  const auto out = env_step(s, a, oracle, cfg, 1, QueryPurpose::warmup);
  CHECK(oracle.ledger().count(QueryPurpose::warmup) == 2);
  CHECK(out.reward == total_reward(out.terms, cfg.weights));
  CHECK(out.terms.margin_score == doctest::Approx(std::log(0.3)));
}

TEST_CASE("deduplication spends one query only when alpha is zero") {
  std::vector<std::vector<Real>> seen;
  test::FunctionOracle oracle(2, 2, [&](std::span<const Real> z) {
    seen.emplace_back(z.begin(), z.end());
    return std::vector<Real>{0.7, 0.3};
  });
  EnvConfig cfg;
  cfg.latent_dim = 2;
  cfg.num_classes = 2;
  cfg.dedup_queries = true;
  const std::vector<Real> s{1, 1};
  const std::vector<Real> a{0.5, -0.5};
  auto out = env_step(s, a, oracle, cfg, 1);
  CHECK(out.queries_spent == 1);
  CHECK(out.state_confidences == out.action_confidences);
  cfg.alpha = 0.5;
  out = env_step(s, a, oracle, cfg, 1);
  CHECK(out.queries_spent == 2);
  CHECK(oracle.ledger().total() == 3);
  // The state query sees the transitioned latent.
  CHECK(seen[1] == std::vector<Real>{0.75, 0.25});
}

TEST_CASE("env_step rejects bad inputs") {
  auto oracle = test::fixed_oracle(2, {0.5, 0.5});
  EnvConfig cfg;
  cfg.latent_dim = 2;
  cfg.num_classes = 2;
  const std::vector<Real> s{0, 0};
  CHECK_THROWS_AS(env_step(s, std::vector<Real>{0, 0, 0}, oracle, cfg, 1), InvalidInput);
  cfg.target_class = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.target_class = 0;
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.alpha = 0;
  cfg.epsilon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
