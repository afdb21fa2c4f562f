#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "latinv/error.hpp"
#include "latinv/harness.hpp"
#include "latinv/report.hpp"

using namespace latinv;
namespace fs = std::filesystem;

namespace {

const std::string kFake = FAKE_ORACLE_PATH;

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.agent.hidden_layers = {16, 16};
  c.agent.batch_size = 32;
  c.warmup_steps = 64;
  c.max_episodes = 40;
  c.classes = {0, 3};
  c.eval.dc_samples = 30;
  c.eval.private_samples = 40;
  c.checkpoint_every = 0;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latinv_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("zero episodes produce no reconstruction and spend nothing") {
  auto c = small_config();
  c.max_episodes = 0;
  auto backend = make_backend(c);
  const auto s = run_attack(c, *backend, "");
  CHECK(attack_query_budget(c) == 0);
  for (const auto& r : s.classes) {
    CHECK_FALSE(r.has_reconstruction);
    CHECK(r.ledger.total() == 0);
    CHECK(r.episodes.empty());
    CHECK(std::isnan(r.metrics.density));
  }
  CHECK(s.queries_total == 0);
  CHECK_FALSE(s.partial);
}

TEST_CASE("attack queries match the budget formula and the ledger") {
  auto c = small_config();
  for (std::size_t max_step : {1u, 3u}) {
    c.env.max_step = max_step;
    c.env.alpha = 0.5;
    auto backend = make_backend(c);
    const auto s = run_attack(c, *backend, "");
    std::uint64_t sum = 0;
    for (const auto& r : s.classes) {
      CHECK(r.ledger.count(QueryPurpose::training) == 2 * c.max_episodes * max_step);
      CHECK(r.ledger.count(QueryPurpose::warmup) == 2 * c.warmup_steps);
      CHECK(r.ledger.total() == attack_query_budget(c));
      CHECK(r.episodes.back().cumulative_queries == attack_query_budget(c));
      CHECK(r.episodes_run == c.max_episodes);
      sum += r.ledger.total();
    }
    CHECK(s.queries_total == sum);
  }
  c.env.max_step = 1;
  c.env.alpha = 0;
  c.env.dedup_queries = true;
  auto backend = make_backend(c);
  const auto s = run_attack(c, *backend, "");
  CHECK(s.classes[0].ledger.count(QueryPurpose::training) == c.max_episodes);
}

TEST_CASE("runs are deterministic and independent of job count and class order") {
  auto c = small_config();
  auto backend = make_backend(c);
  const auto a = run_attack(c, *backend, "echo");
  const auto b = run_attack(c, *backend, "echo");
  CHECK(a.same_results(b));
  c.jobs = 2;
  const auto parallel = run_attack(c, *backend, "echo");
  CHECK(a.same_results(parallel));
  c.jobs = 1;
  c.classes = {3, 0};
  const auto swapped = run_attack(c, *backend, "echo");
  REQUIRE(swapped.classes.size() == 2);
  CHECK(swapped.classes[0] == a.classes[1]);
  CHECK(swapped.classes[1] == a.classes[0]);
  c.seeds.agent = 99;
  const auto other = run_attack(c, *backend, "echo");
  CHECK_FALSE(other.classes[0] == swapped.classes[0]);
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
  auto c = small_config();
  c.checkpoint_every = 20;
  auto backend = make_backend(c);
  const auto dir = scratch_dir("resume");
  const auto full = run_attack(c, *backend, "");

  auto first = c;
  first.max_episodes = 20;
  RunOptions opts;
  opts.checkpoint_dir = dir;
  run_attack(first, *backend, "", opts);
  CHECK(fs::exists(dir / "class_0.ckpt"));
  CHECK(fs::exists(dir / "class_3.ckpt"));
  opts.resume = true;
  const auto resumed = run_attack(c, *backend, "", opts);
  CHECK(resumed.same_results(full));
  fs::remove_all(dir);
}

TEST_CASE("best reconstruction is the running argmax of attack-time confidence") {
  auto c = small_config();
  c.env.max_step = 2;
  c.env.alpha = 0.3;
  auto backend = make_backend(c);
  const auto s = run_attack(c, *backend, "");
  for (const auto& r : s.classes) {
    Real best = -1;
    std::size_t best_ep = 0;
    for (const auto& e : r.episodes) {
      if (e.target_confidence > best) {
        best = e.target_confidence;
        best_ep = e.episode;
      }
      CHECK(e.best_confidence >= best);
    }
    CHECK(r.best_confidence >= best);
    CHECK(r.best_confidence == r.episodes.back().best_confidence);
    CHECK(r.best_episode >= 1);
    CHECK(r.best_episode <= r.episodes.size());
    CHECK(r.has_reconstruction);
    CHECK(r.metrics.attack_accuracy == (r.eval_hit ? 1 : 0));
    if (r.best_confidence == best) CHECK(r.best_episode == best_ep);
  }
}

TEST_CASE("reports round-trip and carry consistent rows") {
  auto c = small_config();
  auto backend = make_backend(c);
  const auto s = run_attack(c, *backend, "{\"max_episodes\": 40}");
  const auto dir = scratch_dir("report");
  emit_reports(s, dir, "{}");
  for (const char* f : {kConfigEchoFile, kEffectiveConfigFile, kEpisodesFile, kMetricsFile, kSummaryFile}) {
    CHECK(fs::exists(dir / f));
  }
  const auto back = load_reports(dir);
  CHECK(back.same_results(s));

  const auto episodes = read_csv(dir / kEpisodesFile);
  REQUIRE(episodes.size() == 1 + 2 * c.max_episodes);
  const auto& header = episodes[0];
  CHECK(header.size() == 11);
  for (std::size_t i = 1; i < episodes.size(); ++i) {
    const auto& row = episodes[i];
    REQUIRE(row.size() == 11);
    const double reward = std::stod(row[3]);
    const double weighted = 2 * std::stod(row[4]) + 2 * std::stod(row[5]) + 8 * std::stod(row[6]);
    CHECK(std::abs(reward - weighted) < 1e-9);
  }
  const auto metrics = read_csv(dir / kMetricsFile);
  CHECK(metrics.size() == 1 + s.classes.size());
  CHECK(!render_summary(s).empty());
  fs::remove_all(dir);
}

TEST_CASE("random search spends exactly its budget") {
  auto c = small_config();
  auto backend = make_backend(c);
  const auto one = random_search_baseline(c, *backend, 1, "");
  for (const auto& r : one.classes) {
    CHECK(r.ledger.count(QueryPurpose::training) == 1);
    CHECK(r.episodes.size() == 1);
    CHECK(r.has_reconstruction);
  }
  const auto many = random_search_baseline(c, *backend, 200, "");
  for (const auto& r : many.classes) {
    CHECK(r.ledger.count(QueryPurpose::training) == 200);
    CHECK(r.best_confidence >= one.classes[0].best_confidence * 0);
    CHECK(r.best_confidence == r.episodes.back().best_confidence);
  }
  CHECK(many.method == "random_search");
  CHECK_THROWS_AS(random_search_baseline(c, *backend, 0, ""), ConfigError);
}

TEST_CASE("oracle failure mid-run leaves a checkpoint and a partial summary") {
  auto c = small_config();
  c.oracle.kind = OracleSpec::Kind::external;
  c.oracle.command = kFake + " die-after 100 --target";
  c.oracle.eval_command = kFake + " synthetic";
  c.classes = {1};
  auto backend = make_backend(c);
  const auto dir = scratch_dir("failure");
  RunOptions opts;
  opts.checkpoint_dir = dir;
  const auto s = run_attack(c, *backend, "", opts);
  CHECK(s.partial);
  CHECK(s.failure_kind == "oracle");
  CHECK(s.failure.find("query #101") != std::string::npos);
  CHECK(fs::exists(dir / "class_1.ckpt"));
  REQUIRE(s.classes.size() == 1);
  CHECK(s.classes[0].episodes_run < c.max_episodes);
  CHECK(s.classes[0].ledger.total() == 101);
  fs::remove_all(dir);
}

TEST_CASE("non-finite training aborts with the episode index") {
  auto c = small_config();
  c.agent.learning_rate = 1e300;
  c.agent.algorithm = Algorithm::ddpg;
  c.classes = {2};
  auto backend = make_backend(c);
  const auto s = run_attack(c, *backend, "");
  CHECK(s.partial);
  CAPTURE(s.failure);
  CHECK(s.failure_kind == "numeric");
  CHECK(s.failure.find("class 2, episode ") != std::string::npos);
}

TEST_CASE("external oracles drive a full attack") {
  auto c = small_config();
  c.max_episodes = 10;
  c.classes = {4};
  auto local_backend = make_backend(c);
  const auto local = run_attack(c, *local_backend, "");
  c.oracle.kind = OracleSpec::Kind::external;
  c.oracle.command = kFake + " synthetic --target";
  c.oracle.eval_command = kFake + " synthetic --trusted";
  auto backend = make_backend(c);
  const auto remote = run_attack(c, *backend, "");
  CHECK_FALSE(remote.partial);
  REQUIRE(remote.classes.size() == 1);
  CHECK(remote.classes[0].best_confidence == doctest::Approx(local.classes[0].best_confidence).epsilon(1e-9));
  CHECK(remote.classes[0].eval_hit == local.classes[0].eval_hit);
  // Trusted features make distance metrics available; private samples are not configured.
  CHECK(std::isnan(remote.classes[0].metrics.knn_dist));
}

TEST_CASE("configured k must match the oracle") {
  auto c = small_config();
  c.oracle.kind = OracleSpec::Kind::external;
  c.oracle.command = kFake + " synthetic --target";
  c.env.latent_dim = 8;
  auto backend = make_backend(c);
  CHECK_THROWS_AS(run_attack(c, *backend, ""), ConfigError);
}

TEST_CASE("sweeps emit one row per setting") {
  auto c = small_config();
  auto backend = make_backend(c);
  const auto alphas = sweep_alpha(c, *backend, {0.0, 0.9}, 20);
  CHECK(alphas.size() == 2);
  CHECK(alphas[1].alpha == doctest::Approx(0.9));
  c.classes = {};
  const auto rows = sweep_episodes(c, *backend, {0, 10}, 20);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].episodes == 0);
  CHECK(rows[1].episodes == 10);
  // An untrained policy lands near chance.
  CHECK(rows[0].attack_accuracy <= 0.4);
  CHECK_THROWS_AS(sweep_episodes(c, *backend, {10, 0}, 20), ConfigError);

  const auto dir = scratch_dir("tables");
  fs::create_directories(dir);
  write_alpha_table(alphas, dir / "alpha.csv");
  write_episode_table(rows, dir / "episodes.csv");
  CHECK(read_csv(dir / "alpha.csv").size() == 3);
  CHECK(read_csv(dir / "episodes.csv").size() == 3);
  fs::remove_all(dir);
}
