#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "latinv/report.hpp"

using namespace latinv;
namespace fs = std::filesystem;

namespace {

const std::string kCli = LATINV_CLI_PATH;
const std::string kFake = FAKE_ORACLE_PATH;
const std::string kSmall =
    " --set max_episodes=12 --set 'agent.hidden_layers=[16,16]' --set agent.batch_size=16"
    " --set warmup_steps=32 --set 'classes=[0,2]' --set evaluation.dc_samples=20 --set evaluation.private_samples=30";

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latinv_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("attack writes reports and is reproducible") {
  const auto a = fresh("a"), b = fresh("b");
  REQUIRE(run("attack" + kSmall + " --seed 5 -o " + a.string()) == 0);
  REQUIRE(run("attack" + kSmall + " --seed 5 -o " + b.string()) == 0);
  CHECK(slurp(a / kEpisodesFile) == slurp(b / kEpisodesFile));
  CHECK(slurp(a / kMetricsFile) == slurp(b / kMetricsFile));
  CHECK(load_reports(a).same_results(load_reports(b)));
  CHECK(run("report " + a.string()) == 0);
  const auto c = fresh("c");
  REQUIRE(run("attack" + kSmall + " --seed 6 -o " + c.string()) == 0);
  CHECK(slurp(a / kEpisodesFile) != slurp(c / kEpisodesFile));

  const auto base = fresh("base");
  REQUIRE(run("baseline" + kSmall + " --against " + a.string() + " -o " + base.string()) == 0);
  CHECK(fs::exists(base / "comparison.csv"));
  CHECK(load_reports(base).method == "random_search");
  for (const auto& p : {a, b, c, base}) fs::remove_all(p);
}

TEST_CASE("config files and overrides") {
  const auto dir = fresh("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "run.json") << R"({"env": {"alpha": 0.5}, "max_episodes": 4})";
  REQUIRE(run("attack -c " + (dir / "run.json").string() + kSmall + " -o " + (dir / "out").string()) == 0);
  const auto s = load_reports(dir / "out");
  CHECK(s.config_echo.find("\"alpha\": 0.5") != std::string::npos);
  CHECK(s.classes[0].episodes_run == 12);
  fs::remove_all(dir);
}

TEST_CASE("exit codes distinguish failure kinds") {
  CHECK(run("--help") == 0);
  CHECK(run("attack --set bogus=1") == 2);
  CHECK(run("attack --no-such-flag") == 2);
  CHECK(run("attack -c /nonexistent.json") != 0);
  CHECK(run("attack --oracle cmd:/nonexistent/adapter -o " + fresh("x").string()) == 3);
  const auto out = fresh("dies");
  CHECK(run("attack" + kSmall + " --oracle 'cmd:" + kFake + " die-after 50 --target' -o " + out.string()) == 3);
  CHECK(load_reports(out).partial);
  CHECK(fs::exists(out / "checkpoints" / "class_0.ckpt"));
  const auto nan = fresh("nan");
  CHECK(run("attack" + kSmall + " --set agent.learning_rate=1e300 --set agent.algorithm=ddpg -o " + nan.string()) ==
        4);
  for (const auto& p : {out, nan, fresh("x")}) fs::remove_all(p);
}

TEST_CASE("sweeps write tables") {
  const auto dir = fresh("sweep");
  REQUIRE(run("sweep-alpha" + kSmall + " --alphas 0,0.9 --samples 20 -o " + dir.string()) == 0);
  REQUIRE(run("sweep-episodes" + kSmall + " --checkpoints 0,6,12 --samples 20 -o " + dir.string()) == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".csv" ? 1 : 0;
  CHECK(files >= 2);
  fs::remove_all(dir);
}
