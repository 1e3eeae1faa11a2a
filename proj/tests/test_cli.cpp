#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "hmiway/cli.hpp"
#include "hmiway/util.hpp"

using namespace hmiway;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> small_scenario_overrides() {
  return {"--set", "scenario.max_vehicles=6"};
}

std::vector<std::string> with(std::initializer_list<std::string> args) {
  std::vector<std::string> out(args);
  for (const auto& e : small_scenario_overrides()) out.push_back(e);
  return out;
}

}  // namespace

TEST_CASE("eval with zero episodes fails validation before any work") {
  auto dir = fresh_dir("hmiway-cli-val");
  int rc = cli::run({"eval", "--out", (dir / "run").string(), "--episodes", "0"});
  CHECK(rc != 0);
}

TEST_CASE("unknown config keys are rejected with their line") {
  auto dir = fresh_dir("hmiway-cli-unknown");
  std::string config = (dir / "run.cfg").string();
  write_file_atomic(config, "seed = 5\nscenario.lane_count = 3\nscneario.typo = 1\n");
  int rc = cli::run({"gen-data", "--config", config, "--out", (dir / "run").string()});
  CHECK(rc != 0);
}

TEST_CASE("malformed config values carry file and line") {
  auto dir = fresh_dir("hmiway-cli-badvalue");
  std::string config = (dir / "run.cfg").string();
  write_file_atomic(config, "scenario.max_vehicles = lots\n");
  int rc = cli::run({"gen-data", "--config", config, "--out", (dir / "run").string()});
  CHECK(rc != 0);
}

TEST_CASE("gen-data writes a manifest with per-driver step counts") {
  auto dir = fresh_dir("hmiway-cli-gendata");
  std::string out = (dir / "run").string();
  int rc = cli::run(with({"gen-data", "--out", out, "--steps", "300", "--seed", "5"}));
  REQUIRE(rc == 0);
  auto manifest = nlohmann::json::parse(read_file(out + "/manifest-gen-data.json"));
  CHECK(manifest["status"] == "ok");
  auto steps = manifest["stats"]["steps_per_driver"];
  REQUIRE(steps.size() == 4);
  for (const auto& [driver, n] : steps.items()) {
    (void)driver;
    CHECK(n.get<std::int64_t>() >= 300);
  }
  CHECK(fs::exists(out + "/dataset.latest"));
  CHECK(fs::exists(cli::resolve_artifact(out + "/dataset.latest")));
}

TEST_CASE("repeated runs with the same manifest are bit-identical") {
  auto dir = fresh_dir("hmiway-cli-repro");
  auto once = [&](const std::string& out) {
    int rc = cli::run(with({"gen-data", "--out", out, "--steps", "300", "--seed", "5"}));
    REQUIRE(rc == 0);
    return read_file(cli::resolve_artifact(out + "/dataset.latest"));
  };
  CHECK(once((dir / "a").string()) == once((dir / "b").string()));
}

TEST_CASE("failed runs leave a FAILED marker and a failed manifest") {
  auto dir = fresh_dir("hmiway-cli-failmark");
  std::string out = (dir / "run").string();
  // train-traits without a dataset is a runtime error after validation.
  int rc = cli::run({"train-traits", "--out", out});
  CHECK(rc != 0);
  CHECK(fs::exists(out + "/FAILED"));
  auto manifest = nlohmann::json::parse(read_file(out + "/manifest-train-traits.json"));
  CHECK(manifest["status"] == "failed");
}

TEST_CASE("desk-scale pipeline: gen, traits, driver, hmi, eval, embed, report") {
  auto dir = fresh_dir("hmiway-cli-pipeline");
  std::string out = (dir / "run").string();
    REQUIRE(cli::run(with({"gen-data", "--out", out, "--steps", "1200", "--seed", "5",
                               "--set", "data.labeled_fraction=0.5"})) == 0);
  REQUIRE(cli::run(with({"train-traits", "--out", out, "--dataset", out + "/dataset.latest",
                               "--mode", "driver_id", "--budget", "400", "--seed", "6",
                               "--set", "traits.lstm_hidden=12",
                               "--set", "traits.pool_size=3",
                               "--set", "traits.gen_steps_per_round=200"})) == 0);
  REQUIRE(cli::run(with({"train-driver", "--out", out, "--profile", "Homer", "--budget",
                               "1024", "--seed", "7",
                               "--set", "ppo.rollout_steps=256"})) == 0);
  REQUIRE(cli::run(with({"train-hmi", "--out", out, "--profile", "Homer", "--budget", "1024",
                               "--seed", "8",
                               "--set", "ppo.rollout_steps=256"})) == 0);
  REQUIRE(cli::run(with({"eval", "--out", out, "--profile", "Homer", "--driver-ckpt",
                               out + "/driver-Homer.latest", "--hmi-ckpt",
                               out + "/hmi-Homer.latest", "--episodes", "10", "--seed", "9"})) == 0);
  REQUIRE(cli::run(with({"eval", "--out", out, "--profile", "Homer", "--driver-ckpt",
                               out + "/driver-Homer.latest", "--no-hmi", "--episodes", "10",
                               "--seed", "9"})) == 0);
  REQUIRE(cli::run(with({"embed", "--out", out, "--encoder-ckpt",
                               out + "/encoder-driver_id.latest", "--dataset",
                               out + "/dataset.latest", "--pools", "4",
                               "--set", "traits.pool_size=3"})) == 0);
  REQUIRE(cli::run(with({"report", "--kind", "metrics", "--out", out, "--episodes", "4",
                               "--seed", "10",
                               "--set", "report.driver.Homer=" + out + "/driver-Homer.latest",
                               "--set", "report.hmi.Homer=" + out + "/hmi-Homer.latest"})) == 0);

  CHECK(fs::exists(out + "/eval-Homer-hmi-episodes.csv"));
  CHECK(fs::exists(out + "/eval-Homer-NoHMI-episodes.csv"));
  CHECK(fs::exists(out + "/embeddings.csv"));
  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(fs::exists(out + "/metrics.txt"));

  // Reproducibility of a full eval: same manifest inputs, byte-identical CSV.
  std::string again = (dir / "run2").string();
  REQUIRE(cli::run(with({"train-driver", "--out", again, "--profile", "Homer", "--budget",
                               "1024", "--seed", "7",
                               "--set", "ppo.rollout_steps=256"})) == 0);
  REQUIRE(cli::run(with({"eval", "--out", again, "--profile", "Homer", "--driver-ckpt",
                               again + "/driver-Homer.latest", "--no-hmi", "--episodes", "10",
                               "--seed", "9"})) == 0);
  CHECK(read_file(out + "/eval-Homer-NoHMI-episodes.csv") ==
        read_file(again + "/eval-Homer-NoHMI-episodes.csv"));
}
