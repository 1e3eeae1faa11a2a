#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hmiway/eval.hpp"

namespace hmiway::cli {

// Fully resolved run configuration: every known key is parsed (and therefore
// schema-checked) up front; unknown keys are rejected with their source line.
struct RunConfig {
  ScenarioConfig scenario;
  HmiObsConfig hmi_obs;
  PpoConfig ppo;
  TraitConfig traits;
  bool traits_budget_explicit = false;  // whether traits.budget was given
  std::string traits_mode = "driver_id";

  std::int64_t data_steps_per_type = 6000;
  double data_labeled_fraction = 0.2;
  std::string data_format = "jsonl";  // or "bin"
  std::string data_behavior = "scripted";
  std::map<std::string, std::string> data_driver_ckpts;  // data.driver_ckpt.<Name>

  std::int64_t driver_budget = 40000;
  std::int64_t hmi_budget = 40000;
  std::string train_profile = "Lisa";

  int eval_episodes = 200;
  int eval_threads = 0;  // 0 = hardware concurrency
  bool eval_full_matrix = false;
  int eval_pools = 16;

  std::string report_kind = "metrics";
  std::map<std::string, std::string> report_driver;  // report.driver.<Name>
  std::map<std::string, std::string> report_hmi;     // report.hmi.<Name>
  std::string report_avg_hmi;

  std::string out_dir = "runs/run";
  std::string dataset_path;
  std::string encoder_ckpt;
  std::string driver_ckpt;
  std::string hmi_ckpt;
  std::string resume_ckpt;
  bool no_hmi = false;
  std::uint64_t seed = 7;

  static RunConfig from_kv(KeyValueFile& kv);
};

// `<name>.latest` pointer files resolve to the content-hashed artifact they
// point at; plain paths pass through.
std::string resolve_artifact(const std::string& path);

int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace hmiway::cli
