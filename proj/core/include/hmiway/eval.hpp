#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmiway/traits.hpp"

namespace hmiway {

struct DriverController {
  virtual ~DriverController() = default;
  virtual HumanAction act(const HmiwayEnv& env, std::span<const double> obs, Rng& rng) = 0;
};

struct PolicyDriverController : DriverController {
  explicit PolicyDriverController(const PolicyNet* policy) : policy(policy) {}
  HumanAction act(const HmiwayEnv&, std::span<const double> obs, Rng& rng) override {
    return static_cast<HumanAction>(policy->sample(obs, rng).action);
  }
  const PolicyNet* policy;
};

struct ScriptedDriverController : DriverController {
  HumanAction act(const HmiwayEnv& env, std::span<const double>, Rng&) override {
    return scripted_driver_action(env);
  }
};

struct HmiController {
  virtual ~HmiController() = default;
  virtual AIAction act(std::span<const double> hmi_obs, Rng& rng) = 0;
};

struct PolicyHmiController : HmiController {
  explicit PolicyHmiController(const PolicyNet* policy) : policy(policy) {}
  AIAction act(std::span<const double> obs, Rng& rng) override {
    return static_cast<AIAction>(policy->sample(obs, rng).action);
  }
  const PolicyNet* policy;
};

struct ConstantHmiController : HmiController {
  explicit ConstantHmiController(AIAction action) : action(action) {}
  AIAction act(std::span<const double>, Rng&) override { return action; }
  AIAction action;
};

struct EpisodeRow {
  int episode = 0;
  std::uint64_t seed = 0;
  double high_speed_return = 0.0;  // per-episode sum of the speed term
  double distraction_total = 0.0;  // per-episode sum of the distraction term
  double total_reward = 0.0;
  int steps = 0;
  bool crashed = false;
  double alert_fraction = 0.0;
  double alert_while_attentive = 0.0;  // alerts issued when d_prev = 0 / attentive steps
};

struct EvalCell {
  int episodes = 0;
  double return_mean = 0.0, return_std = 0.0;
  double distraction_mean = 0.0, distraction_std = 0.0;
  double crash_rate = 0.0;
  double alert_rate = 0.0;
  std::vector<EpisodeRow> rows;
};

// Runs n_episodes of the composite loop (driver proposes, HMI observes the
// proposal and alerts, env steps). Episodes are split across threads by
// index; results are identical for any thread count.
EvalCell evaluate(DriverController& driver, HmiController& hmi, const DriverProfile& profile,
                  const ScenarioConfig& scenario, const HmiObsConfig& hmi_obs, int n_episodes,
                  std::uint64_t seed, int threads = 0);

void write_episode_csv(const EvalCell& cell, const std::string& path);
// Recomputed summary from rows; used to cross-check report math.
EvalCell summarize_rows(std::vector<EpisodeRow> rows);

struct EvalModels {
  std::map<int, LoadedPolicy> driver_policies;   // stage-1 policy per archetype id
  std::map<int, LoadedPolicy> personalized_hmi;  // stage-2 policy per archetype id
  std::optional<LoadedPolicy> avg_hmi;
};

struct EvalReportRow {
  std::string name;
  std::vector<std::optional<EvalCell>> cells;  // one per driver column
};

struct EvalReport {
  std::vector<int> driver_ids;
  std::vector<std::string> driver_names;
  std::vector<EvalReportRow> rows;  // personalized rows, then AvgHMI, then NoHMI
  double personalized_return_avg = 0.0, avg_hmi_return_avg = 0.0, nohmi_return_avg = 0.0;
  double personalized_distraction_avg = 0.0, avg_hmi_distraction_avg = 0.0,
         nohmi_distraction_avg = 0.0;
  std::vector<std::string> warnings;
};

// Table of high-speed return and distraction reward per (HMI model, driver).
// Driver-specific rows fill only their own column unless full_matrix is set.
EvalReport metrics_table(const EvalModels& models, const ScenarioConfig& scenario,
                         const HmiObsConfig& hmi_obs, int n_episodes, std::uint64_t seed,
                         bool full_matrix = false, int threads = 0);

void write_metrics_csv(const EvalReport& report, const std::string& path);
std::string format_metrics_text(const EvalReport& report);

// Logistic-regression probe on 2-D embeddings with a deterministic held-out
// split; returns held-out accuracy.
double linear_probe_accuracy(const std::vector<std::vector<double>>& features,
                             const std::vector<int>& labels, std::uint64_t seed,
                             double train_fraction = 0.6);

struct LatentReportRow {
  int driver_id = 0;
  std::vector<double> mu, log_var, z;
};

struct LatentReport {
  std::vector<LatentReportRow> embeddings;
  ClusterKlResult cluster_kl;  // fitted on the posterior means
  double probe_distraction_accuracy = 0.0;
  double probe_preference_accuracy = 0.0;
  std::vector<std::string> warnings;
};

LatentReport latent_report(const ContextEncoder& encoder, const Dataset& dataset, int n_pools,
                           int pool_size, int window_steps, std::uint64_t seed);

void write_embeddings_csv(const LatentReport& report, const std::string& path);
void write_latent_summary_csv(const LatentReport& report, const std::string& path);

}  // namespace hmiway
