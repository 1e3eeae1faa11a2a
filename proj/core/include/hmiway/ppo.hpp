#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmiway/env.hpp"
#include "hmiway/nn.hpp"

namespace hmiway {

// Categorical policy: 32-unit feed-forward net to action logits. The value
// head is a separate network (no shared parameters).
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(int obs_dim, int n_actions, Rng& init_rng, int hidden = 32);

  int obs_dim() const { return net_.input_dim(); }
  int n_actions() const { return net_.output_dim(); }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  std::vector<double> logits(std::span<const double> obs, Mlp::Cache* cache = nullptr) const;
  std::vector<double> probs(std::span<const double> obs) const;
  static std::vector<double> probs_from_logits(std::span<const double> logits);

  struct Sample {
    int action = 0;
    double log_prob = 0.0;
  };
  Sample sample(std::span<const double> obs, Rng& rng) const;
  double log_prob(std::span<const double> obs, int action) const;
  double entropy(std::span<const double> obs) const;

 private:
  Mlp net_;
};

class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(int obs_dim, Rng& init_rng, int hidden = 32);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  double value(std::span<const double> obs, Mlp::Cache* cache = nullptr) const;

 private:
  Mlp net_;
};

struct PpoConfig {
  double clip_ratio = 0.2;
  int epochs = 4;
  int minibatch_size = 256;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  double kl_limit = 0.1;  // hard ceiling; exceeded -> remaining epochs skipped
  int rollout_steps = 2048;
  bool normalize_advantages = true;

  void validate() const;
  static PpoConfig from_kv(KeyValueFile& kv, const std::string& prefix = "ppo.");
};

struct RolloutBuffer {
  int obs_dim = 0;
  std::vector<double> obs;  // size * obs_dim, row-major
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;  // episode ended at this transition
  std::vector<double> advantages;
  std::vector<double> returns;
  double bootstrap_value = 0.0;  // value of the observation after the last step

  std::size_t size() const { return actions.size(); }
  std::span<const double> obs_at(std::size_t t) const {
    return {obs.data() + t * static_cast<std::size_t>(obs_dim), static_cast<std::size_t>(obs_dim)};
  }
};

// Minimal environment surface the PPO kernels roll against.
class RolloutEnv {
 public:
  virtual ~RolloutEnv() = default;
  virtual int obs_dim() const = 0;
  virtual int n_actions() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;

  struct StepResult {
    std::vector<double> obs;
    double reward = 0.0;
    bool done = false;
    RewardBreakdown breakdown;  // zeros when the env has no reward system
    bool crashed = false;
  };
  virtual StepResult step(int action) = 0;
};

struct EpisodeStats {
  double total_reward = 0.0;
  int steps = 0;
  RewardBreakdown breakdown;
  bool crashed = false;
};

// Auto-resetting rollout collection with per-episode derived seeds; episode
// boundaries persist across collect() calls.
class RolloutCollector {
 public:
  RolloutCollector(std::unique_ptr<RolloutEnv> env, std::uint64_t seed_base);

  RolloutBuffer collect(const PolicyNet& policy, const ValueNet& value, int n_steps,
                        Rng& action_rng);

  // Whole episodes until at least min_steps transitions; always ends on an
  // episode boundary (checkpointable without mid-episode state).
  RolloutBuffer collect_aligned(const PolicyNet& policy, const ValueNet& value, int min_steps,
                                Rng& action_rng);

  std::int64_t episodes_started() const { return episode_counter_; }
  std::vector<EpisodeStats> drain_episode_stats();
  RolloutEnv& env() { return *env_; }

  std::string state() const;  // resume support: episode counter + pending obs
  void set_state(const std::string& text);

 private:
  std::unique_ptr<RolloutEnv> env_;
  std::uint64_t seed_base_;
  std::int64_t episode_counter_ = 0;
  bool needs_reset_ = true;
  std::vector<double> pending_obs_;
  EpisodeStats current_;
  std::vector<EpisodeStats> finished_;
};

// GAE(lambda); fills advantages and returns (= advantages + values).
void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
};

PpoStats ppo_update(const RolloutBuffer& buffer, PolicyNet& policy, ValueNet& value,
                    Adam& policy_opt, Adam& value_opt, const PpoConfig& config, Rng& rng);

// Stage-1 env: the driver's five actions against a fixed no-alert HMI;
// reward is the driving subset of the breakdown, gated through the
// cognitive model.
class DriverTaskEnv : public RolloutEnv {
 public:
  DriverTaskEnv(ScenarioConfig scenario, DriverProfile profile);
  int obs_dim() const override;
  int n_actions() const override { return kNumHumanActions; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(int action) override;
  HmiwayEnv& env() { return env_; }

 private:
  HmiwayEnv env_;
};

// Stage-2 env: the HMI's two actions on top of a frozen driver policy. The
// HMI observes the driver's proposed action for the current step.
class HmiTaskEnv : public RolloutEnv {
 public:
  HmiTaskEnv(ScenarioConfig scenario, DriverProfile profile, HmiObsConfig hmi_obs,
             const PolicyNet* driver_policy);
  int obs_dim() const override;
  int n_actions() const override { return kNumAIActions; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(int action) override;

 private:
  HmiwayEnv env_;
  const PolicyNet* driver_;
  Rng driver_rng_;
  HumanAction proposed_ = HumanAction::kKeepSpeed;
  std::vector<double> driver_obs_;
};

struct CurveRow {
  std::int64_t step = 0;
  double mean_return = 0.0;
  RewardBreakdown mean_breakdown;
  double entropy = 0.0;
};

struct TrainPolicyResult {
  PolicyNet policy;
  ValueNet value;
  std::vector<CurveRow> curve;
  std::int64_t env_steps = 0;
};

TrainPolicyResult train_driver_policy(const DriverProfile& profile, const ScenarioConfig& scenario,
                                      const PpoConfig& config, std::int64_t budget_steps,
                                      std::uint64_t seed);

TrainPolicyResult train_hmi_policy(const PolicyNet& driver_policy, const DriverProfile& profile,
                                   const ScenarioConfig& scenario, const HmiObsConfig& hmi_obs,
                                   const PpoConfig& config, std::int64_t budget_steps,
                                   std::uint64_t seed);

void write_curve_csv(const std::vector<CurveRow>& curve, const std::string& path);

// Policy checkpoints (policy + value sections plus a layout header).
void save_policy(const PolicyNet& policy, const ValueNet& value, const std::string& kind,
                 const std::string& path);
struct LoadedPolicy {
  PolicyNet policy;
  ValueNet value;
  std::string kind;
};
LoadedPolicy load_policy(const std::string& path);

}  // namespace hmiway
