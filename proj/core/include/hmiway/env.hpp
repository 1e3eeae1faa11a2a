#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmiway/cognitive.hpp"
#include "hmiway/config.hpp"
#include "hmiway/rng.hpp"
#include "hmiway/traffic.hpp"

namespace hmiway {

struct ScenarioConfig {
  int lane_count = 3;
  double lane_length = 1000.0;
  int merge_lane = 2;  // rightmost lane merges; -1 for no merge lane
  double merge_point = 800.0;
  int max_vehicles = 20;
  double speed_min = 20.0;
  double speed_max = 30.0;
  double max_speed = 40.0;     // hard cap and reward normalizer
  double target_speed = 30.0;  // merging reward normalizer, initial ego desired speed
  int episode_steps = 100;     // action steps (5 Hz over 20 s)
  int ticks_per_action = 3;    // 15 Hz simulator under 5 Hz actions
  double tick_dt = 1.0 / 15.0;
  int lidar_sectors = 16;
  double sensing_range = 60.0;
  double lane_width = 4.0;
  double spawn_extent = 700.0;
  double spawn_min_gap = 10.0;
  int lane_change_ticks = 15;
  int intervention_window = 15;  // N
  bool initial_distracted = false;
  int ego_lane = 2;
  double ego_position = 40.0;
  double ego_speed = 25.0;
  double action_speed_delta = 5.0;  // desired-speed shift of speed_up/slow_down
  IdmParams idm;

  RoadGeometry geometry() const;
  int right_lane_index() const;  // rightmost non-merging lane
  void validate() const;

  static ScenarioConfig from_kv(KeyValueFile& kv, const std::string& prefix = "scenario.");
  static ScenarioConfig from_file(const std::string& path);
};

struct RewardBreakdown {
  double coll = 0.0;
  double speed = 0.0;
  double right_lane = 0.0;
  double merging = 0.0;
  double lane_change = 0.0;
  double distraction = 0.0;
  double alert = 0.0;
  double accept_alert = 0.0;

  double total() const {
    return coll + speed + right_lane + merging + lane_change + distraction + alert + accept_alert;
  }
  double driving_total() const { return coll + speed + right_lane + merging + lane_change; }
  void accumulate(const RewardBreakdown& o);
  static const std::vector<std::string>& field_names();
  std::vector<double> to_vector() const;
  static RewardBreakdown from_vector(std::span<const double> v);
};

struct EnvState {
  VehicleState ego;
  std::vector<VehicleState> ambient;
  CognitiveState cog;
  int step_index = 0;
  bool done = false;
  bool crashed = false;
};

struct RewardParams {
  double max_speed = 40.0;
  double target_speed = 30.0;
  int right_lane_index = 1;
  int merge_lane_index = 2;
};

RewardBreakdown compute_rewards(const EnvState& prev, const EnvState& now, HumanAction a_human,
                                AIAction a_ai, int d_prev, int d_now, const RewardParams& params);

struct HmiObsConfig {
  enum class Features { kNone, kProfile, kLatent };
  bool include_cognitive = true;
  Features features = Features::kProfile;
  int latent_dim = 2;
  bool include_human_action = true;

  int extra_dims() const;
  static HmiObsConfig from_kv(KeyValueFile& kv, const std::string& prefix = "hmi_obs.");
};

struct EnvSpec {
  int driver_obs_dim = 0;
  int hmi_obs_dim = 0;
  int n_human_actions = kNumHumanActions;
  int n_ai_actions = kNumAIActions;
  int episode_steps = 0;
  int lidar_sectors = 0;
  int ticks_per_action = 0;
  double tick_dt = 0.0;

  bool operator==(const EnvSpec&) const = default;
};

struct StepInfo {
  int d = 0;
  int i = 0;
  int c = 0;
  HumanAction applied = HumanAction::kKeepSpeed;
  bool crashed = false;
  bool road_end = false;
  bool lane_command_ignored = false;
};

struct StepOutputs {
  std::vector<double> driver_obs;
  std::vector<double> hmi_obs;
  RewardBreakdown rewards;
  bool done = false;
  StepInfo info;
};

// Joint human-AI driving environment: kinematic traffic, per-driver
// perception, the cognitive gate, and the eight-term reward system.
class HmiwayEnv {
 public:
  HmiwayEnv(ScenarioConfig config, DriverProfile profile, HmiObsConfig hmi_obs = {});

  StepOutputs reset(std::uint64_t seed);
  StepOutputs step(HumanAction a_human, AIAction a_ai);

  EnvSpec spec() const;
  const EnvState& state() const { return state_; }
  const ScenarioConfig& config() const { return config_; }
  const DriverProfile& profile() const { return profile_; }
  double ego_desired_speed() const { return ego_desired_speed_; }

  std::vector<double> driver_observation() const;
  // HMI view: uninflated scan + cognitive fields + profile/latent features +
  // the driver's proposed action for this step (zeros when not yet known).
  std::vector<double> hmi_observation(std::optional<HumanAction> proposed = std::nullopt) const;

  void set_latent(std::vector<double> z);

 private:
  void world_tick(LaneCommand ego_command, bool* lane_ignored);
  double longitudinal_accel(const VehicleState& v, double desired_speed) const;
  bool merge_gap_ok(const VehicleState& v, int target_lane) const;
  const VehicleState* nearest_leader(const VehicleState& v, int lane, double* gap_out,
                                     double* speed_out) const;
  void apply_vehicle_action(HumanAction applied);

  ScenarioConfig config_;
  DriverProfile profile_;
  HmiObsConfig hmi_obs_;
  RoadGeometry geometry_;
  SensorParams sensor_;
  EnvState state_;
  std::vector<double> ambient_desired_;
  double ego_desired_speed_ = 0.0;
  LaneCommand pending_command_ = LaneCommand::kKeep;
  std::vector<double> latent_;
  Rng cog_rng_;
  bool initialized_ = false;
};

// Deterministic fallback behavior: IDM-style longitudinal choices plus
// gap-accepted merging out of the merge lane. Reads privileged state.
HumanAction scripted_driver_action(const HmiwayEnv& env);

}  // namespace hmiway
