#include "hmiway/env.hpp"

#include <algorithm>
#include <cmath>

#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

RoadGeometry ScenarioConfig::geometry() const {
  RoadGeometry g;
  g.lane_count = lane_count;
  g.lane_length = lane_length;
  g.merging.assign(static_cast<size_t>(lane_count), 0);
  if (merge_lane >= 0 && merge_lane < lane_count) g.merging[static_cast<size_t>(merge_lane)] = 1;
  g.merge_point = merge_point;
  g.speed_min = speed_min;
  g.speed_max = speed_max;
  g.lane_width = lane_width;
  return g;
}

int ScenarioConfig::right_lane_index() const {
  for (int l = lane_count - 1; l >= 0; --l)
    if (l != merge_lane) return l;
  return lane_count - 1;
}

void ScenarioConfig::validate() const {
  geometry().validate();
  idm.validate();
  if (max_vehicles < 0) throw ContractError("ScenarioConfig: max_vehicles must be >= 0");
  if (episode_steps < 1) throw ContractError("ScenarioConfig: episode_steps must be >= 1");
  if (ticks_per_action < 1) throw ContractError("ScenarioConfig: ticks_per_action must be >= 1");
  if (tick_dt <= 0) throw ContractError("ScenarioConfig: tick_dt must be positive");
  if (lidar_sectors < 4) throw ContractError("ScenarioConfig: lidar_sectors must be >= 4");
  if (sensing_range <= 0) throw ContractError("ScenarioConfig: sensing_range must be positive");
  if (max_speed <= 0 || target_speed <= 0)
    throw ContractError("ScenarioConfig: speed normalizers must be positive");
  if (intervention_window < 1) throw ContractError("ScenarioConfig: intervention_window must be >= 1");
  if (ego_lane < 0 || ego_lane >= lane_count)
    throw ContractError("ScenarioConfig: ego_lane out of range");
  if (lane_change_ticks < 1) throw ContractError("ScenarioConfig: lane_change_ticks must be >= 1");
}

ScenarioConfig ScenarioConfig::from_kv(KeyValueFile& kv, const std::string& prefix) {
  ScenarioConfig c;
  c.lane_count = static_cast<int>(kv.get_int(prefix + "lane_count", c.lane_count));
  c.lane_length = kv.get_double(prefix + "lane_length", c.lane_length);
  c.merge_lane = static_cast<int>(kv.get_int(prefix + "merge_lane", c.merge_lane));
  c.merge_point = kv.get_double(prefix + "merge_point", c.merge_point);
  c.max_vehicles = static_cast<int>(kv.get_int(prefix + "max_vehicles", c.max_vehicles));
  c.speed_min = kv.get_double(prefix + "speed_min", c.speed_min);
  c.speed_max = kv.get_double(prefix + "speed_max", c.speed_max);
  c.max_speed = kv.get_double(prefix + "max_speed", c.max_speed);
  c.target_speed = kv.get_double(prefix + "target_speed", c.target_speed);
  c.episode_steps = static_cast<int>(kv.get_int(prefix + "episode_steps", c.episode_steps));
  c.ticks_per_action = static_cast<int>(kv.get_int(prefix + "ticks_per_action", c.ticks_per_action));
  c.tick_dt = kv.get_double(prefix + "tick_dt", c.tick_dt);
  c.lidar_sectors = static_cast<int>(kv.get_int(prefix + "lidar_sectors", c.lidar_sectors));
  c.sensing_range = kv.get_double(prefix + "sensing_range", c.sensing_range);
  c.lane_width = kv.get_double(prefix + "lane_width", c.lane_width);
  c.spawn_extent = kv.get_double(prefix + "spawn_extent", c.spawn_extent);
  c.spawn_min_gap = kv.get_double(prefix + "spawn_min_gap", c.spawn_min_gap);
  c.lane_change_ticks = static_cast<int>(kv.get_int(prefix + "lane_change_ticks", c.lane_change_ticks));
  c.intervention_window = static_cast<int>(kv.get_int(prefix + "intervention_window", c.intervention_window));
  c.initial_distracted = kv.get_bool(prefix + "initial_distracted", c.initial_distracted);
  c.ego_lane = static_cast<int>(kv.get_int(prefix + "ego_lane", c.ego_lane));
  c.ego_position = kv.get_double(prefix + "ego_position", c.ego_position);
  c.ego_speed = kv.get_double(prefix + "ego_speed", c.ego_speed);
  c.action_speed_delta = kv.get_double(prefix + "action_speed_delta", c.action_speed_delta);
  c.idm.desired_speed = kv.get_double(prefix + "idm_desired_speed", c.idm.desired_speed);
  c.idm.min_gap = kv.get_double(prefix + "idm_min_gap", c.idm.min_gap);
  c.idm.time_headway = kv.get_double(prefix + "idm_time_headway", c.idm.time_headway);
  c.idm.max_accel = kv.get_double(prefix + "idm_max_accel", c.idm.max_accel);
  c.idm.comfort_decel = kv.get_double(prefix + "idm_comfort_decel", c.idm.comfort_decel);
  c.idm.exponent = kv.get_double(prefix + "idm_exponent", c.idm.exponent);
  c.idm.emergency_decel = kv.get_double(prefix + "idm_emergency_decel", c.idm.emergency_decel);
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  ScenarioConfig c = from_kv(kv);
  kv.reject_unused();
  return c;
}

void RewardBreakdown::accumulate(const RewardBreakdown& o) {
  coll += o.coll;
  speed += o.speed;
  right_lane += o.right_lane;
  merging += o.merging;
  lane_change += o.lane_change;
  distraction += o.distraction;
  alert += o.alert;
  accept_alert += o.accept_alert;
}

const std::vector<std::string>& RewardBreakdown::field_names() {
  static const std::vector<std::string> names = {"coll",        "speed",      "right_lane",
                                                 "merging",     "lane_change", "distraction",
                                                 "alert",       "accept_alert"};
  return names;
}

std::vector<double> RewardBreakdown::to_vector() const {
  return {coll, speed, right_lane, merging, lane_change, distraction, alert, accept_alert};
}

RewardBreakdown RewardBreakdown::from_vector(std::span<const double> v) {
  if (v.size() != 8) throw ContractError("RewardBreakdown: expected 8 values");
  RewardBreakdown r;
  r.coll = v[0];
  r.speed = v[1];
  r.right_lane = v[2];
  r.merging = v[3];
  r.lane_change = v[4];
  r.distraction = v[5];
  r.alert = v[6];
  r.accept_alert = v[7];
  return r;
}

RewardBreakdown compute_rewards(const EnvState& prev, const EnvState& now, HumanAction a_human,
                                AIAction a_ai, int d_prev, int d_now, const RewardParams& rp) {
  (void)prev;
  RewardBreakdown r;
  r.coll = now.crashed ? -5.0 : 0.0;
  r.speed = 5.0 * std::clamp(now.ego.speed, 0.0, rp.max_speed) / rp.max_speed;
  r.right_lane = now.ego.lane == rp.right_lane_index ? 0.1 : 0.0;
  if (rp.merge_lane_index >= 0 && now.ego.lane == rp.merge_lane_index)
    r.merging = -0.1 * (rp.target_speed - now.ego.speed) / rp.target_speed;
  r.lane_change =
      (a_human == HumanAction::kMoveLeft || a_human == HumanAction::kMoveRight) ? -0.1 : 0.0;
  r.distraction = d_now == 1 ? -10.0 : 0.0;
  r.alert = (a_ai == AIAction::kNoAlert && d_prev == 0) ? 10.0 : 0.0;
  r.accept_alert = (a_ai == AIAction::kAlert && d_prev == 1 && d_now == 0) ? 30.0 : 0.0;
  return r;
}

int HmiObsConfig::extra_dims() const {
  int n = 0;
  if (include_cognitive) n += 3;
  if (features == Features::kProfile) n += 4;
  if (features == Features::kLatent) n += latent_dim;
  if (include_human_action) n += kNumHumanActions;
  return n;
}

HmiObsConfig HmiObsConfig::from_kv(KeyValueFile& kv, const std::string& prefix) {
  HmiObsConfig c;
  c.include_cognitive = kv.get_bool(prefix + "include_cognitive", c.include_cognitive);
  std::string feat = kv.get_string(prefix + "features", "profile");
  if (feat == "none")
    c.features = Features::kNone;
  else if (feat == "profile")
    c.features = Features::kProfile;
  else if (feat == "latent")
    c.features = Features::kLatent;
  else
    kv.fail(prefix + "features", "expected none|profile|latent, got '" + feat + "'");
  c.latent_dim = static_cast<int>(kv.get_int(prefix + "latent_dim", c.latent_dim));
  c.include_human_action = kv.get_bool(prefix + "include_human_action", c.include_human_action);
  return c;
}

HmiwayEnv::HmiwayEnv(ScenarioConfig config, DriverProfile profile, HmiObsConfig hmi_obs)
    : config_(std::move(config)), profile_(std::move(profile)), hmi_obs_(hmi_obs) {
  config_.validate();
  profile_.validate();
  geometry_ = config_.geometry();
  sensor_.range = config_.sensing_range;
  sensor_.v_max = config_.max_speed;
  latent_.assign(static_cast<size_t>(hmi_obs_.latent_dim), 0.0);
}

EnvSpec HmiwayEnv::spec() const {
  EnvSpec s;
  s.driver_obs_dim = Observation::dim(config_.lidar_sectors);
  s.hmi_obs_dim = Observation::dim(config_.lidar_sectors) + hmi_obs_.extra_dims();
  s.episode_steps = config_.episode_steps;
  s.lidar_sectors = config_.lidar_sectors;
  s.ticks_per_action = config_.ticks_per_action;
  s.tick_dt = config_.tick_dt;
  return s;
}

StepOutputs HmiwayEnv::reset(std::uint64_t seed) {
  Rng world_rng(derive_seed(seed, "world"));
  cog_rng_ = Rng(derive_seed(seed, "cognitive"));

  state_ = EnvState{};
  state_.ego.lane = config_.ego_lane;
  state_.ego.target_lane = config_.ego_lane;
  state_.ego.position = config_.ego_position;
  state_.ego.speed = config_.ego_speed;
  state_.ego.is_ego = true;

  SpawnParams sp;
  sp.extent = config_.spawn_extent;
  sp.min_bumper_gap = config_.spawn_min_gap;
  const VehicleState ego_copy = state_.ego;
  state_.ambient = spawn_traffic(geometry_, config_.max_vehicles, world_rng, sp,
                                 std::span<const VehicleState>(&ego_copy, 1));
  ambient_desired_.clear();
  for (const auto& v : state_.ambient) ambient_desired_.push_back(v.speed);

  state_.cog = CognitiveState{};
  state_.cog.d = config_.initial_distracted ? 1 : 0;

  ego_desired_speed_ = config_.target_speed;
  pending_command_ = LaneCommand::kKeep;
  initialized_ = true;

  StepOutputs out;
  out.driver_obs = driver_observation();
  out.hmi_obs = hmi_observation();
  out.done = false;
  out.info.d = state_.cog.d;
  return out;
}

const VehicleState* HmiwayEnv::nearest_leader(const VehicleState& v, int lane, double* gap_out,
                                              double* speed_out) const {
  const VehicleState* best = nullptr;
  double best_dx = 0.0;
  auto consider = [&](const VehicleState& o) {
    if (&o == &v) return;
    if (!o.occupies_lane(lane)) return;
    double dx = o.position - v.position;
    if (dx <= 0) return;
    if (!best || dx < best_dx) {
      best = &o;
      best_dx = dx;
    }
  };
  if (!v.is_ego) consider(state_.ego);
  for (const auto& o : state_.ambient) consider(o);
  if (best) {
    *gap_out = best_dx - 0.5 * (v.length + best->length);
    *speed_out = best->speed;
  }
  return best;
}

double HmiwayEnv::longitudinal_accel(const VehicleState& v, double desired_speed) const {
  IdmParams idm = config_.idm;
  idm.desired_speed = std::max(0.1, desired_speed);

  // Follow the nearest leader in every occupied lane (two while changing).
  double accel = idm.max_accel;
  bool found = false;
  int lanes[2] = {v.lane, v.target_lane};
  int n_lanes = v.changing_lane() && v.target_lane != v.lane ? 2 : 1;
  for (int li = 0; li < n_lanes; ++li) {
    double gap = 0.0, lead_speed = 0.0;
    const VehicleState* leader = nearest_leader(v, lanes[li], &gap, &lead_speed);
    double a;
    if (!leader) {
      a = idm_acceleration(v.speed, kNoLeaderGap, 0.0, idm);
    } else if (gap <= 0.0) {
      a = -idm.emergency_decel;
    } else {
      a = idm_acceleration(v.speed, gap, lead_speed, idm);
    }
    accel = found ? std::min(accel, a) : a;
    found = true;
  }

  // A vehicle still in the merging lane treats the lane end as a stopped
  // obstacle once it is close.
  int merge = geometry_.merge_lane();
  if (merge >= 0 && v.lane == merge && !v.changing_lane()) {
    double end_gap = geometry_.merge_point - v.position - 0.5 * v.length;
    if (end_gap < 150.0) {
      double a_end = end_gap <= 0.0 ? -idm.emergency_decel
                                    : idm_acceleration(v.speed, end_gap, 0.0, idm);
      accel = std::min(accel, a_end);
    }
  }
  return accel;
}

bool HmiwayEnv::merge_gap_ok(const VehicleState& v, int target_lane) const {
  double ahead_gap = kNoLeaderGap, ahead_speed = 0.0;
  nearest_leader(v, target_lane, &ahead_gap, &ahead_speed);

  double behind_gap = kNoLeaderGap;
  double behind_speed = 0.0;
  auto consider = [&](const VehicleState& o) {
    if (&o == &v) return;
    if (!o.occupies_lane(target_lane)) return;
    double dx = v.position - o.position;
    if (dx <= 0) return;
    double gap = dx - 0.5 * (v.length + o.length);
    if (gap < behind_gap) {
      behind_gap = gap;
      behind_speed = o.speed;
    }
  };
  if (!v.is_ego) consider(state_.ego);
  for (const auto& o : state_.ambient) consider(o);

  bool ahead_ok = ahead_gap >= 8.0 + 0.6 * v.speed;
  bool behind_ok = behind_gap >= 8.0 + 0.6 * behind_speed;
  return ahead_ok && behind_ok;
}

void HmiwayEnv::world_tick(LaneCommand ego_command, bool* lane_ignored) {
  // All accelerations and ambient merge decisions from the pre-tick state.
  double ego_accel = longitudinal_accel(state_.ego, ego_desired_speed_);
  std::vector<double> accel(state_.ambient.size());
  std::vector<LaneCommand> cmd(state_.ambient.size(), LaneCommand::kKeep);
  int merge = geometry_.merge_lane();
  for (size_t k = 0; k < state_.ambient.size(); ++k) {
    const VehicleState& v = state_.ambient[k];
    accel[k] = longitudinal_accel(v, ambient_desired_[k]);
    if (merge >= 0 && v.lane == merge && !v.changing_lane() &&
        v.position > geometry_.merge_point - 300.0 && merge_gap_ok(v, merge - 1)) {
      cmd[k] = LaneCommand::kLeft;
    }
  }

  auto ego_step = step_vehicle(state_.ego, ego_accel, ego_command, config_.tick_dt, geometry_,
                               config_.max_speed, config_.lane_change_ticks);
  state_.ego = ego_step.vehicle;
  if (ego_command != LaneCommand::kKeep && ego_step.lane_command_ignored && lane_ignored)
    *lane_ignored = true;

  for (size_t k = 0; k < state_.ambient.size(); ++k) {
    state_.ambient[k] = step_vehicle(state_.ambient[k], accel[k], cmd[k], config_.tick_dt,
                                     geometry_, config_.max_speed, config_.lane_change_ticks)
                            .vehicle;
  }

  for (const auto& o : state_.ambient) {
    if (vehicles_collide(state_.ego, o)) {
      state_.crashed = true;
      break;
    }
  }
}

void HmiwayEnv::apply_vehicle_action(HumanAction applied) {
  pending_command_ = LaneCommand::kKeep;
  switch (applied) {
    case HumanAction::kSpeedUp:
      ego_desired_speed_ = std::min(ego_desired_speed_ + config_.action_speed_delta, config_.max_speed);
      break;
    case HumanAction::kSlowDown:
      ego_desired_speed_ = std::max(ego_desired_speed_ - config_.action_speed_delta, 0.0);
      break;
    case HumanAction::kKeepSpeed:
      break;
    case HumanAction::kMoveLeft:
      pending_command_ = LaneCommand::kLeft;
      break;
    case HumanAction::kMoveRight:
      pending_command_ = LaneCommand::kRight;
      break;
  }
}

StepOutputs HmiwayEnv::step(HumanAction a_human, AIAction a_ai) {
  if (!initialized_) throw ContractError("HmiwayEnv::step before reset");
  if (state_.done) throw ContractError("HmiwayEnv::step after episode end");

  EnvState prev = state_;
  int d_prev = state_.cog.d;
  auto [cog_next, applied] =
      step_cognitive(state_.cog, a_ai, a_human, profile_, config_.intervention_window, cog_rng_);
  state_.cog = cog_next;

  apply_vehicle_action(applied);
  bool lane_ignored = false;
  for (int t = 0; t < config_.ticks_per_action; ++t) {
    LaneCommand cmd = t == 0 ? pending_command_ : LaneCommand::kKeep;
    world_tick(cmd, &lane_ignored);
    if (state_.crashed) break;
  }

  state_.step_index += 1;
  bool road_end = state_.ego.position >= config_.lane_length;
  state_.done = state_.crashed || road_end || state_.step_index >= config_.episode_steps;

  RewardParams rp;
  rp.max_speed = config_.max_speed;
  rp.target_speed = config_.target_speed;
  rp.right_lane_index = config_.right_lane_index();
  rp.merge_lane_index = config_.merge_lane;

  StepOutputs out;
  out.rewards = compute_rewards(prev, state_, a_human, a_ai, d_prev, state_.cog.d, rp);
  out.driver_obs = driver_observation();
  out.hmi_obs = hmi_observation();
  out.done = state_.done;
  out.info.d = state_.cog.d;
  out.info.i = state_.cog.i;
  out.info.c = state_.cog.c;
  out.info.applied = applied;
  out.info.crashed = state_.crashed;
  out.info.road_end = road_end;
  out.info.lane_command_ignored = lane_ignored;
  return out;
}

std::vector<double> HmiwayEnv::driver_observation() const {
  return lidar_observe(state_.ego, state_.ambient, profile_.inflation, config_.lidar_sectors,
                       geometry_, sensor_)
      .to_vector();
}

std::vector<double> HmiwayEnv::hmi_observation(std::optional<HumanAction> proposed) const {
  std::vector<double> v = lidar_observe(state_.ego, state_.ambient, 1.0, config_.lidar_sectors,
                                        geometry_, sensor_)
                              .to_vector();
  if (hmi_obs_.include_cognitive) {
    v.push_back(static_cast<double>(state_.cog.d));
    v.push_back(static_cast<double>(state_.cog.i));
    v.push_back(static_cast<double>(state_.cog.c) / config_.intervention_window);
  }
  if (hmi_obs_.features == HmiObsConfig::Features::kProfile) {
    v.push_back(profile_.beta);
    v.push_back(profile_.alpha);
    v.push_back(profile_.eta);
    v.push_back(profile_.inflation / 10.0);
  } else if (hmi_obs_.features == HmiObsConfig::Features::kLatent) {
    v.insert(v.end(), latent_.begin(), latent_.end());
  }
  if (hmi_obs_.include_human_action) {
    append_one_hot(v, proposed ? static_cast<int>(*proposed) : -1, kNumHumanActions);
  }
  return v;
}

void HmiwayEnv::set_latent(std::vector<double> z) {
  if (static_cast<int>(z.size()) != hmi_obs_.latent_dim)
    throw ContractError("set_latent: dimension mismatch");
  latent_ = std::move(z);
}

HumanAction scripted_driver_action(const HmiwayEnv& env) {
  const EnvState& s = env.state();
  const ScenarioConfig& cfg = env.config();

  // Merge out of the merging lane as soon as a gap opens.
  int merge = cfg.merge_lane;
  if (merge >= 0 && s.ego.lane == merge && !s.ego.changing_lane()) {
    // Re-run the env's gap test through a local copy of its rules.
    double ahead_gap = kNoLeaderGap, ahead_speed = 0.0, behind_gap = kNoLeaderGap,
           behind_speed = 0.0;
    int target = merge - 1;
    for (const auto& o : s.ambient) {
      if (!o.occupies_lane(target)) continue;
      double dx = o.position - s.ego.position;
      double gap = std::abs(dx) - 0.5 * (s.ego.length + o.length);
      if (dx > 0 && gap < ahead_gap) {
        ahead_gap = gap;
        ahead_speed = o.speed;
      } else if (dx <= 0 && gap < behind_gap) {
        behind_gap = gap;
        behind_speed = o.speed;
      }
    }
    (void)ahead_speed;
    if (ahead_gap >= 8.0 + 0.6 * s.ego.speed && behind_gap >= 8.0 + 0.6 * behind_speed)
      return HumanAction::kMoveLeft;
  }

  // Track the scenario's target speed with the desired-speed actuator.
  double desired = env.ego_desired_speed();
  if (desired < cfg.target_speed - 0.5 * cfg.action_speed_delta) return HumanAction::kSpeedUp;
  if (desired > cfg.target_speed + 0.5 * cfg.action_speed_delta) return HumanAction::kSlowDown;
  return HumanAction::kKeepSpeed;
}

}  // namespace hmiway
