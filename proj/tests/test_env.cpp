#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hmiway/env.hpp"
#include "hmiway/errors.hpp"

using namespace hmiway;

namespace {

RewardParams default_reward_params() {
  RewardParams rp;
  rp.max_speed = 40;
  rp.target_speed = 30;
  rp.right_lane_index = 1;
  rp.merge_lane_index = 2;
  return rp;
}

EnvState state_with(double speed, int lane, bool crashed) {
  EnvState s;
  s.ego.speed = speed;
  s.ego.lane = lane;
  s.ego.target_lane = lane;
  s.crashed = crashed;
  return s;
}

}  // namespace

TEST_CASE("reward table: every row with its exact coefficient") {
  RewardParams rp = default_reward_params();
  EnvState prev = state_with(30, 0, false);

  SUBCASE("collision") {
    auto r = compute_rewards(prev, state_with(10, 0, true), HumanAction::kKeepSpeed,
                             AIAction::kNoAlert, 0, 0, rp);
    CHECK(r.coll == -5.0);
    auto r2 = compute_rewards(prev, state_with(10, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 0, 0, rp);
    CHECK(r2.coll == 0.0);
  }
  SUBCASE("speed at the cap") {
    auto r = compute_rewards(prev, state_with(40, 0, false), HumanAction::kKeepSpeed,
                             AIAction::kNoAlert, 0, 0, rp);
    CHECK(r.speed == 5.0);
    auto r2 = compute_rewards(prev, state_with(20, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 0, 0, rp);
    CHECK(r2.speed == doctest::Approx(5.0 * 20 / 40).epsilon(1e-12));
  }
  SUBCASE("right lane bonus only in the rightmost through lane") {
    auto r = compute_rewards(prev, state_with(30, 1, false), HumanAction::kKeepSpeed,
                             AIAction::kNoAlert, 0, 0, rp);
    CHECK(r.right_lane == 0.1);
    auto r2 = compute_rewards(prev, state_with(30, 2, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 0, 0, rp);
    CHECK(r2.right_lane == 0.0);
  }
  SUBCASE("merging deficit penalty, zero at the target speed") {
    auto r = compute_rewards(prev, state_with(20, 2, false), HumanAction::kKeepSpeed,
                             AIAction::kNoAlert, 0, 0, rp);
    CHECK(r.merging == doctest::Approx(-0.1 * (30.0 - 20.0) / 30.0).epsilon(1e-12));
    auto r2 = compute_rewards(prev, state_with(30, 2, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 0, 0, rp);
    CHECK(r2.merging == 0.0);
    auto r3 = compute_rewards(prev, state_with(20, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 0, 0, rp);
    CHECK(r3.merging == 0.0);
  }
  SUBCASE("lane change penalty follows the commanded human action") {
    for (HumanAction a : {HumanAction::kMoveLeft, HumanAction::kMoveRight}) {
      auto r = compute_rewards(prev, state_with(30, 0, false), a, AIAction::kNoAlert, 0, 0, rp);
      CHECK(r.lane_change == -0.1);
    }
    auto r2 = compute_rewards(prev, state_with(30, 0, false), HumanAction::kSpeedUp,
                              AIAction::kNoAlert, 0, 0, rp);
    CHECK(r2.lane_change == 0.0);
  }
  SUBCASE("distraction penalty reads the post-update flag") {
    auto r = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                             AIAction::kNoAlert, 0, 1, rp);
    CHECK(r.distraction == -10.0);
  }
  SUBCASE("attentive no-alert bonus") {
    auto r = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                             AIAction::kNoAlert, 0, 0, rp);
    CHECK(r.alert == 10.0);
    auto r2 = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 1, 1, rp);
    CHECK(r2.alert == 0.0);
    auto r3 = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kAlert, 0, 0, rp);
    CHECK(r3.alert == 0.0);
  }
  SUBCASE("accepted alert bonus") {
    auto r = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                             AIAction::kAlert, 1, 0, rp);
    CHECK(r.accept_alert == 30.0);
    auto r2 = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kAlert, 1, 1, rp);
    CHECK(r2.accept_alert == 0.0);
    auto r3 = compute_rewards(prev, state_with(30, 0, false), HumanAction::kKeepSpeed,
                              AIAction::kNoAlert, 1, 0, rp);
    CHECK(r3.accept_alert == 0.0);
  }
}

TEST_CASE("scalar step reward equals the sum of the eight terms") {
  ScenarioConfig cfg;
  HmiwayEnv env(cfg, archetype_profile("Homer"));
  Rng rng(5);
  env.reset(42);
  bool done = false;
  while (!done) {
    HumanAction a = static_cast<HumanAction>(rng.uniform_int(kNumHumanActions));
    AIAction ai = rng.bernoulli(0.5) ? AIAction::kAlert : AIAction::kNoAlert;
    auto out = env.step(a, ai);
    auto v = out.rewards.to_vector();
    double sum = 0;
    for (double x : v) sum += x;
    CHECK(out.rewards.total() == doctest::Approx(sum).epsilon(1e-15));
    done = out.done;
  }
}

TEST_CASE("reset twice with the same seed gives identical observations") {
  ScenarioConfig cfg;
  HmiwayEnv env(cfg, archetype_profile("Lisa"));
  auto a = env.reset(7);
  auto b = env.reset(7);
  CHECK(a.driver_obs == b.driver_obs);
  CHECK(a.hmi_obs == b.hmi_obs);
}

TEST_CASE("episodes are deterministic given seed and action sequence") {
  ScenarioConfig cfg;
  auto run = [&]() {
    HmiwayEnv env(cfg, archetype_profile("Bart"));
    env.reset(99);
    Rng rng(1);
    std::vector<double> rewards;
    bool done = false;
    while (!done) {
      HumanAction a = static_cast<HumanAction>(rng.uniform_int(kNumHumanActions));
      auto out = env.step(a, AIAction::kNoAlert);
      rewards.push_back(out.rewards.total());
      done = out.done;
    }
    return rewards;
  };
  CHECK(run() == run());
}

TEST_CASE("Marge's inflated view is elementwise at most Lisa's") {
  ScenarioConfig cfg;
  HmiwayEnv marge(cfg, archetype_profile("Marge"));
  HmiwayEnv lisa(cfg, archetype_profile("Lisa"));
  auto om = marge.reset(31);
  auto ol = lisa.reset(31);
  int sectors = cfg.lidar_sectors;
  for (int k = 0; k < sectors; ++k)
    CHECK(om.driver_obs[static_cast<size_t>(k)] <= ol.driver_obs[static_cast<size_t>(k)] + 1e-12);
}

TEST_CASE("empty road gives unit distances everywhere") {
  ScenarioConfig cfg;
  cfg.max_vehicles = 0;
  HmiwayEnv env(cfg, archetype_profile("Lisa"));
  auto out = env.reset(3);
  for (int k = 0; k < cfg.lidar_sectors; ++k) CHECK(out.driver_obs[static_cast<size_t>(k)] == 1.0);
}

TEST_CASE("never-distracted, never-alerting episode accumulates 1000 alert reward") {
  ScenarioConfig cfg;
  DriverProfile calm = make_profile("calm", 90, 0.0, 1.0, 0.0, 1.0);
  HmiwayEnv env(cfg, calm);
  env.reset(12);
  double alert_sum = 0;
  int steps = 0;
  bool done = false;
  while (!done) {
    auto out = env.step(HumanAction::kKeepSpeed, AIAction::kNoAlert);
    alert_sum += out.rewards.alert;
    ++steps;
    done = out.done;
  }
  CHECK(steps == 100);
  CHECK(alert_sum == 1000.0);
}

TEST_CASE("while distracted the applied action never changes") {
  ScenarioConfig cfg;
  DriverProfile stuck = make_profile("stuck", 91, 1.0, 0.0, 0.0, 1.0);
  HmiwayEnv env(cfg, stuck);
  env.reset(8);
  Rng rng(2);
  auto first = env.step(HumanAction::kKeepSpeed, AIAction::kNoAlert);
  HumanAction locked = first.info.applied;
  bool done = first.done;
  while (!done) {
    HumanAction a = static_cast<HumanAction>(rng.uniform_int(kNumHumanActions));
    auto out = env.step(a, AIAction::kNoAlert);
    CHECK(out.info.d == 1);
    CHECK(out.info.applied == locked);
    done = out.done;
  }
}

TEST_CASE("gated repeat of speed_up keeps accelerating the ego") {
  ScenarioConfig cfg;
  cfg.max_vehicles = 0;
  DriverProfile stuck = make_profile("stuck", 92, 1.0, 0.0, 0.0, 1.0);
  HmiwayEnv env(cfg, stuck);
  env.reset(8);
  env.step(HumanAction::kSpeedUp, AIAction::kNoAlert);
  double desired_after_one = env.ego_desired_speed();
  env.step(HumanAction::kSlowDown, AIAction::kNoAlert);  // gated away
  CHECK(env.ego_desired_speed() >= desired_after_one);
}

TEST_CASE("step after the episode ends is a contract violation") {
  ScenarioConfig cfg;
  cfg.episode_steps = 2;
  HmiwayEnv env(cfg, archetype_profile("Lisa"));
  env.reset(5);
  env.step(HumanAction::kKeepSpeed, AIAction::kNoAlert);
  auto out = env.step(HumanAction::kKeepSpeed, AIAction::kNoAlert);
  CHECK(out.done);
  CHECK_THROWS_AS(env.step(HumanAction::kKeepSpeed, AIAction::kNoAlert), ContractError);
}

TEST_CASE("hmi view layout: cognitive fields, profile features, proposed action") {
  ScenarioConfig cfg;
  HmiwayEnv env(cfg, archetype_profile("Homer"));
  auto out = env.reset(21);
  int base = Observation::dim(cfg.lidar_sectors);
  REQUIRE(static_cast<int>(out.hmi_obs.size()) == base + 3 + 4 + kNumHumanActions);
  CHECK(out.hmi_obs[static_cast<size_t>(base)] == 0.0);  // d
  CHECK(out.hmi_obs[static_cast<size_t>(base + 3)] == 0.8);   // beta
  CHECK(out.hmi_obs[static_cast<size_t>(base + 4)] == 0.2);   // alpha
  CHECK(out.hmi_obs[static_cast<size_t>(base + 5)] == 1.0);   // eta
  CHECK(out.hmi_obs[static_cast<size_t>(base + 6)] == 0.9);   // inflation / 10
  auto view = env.hmi_observation(HumanAction::kMoveLeft);
  CHECK(view[static_cast<size_t>(base + 7 + static_cast<int>(HumanAction::kMoveLeft))] == 1.0);
}

TEST_CASE("env spec reports the observation and action dimensions") {
  ScenarioConfig cfg;
  HmiwayEnv env(cfg, archetype_profile("Lisa"));
  EnvSpec spec = env.spec();
  CHECK(spec.driver_obs_dim == 2 * cfg.lidar_sectors + 3);
  CHECK(spec.n_human_actions == 5);
  CHECK(spec.n_ai_actions == 2);
  CHECK(spec.episode_steps == 100);
  auto out = env.reset(1);
  CHECK(static_cast<int>(out.driver_obs.size()) == spec.driver_obs_dim);
  CHECK(static_cast<int>(out.hmi_obs.size()) == spec.hmi_obs_dim);
}

TEST_CASE("scenario config validation and file parsing") {
  ScenarioConfig cfg;
  cfg.ego_lane = 9;
  CHECK_THROWS_AS(cfg.validate(), ContractError);

  KeyValueFile kv = KeyValueFile::parse_string(
      "scenario.lane_count = 3\nscenario.max_vehicles = 6\nscenario.speed_min = 18\n",
      "inline");
  ScenarioConfig parsed = ScenarioConfig::from_kv(kv);
  CHECK(parsed.max_vehicles == 6);
  CHECK(parsed.speed_min == 18);

  KeyValueFile bad = KeyValueFile::parse_string("scenario.max_vehicles = many\n", "inline");
  CHECK_THROWS_AS(ScenarioConfig::from_kv(bad), ConfigError);
}
