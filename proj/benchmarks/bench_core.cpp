#include <benchmark/benchmark.h>

#include "hmiway/eval.hpp"

using namespace hmiway;

namespace {

void BM_EnvStep(benchmark::State& state) {
  ScenarioConfig cfg;
  HmiwayEnv env(cfg, archetype_profile("Homer"));
  env.reset(1);
  Rng rng(2);
  for (auto _ : state) {
    if (env.state().done) env.reset(rng.next_u64());
    auto out = env.step(static_cast<HumanAction>(rng.uniform_int(kNumHumanActions)),
                        AIAction::kNoAlert);
    benchmark::DoNotOptimize(out.rewards.total());
  }
}
BENCHMARK(BM_EnvStep);

void BM_Lidar(benchmark::State& state) {
  ScenarioConfig cfg;
  RoadGeometry g = cfg.geometry();
  Rng rng(7);
  SpawnParams sp;
  auto others = spawn_traffic(g, 20, rng, sp);
  VehicleState ego;
  ego.lane = ego.target_lane = 1;
  ego.position = 120;
  for (auto _ : state) {
    auto obs = lidar_observe(ego, others, 3.0, 16, g, SensorParams{});
    benchmark::DoNotOptimize(obs.distance[0]);
  }
}
BENCHMARK(BM_Lidar);

void BM_LstmEncode100(benchmark::State& state) {
  Rng rng(3);
  LstmEncoder lstm = LstmEncoder::make(40, 128, rng);
  std::vector<std::vector<double>> xs;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(40);
    for (auto& v : x) v = rng.uniform(-1, 1);
    xs.push_back(std::move(x));
  }
  for (auto _ : state) {
    auto h = lstm.encode(xs);
    benchmark::DoNotOptimize(h[0]);
  }
}
BENCHMARK(BM_LstmEncode100);

void BM_PpoUpdate(benchmark::State& state) {
  Rng init(5), act(6), upd(7);
  ScenarioConfig cfg;
  PolicyNet policy(Observation::dim(cfg.lidar_sectors), kNumHumanActions, init);
  ValueNet value(Observation::dim(cfg.lidar_sectors), init);
  auto env = std::make_unique<DriverTaskEnv>(cfg, archetype_profile("Lisa"));
  RolloutCollector collector(std::move(env), 11);
  auto buf = collector.collect(policy, value, 512, act);
  compute_advantages(buf, 0.99, 0.95);
  PpoConfig pcfg;
  Adam popt(policy.net().param_count(), pcfg.learning_rate);
  Adam vopt(value.net().param_count(), pcfg.learning_rate);
  for (auto _ : state) {
    auto stats = ppo_update(buf, policy, value, popt, vopt, pcfg, upd);
    benchmark::DoNotOptimize(stats.policy_loss);
  }
}
BENCHMARK(BM_PpoUpdate);

}  // namespace

BENCHMARK_MAIN();
