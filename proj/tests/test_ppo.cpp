#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "hmiway/errors.hpp"
#include "hmiway/ppo.hpp"

using namespace hmiway;

namespace {

// Two-armed bandit: constant observation, one-step episodes, arm 0 pays 1.
class BanditEnv : public RolloutEnv {
 public:
  int obs_dim() const override { return 1; }
  int n_actions() const override { return 2; }
  std::vector<double> reset(std::uint64_t) override { return {1.0}; }
  StepResult step(int action) override {
    StepResult r;
    r.reward = action == 0 ? 1.0 : 0.0;
    r.done = true;
    return r;
  }
};

// O(T^2) literal recomputation of GAE; the inner loop runs the same Horner
// recurrence independently per index, so results are bit-identical.
std::vector<double> brute_force_gae(const RolloutBuffer& buf, double gamma, double lambda) {
  const std::size_t n = buf.size();
  std::vector<double> adv(n);
  for (std::size_t t0 = 0; t0 < n; ++t0) {
    double acc = 0.0;
    for (std::size_t t = n; t-- > t0;) {
      double next_nonterminal = buf.dones[t] ? 0.0 : 1.0;
      double next_value = t == n - 1 ? buf.bootstrap_value : buf.values[t + 1];
      double delta = buf.rewards[t] + gamma * next_value * next_nonterminal - buf.values[t];
      acc = delta + gamma * lambda * next_nonterminal * acc;
    }
    adv[t0] = acc;
  }
  return adv;
}

RolloutBuffer random_buffer(Rng& rng, int n) {
  RolloutBuffer buf;
  buf.obs_dim = 1;
  for (int t = 0; t < n; ++t) {
    buf.obs.push_back(rng.uniform(-1, 1));
    buf.actions.push_back(rng.uniform_int(2));
    buf.log_probs.push_back(-0.7);
    buf.rewards.push_back(rng.uniform(-2, 2));
    buf.values.push_back(rng.uniform(-1, 1));
    buf.dones.push_back(rng.bernoulli(0.12) ? 1 : 0);
  }
  buf.bootstrap_value = rng.uniform(-1, 1);
  return buf;
}

}  // namespace

TEST_CASE("gae hand example: lambda=1, zero values, gamma=0.5") {
  RolloutBuffer buf;
  buf.obs_dim = 1;
  buf.obs = {0, 0, 0};
  buf.actions = {0, 0, 0};
  buf.log_probs = {0, 0, 0};
  buf.rewards = {1, 1, 1};
  buf.values = {0, 0, 0};
  buf.dones = {0, 0, 1};
  compute_advantages(buf, 0.5, 1.0);
  CHECK(buf.returns[0] == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(buf.returns[1] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(buf.returns[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gae with a perfect value function gives zero advantages") {
  RolloutBuffer buf;
  buf.obs_dim = 1;
  double gamma = 0.9;
  // Rewards of 1 for 4 steps then termination; V(t) = sum of discounted tail.
  for (int t = 0; t < 4; ++t) {
    buf.obs.push_back(0);
    buf.actions.push_back(0);
    buf.log_probs.push_back(0);
    buf.rewards.push_back(1.0);
    buf.dones.push_back(t == 3 ? 1 : 0);
  }
  buf.values = {1 + gamma * (1 + gamma * (1 + gamma)), 1 + gamma * (1 + gamma), 1 + gamma, 1};
  compute_advantages(buf, gamma, 0.95);
  for (double a : buf.advantages) CHECK(std::abs(a) < 1e-12);
}

TEST_CASE("gae matches the O(T^2) brute-force oracle exactly") {
  Rng rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    RolloutBuffer buf = random_buffer(rng, 40 + rng.uniform_int(60));
    compute_advantages(buf, 0.99, 0.95);
    auto oracle = brute_force_gae(buf, 0.99, 0.95);
    REQUIRE(oracle.size() == buf.advantages.size());
    for (std::size_t t = 0; t < oracle.size(); ++t) CHECK(buf.advantages[t] == oracle[t]);
  }
}

TEST_CASE("collect: zero steps yields an empty buffer") {
  Rng init(1), act(2);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  RolloutCollector collector(std::make_unique<BanditEnv>(), 5);
  auto buf = collector.collect(policy, value, 0, act);
  CHECK(buf.size() == 0);
}

TEST_CASE("collect: recorded log-probs equal re-evaluated log-probs") {
  Rng init(1), act(2);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  RolloutCollector collector(std::make_unique<BanditEnv>(), 5);
  auto buf = collector.collect(policy, value, 64, act);
  for (std::size_t t = 0; t < buf.size(); ++t)
    CHECK(buf.log_probs[t] ==
          doctest::Approx(policy.log_prob(buf.obs_at(t), buf.actions[t])).epsilon(1e-12));
}

TEST_CASE("collect is deterministic given seed and policy snapshot") {
  Rng init(1);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  auto run = [&]() {
    Rng act(2);
    RolloutCollector collector(std::make_unique<BanditEnv>(), 5);
    auto buf = collector.collect(policy, value, 32, act);
    return buf.actions;
  };
  CHECK(run() == run());
}

TEST_CASE("policy outputs are valid distributions") {
  Rng init(7);
  PolicyNet policy(3, 5, init);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> obs = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    auto p = policy.probs(obs);
    double sum = 0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("zero advantages with zero entropy coefficient is an exact policy no-op") {
  Rng init(3), rng(4);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  RolloutCollector collector(std::make_unique<BanditEnv>(), 5);
  Rng act(2);
  auto buf = collector.collect(policy, value, 32, act);
  buf.advantages.assign(buf.size(), 0.0);
  buf.returns.assign(buf.size(), 1.0);  // the value net still learns

  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  cfg.normalize_advantages = false;
  cfg.minibatch_size = 8;
  Adam popt(policy.net().param_count(), cfg.learning_rate);
  Adam vopt(value.net().param_count(), cfg.learning_rate);
  auto before = policy.net().params();
  auto vbefore = value.net().params();
  ppo_update(buf, policy, value, popt, vopt, cfg, rng);
  CHECK(policy.net().params() == before);
  CHECK(value.net().params() != vbefore);
}

TEST_CASE("clip ratio zero pins the clipped ratio to one: no policy update") {
  Rng init(3), rng(4);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  RolloutCollector collector(std::make_unique<BanditEnv>(), 5);
  Rng act(2);
  auto buf = collector.collect(policy, value, 32, act);
  compute_advantages(buf, 0.99, 0.95);

  PpoConfig cfg;
  cfg.clip_ratio = 0.0;
  cfg.entropy_coef = 0.0;
  cfg.epochs = 1;
  Adam popt(policy.net().param_count(), cfg.learning_rate);
  Adam vopt(value.net().param_count(), cfg.learning_rate);
  auto before = policy.net().params();
  ppo_update(buf, policy, value, popt, vopt, cfg, rng);
  CHECK(policy.net().params() == before);
}

TEST_CASE("two-armed bandit reaches P(optimal) >= 0.95 within 200 updates") {
  Rng init(11), act(12), upd(13);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  RolloutCollector collector(std::make_unique<BanditEnv>(), 99);
  PpoConfig cfg;
  cfg.rollout_steps = 64;
  cfg.minibatch_size = 64;
  cfg.epochs = 4;
  cfg.entropy_coef = 0.01;
  cfg.learning_rate = 3e-3;
  Adam popt(policy.net().param_count(), cfg.learning_rate);
  Adam vopt(value.net().param_count(), cfg.learning_rate);

  double p_best = 0;
  int updates = 0;
  std::vector<double> obs = {1.0};
  for (; updates < 200; ++updates) {
    auto buf = collector.collect(policy, value, cfg.rollout_steps, act);
    compute_advantages(buf, cfg.gamma, cfg.gae_lambda);
    ppo_update(buf, policy, value, popt, vopt, cfg, upd);
    p_best = policy.probs(obs)[0];
    if (p_best >= 0.95) break;
  }
  INFO("updates used: ", updates, ", P(best arm) = ", p_best);
  CHECK(p_best >= 0.95);
}

TEST_CASE("with zero reward the entropy bonus drifts the policy toward uniform") {
  // Skewed initial logits on a bandit with no reward signal.
  Rng init(21), act(22), upd(23);
  PolicyNet policy(1, 2, init);
  policy.net().params().back() = 1.5;  // bias the second logit
  ValueNet value(1, init);

  class ZeroBandit : public RolloutEnv {
   public:
    int obs_dim() const override { return 1; }
    int n_actions() const override { return 2; }
    std::vector<double> reset(std::uint64_t) override { return {1.0}; }
    StepResult step(int) override {
      StepResult r;
      r.done = true;
      return r;
    }
  };

  RolloutCollector collector(std::make_unique<ZeroBandit>(), 3);
  PpoConfig cfg;
  cfg.rollout_steps = 128;
  cfg.minibatch_size = 128;
  cfg.entropy_coef = 0.05;
  std::vector<double> obs = {1.0};
  double h0 = policy.entropy(obs);
  Adam popt(policy.net().param_count(), cfg.learning_rate);
  Adam vopt(value.net().param_count(), cfg.learning_rate);
  int non_decreasing = 0;
  double prev = h0;
  for (int it = 0; it < 30; ++it) {
    auto buf = collector.collect(policy, value, cfg.rollout_steps, act);
    compute_advantages(buf, cfg.gamma, cfg.gae_lambda);
    ppo_update(buf, policy, value, popt, vopt, cfg, upd);
    double h = policy.entropy(obs);
    if (h >= prev - 1e-9) ++non_decreasing;
    prev = h;
  }
  CHECK(policy.entropy(obs) > h0);
  CHECK(non_decreasing >= 25);
}

TEST_CASE("kl ceiling stops the remaining epochs") {
  Rng init(31), act(32), upd(33);
  PolicyNet policy(1, 2, init);
  ValueNet value(1, init);
  RolloutCollector collector(std::make_unique<BanditEnv>(), 44);
  auto buf = collector.collect(policy, value, 64, act);
  compute_advantages(buf, 0.99, 0.95);
  PpoConfig cfg;
  cfg.kl_limit = 1e-12;  // everything trips the ceiling
  cfg.learning_rate = 0.05;
  cfg.epochs = 8;
  Adam popt(policy.net().param_count(), cfg.learning_rate);
  Adam vopt(value.net().param_count(), cfg.learning_rate);
  auto stats = ppo_update(buf, policy, value, popt, vopt, cfg, upd);
  CHECK(stats.early_stopped);
  CHECK(stats.epochs_run < cfg.epochs);
}

TEST_CASE("ppo config validation") {
  PpoConfig cfg;
  cfg.clip_ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = PpoConfig{};
  cfg.gamma = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}
