#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hmiway/errors.hpp"
#include "hmiway/traits.hpp"

using namespace hmiway;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_scenario() {
  ScenarioConfig cfg;
  cfg.max_vehicles = 6;
  return cfg;
}

Dataset tiny_dataset(std::int64_t steps_per_type = 1200, std::uint64_t seed = 11) {
  std::vector<DriverProfile> profiles;
  for (const auto& p : archetype_registry())
    if (p.name != "Avg") profiles.push_back(p);
  GenerateOptions opts;
  opts.labeled_fraction = 0.5;
  return generate_dataset(profiles, steps_per_type, scripted_behavior(), small_scenario(), seed,
                          opts);
}

TraitConfig tiny_trait_config() {
  TraitConfig cfg;
  cfg.lstm_hidden = 16;
  cfg.pool_size = 4;
  cfg.pools_per_update = 4;
  cfg.gen_steps_per_round = 200;
  cfg.gen_episodes_per_update = 2;
  cfg.budget = 400;
  cfg.checkpoint_every_rounds = 1;
  return cfg;
}

Sequence random_sequence(Rng& rng, int steps, int dim) {
  Sequence seq;
  for (int t = 0; t < steps; ++t) {
    std::vector<double> x(static_cast<size_t>(dim));
    for (auto& v : x) v = rng.uniform(-1, 1);
    seq.push_back(std::move(x));
  }
  return seq;
}

}  // namespace

TEST_CASE("pool of identical trajectories encodes like a single trajectory") {
  Rng init(5), data(6);
  ContextEncoder enc = ContextEncoder::make(6, 8, 2, init);
  Sequence seq = random_sequence(data, 12, 6);
  std::vector<Sequence> pool1 = {seq};
  std::vector<Sequence> pool4 = {seq, seq, seq, seq};
  LatentTrait a = enc.encode_pool(pool1, nullptr);
  LatentTrait b = enc.encode_pool(pool4, nullptr);
  for (int d = 0; d < 2; ++d) {
    CHECK(a.mu[static_cast<size_t>(d)] == doctest::Approx(b.mu[static_cast<size_t>(d)]).epsilon(1e-12));
    CHECK(a.log_var[static_cast<size_t>(d)] ==
          doctest::Approx(b.log_var[static_cast<size_t>(d)]).epsilon(1e-12));
  }
}

TEST_CASE("zero-initialized heads put every embedding at the origin") {
  Rng init(5), data(6), reparam(7);
  ContextEncoder enc = ContextEncoder::make(6, 8, 2, init);
  std::fill(enc.head_mu.params().begin(), enc.head_mu.params().end(), 0.0);
  std::fill(enc.head_logvar.params().begin(), enc.head_logvar.params().end(), 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    Sequence seq = random_sequence(data, 10, 6);
    std::vector<Sequence> pool = {seq};
    LatentTrait t = enc.encode_pool(pool, &reparam);
    CHECK(t.mu == std::vector<double>{0.0, 0.0});
    CHECK(t.log_var == std::vector<double>{0.0, 0.0});
  }
}

TEST_CASE("encoder gradients through pooling match finite differences") {
  Rng init(11), data(12);
  ContextEncoder enc = ContextEncoder::make(4, 6, 2, init);
  std::vector<Sequence> pool = {random_sequence(data, 5, 4), random_sequence(data, 5, 4)};

  // Objective: 0.5*(|mu|^2 + |log_var|^2) after pooling both members.
  auto objective = [&]() {
    LatentTrait t = enc.encode_pool(pool, nullptr);
    double s = 0;
    for (double v : t.mu) s += 0.5 * v * v;
    for (double v : t.log_var) s += 0.5 * v * v;
    return s;
  };

  ContextEncoder::PoolCache cache;
  LatentTrait t = enc.encode_pool_cached(pool, nullptr, cache);
  ContextEncoder::Grads grads = enc.zero_grads();
  enc.backward_pool(cache, t.mu, t.log_var, grads);

  auto fd_check = [&](std::vector<double>& params, const std::vector<double>& analytic) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      double saved = params[k];
      params[k] = saved + 1e-5;
      double up = objective();
      params[k] = saved - 1e-5;
      double down = objective();
      params[k] = saved;
      double fd = (up - down) / 2e-5;
      double scale = std::max({1.0, std::abs(fd), std::abs(analytic[k])});
      CHECK(std::abs(analytic[k] - fd) <= 1e-4 * scale);
    }
  };
  fd_check(enc.lstm.params(), grads.lstm);
  fd_check(enc.head_mu.params(), grads.mu);
  fd_check(enc.head_logvar.params(), grads.logvar);
}

TEST_CASE("discriminator probability is 1/2 when f equals log pi") {
  Rng init(3);
  RewardNets nets = RewardNets::make(3, 2, 2, 0.99, init);
  PolicyNet policy(5, 2, init);  // input = obs(3) + z(2)
  std::vector<double> s = {0.1, -0.2, 0.3};
  std::vector<double> s2 = {0.2, -0.1, 0.4};
  std::vector<double> z = {0.5, -0.5};

  // Force f(s,a,s',z) = log pi(a|s,z) by zeroing g/h and shifting g's bias.
  std::fill(nets.g.params().begin(), nets.g.params().end(), 0.0);
  std::fill(nets.h.params().begin(), nets.h.params().end(), 0.0);
  std::vector<double> obs_z = {0.1, -0.2, 0.3, 0.5, -0.5};
  double logpi = policy.log_prob(obs_z, 1);
  nets.g.params().back() = logpi;  // output bias of a zeroed net

  CHECK(discriminator_prob(s, 1, s2, z, nets, policy) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("discriminator probability approaches 1 as f dominates") {
  Rng init(3);
  RewardNets nets = RewardNets::make(3, 2, 2, 0.99, init);
  PolicyNet policy(5, 2, init);
  std::fill(nets.g.params().begin(), nets.g.params().end(), 0.0);
  std::fill(nets.h.params().begin(), nets.h.params().end(), 0.0);
  nets.g.params().back() = 50.0;
  std::vector<double> s = {0.1, -0.2, 0.3};
  std::vector<double> s2 = {0.2, -0.1, 0.4};
  std::vector<double> z = {0.5, -0.5};
  CHECK(discriminator_prob(s, 0, s2, z, nets, policy) > 0.999999);
}

TEST_CASE("discriminator matches a direct evaluation of the form") {
  Rng init(17);
  RewardNets nets = RewardNets::make(3, 2, 2, 0.9, init);
  PolicyNet policy(5, 2, init);
  std::vector<double> s = {0.3, 0.1, -0.4};
  std::vector<double> s2 = {0.1, 0.2, -0.2};
  std::vector<double> z = {1.0, -1.0};
  double f = nets.g.forward(nets.g_input(s, 1, z))[0] +
             0.9 * nets.h.forward(nets.h_input(s2, z))[0] -
             nets.h.forward(nets.h_input(s, z))[0];
  std::vector<double> obs_z = {0.3, 0.1, -0.4, 1.0, -1.0};
  double pi = policy.probs(obs_z)[1];
  double expected = std::exp(f) / (std::exp(f) + pi);
  CHECK(discriminator_prob(s, 1, s2, z, nets, policy) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("reward shaping telescopes to the endpoints") {
  Rng init(23), data(24);
  RewardNets nets = RewardNets::make(4, 3, 2, 0.97, init);
  std::vector<double> z = {0.2, -0.3};
  const int T = 17;
  std::vector<std::vector<double>> states;
  for (int t = 0; t <= T; ++t) {
    std::vector<double> s(4);
    for (auto& v : s) v = data.uniform(-1, 1);
    states.push_back(s);
  }
  // sum_t gamma^t (gamma*h(s_{t+1}) - h(s_t)) depends only on the endpoints.
  double lhs = 0.0;
  double gpow = 1.0;
  for (int t = 0; t < T; ++t) {
    double hs = nets.h.forward(nets.h_input(states[static_cast<size_t>(t)], z))[0];
    double hs2 = nets.h.forward(nets.h_input(states[static_cast<size_t>(t + 1)], z))[0];
    lhs += gpow * (nets.gamma * hs2 - hs);
    gpow *= nets.gamma;
  }
  double h0 = nets.h.forward(nets.h_input(states[0], z))[0];
  double hT = nets.h.forward(nets.h_input(states[static_cast<size_t>(T)], z))[0];
  double rhs = std::pow(nets.gamma, T) * hT - h0;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("contrastive pair terms vanish in the stated cases") {
  std::vector<double> z0 = {0.5, 0.5};
  CHECK(contrastive_pair_loss(z0, z0, true, 1.0) == 0.0);
  std::vector<double> far = {3.0, 0.5};
  CHECK(contrastive_pair_loss(z0, far, false, 1.0) == 0.0);
  // Inside the margin the penalty is (margin - d)^2.
  std::vector<double> near = {1.0, 0.5};
  CHECK(contrastive_pair_loss(z0, near, false, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("unit gaussian kl is zero exactly at the standard normal") {
  std::vector<double> mu = {0.0, 0.0};
  std::vector<double> lv = {0.0, 0.0};
  CHECK(unit_gaussian_kl(mu, lv) == 0.0);
  mu = {0.3, -0.2};
  lv = {0.1, -0.4};
  CHECK(unit_gaussian_kl(mu, lv) > 0.0);
}

TEST_CASE("weighted total is the exact weighted sum of the four terms") {
  LossReport r;
  r.l1 = 0.37;
  r.l2 = -1.25;
  r.l3 = 2.5;
  r.l4 = 0.011;
  LossWeights w;
  CHECK(r.total(w) == r.l1 * 1.0 + r.l2 * 5.0 + r.l3 * 10.0 + r.l4 * 1e-4);
}

TEST_CASE("pairwise cluster kl: identical clusters give zero") {
  std::map<int, std::vector<std::vector<double>>> by_driver;
  std::vector<std::vector<double>> pts = {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
  by_driver[0] = pts;
  by_driver[1] = pts;
  auto result = pairwise_cluster_kl(by_driver);
  CHECK(result.average == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pairwise cluster kl matches the closed form for unit-variance clusters") {
  // Points with exact mean (0,0) / (10,0) and exact unit variance per axis.
  auto around = [](double cx, double cy) {
    return std::vector<std::vector<double>>{{cx + 1, cy + 1}, {cx + 1, cy - 1},
                                            {cx - 1, cy + 1}, {cx - 1, cy - 1}};
  };
  std::map<int, std::vector<std::vector<double>>> by_driver;
  by_driver[0] = around(0, 0);
  by_driver[1] = around(10, 0);
  auto result = pairwise_cluster_kl(by_driver);
  // Symmetrized KL = 0.5*|dmu|^2 in each direction = 100 total.
  CHECK(result.kl[0][1] == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(result.average == doctest::Approx(100.0).epsilon(1e-9));
  CHECK_FALSE(result.variance_floored);
}

TEST_CASE("degenerate covariance is floored and flagged") {
  std::map<int, std::vector<std::vector<double>>> by_driver;
  by_driver[0] = {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  by_driver[1] = {{1.5, 2.0}, {1.5, 2.0}, {1.5, 2.0}};
  auto result = pairwise_cluster_kl(by_driver);
  CHECK(result.variance_floored);
  CHECK(result.average > 0.0);
}

TEST_CASE("heterogeneous pools are rejected") {
  Dataset ds = tiny_dataset(300);
  PooledBatch batch;
  batch.driver_id = 0;
  batch.segments = {{0, 0, 100}};
  // Find a trajectory from another driver and mix it in.
  for (int k = 0; k < static_cast<int>(ds.trajectories.size()); ++k)
    if (ds.trajectories[static_cast<size_t>(k)].driver_id == 1) {
      batch.segments.push_back({k, 0, 100});
      break;
    }
  CHECK_THROWS_AS(sequences_from_batch(ds, batch), ContractError);
}

TEST_CASE("trait learner: defaults follow the published protocol") {
  TraitConfig cfg;
  CHECK(cfg.disc_updates_per_round == 2);
  CHECK(cfg.disc_lr == 5e-4);
  CHECK(cfg.gen_lr == 1e-2);
  CHECK(cfg.gen_steps_per_round == 500);
  CHECK(cfg.pool_size == 8);
  CHECK(cfg.window_seconds == 20.0);
  CHECK(cfg.latent_dim == 2);
  CHECK(cfg.lstm_hidden == 128);
  CHECK(cfg.budget == 1000000);
  CHECK(cfg.weights.l2 == 5.0);
  CHECK(cfg.weights.l3 == 10.0);
  CHECK(cfg.weights.l4 == 1e-4);
}

TEST_CASE("discriminator loss decreases on a frozen toy batch over 50 updates") {
  Dataset ds = tiny_dataset(1200);
  TraitConfig cfg = tiny_trait_config();
  TraitLearner learner(ds, small_scenario(), cfg, SupervisionMode::kDriverId, 77);
  learner.generator_update();  // fills the rollout buffer

  Rng probe_rng(5);
  std::vector<PooledBatch> pools;
  Rng pool_rng(6);
  PoolSampler sampler(ds, cfg.pool_size, 100);
  for (int driver : sampler.eligible_drivers(false))
    pools.push_back(sampler.sample_pool(driver, pool_rng));
  std::vector<GenEpisode> gen(learner.gen_buffer().begin(), learner.gen_buffer().end());
  REQUIRE_FALSE(gen.empty());

  Rng eval_rng_a(9);
  double before = learner.compute_losses(pools, gen, eval_rng_a).total(cfg.weights);
  for (int it = 0; it < 50; ++it) learner.discriminator_update();
  Rng eval_rng_b(9);
  double after = learner.compute_losses(pools, gen, eval_rng_b).total(cfg.weights);
  INFO("loss before ", before, " after ", after);
  CHECK(after < before);
}

TEST_CASE("zero discriminator learning rate leaves parameters unchanged") {
  Dataset ds = tiny_dataset(1200);
  TraitConfig cfg = tiny_trait_config();
  cfg.disc_lr = 0.0;
  TraitLearner learner(ds, small_scenario(), cfg, SupervisionMode::kDriverId, 77);
  learner.generator_update();
  auto lstm_before = learner.encoder().lstm.params();
  auto g_before = learner.reward_nets().g.params();
  learner.discriminator_update();
  CHECK(learner.encoder().lstm.params() == lstm_before);
  CHECK(learner.reward_nets().g.params() == g_before);
}

TEST_CASE("embed_driver is deterministic given the rng state") {
  Dataset ds = tiny_dataset(1200);
  TraitConfig cfg = tiny_trait_config();
  TraitLearner learner(ds, small_scenario(), cfg, SupervisionMode::kUnsupervised, 42);
  Rng a(3), b(3);
  auto ea = learner.embed_driver(0, 3, a);
  auto eb = learner.embed_driver(0, 3, b);
  REQUIRE(ea.size() == eb.size());
  for (std::size_t k = 0; k < ea.size(); ++k) {
    CHECK(ea[k].mu == eb[k].mu);
    CHECK(ea[k].z == eb[k].z);
  }
}

TEST_CASE("training runs to the budget and checkpoints every round") {
  Dataset ds = tiny_dataset(1200);
  TraitConfig cfg = tiny_trait_config();
  fs::path dir = fs::temp_directory_path() / "hmiway-trait-train";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TraitLearner learner(ds, small_scenario(), cfg, SupervisionMode::kDriverId, 5);
  auto result = learner.train(dir.string());
  CHECK(result.env_steps >= cfg.budget);
  CHECK(result.rounds == 2);
  CHECK(fs::exists(dir / "trainer-latest.ckpt"));
  int snapshots = 0;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().filename().string().rfind("trainer-round", 0) == 0) ++snapshots;
  CHECK(snapshots >= 2);
  CHECK(static_cast<int>(result.losses.size()) == result.rounds * cfg.disc_updates_per_round);
  fs::remove_all(dir);
}

TEST_CASE("resume reproduces the uninterrupted run bit-exactly") {
  Dataset ds = tiny_dataset(1200);
  TraitConfig cfg = tiny_trait_config();
  cfg.budget = 800;  // 4 rounds

  fs::path dir = fs::temp_directory_path() / "hmiway-trait-resume";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Straight run.
  TraitLearner full(ds, small_scenario(), cfg, SupervisionMode::kDriverId, 99);
  full.train("");

  // Two rounds, checkpoint, resume with the extended budget for the rest.
  TraitConfig half = cfg;
  half.budget = 400;
  TraitLearner first(ds, small_scenario(), half, SupervisionMode::kDriverId, 99);
  first.train("");
  first.save_checkpoint((dir / "mid.ckpt").string());

  auto resumed = TraitLearner::resume(ds, small_scenario(), (dir / "mid.ckpt").string(),
                                      cfg.budget);
  CHECK(resumed->env_steps() == first.env_steps());
  resumed->train("");

  CHECK(resumed->env_steps() == full.env_steps());
  CHECK(resumed->rounds_completed() == full.rounds_completed());
  CHECK(resumed->encoder().lstm.params() == full.encoder().lstm.params());
  CHECK(resumed->encoder().head_mu.params() == full.encoder().head_mu.params());
  CHECK(resumed->encoder().head_logvar.params() == full.encoder().head_logvar.params());
  CHECK(resumed->reward_nets().g.params() == full.reward_nets().g.params());
  CHECK(resumed->reward_nets().h.params() == full.reward_nets().h.params());
  CHECK(resumed->policy().net().params() == full.policy().net().params());
  fs::remove_all(dir);
}

TEST_CASE("encoder checkpoints reload bit-exactly") {
  Rng init(8);
  ContextEncoder enc = ContextEncoder::make(40, 16, 2, init);
  fs::path dir = fs::temp_directory_path() / "hmiway-encoder-ckpt";
  fs::create_directories(dir);
  std::string path = (dir / "enc.ckpt").string();
  enc.save(path);
  ContextEncoder back = ContextEncoder::load(path);
  CHECK(back.lstm.params() == enc.lstm.params());
  CHECK(back.head_mu.params() == enc.head_mu.params());
  CHECK(back.head_logvar.params() == enc.head_logvar.params());
  fs::remove_all(dir);
}
