#include "hmiway/traits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "hmiway/checkpoint.hpp"
#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

using nlohmann::json;

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::vector<double> concat2(std::span<const double> a, std::span<const double> b) {
  std::vector<double> v;
  v.reserve(a.size() + b.size());
  v.insert(v.end(), a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

DriverProfile generator_profile() { return make_profile("generator", -1, 0.0, 1.0, 0.0, 1.0); }

int window_steps_for(const EnvSpec& spec, double window_seconds) {
  double step_seconds = spec.tick_dt * spec.ticks_per_action;
  int steps = static_cast<int>(std::llround(window_seconds / step_seconds));
  if (steps < 1) throw ContractError("trait config: context window shorter than one action step");
  return steps;
}

}  // namespace

int encoder_input_dim(const EnvSpec& spec) { return spec.driver_obs_dim + spec.n_human_actions; }

Sequence sequence_from_segment(const Dataset& dataset, const SegmentRef& segment) {
  const Trajectory& traj = dataset.trajectories.at(static_cast<std::size_t>(segment.trajectory));
  if (segment.start < 0 ||
      segment.start + segment.length > static_cast<int>(traj.steps.size()))
    throw ContractError("sequence_from_segment: segment out of range");
  Sequence seq;
  seq.reserve(static_cast<std::size_t>(segment.length));
  for (int t = segment.start; t < segment.start + segment.length; ++t) {
    const Transition& tr = traj.steps[static_cast<std::size_t>(t)];
    std::vector<double> x = tr.obs;
    append_one_hot(x, tr.applied_action, dataset.env_spec.n_human_actions);
    seq.push_back(std::move(x));
  }
  return seq;
}

std::vector<Sequence> sequences_from_batch(const Dataset& dataset, const PooledBatch& batch) {
  if (batch.segments.empty()) throw ContractError("sequences_from_batch: empty pool");
  std::vector<Sequence> out;
  out.reserve(batch.segments.size());
  for (const auto& seg : batch.segments) {
    const Trajectory& traj = dataset.trajectories.at(static_cast<std::size_t>(seg.trajectory));
    if (traj.driver_id != batch.driver_id)
      throw ContractError("sequences_from_batch: heterogeneous pool (mixed driver ids)");
    out.push_back(sequence_from_segment(dataset, seg));
  }
  return out;
}

ContextEncoder ContextEncoder::make(int input_dim, int hidden_dim, int latent_dim, Rng& init_rng) {
  ContextEncoder e;
  e.lstm = LstmEncoder::make(input_dim, hidden_dim, init_rng);
  e.head_mu = Mlp::make({hidden_dim, latent_dim}, Act::kLinear, Act::kLinear, init_rng);
  e.head_logvar = Mlp::make({hidden_dim, latent_dim}, Act::kLinear, Act::kLinear, init_rng);
  e.latent_dim_ = latent_dim;
  return e;
}

LatentTrait ContextEncoder::encode_pool(std::span<const Sequence> sequences,
                                        Rng* reparam_rng) const {
  PoolCache cache;
  return encode_pool_cached(sequences, reparam_rng, cache);
}

LatentTrait ContextEncoder::encode_pool_cached(std::span<const Sequence> sequences,
                                               Rng* reparam_rng, PoolCache& cache) const {
  if (sequences.empty()) throw ContractError("ContextEncoder: empty pool");
  cache = PoolCache{};
  const int H = lstm.hidden_dim();
  cache.pooled_h.assign(static_cast<std::size_t>(H), 0.0);
  for (const auto& seq : sequences) {
    LstmEncoder::Cache mc;
    std::vector<double> h = lstm.encode(seq, &mc);
    for (int u = 0; u < H; ++u) cache.pooled_h[static_cast<std::size_t>(u)] += h[static_cast<std::size_t>(u)];
    cache.members.push_back(std::move(mc));
  }
  double inv = 1.0 / static_cast<double>(sequences.size());
  for (double& x : cache.pooled_h) x *= inv;

  LatentTrait trait;
  trait.mu = head_mu.forward(cache.pooled_h, &cache.mu_cache);
  cache.raw_logvar = head_logvar.forward(cache.pooled_h, &cache.logvar_cache);
  trait.log_var.resize(cache.raw_logvar.size());
  for (std::size_t d = 0; d < cache.raw_logvar.size(); ++d)
    trait.log_var[d] = logvar_bound_ * std::tanh(cache.raw_logvar[d] / logvar_bound_);

  if (reparam_rng) {
    cache.eps.resize(trait.mu.size());
    trait.z.resize(trait.mu.size());
    for (std::size_t d = 0; d < trait.mu.size(); ++d) {
      cache.eps[d] = reparam_rng->normal();
      trait.z[d] = trait.mu[d] + std::exp(0.5 * trait.log_var[d]) * cache.eps[d];
    }
  }
  cache.trait = trait;
  return trait;
}

ContextEncoder::Grads ContextEncoder::zero_grads() const {
  Grads g;
  g.lstm.assign(lstm.param_count(), 0.0);
  g.mu.assign(head_mu.param_count(), 0.0);
  g.logvar.assign(head_logvar.param_count(), 0.0);
  return g;
}

void ContextEncoder::backward_pool(const PoolCache& cache, std::span<const double> dmu,
                                   std::span<const double> dlogvar, Grads& grads) const {
  if (cache.members.empty()) throw ContractError("ContextEncoder::backward_pool: stale cache");
  const int H = lstm.hidden_dim();

  // Soft bound: log_var = B * tanh(raw / B).
  std::vector<double> draw(dlogvar.size());
  for (std::size_t d = 0; d < dlogvar.size(); ++d) {
    double t = std::tanh(cache.raw_logvar[d] / logvar_bound_);
    draw[d] = dlogvar[d] * (1.0 - t * t);
  }

  std::vector<double> dpooled(static_cast<std::size_t>(H), 0.0);
  head_mu.backward(cache.mu_cache, dmu, grads.mu, dpooled);
  head_logvar.backward(cache.logvar_cache, draw, grads.logvar, dpooled);

  double inv = 1.0 / static_cast<double>(cache.members.size());
  std::vector<double> dh(static_cast<std::size_t>(H));
  for (const auto& member : cache.members) {
    for (int u = 0; u < H; ++u) dh[static_cast<std::size_t>(u)] = dpooled[static_cast<std::size_t>(u)] * inv;
    lstm.backward(member, dh, grads.lstm);
  }
}

double ContextEncoder::log_density(const LatentTrait& trait, std::span<const double> z) {
  if (z.size() != trait.mu.size()) throw ContractError("log_density: dimension mismatch");
  double ll = 0.0;
  for (std::size_t d = 0; d < z.size(); ++d) {
    double lv = trait.log_var[d];
    double diff = z[d] - trait.mu[d];
    ll += -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * lv - 0.5 * diff * diff * std::exp(-lv);
  }
  return ll;
}

void ContextEncoder::save(const std::string& path) const {
  Checkpoint ck;
  json meta;
  meta["type"] = "encoder";
  meta["input_dim"] = input_dim();
  meta["hidden_dim"] = hidden_dim();
  meta["latent_dim"] = latent_dim_;
  meta["logvar_bound"] = logvar_bound_;
  ck.meta_json = meta.dump();
  ck.add("lstm.params", lstm.params());
  ck.add("head_mu.params", head_mu.params());
  ck.add("head_logvar.params", head_logvar.params());
  ck.save(path);
}

ContextEncoder ContextEncoder::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  json meta = json::parse(ck.meta_json);
  if (meta.value("type", "") != "encoder") throw IoError(path + ": not an encoder checkpoint");
  Rng dummy(0);
  ContextEncoder e = make(meta.at("input_dim").get<int>(), meta.at("hidden_dim").get<int>(),
                          meta.at("latent_dim").get<int>(), dummy);
  e.logvar_bound_ = meta.value("logvar_bound", 8.0);
  if (e.lstm.params().size() != ck.section("lstm.params").size())
    throw IoError(path + ": encoder layout mismatch");
  e.lstm.params() = ck.section("lstm.params");
  e.head_mu.params() = ck.section("head_mu.params");
  e.head_logvar.params() = ck.section("head_logvar.params");
  return e;
}

RewardNets RewardNets::make(int obs_dim, int n_actions, int latent_dim, double gamma,
                            Rng& init_rng) {
  RewardNets r;
  r.obs_dim = obs_dim;
  r.n_actions = n_actions;
  r.latent_dim = latent_dim;
  r.gamma = gamma;
  r.g = Mlp::make({obs_dim + n_actions + latent_dim, 32, 32, 1}, Act::kTanh, Act::kLinear, init_rng);
  r.h = Mlp::make({obs_dim + latent_dim, 32, 1}, Act::kTanh, Act::kLinear, init_rng);
  return r;
}

std::vector<double> RewardNets::g_input(std::span<const double> s, int a,
                                        std::span<const double> z) const {
  std::vector<double> v;
  v.reserve(s.size() + static_cast<std::size_t>(n_actions) + z.size());
  v.insert(v.end(), s.begin(), s.end());
  append_one_hot(v, a, n_actions);
  v.insert(v.end(), z.begin(), z.end());
  return v;
}

std::vector<double> RewardNets::h_input(std::span<const double> s,
                                        std::span<const double> z) const {
  return concat2(s, z);
}

double RewardNets::f(std::span<const double> s, int a, std::span<const double> s2,
                     std::span<const double> z) const {
  FCache cache;
  return f_cached(s, a, s2, z, cache);
}

double RewardNets::f_cached(std::span<const double> s, int a, std::span<const double> s2,
                            std::span<const double> z, FCache& cache) const {
  double gv = g.forward(g_input(s, a, z), &cache.g_cache)[0];
  double hs = h.forward(h_input(s, z), &cache.h_s)[0];
  double hs2 = h.forward(h_input(s2, z), &cache.h_s2)[0];
  return gv + gamma * hs2 - hs;
}

void RewardNets::backward_f(const FCache& cache, double df, std::span<double> g_grad,
                            std::span<double> h_grad, std::span<double> dz) const {
  double dout[1] = {df};
  std::vector<double> dgx(static_cast<std::size_t>(g.input_dim()), 0.0);
  g.backward(cache.g_cache, dout, g_grad, dgx);

  double dout2[1] = {gamma * df};
  std::vector<double> dhx2(static_cast<std::size_t>(h.input_dim()), 0.0);
  h.backward(cache.h_s2, dout2, h_grad, dhx2);

  double dout1[1] = {-df};
  std::vector<double> dhx1(static_cast<std::size_t>(h.input_dim()), 0.0);
  h.backward(cache.h_s, dout1, h_grad, dhx1);

  if (!dz.empty()) {
    int g_z0 = obs_dim + n_actions;
    int h_z0 = obs_dim;
    for (int d = 0; d < latent_dim; ++d)
      dz[static_cast<std::size_t>(d)] += dgx[static_cast<std::size_t>(g_z0 + d)] +
                                         dhx2[static_cast<std::size_t>(h_z0 + d)] +
                                         dhx1[static_cast<std::size_t>(h_z0 + d)];
  }
}

double discriminator_prob(std::span<const double> s, int a, std::span<const double> s2,
                          std::span<const double> z, const RewardNets& nets,
                          const PolicyNet& policy) {
  double fv = nets.f(s, a, s2, z);
  auto probs = policy.probs(concat2(s, z));
  if (a < 0 || a >= static_cast<int>(probs.size()))
    throw ContractError("discriminator_prob: action out of range");
  double pa = probs[static_cast<std::size_t>(a)];
  if (pa <= 0.0)
    throw ContractError("discriminator_prob: policy assigns zero probability to the action");
  return sigmoid(fv - std::log(pa));
}

const char* to_string(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::kUnsupervised: return "unsupervised";
    case SupervisionMode::kDriverId: return "driver_id";
    case SupervisionMode::kPreference: return "preference";
  }
  return "?";
}

SupervisionMode supervision_mode_from_string(const std::string& s) {
  if (s == "unsupervised") return SupervisionMode::kUnsupervised;
  if (s == "driver_id") return SupervisionMode::kDriverId;
  if (s == "preference") return SupervisionMode::kPreference;
  throw ContractError("unknown supervision mode: " + s);
}

double contrastive_pair_loss(std::span<const double> za, std::span<const double> zb, bool same,
                             double margin) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < za.size(); ++k) d2 += (za[k] - zb[k]) * (za[k] - zb[k]);
  if (same) return d2;
  double m = margin - std::sqrt(d2);
  return m > 0 ? m * m : 0.0;
}

double unit_gaussian_kl(std::span<const double> mu, std::span<const double> log_var) {
  double kl = 0.0;
  for (std::size_t d = 0; d < mu.size(); ++d)
    kl += 0.5 * (mu[d] * mu[d] + std::exp(log_var[d]) - log_var[d] - 1.0);
  return kl;
}

void TraitConfig::validate() const {
  if (latent_dim < 1 || lstm_hidden < 1) throw ContractError("TraitConfig: dimensions must be >= 1");
  if (pool_size < 1) throw ContractError("TraitConfig: pool_size must be >= 1");
  if (pools_per_update < 1) throw ContractError("TraitConfig: pools_per_update must be >= 1");
  if (disc_updates_per_round < 1 || gen_steps_per_round < 1)
    throw ContractError("TraitConfig: per-round update counts must be >= 1");
  if (budget < 1) throw ContractError("TraitConfig: budget must be >= 1");
  if (contrastive_margin <= 0) throw ContractError("TraitConfig: margin must be positive");
  if (window_seconds <= 0) throw ContractError("TraitConfig: window must be positive");
}

TraitConfig TraitConfig::from_kv(KeyValueFile& kv, const std::string& prefix) {
  TraitConfig c;
  c.latent_dim = static_cast<int>(kv.get_int(prefix + "latent_dim", c.latent_dim));
  c.lstm_hidden = static_cast<int>(kv.get_int(prefix + "lstm_hidden", c.lstm_hidden));
  c.disc_lr = kv.get_double(prefix + "disc_lr", c.disc_lr);
  c.gen_lr = kv.get_double(prefix + "gen_lr", c.gen_lr);
  c.disc_updates_per_round =
      static_cast<int>(kv.get_int(prefix + "disc_updates_per_round", c.disc_updates_per_round));
  c.gen_steps_per_round =
      static_cast<int>(kv.get_int(prefix + "gen_steps_per_round", c.gen_steps_per_round));
  c.pool_size = static_cast<int>(kv.get_int(prefix + "pool_size", c.pool_size));
  c.window_seconds = kv.get_double(prefix + "window_seconds", c.window_seconds);
  c.pools_per_update = static_cast<int>(kv.get_int(prefix + "pools_per_update", c.pools_per_update));
  c.gen_episodes_per_update =
      static_cast<int>(kv.get_int(prefix + "gen_episodes_per_update", c.gen_episodes_per_update));
  c.gen_buffer_episodes =
      static_cast<int>(kv.get_int(prefix + "gen_buffer_episodes", c.gen_buffer_episodes));
  c.contrastive_margin = kv.get_double(prefix + "contrastive_margin", c.contrastive_margin);
  c.gamma = kv.get_double(prefix + "gamma", c.gamma);
  c.budget = kv.get_int(prefix + "budget", c.budget);
  c.checkpoint_every_rounds =
      static_cast<int>(kv.get_int(prefix + "checkpoint_every_rounds", c.checkpoint_every_rounds));
  c.validate();
  return c;
}

// Generator environment: the base traffic world without cognitive gating
// (a neutral never-distracted profile), observations without inflation, and
// the learned AIRL reward. The trait z is drawn per episode from an encoded
// expert pool and appended to the observation.
class TraitGenEnv : public RolloutEnv {
 public:
  TraitGenEnv(TraitLearner* parent, const ScenarioConfig& scenario)
      : parent_(parent), env_(scenario, generator_profile()) {}

  int obs_dim() const override {
    return env_.spec().driver_obs_dim + parent_->config().latent_dim;
  }
  int n_actions() const override { return kNumHumanActions; }

  std::vector<double> reset(std::uint64_t seed) override {
    auto out = env_.reset(seed);
    z_ = parent_->sample_latent();
    episode_ = GenEpisode{};
    episode_.z = z_;
    episode_.obs.push_back(out.driver_obs);
    current_obs_ = std::move(out.driver_obs);
    return concat2(current_obs_, z_);
  }

  StepResult step(int action) override {
    auto out = env_.step(static_cast<HumanAction>(action), AIAction::kNoAlert);
    StepResult r;
    r.reward = parent_->gen_reward(current_obs_, action, out.driver_obs, z_);
    r.done = out.done;
    r.crashed = out.info.crashed;
    episode_.actions.push_back(action);
    episode_.obs.push_back(out.driver_obs);
    current_obs_ = std::move(out.driver_obs);
    if (!r.done) r.obs = concat2(current_obs_, z_);
    if (r.done) parent_->add_gen_episode(std::move(episode_));
    return r;
  }

 private:
  TraitLearner* parent_;
  HmiwayEnv env_;
  std::vector<double> z_;
  std::vector<double> current_obs_;
  GenEpisode episode_;
};

struct TraitLearner::PoolData {
  PooledBatch batch;
  std::vector<Sequence> seqs;
  ContextEncoder::PoolCache cache;
  std::optional<int> label;
  std::vector<double> dmu, dlogvar, dz;
};

TraitLearner::TraitLearner(const Dataset& dataset, ScenarioConfig scenario, TraitConfig config,
                           SupervisionMode mode, std::uint64_t seed)
    : dataset_(&dataset),
      scenario_(std::move(scenario)),
      cfg_(config),
      mode_(mode),
      seed_(seed),
      sampler_(dataset, config.pool_size, window_steps_for(dataset.env_spec, config.window_seconds)),
      pool_rng_(derive_seed(seed, "pool")),
      latent_rng_(derive_seed(seed, "latent")),
      gen_action_rng_(derive_seed(seed, "gen-actions")),
      gen_update_rng_(derive_seed(seed, "gen-updates")) {
  cfg_.validate();
  window_steps_ = sampler_.window_steps();
  if (sampler_.eligible_drivers(false).empty())
    throw ContractError("trait training: no driver has enough segments for pooling");

  cfg_.gen_ppo.learning_rate = cfg_.gen_lr;
  cfg_.gen_ppo.rollout_steps = cfg_.gen_steps_per_round;
  cfg_.gen_ppo.gamma = cfg_.gamma;
  cfg_.gen_ppo.validate();

  const EnvSpec& spec = dataset.env_spec;
  Rng init_rng(derive_seed(seed, "init"));
  encoder_ = ContextEncoder::make(encoder_input_dim(spec), cfg_.lstm_hidden, cfg_.latent_dim,
                                  init_rng);
  nets_ = RewardNets::make(spec.driver_obs_dim, spec.n_human_actions, cfg_.latent_dim, cfg_.gamma,
                           init_rng);
  policy_ = PolicyNet(spec.driver_obs_dim + cfg_.latent_dim, spec.n_human_actions, init_rng);
  value_ = ValueNet(spec.driver_obs_dim + cfg_.latent_dim, init_rng);

  opt_lstm_ = Adam(encoder_.lstm.param_count(), cfg_.disc_lr);
  opt_mu_ = Adam(encoder_.head_mu.param_count(), cfg_.disc_lr);
  opt_logvar_ = Adam(encoder_.head_logvar.param_count(), cfg_.disc_lr);
  opt_g_ = Adam(nets_.g.param_count(), cfg_.disc_lr);
  opt_h_ = Adam(nets_.h.param_count(), cfg_.disc_lr);
  opt_policy_ = Adam(policy_.net().param_count(), cfg_.gen_lr);
  opt_value_ = Adam(value_.net().param_count(), cfg_.gen_lr);

  collector_ = std::make_unique<RolloutCollector>(std::make_unique<TraitGenEnv>(this, scenario_),
                                                  derive_seed(seed, "gen-episodes"));
}

void TraitLearner::refresh_latent_bank() {
  auto eligible = sampler_.eligible_drivers(false);
  if (latent_bank_.empty()) {
    for (int id : eligible)
      latent_bank_.push_back(encode_pooled(sampler_.sample_pool(id, pool_rng_), latent_rng_));
    return;
  }
  int slot = round_ % static_cast<int>(latent_bank_.size());
  int id = eligible[static_cast<std::size_t>(slot) % eligible.size()];
  latent_bank_[static_cast<std::size_t>(slot)] =
      encode_pooled(sampler_.sample_pool(id, pool_rng_), latent_rng_);
}

std::vector<double> TraitLearner::sample_latent() {
  if (latent_bank_.empty()) refresh_latent_bank();
  const LatentTrait& t = latent_bank_[static_cast<std::size_t>(
      pool_rng_.uniform_int(static_cast<int>(latent_bank_.size())))];
  std::vector<double> z(t.mu.size());
  for (std::size_t d = 0; d < z.size(); ++d)
    z[d] = t.mu[d] + std::exp(0.5 * t.log_var[d]) * latent_rng_.normal();
  return z;
}

void TraitLearner::add_gen_episode(GenEpisode ep) {
  gen_buffer_.push_back(std::move(ep));
  while (static_cast<int>(gen_buffer_.size()) > cfg_.gen_buffer_episodes)
    gen_buffer_.erase(gen_buffer_.begin());
}

double TraitLearner::gen_reward(std::span<const double> s, int a, std::span<const double> s2,
                                std::span<const double> z) const {
  return nets_.f(s, a, s2, z);
}

int TraitLearner::pick_driver(bool labeled) {
  auto eligible = sampler_.eligible_drivers(labeled);
  if (eligible.empty()) return -1;
  int& cursor = labeled ? driver_cursor_labeled_ : driver_cursor_any_;
  int driver = eligible[static_cast<std::size_t>(cursor) % eligible.size()];
  cursor = (cursor + 1) % static_cast<int>(eligible.size());
  return driver;
}

std::optional<int> TraitLearner::label_of(const PooledBatch& batch) const {
  if (mode_ == SupervisionMode::kUnsupervised) return std::nullopt;
  if (mode_ == SupervisionMode::kDriverId) return batch.driver_id;
  const DriverProfile& p = dataset_->profile_for(batch.driver_id);
  return p.pref_label == Preference::kHigh ? 1 : 0;
}

LatentTrait TraitLearner::encode_pooled(const PooledBatch& batch, Rng& reparam_rng) const {
  auto seqs = sequences_from_batch(*dataset_, batch);
  return encoder_.encode_pool(seqs, &reparam_rng);
}

std::vector<LatentTrait> TraitLearner::embed_driver(int driver_id, int n_pools, Rng& rng) const {
  std::vector<LatentTrait> out;
  out.reserve(static_cast<std::size_t>(n_pools));
  for (int k = 0; k < n_pools; ++k)
    out.push_back(encode_pooled(sampler_.sample_pool(driver_id, rng), rng));
  return out;
}

LossReport TraitLearner::generator_update() {
  refresh_latent_bank();
  // Fixed-size rounds of whole episodes: round contents never depend on the
  // remaining budget, so a resumed run replays the same prefix.
  RolloutBuffer buf =
      collector_->collect_aligned(policy_, value_, cfg_.gen_steps_per_round, gen_action_rng_);
  compute_advantages(buf, cfg_.gen_ppo.gamma, cfg_.gen_ppo.gae_lambda);
  ppo_update(buf, policy_, value_, opt_policy_, opt_value_, cfg_.gen_ppo, gen_update_rng_);
  env_steps_ += static_cast<std::int64_t>(buf.size());
  return {};
}

LossReport TraitLearner::discriminator_update() {
  LossReport last;
  for (int u = 0; u < cfg_.disc_updates_per_round; ++u) {
    last = disc_step(true);
    loss_history_.push_back(last);
  }
  return last;
}

LossReport TraitLearner::disc_step(bool with_grads) {
  std::vector<PoolData> pools;
  for (int k = 0; k < cfg_.pools_per_update; ++k) {
    bool want_labeled = mode_ != SupervisionMode::kUnsupervised && k % 2 == 0;
    int driver = want_labeled ? pick_driver(true) : -1;
    bool labeled = driver >= 0;
    if (driver < 0) driver = pick_driver(false);
    if (driver < 0) throw ContractError("disc_step: no pooling-eligible drivers");

    PoolData p;
    p.batch = sampler_.sample_pool(driver, pool_rng_, labeled);
    p.seqs = sequences_from_batch(*dataset_, p.batch);
    encoder_.encode_pool_cached(p.seqs, &latent_rng_, p.cache);
    if (labeled) p.label = label_of(p.batch);
    p.dmu.assign(static_cast<std::size_t>(cfg_.latent_dim), 0.0);
    p.dlogvar.assign(static_cast<std::size_t>(cfg_.latent_dim), 0.0);
    p.dz.assign(static_cast<std::size_t>(cfg_.latent_dim), 0.0);
    pools.push_back(std::move(p));
  }

  if (gen_buffer_.empty())
    throw ContractError("disc_step: no generated rollouts available (run the generator first)");
  int take = std::min<int>(cfg_.gen_episodes_per_update, static_cast<int>(gen_buffer_.size()));
  std::span<const GenEpisode> gen(gen_buffer_.data() + gen_buffer_.size() - take,
                                  static_cast<std::size_t>(take));

  if (!with_grads) return losses_on(pools, gen, false, nullptr, nullptr, nullptr);

  ContextEncoder::Grads enc_grads = encoder_.zero_grads();
  std::vector<double> g_grad(nets_.g.param_count(), 0.0);
  std::vector<double> h_grad(nets_.h.param_count(), 0.0);
  LossReport report = losses_on(pools, gen, true, &enc_grads, &g_grad, &h_grad);

  double total = report.total(cfg_.weights);
  if (!std::isfinite(total))
    throw ContractError("disc_step: non-finite discriminator loss (L1=" + repr(report.l1) +
                        " L2=" + repr(report.l2) + " L3=" + repr(report.l3) +
                        " L4=" + repr(report.l4) + ")");

  opt_lstm_.step(encoder_.lstm.params(), enc_grads.lstm);
  opt_mu_.step(encoder_.head_mu.params(), enc_grads.mu);
  opt_logvar_.step(encoder_.head_logvar.params(), enc_grads.logvar);
  opt_g_.step(nets_.g.params(), g_grad);
  opt_h_.step(nets_.h.params(), h_grad);
  return report;
}

LossReport TraitLearner::losses_on(std::vector<PoolData>& pools,
                                   std::span<const GenEpisode> generated, bool with_grads,
                                   ContextEncoder::Grads* enc_grads, std::vector<double>* g_grad,
                                   std::vector<double>* h_grad) const {
  const LossWeights& w = cfg_.weights;
  const int zdim = cfg_.latent_dim;
  const int n_actions = dataset_->env_spec.n_human_actions;
  LossReport report;

  std::size_t n_exp = 0;
  for (const auto& p : pools)
    for (const auto& seg : p.batch.segments) n_exp += static_cast<std::size_t>(seg.length);
  std::size_t n_gen = 0;
  for (const auto& ep : generated) n_gen += ep.actions.size();

  std::vector<double> policy_scratch(policy_.net().param_count(), 0.0);
  std::vector<double> dz_discard(static_cast<std::size_t>(zdim), 0.0);

  // L1, expert side; gradients flow into g, h and (through z) the encoder.
  double l1_exp = 0.0;
  for (auto& p : pools) {
    std::span<const double> z(p.cache.trait.z);
    for (const auto& seg : p.batch.segments) {
      const Trajectory& traj = dataset_->trajectories[static_cast<std::size_t>(seg.trajectory)];
      for (int t = seg.start; t < seg.start + seg.length; ++t) {
        const Transition& tr = traj.steps[static_cast<std::size_t>(t)];
        RewardNets::FCache fc;
        double fv = nets_.f_cached(tr.obs, tr.applied_action, tr.next_obs, z, fc);
        Mlp::Cache pc;
        auto logits = policy_.logits(concat2(tr.obs, z), &pc);
        auto probs = PolicyNet::probs_from_logits(logits);
        double pa = probs[static_cast<std::size_t>(tr.applied_action)];
        if (pa <= 0.0) throw ContractError("losses_on: policy assigns zero probability");
        double ell = fv - std::log(pa);
        l1_exp += softplus(-ell);
        if (with_grads) {
          double dell = (sigmoid(ell) - 1.0) * w.l1 / static_cast<double>(n_exp);
          nets_.backward_f(fc, dell, *g_grad, *h_grad, p.dz);
          std::vector<double> dlogits(probs.size());
          for (std::size_t j = 0; j < probs.size(); ++j) {
            double onehot = j == static_cast<std::size_t>(tr.applied_action) ? 1.0 : 0.0;
            dlogits[j] = -dell * (onehot - probs[j]);
          }
          std::vector<double> dx(static_cast<std::size_t>(policy_.net().input_dim()), 0.0);
          policy_.net().backward(pc, dlogits, policy_scratch, dx);
          for (int d = 0; d < zdim; ++d)
            p.dz[static_cast<std::size_t>(d)] +=
                dx[static_cast<std::size_t>(dataset_->env_spec.driver_obs_dim + d)];
        }
      }
    }
  }

  // L1, generated side; z and the policy are constants here.
  double l1_gen = 0.0;
  for (const auto& ep : generated) {
    std::span<const double> z(ep.z);
    for (std::size_t t = 0; t < ep.actions.size(); ++t) {
      RewardNets::FCache fc;
      double fv = nets_.f_cached(ep.obs[t], ep.actions[t], ep.obs[t + 1], z, fc);
      auto probs = policy_.probs(concat2(ep.obs[t], z));
      double pa = probs[static_cast<std::size_t>(ep.actions[t])];
      if (pa <= 0.0) throw ContractError("losses_on: policy assigns zero probability");
      double ell = fv - std::log(pa);
      l1_gen += softplus(ell);
      if (with_grads) {
        double dell = sigmoid(ell) * w.l1 / static_cast<double>(n_gen);
        std::fill(dz_discard.begin(), dz_discard.end(), 0.0);
        nets_.backward_f(fc, dell, *g_grad, *h_grad, dz_discard);
      }
    }
  }
  report.l1 = (n_exp ? l1_exp / static_cast<double>(n_exp) : 0.0) +
              (n_gen ? l1_gen / static_cast<double>(n_gen) : 0.0);

  // L2: negative log-likelihood of the conditioning z under the encoder's
  // posterior for the generated trajectory (InfoGAN-style bound).
  if (!generated.empty()) {
    double l2 = 0.0;
    double inv = 1.0 / static_cast<double>(generated.size());
    for (const auto& ep : generated) {
      Sequence seq;
      seq.reserve(ep.actions.size());
      for (std::size_t t = 0; t < ep.actions.size(); ++t) {
        std::vector<double> x = ep.obs[t];
        append_one_hot(x, ep.actions[t], n_actions);
        seq.push_back(std::move(x));
      }
      ContextEncoder::PoolCache cache;
      LatentTrait trait = encoder_.encode_pool_cached(std::span<const Sequence>(&seq, 1), nullptr,
                                                      cache);
      l2 += -ContextEncoder::log_density(trait, ep.z) * inv;
      if (with_grads) {
        std::vector<double> dmu(static_cast<std::size_t>(zdim));
        std::vector<double> dlv(static_cast<std::size_t>(zdim));
        for (int d = 0; d < zdim; ++d) {
          double var = std::exp(trait.log_var[static_cast<std::size_t>(d)]);
          double diff = trait.mu[static_cast<std::size_t>(d)] - ep.z[static_cast<std::size_t>(d)];
          dmu[static_cast<std::size_t>(d)] = diff / var * w.l2 * inv;
          dlv[static_cast<std::size_t>(d)] = 0.5 * (1.0 - diff * diff / var) * w.l2 * inv;
        }
        encoder_.backward_pool(cache, dmu, dlv, *enc_grads);
      }
    }
    report.l2 = l2;
  }

  // L3: contrastive loss over labeled pool latents.
  std::vector<PoolData*> labeled;
  for (auto& p : pools)
    if (p.label) labeled.push_back(&p);
  if (mode_ != SupervisionMode::kUnsupervised && labeled.size() < 2) report.l3_skipped = true;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    for (std::size_t j = i + 1; j < labeled.size(); ++j) {
      PoolData& a = *labeled[i];
      PoolData& b = *labeled[j];
      bool same = *a.label == *b.label;
      report.l3 += contrastive_pair_loss(a.cache.trait.z, b.cache.trait.z, same,
                                         cfg_.contrastive_margin);
      ++report.labeled_pairs;
      if (!with_grads) continue;
      double d2 = 0.0;
      for (int d = 0; d < zdim; ++d) {
        double diff = a.cache.trait.z[static_cast<std::size_t>(d)] -
                      b.cache.trait.z[static_cast<std::size_t>(d)];
        d2 += diff * diff;
      }
      double dist = std::sqrt(d2);
      if (same) {
        for (int d = 0; d < zdim; ++d) {
          double diff = a.cache.trait.z[static_cast<std::size_t>(d)] -
                        b.cache.trait.z[static_cast<std::size_t>(d)];
          a.dz[static_cast<std::size_t>(d)] += w.l3 * 2.0 * diff;
          b.dz[static_cast<std::size_t>(d)] -= w.l3 * 2.0 * diff;
        }
      } else if (dist < cfg_.contrastive_margin && dist > 1e-12) {
        double coef = w.l3 * (-2.0) * (cfg_.contrastive_margin - dist) / dist;
        for (int d = 0; d < zdim; ++d) {
          double diff = a.cache.trait.z[static_cast<std::size_t>(d)] -
                        b.cache.trait.z[static_cast<std::size_t>(d)];
          a.dz[static_cast<std::size_t>(d)] += coef * diff;
          b.dz[static_cast<std::size_t>(d)] -= coef * diff;
        }
      }
    }
  }

  // L4: KL(q(z|tau) || N(0, I)), averaged over the expert pools.
  if (!pools.empty()) {
    double inv = 1.0 / static_cast<double>(pools.size());
    for (auto& p : pools) {
      report.l4 += unit_gaussian_kl(p.cache.trait.mu, p.cache.trait.log_var) * inv;
      if (with_grads) {
        for (int d = 0; d < zdim; ++d) {
          p.dmu[static_cast<std::size_t>(d)] +=
              w.l4 * p.cache.trait.mu[static_cast<std::size_t>(d)] * inv;
          p.dlogvar[static_cast<std::size_t>(d)] +=
              w.l4 * 0.5 * (std::exp(p.cache.trait.log_var[static_cast<std::size_t>(d)]) - 1.0) * inv;
        }
      }
    }
  }

  if (with_grads) {
    // Reparameterization: z = mu + exp(log_var / 2) * eps.
    for (auto& p : pools) {
      for (int d = 0; d < zdim; ++d) {
        double sigma = std::exp(0.5 * p.cache.trait.log_var[static_cast<std::size_t>(d)]);
        p.dmu[static_cast<std::size_t>(d)] += p.dz[static_cast<std::size_t>(d)];
        p.dlogvar[static_cast<std::size_t>(d)] +=
            p.dz[static_cast<std::size_t>(d)] * 0.5 * sigma * p.cache.eps[static_cast<std::size_t>(d)];
      }
      encoder_.backward_pool(p.cache, p.dmu, p.dlogvar, *enc_grads);
    }
  }
  return report;
}

LossReport TraitLearner::compute_losses(std::span<const PooledBatch> expert_pools,
                                        std::span<const GenEpisode> generated, Rng& rng) const {
  if (expert_pools.empty() || generated.empty())
    throw ContractError("compute_losses: both sample sources must be nonempty");
  std::vector<PoolData> pools;
  for (const auto& batch : expert_pools) {
    PoolData p;
    p.batch = batch;
    p.seqs = sequences_from_batch(*dataset_, p.batch);
    encoder_.encode_pool_cached(p.seqs, &rng, p.cache);
    if (batch.labeled) p.label = label_of(batch);
    p.dmu.assign(static_cast<std::size_t>(cfg_.latent_dim), 0.0);
    p.dlogvar.assign(static_cast<std::size_t>(cfg_.latent_dim), 0.0);
    p.dz.assign(static_cast<std::size_t>(cfg_.latent_dim), 0.0);
    pools.push_back(std::move(p));
  }
  return losses_on(pools, generated, false, nullptr, nullptr, nullptr);
}

TraitTrainResult TraitLearner::train(const std::string& out_dir) {
  auto snapshot = [&]() {
    save_checkpoint(out_dir + "/trainer-latest.ckpt");
    std::uint64_t h = fnv1a64_file(out_dir + "/trainer-latest.ckpt");
    std::string name =
        out_dir + "/trainer-round" + std::to_string(round_) + "-" + hex16(h) + ".ckpt";
    write_file_atomic(name, read_file(out_dir + "/trainer-latest.ckpt"));
  };
  while (env_steps_ < cfg_.budget) {
    generator_update();
    discriminator_update();
    ++round_;
    if (!out_dir.empty()) {
      if (round_ % cfg_.checkpoint_every_rounds == 0)
        snapshot();
      else
        save_checkpoint(out_dir + "/trainer-latest.ckpt");
    }
  }
  if (!out_dir.empty()) snapshot();
  TraitTrainResult result;
  result.rounds = round_;
  result.env_steps = env_steps_;
  result.losses = loss_history_;
  return result;
}

void TraitLearner::save_checkpoint(const std::string& path) const {
  Checkpoint ck;
  json meta;
  meta["type"] = "trait-trainer";
  meta["mode"] = to_string(mode_);
  meta["seed"] = seed_;
  meta["round"] = round_;
  meta["env_steps"] = env_steps_;
  meta["fingerprint"] = dataset_->fingerprint();
  meta["cursor_any"] = driver_cursor_any_;
  meta["cursor_labeled"] = driver_cursor_labeled_;
  meta["rng"] = {{"pool", pool_rng_.state()},
                 {"latent", latent_rng_.state()},
                 {"gen_action", gen_action_rng_.state()},
                 {"gen_update", gen_update_rng_.state()}};
  meta["collector"] = collector_->state();
  meta["adam_t"] = {{"lstm", opt_lstm_.step_count()},   {"mu", opt_mu_.step_count()},
                    {"logvar", opt_logvar_.step_count()}, {"g", opt_g_.step_count()},
                    {"h", opt_h_.step_count()},         {"policy", opt_policy_.step_count()},
                    {"value", opt_value_.step_count()}};
  meta["config"] = {{"latent_dim", cfg_.latent_dim},
                    {"lstm_hidden", cfg_.lstm_hidden},
                    {"disc_lr", cfg_.disc_lr},
                    {"gen_lr", cfg_.gen_lr},
                    {"disc_updates_per_round", cfg_.disc_updates_per_round},
                    {"gen_steps_per_round", cfg_.gen_steps_per_round},
                    {"pool_size", cfg_.pool_size},
                    {"window_seconds", cfg_.window_seconds},
                    {"pools_per_update", cfg_.pools_per_update},
                    {"gen_episodes_per_update", cfg_.gen_episodes_per_update},
                    {"gen_buffer_episodes", cfg_.gen_buffer_episodes},
                    {"contrastive_margin", cfg_.contrastive_margin},
                    {"gamma", cfg_.gamma},
                    {"budget", cfg_.budget},
                    {"checkpoint_every_rounds", cfg_.checkpoint_every_rounds}};

  meta["bank_entries"] = latent_bank_.size();

  json eps = json::array();
  for (const auto& ep : gen_buffer_) {
    json e;
    e["actions"] = ep.actions;
    e["obs_dim"] = ep.obs.empty() ? 0 : ep.obs.front().size();
    eps.push_back(e);
  }
  meta["gen_buffer"] = eps;
  ck.meta_json = meta.dump();

  ck.add("lstm.params", encoder_.lstm.params());
  ck.add("lstm.m", opt_lstm_.m());
  ck.add("lstm.v", opt_lstm_.v());
  ck.add("head_mu.params", encoder_.head_mu.params());
  ck.add("head_mu.m", opt_mu_.m());
  ck.add("head_mu.v", opt_mu_.v());
  ck.add("head_logvar.params", encoder_.head_logvar.params());
  ck.add("head_logvar.m", opt_logvar_.m());
  ck.add("head_logvar.v", opt_logvar_.v());
  ck.add("g.params", nets_.g.params());
  ck.add("g.m", opt_g_.m());
  ck.add("g.v", opt_g_.v());
  ck.add("h.params", nets_.h.params());
  ck.add("h.m", opt_h_.m());
  ck.add("h.v", opt_h_.v());
  ck.add("policy.params", policy_.net().params());
  ck.add("policy.m", opt_policy_.m());
  ck.add("policy.v", opt_policy_.v());
  ck.add("value.params", value_.net().params());
  ck.add("value.m", opt_value_.m());
  ck.add("value.v", opt_value_.v());

  std::vector<double> bank_mu, bank_lv;
  for (const auto& t : latent_bank_) {
    bank_mu.insert(bank_mu.end(), t.mu.begin(), t.mu.end());
    bank_lv.insert(bank_lv.end(), t.log_var.begin(), t.log_var.end());
  }
  ck.add("bank.mu", bank_mu);
  ck.add("bank.logvar", bank_lv);

  for (std::size_t k = 0; k < gen_buffer_.size(); ++k) {
    std::vector<double> flat;
    for (const auto& o : gen_buffer_[k].obs) flat.insert(flat.end(), o.begin(), o.end());
    ck.add("genbuf" + std::to_string(k) + ".obs", flat);
    ck.add("genbuf" + std::to_string(k) + ".z", gen_buffer_[k].z);
  }
  ck.save(path);
}

std::unique_ptr<TraitLearner> TraitLearner::resume(const Dataset& dataset,
                                                   ScenarioConfig scenario,
                                                   const std::string& checkpoint_path,
                                                   std::optional<std::int64_t> budget_override) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  json meta = json::parse(ck.meta_json);
  if (meta.value("type", "") != "trait-trainer")
    throw IoError(checkpoint_path + ": not a trait-trainer checkpoint");
  if (meta.at("fingerprint").get<std::uint64_t>() != dataset.fingerprint())
    throw ContractError("resume: dataset does not match the checkpoint fingerprint");

  const json& c = meta.at("config");
  TraitConfig cfg;
  cfg.latent_dim = c.at("latent_dim").get<int>();
  cfg.lstm_hidden = c.at("lstm_hidden").get<int>();
  cfg.disc_lr = c.at("disc_lr").get<double>();
  cfg.gen_lr = c.at("gen_lr").get<double>();
  cfg.disc_updates_per_round = c.at("disc_updates_per_round").get<int>();
  cfg.gen_steps_per_round = c.at("gen_steps_per_round").get<int>();
  cfg.pool_size = c.at("pool_size").get<int>();
  cfg.window_seconds = c.at("window_seconds").get<double>();
  cfg.pools_per_update = c.at("pools_per_update").get<int>();
  cfg.gen_episodes_per_update = c.at("gen_episodes_per_update").get<int>();
  cfg.gen_buffer_episodes = c.at("gen_buffer_episodes").get<int>();
  cfg.contrastive_margin = c.at("contrastive_margin").get<double>();
  cfg.gamma = c.at("gamma").get<double>();
  cfg.budget = c.at("budget").get<std::int64_t>();
  cfg.checkpoint_every_rounds = c.at("checkpoint_every_rounds").get<int>();
  if (budget_override) cfg.budget = *budget_override;

  auto learner = std::make_unique<TraitLearner>(
      dataset, std::move(scenario), cfg,
      supervision_mode_from_string(meta.at("mode").get<std::string>()),
      meta.at("seed").get<std::uint64_t>());

  learner->round_ = meta.at("round").get<int>();
  learner->env_steps_ = meta.at("env_steps").get<std::int64_t>();
  learner->driver_cursor_any_ = meta.at("cursor_any").get<int>();
  learner->driver_cursor_labeled_ = meta.at("cursor_labeled").get<int>();
  learner->pool_rng_.set_state(meta.at("rng").at("pool").get<std::string>());
  learner->latent_rng_.set_state(meta.at("rng").at("latent").get<std::string>());
  learner->gen_action_rng_.set_state(meta.at("rng").at("gen_action").get<std::string>());
  learner->gen_update_rng_.set_state(meta.at("rng").at("gen_update").get<std::string>());
  learner->collector_->set_state(meta.at("collector").get<std::string>());

  learner->encoder_.lstm.params() = ck.section("lstm.params");
  learner->encoder_.head_mu.params() = ck.section("head_mu.params");
  learner->encoder_.head_logvar.params() = ck.section("head_logvar.params");
  learner->nets_.g.params() = ck.section("g.params");
  learner->nets_.h.params() = ck.section("h.params");
  learner->policy_.net().params() = ck.section("policy.params");
  learner->value_.net().params() = ck.section("value.params");

  const json& at = meta.at("adam_t");
  learner->opt_lstm_.restore(ck.section("lstm.m"), ck.section("lstm.v"), at.at("lstm").get<std::int64_t>());
  learner->opt_mu_.restore(ck.section("head_mu.m"), ck.section("head_mu.v"), at.at("mu").get<std::int64_t>());
  learner->opt_logvar_.restore(ck.section("head_logvar.m"), ck.section("head_logvar.v"),
                               at.at("logvar").get<std::int64_t>());
  learner->opt_g_.restore(ck.section("g.m"), ck.section("g.v"), at.at("g").get<std::int64_t>());
  learner->opt_h_.restore(ck.section("h.m"), ck.section("h.v"), at.at("h").get<std::int64_t>());
  learner->opt_policy_.restore(ck.section("policy.m"), ck.section("policy.v"),
                               at.at("policy").get<std::int64_t>());
  learner->opt_value_.restore(ck.section("value.m"), ck.section("value.v"),
                              at.at("value").get<std::int64_t>());

  std::size_t banks = meta.at("bank_entries").get<std::size_t>();
  const auto& bank_mu = ck.section("bank.mu");
  const auto& bank_lv = ck.section("bank.logvar");
  learner->latent_bank_.clear();
  for (std::size_t k = 0; k < banks; ++k) {
    LatentTrait t;
    auto begin = static_cast<long>(k) * cfg.latent_dim;
    t.mu.assign(bank_mu.begin() + begin, bank_mu.begin() + begin + cfg.latent_dim);
    t.log_var.assign(bank_lv.begin() + begin, bank_lv.begin() + begin + cfg.latent_dim);
    learner->latent_bank_.push_back(std::move(t));
  }

  learner->gen_buffer_.clear();
  const json& eps = meta.at("gen_buffer");
  for (std::size_t k = 0; k < eps.size(); ++k) {
    GenEpisode ep;
    ep.actions = eps[k].at("actions").get<std::vector<int>>();
    ep.z = ck.section("genbuf" + std::to_string(k) + ".z");
    std::size_t obs_dim = eps[k].at("obs_dim").get<std::size_t>();
    const auto& flat = ck.section("genbuf" + std::to_string(k) + ".obs");
    for (std::size_t o = 0; o + obs_dim <= flat.size(); o += obs_dim)
      ep.obs.emplace_back(flat.begin() + static_cast<long>(o),
                          flat.begin() + static_cast<long>(o + obs_dim));
    learner->gen_buffer_.push_back(std::move(ep));
  }
  return learner;
}

ClusterKlResult pairwise_cluster_kl(
    const std::map<int, std::vector<std::vector<double>>>& by_driver) {
  ClusterKlResult result;
  std::vector<std::vector<double>> means, vars;
  for (const auto& [driver, points] : by_driver) {
    if (points.size() < 2)
      throw ContractError("pairwise_cluster_kl: need >= 2 embeddings per driver");
    std::size_t dim = points.front().size();
    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    for (const auto& p : points)
      for (std::size_t d = 0; d < dim; ++d) mean[d] += p[d];
    for (double& m : mean) m /= static_cast<double>(points.size());
    for (const auto& p : points)
      for (std::size_t d = 0; d < dim; ++d) var[d] += (p[d] - mean[d]) * (p[d] - mean[d]);
    for (double& v : var) {
      v /= static_cast<double>(points.size());
      if (v < 1e-8) {
        v = 1e-8;
        result.variance_floored = true;
      }
    }
    result.drivers.push_back(driver);
    means.push_back(std::move(mean));
    vars.push_back(std::move(var));
  }

  auto kl = [](const std::vector<double>& m0, const std::vector<double>& v0,
               const std::vector<double>& m1, const std::vector<double>& v1) {
    double out = 0.0;
    for (std::size_t d = 0; d < m0.size(); ++d) {
      out += 0.5 * (v0[d] / v1[d] + (m1[d] - m0[d]) * (m1[d] - m0[d]) / v1[d] - 1.0 +
                    std::log(v1[d] / v0[d]));
    }
    return out;
  };

  std::size_t n = means.size();
  result.kl.assign(n, std::vector<double>(n, 0.0));
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sym = kl(means[i], vars[i], means[j], vars[j]) +
                   kl(means[j], vars[j], means[i], vars[i]);
      result.kl[i][j] = sym;
      result.kl[j][i] = sym;
      sum += sym;
      ++pairs;
    }
  }
  result.average = pairs > 0 ? sum / pairs : 0.0;
  return result;
}

}  // namespace hmiway
