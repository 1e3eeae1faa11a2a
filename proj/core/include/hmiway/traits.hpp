#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmiway/dataset.hpp"
#include "hmiway/nn.hpp"
#include "hmiway/ppo.hpp"

namespace hmiway {

using Sequence = std::vector<std::vector<double>>;

// Encoder input per step: driver observation plus a one-hot of the applied
// vehicle action.
int encoder_input_dim(const EnvSpec& spec);
Sequence sequence_from_segment(const Dataset& dataset, const SegmentRef& segment);
// Validates pool homogeneity (single driver id).
std::vector<Sequence> sequences_from_batch(const Dataset& dataset, const PooledBatch& batch);

struct LatentTrait {
  std::vector<double> mu;
  std::vector<double> log_var;
  std::vector<double> z;  // empty when no sample was requested

  int dim() const { return static_cast<int>(mu.size()); }
};

// LSTM trajectory encoder with average pooling over same-driver trajectories
// and two linear heads for the latent mean and log-variance. The raw
// log-variance head output is soft-bounded to keep the likelihood terms
// finite.
class ContextEncoder {
 public:
  ContextEncoder() = default;
  static ContextEncoder make(int input_dim, int hidden_dim, int latent_dim, Rng& init_rng);

  int input_dim() const { return lstm.input_dim(); }
  int hidden_dim() const { return lstm.hidden_dim(); }
  int latent_dim() const { return latent_dim_; }
  double logvar_bound() const { return logvar_bound_; }

  LstmEncoder lstm;
  Mlp head_mu;
  Mlp head_logvar;

  // Pooled encoding: per-member final hidden states are averaged before the
  // heads. z is sampled via the reparameterization when a rng is given.
  LatentTrait encode_pool(std::span<const Sequence> sequences, Rng* reparam_rng) const;

  struct PoolCache {
    std::vector<LstmEncoder::Cache> members;
    std::vector<double> pooled_h;
    Mlp::Cache mu_cache, logvar_cache;
    std::vector<double> raw_logvar;
    std::vector<double> eps;  // reparameterization noise (empty without a sample)
    LatentTrait trait;
  };
  LatentTrait encode_pool_cached(std::span<const Sequence> sequences, Rng* reparam_rng,
                                 PoolCache& cache) const;

  struct Grads {
    std::vector<double> lstm, mu, logvar;
  };
  Grads zero_grads() const;

  // Accumulates d(mu)/d(log_var) gradients through the heads, the pooling
  // layer and time.
  void backward_pool(const PoolCache& cache, std::span<const double> dmu,
                     std::span<const double> dlogvar, Grads& grads) const;

  // Gaussian log-density of z under the cached trait.
  static double log_density(const LatentTrait& trait, std::span<const double> z);

  void save(const std::string& path) const;
  static ContextEncoder load(const std::string& path);

 private:
  int latent_dim_ = 2;
  double logvar_bound_ = 8.0;
};

// AIRL reward: f(s,a,s',z) = g(s,a,z) + gamma*h(s',z) - h(s,z).
struct RewardNets {
  Mlp g;  // two 32-unit layers
  Mlp h;  // one 32-unit layer
  double gamma = 0.99;
  int obs_dim = 0;
  int n_actions = 0;
  int latent_dim = 0;

  static RewardNets make(int obs_dim, int n_actions, int latent_dim, double gamma, Rng& init_rng);

  std::vector<double> g_input(std::span<const double> s, int a, std::span<const double> z) const;
  std::vector<double> h_input(std::span<const double> s, std::span<const double> z) const;

  double f(std::span<const double> s, int a, std::span<const double> s2,
           std::span<const double> z) const;

  struct FCache {
    Mlp::Cache g_cache, h_s, h_s2;
  };
  double f_cached(std::span<const double> s, int a, std::span<const double> s2,
                  std::span<const double> z, FCache& cache) const;
  // grads += df * d f/d params; dz += df * d f/d z.
  void backward_f(const FCache& cache, double df, std::span<double> g_grad,
                  std::span<double> h_grad, std::span<double> dz) const;
};

// D = exp(f) / (exp(f) + pi(a|s,z)), evaluated in log space. The policy
// must assign nonzero probability to the action.
double discriminator_prob(std::span<const double> s, int a, std::span<const double> s2,
                          std::span<const double> z, const RewardNets& nets,
                          const PolicyNet& policy);

enum class SupervisionMode { kUnsupervised, kDriverId, kPreference };
const char* to_string(SupervisionMode m);
SupervisionMode supervision_mode_from_string(const std::string& s);

struct LossWeights {
  double l1 = 1.0;
  double l2 = 5.0;
  double l3 = 10.0;
  double l4 = 1e-4;
};

struct LossReport {
  double l1 = 0.0;  // adversarial cross-entropy (trajectory matching)
  double l2 = 0.0;  // negative mutual-information bound
  double l3 = 0.0;  // contrastive loss over labeled latent pairs
  double l4 = 0.0;  // KL(q(z|tau) || N(0, I))
  int labeled_pairs = 0;
  bool l3_skipped = false;  // fewer than two labeled pools in the batch

  double total(const LossWeights& w) const {
    return l1 * w.l1 + l2 * w.l2 + l3 * w.l3 + l4 * w.l4;
  }
};

// Standalone loss pieces (shared with the tests).
double contrastive_pair_loss(std::span<const double> za, std::span<const double> zb, bool same,
                             double margin);
double unit_gaussian_kl(std::span<const double> mu, std::span<const double> log_var);

struct TraitConfig {
  int latent_dim = 2;
  int lstm_hidden = 128;
  double disc_lr = 5e-4;
  double gen_lr = 1e-2;
  int disc_updates_per_round = 2;
  int gen_steps_per_round = 500;
  int pool_size = 8;
  double window_seconds = 20.0;
  int pools_per_update = 4;
  int gen_episodes_per_update = 2;
  int gen_buffer_episodes = 8;
  double contrastive_margin = 1.0;
  double gamma = 0.99;
  LossWeights weights;
  std::int64_t budget = 1000000;
  int checkpoint_every_rounds = 50;
  PpoConfig gen_ppo;

  void validate() const;
  static TraitConfig from_kv(KeyValueFile& kv, const std::string& prefix = "traits.");
};

struct GenEpisode {
  std::vector<double> z;
  std::vector<std::vector<double>> obs;  // length T+1
  std::vector<int> actions;              // length T
};

struct TraitTrainResult {
  int rounds = 0;
  std::int64_t env_steps = 0;
  std::vector<LossReport> losses;  // one per discriminator step
};

// Latent meta-adversarial IRL: alternating generator (PPO on the AIRL
// reward, trait-conditioned) and discriminator (encoder + reward nets)
// rounds over pooled demonstrations.
class TraitLearner {
 public:
  TraitLearner(const Dataset& dataset, ScenarioConfig scenario, TraitConfig config,
               SupervisionMode mode, std::uint64_t seed);
  TraitLearner(const TraitLearner&) = delete;
  TraitLearner& operator=(const TraitLearner&) = delete;

  // Alternates rounds until the generator budget is exhausted. When out_dir
  // is non-empty, writes a rolling latest checkpoint every round plus
  // content-hashed snapshots every checkpoint_every_rounds.
  TraitTrainResult train(const std::string& out_dir = "");

  LossReport generator_update();      // one PPO round; returns losses of zeros
  LossReport discriminator_update();  // configured number of gradient steps

  LatentTrait encode_pooled(const PooledBatch& batch, Rng& reparam_rng) const;
  std::vector<LatentTrait> embed_driver(int driver_id, int n_pools, Rng& rng) const;

  // Forward-only loss evaluation on explicit batches; rng drives the
  // reparameterized latent samples.
  LossReport compute_losses(std::span<const PooledBatch> expert_pools,
                            std::span<const GenEpisode> generated, Rng& rng) const;

  const ContextEncoder& encoder() const { return encoder_; }
  const RewardNets& reward_nets() const { return nets_; }
  const PolicyNet& policy() const { return policy_; }
  const ValueNet& value() const { return value_; }
  SupervisionMode mode() const { return mode_; }
  std::int64_t env_steps() const { return env_steps_; }
  int rounds_completed() const { return round_; }
  const TraitConfig& config() const { return cfg_; }
  const PoolSampler& sampler() const { return sampler_; }
  int window_steps() const { return window_steps_; }
  const std::vector<GenEpisode>& gen_buffer() const { return gen_buffer_; }

  void save_checkpoint(const std::string& path) const;
  // Restores the full training state; budget_override extends (or shortens)
  // the run without touching anything else.
  static std::unique_ptr<TraitLearner> resume(const Dataset& dataset, ScenarioConfig scenario,
                                              const std::string& checkpoint_path,
                                              std::optional<std::int64_t> budget_override = {});

 private:
  friend class TraitGenEnv;

  struct PoolData;
  LossReport disc_step(bool with_grads);
  LossReport losses_on(std::vector<PoolData>& pools, std::span<const GenEpisode> generated,
                       bool with_grads, ContextEncoder::Grads* enc_grads,
                       std::vector<double>* g_grad, std::vector<double>* h_grad) const;
  std::vector<double> sample_latent();
  void refresh_latent_bank();
  void add_gen_episode(GenEpisode ep);
  double gen_reward(std::span<const double> s, int a, std::span<const double> s2,
                    std::span<const double> z) const;
  int pick_driver(bool labeled);
  std::optional<int> label_of(const PooledBatch& batch) const;

  const Dataset* dataset_;
  ScenarioConfig scenario_;
  TraitConfig cfg_;
  SupervisionMode mode_;
  std::uint64_t seed_;
  PoolSampler sampler_;
  int window_steps_ = 0;

  ContextEncoder encoder_;
  RewardNets nets_;
  PolicyNet policy_;
  ValueNet value_;
  Adam opt_lstm_, opt_mu_, opt_logvar_, opt_g_, opt_h_, opt_policy_, opt_value_;

  Rng pool_rng_, latent_rng_, gen_action_rng_, gen_update_rng_;
  std::unique_ptr<RolloutCollector> collector_;
  std::vector<GenEpisode> gen_buffer_;
  std::vector<LatentTrait> latent_bank_;  // per-episode z sources for the generator
  std::int64_t env_steps_ = 0;
  int round_ = 0;
  int driver_cursor_any_ = 0;
  int driver_cursor_labeled_ = 0;
  std::vector<LossReport> loss_history_;
};

struct ClusterKlResult {
  std::vector<int> drivers;
  std::vector<std::vector<double>> kl;  // symmetrized pairwise divergences
  double average = 0.0;
  bool variance_floored = false;
};

// Fits a diagonal Gaussian per driver's embedding set and returns the
// symmetrized pairwise KL matrix (sum of both directions) and its mean over
// unordered pairs. Variances are floored at 1e-8.
ClusterKlResult pairwise_cluster_kl(const std::map<int, std::vector<std::vector<double>>>& by_driver);

}  // namespace hmiway
