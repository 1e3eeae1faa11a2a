#include "hmiway/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hmiway/checkpoint.hpp"
#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

PolicyNet::PolicyNet(int obs_dim, int n_actions, Rng& init_rng, int hidden) {
  net_ = Mlp::make({obs_dim, hidden, n_actions}, Act::kTanh, Act::kLinear, init_rng);
}

std::vector<double> PolicyNet::logits(std::span<const double> obs, Mlp::Cache* cache) const {
  return net_.forward(obs, cache);
}

std::vector<double> PolicyNet::probs_from_logits(std::span<const double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    sum += p[k];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::vector<double> PolicyNet::probs(std::span<const double> obs) const {
  auto l = logits(obs);
  return probs_from_logits(l);
}

PolicyNet::Sample PolicyNet::sample(std::span<const double> obs, Rng& rng) const {
  auto p = probs(obs);
  double u = rng.uniform();
  double acc = 0.0;
  int action = static_cast<int>(p.size()) - 1;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) {
      action = static_cast<int>(k);
      break;
    }
  }
  return {action, std::log(p[static_cast<std::size_t>(action)])};
}

double PolicyNet::log_prob(std::span<const double> obs, int action) const {
  auto p = probs(obs);
  if (action < 0 || action >= static_cast<int>(p.size()))
    throw ContractError("PolicyNet::log_prob: action out of range");
  return std::log(p[static_cast<std::size_t>(action)]);
}

double PolicyNet::entropy(std::span<const double> obs) const {
  auto p = probs(obs);
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log(x);
  return h;
}

ValueNet::ValueNet(int obs_dim, Rng& init_rng, int hidden) {
  net_ = Mlp::make({obs_dim, hidden, 1}, Act::kTanh, Act::kLinear, init_rng);
}

double ValueNet::value(std::span<const double> obs, Mlp::Cache* cache) const {
  return net_.forward(obs, cache)[0];
}

void PpoConfig::validate() const {
  if (clip_ratio < 0 || clip_ratio >= 1) throw ContractError("PpoConfig: clip_ratio must be in [0,1)");
  if (gamma <= 0 || gamma > 1) throw ContractError("PpoConfig: gamma must be in (0,1]");
  if (gae_lambda <= 0 || gae_lambda > 1) throw ContractError("PpoConfig: gae_lambda must be in (0,1]");
  if (epochs < 1 || minibatch_size < 1 || rollout_steps < 1)
    throw ContractError("PpoConfig: epochs, minibatch_size and rollout_steps must be >= 1");
  if (learning_rate < 0 || entropy_coef < 0)
    throw ContractError("PpoConfig: learning_rate and entropy_coef must be >= 0");
}

PpoConfig PpoConfig::from_kv(KeyValueFile& kv, const std::string& prefix) {
  PpoConfig c;
  c.clip_ratio = kv.get_double(prefix + "clip_ratio", c.clip_ratio);
  c.epochs = static_cast<int>(kv.get_int(prefix + "epochs", c.epochs));
  c.minibatch_size = static_cast<int>(kv.get_int(prefix + "minibatch_size", c.minibatch_size));
  c.gamma = kv.get_double(prefix + "gamma", c.gamma);
  c.gae_lambda = kv.get_double(prefix + "gae_lambda", c.gae_lambda);
  c.entropy_coef = kv.get_double(prefix + "entropy_coef", c.entropy_coef);
  c.learning_rate = kv.get_double(prefix + "learning_rate", c.learning_rate);
  c.kl_limit = kv.get_double(prefix + "kl_limit", c.kl_limit);
  c.rollout_steps = static_cast<int>(kv.get_int(prefix + "rollout_steps", c.rollout_steps));
  c.normalize_advantages = kv.get_bool(prefix + "normalize_advantages", c.normalize_advantages);
  c.validate();
  return c;
}

RolloutCollector::RolloutCollector(std::unique_ptr<RolloutEnv> env, std::uint64_t seed_base)
    : env_(std::move(env)), seed_base_(seed_base) {}

RolloutBuffer RolloutCollector::collect(const PolicyNet& policy, const ValueNet& value,
                                        int n_steps, Rng& action_rng) {
  if (n_steps < 0) throw ContractError("collect: n_steps must be >= 0");
  if (policy.n_actions() != env_->n_actions())
    throw ContractError("collect: policy/env action space mismatch");
  RolloutBuffer buf;
  buf.obs_dim = env_->obs_dim();
  buf.obs.reserve(static_cast<std::size_t>(n_steps) * buf.obs_dim);

  for (int t = 0; t < n_steps; ++t) {
    if (needs_reset_) {
      pending_obs_ = env_->reset(derive_seed(seed_base_, static_cast<std::uint64_t>(episode_counter_)));
      ++episode_counter_;
      current_ = EpisodeStats{};
      needs_reset_ = false;
    }
    auto sampled = policy.sample(pending_obs_, action_rng);
    double v = value.value(pending_obs_);

    buf.obs.insert(buf.obs.end(), pending_obs_.begin(), pending_obs_.end());
    buf.actions.push_back(sampled.action);
    buf.log_probs.push_back(sampled.log_prob);
    buf.values.push_back(v);

    auto r = env_->step(sampled.action);
    buf.rewards.push_back(r.reward);
    buf.dones.push_back(r.done ? 1 : 0);

    current_.total_reward += r.reward;
    current_.steps += 1;
    current_.breakdown.accumulate(r.breakdown);
    current_.crashed = current_.crashed || r.crashed;

    if (r.done) {
      finished_.push_back(current_);
      needs_reset_ = true;
    } else {
      pending_obs_ = std::move(r.obs);
    }
  }
  if (!needs_reset_ && !pending_obs_.empty())
    buf.bootstrap_value = value.value(pending_obs_);
  return buf;
}

RolloutBuffer RolloutCollector::collect_aligned(const PolicyNet& policy, const ValueNet& value,
                                                int min_steps, Rng& action_rng) {
  if (min_steps < 1) throw ContractError("collect_aligned: min_steps must be >= 1");
  if (policy.n_actions() != env_->n_actions())
    throw ContractError("collect_aligned: policy/env action space mismatch");
  RolloutBuffer buf;
  buf.obs_dim = env_->obs_dim();
  while (static_cast<int>(buf.size()) < min_steps) {
    pending_obs_ = env_->reset(derive_seed(seed_base_, static_cast<std::uint64_t>(episode_counter_)));
    ++episode_counter_;
    current_ = EpisodeStats{};
    bool done = false;
    while (!done) {
      auto sampled = policy.sample(pending_obs_, action_rng);
      double v = value.value(pending_obs_);
      buf.obs.insert(buf.obs.end(), pending_obs_.begin(), pending_obs_.end());
      buf.actions.push_back(sampled.action);
      buf.log_probs.push_back(sampled.log_prob);
      buf.values.push_back(v);
      auto r = env_->step(sampled.action);
      buf.rewards.push_back(r.reward);
      buf.dones.push_back(r.done ? 1 : 0);
      current_.total_reward += r.reward;
      current_.steps += 1;
      current_.breakdown.accumulate(r.breakdown);
      current_.crashed = current_.crashed || r.crashed;
      done = r.done;
      if (!done) pending_obs_ = std::move(r.obs);
    }
    finished_.push_back(current_);
  }
  needs_reset_ = true;
  return buf;
}

std::vector<EpisodeStats> RolloutCollector::drain_episode_stats() {
  std::vector<EpisodeStats> out;
  out.swap(finished_);
  return out;
}

std::string RolloutCollector::state() const {
  std::ostringstream os;
  os << episode_counter_ << ' ' << (needs_reset_ ? 1 : 0);
  // Pending observations are re-derived on resume by replaying the episode
  // seed, so only the counter travels; mid-episode resume is not supported.
  return os.str();
}

void RolloutCollector::set_state(const std::string& text) {
  std::istringstream is(text);
  int flag = 0;
  is >> episode_counter_ >> flag;
  if (is.fail()) throw ContractError("RolloutCollector: invalid state string");
  needs_reset_ = true;  // always restart on an episode boundary
  (void)flag;
}

void compute_advantages(RolloutBuffer& buf, double gamma, double lambda) {
  const std::size_t n = buf.size();
  buf.advantages.assign(n, 0.0);
  buf.returns.assign(n, 0.0);
  double last_gae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    double next_nonterminal;
    double next_value;
    if (t == n - 1) {
      next_nonterminal = buf.dones[t] ? 0.0 : 1.0;
      next_value = buf.bootstrap_value;
    } else {
      next_nonterminal = buf.dones[t] ? 0.0 : 1.0;
      next_value = buf.values[t + 1];
    }
    double delta = buf.rewards[t] + gamma * next_value * next_nonterminal - buf.values[t];
    last_gae = delta + gamma * lambda * next_nonterminal * last_gae;
    buf.advantages[t] = last_gae;
  }
  for (std::size_t t = 0; t < n; ++t) buf.returns[t] = buf.advantages[t] + buf.values[t];
}

PpoStats ppo_update(const RolloutBuffer& buf, PolicyNet& policy, ValueNet& value, Adam& policy_opt,
                    Adam& value_opt, const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = buf.size();
  if (n == 0) return {};
  if (buf.advantages.size() != n)
    throw ContractError("ppo_update: advantages not computed");

  PpoStats stats;
  std::vector<double> pol_grad(policy.net().param_count());
  std::vector<double> val_grad(value.net().param_count());
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);

  double kl_sum = 0.0, clip_sum = 0.0, ent_sum = 0.0, pl_sum = 0.0, vl_sum = 0.0;
  std::int64_t sample_count = 0;
  int minibatches_run = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(indices);
    double epoch_kl = 0.0;
    int epoch_mbs = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.minibatch_size)) {
      std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.minibatch_size));
      std::size_t mb = end - start;

      double adv_mean = 0.0, adv_std = 1.0;
      if (cfg.normalize_advantages) {
        double s = 0.0;
        for (std::size_t k = start; k < end; ++k) s += buf.advantages[indices[k]];
        adv_mean = s / static_cast<double>(mb);
        double ss = 0.0;
        for (std::size_t k = start; k < end; ++k) {
          double d = buf.advantages[indices[k]] - adv_mean;
          ss += d * d;
        }
        adv_std = std::sqrt(ss / static_cast<double>(mb)) + 1e-8;
      }

      std::fill(pol_grad.begin(), pol_grad.end(), 0.0);
      std::fill(val_grad.begin(), val_grad.end(), 0.0);
      double mb_kl = 0.0;

      for (std::size_t k = start; k < end; ++k) {
        std::size_t t = indices[k];
        auto obs = buf.obs_at(t);
        int a = buf.actions[t];
        double adv = (buf.advantages[t] - adv_mean) / adv_std;

        Mlp::Cache cache;
        auto lg = policy.logits(obs, &cache);
        auto p = PolicyNet::probs_from_logits(lg);
        double logp_new = std::log(p[static_cast<std::size_t>(a)]);
        double log_ratio = logp_new - buf.log_probs[t];
        double ratio = std::exp(log_ratio);

        mb_kl += (ratio - 1.0) - log_ratio;

        // Inclusive clip boundaries: the clipped branch carries no gradient.
        bool clipped = (adv >= 0.0 && ratio >= 1.0 + cfg.clip_ratio) ||
                       (adv <= 0.0 && ratio <= 1.0 - cfg.clip_ratio);
        if (clipped) clip_sum += 1.0;
        double surrogate = std::min(ratio * adv,
                                    std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv);
        pl_sum += -surrogate;

        double h = 0.0;
        for (double x : p)
          if (x > 0) h -= x * std::log(x);
        ent_sum += h;

        // dLoss/dlogits: policy surrogate plus entropy bonus.
        std::vector<double> dlogits(p.size(), 0.0);
        if (!clipped) {
          double coef = -ratio * adv / static_cast<double>(mb);
          for (std::size_t j = 0; j < p.size(); ++j) {
            double onehot = j == static_cast<std::size_t>(a) ? 1.0 : 0.0;
            dlogits[j] += coef * (onehot - p[j]);
          }
        }
        if (cfg.entropy_coef > 0) {
          for (std::size_t j = 0; j < p.size(); ++j) {
            if (p[j] <= 0) continue;
            dlogits[j] += cfg.entropy_coef * p[j] * (std::log(p[j]) + h) / static_cast<double>(mb);
          }
        }
        policy.net().backward(cache, dlogits, pol_grad);

        Mlp::Cache vcache;
        double v = value.value(obs, &vcache);
        double verr = v - buf.returns[t];
        vl_sum += 0.5 * verr * verr;
        double dv[1] = {verr / static_cast<double>(mb)};
        value.net().backward(vcache, dv, val_grad);

        ++sample_count;
      }

      policy_opt.step(policy.net().params(), pol_grad);
      value_opt.step(value.net().params(), val_grad);
      ++minibatches_run;
      ++epoch_mbs;
      epoch_kl += mb_kl / static_cast<double>(mb);
      kl_sum += mb_kl / static_cast<double>(mb);
    }
    stats.epochs_run = epoch + 1;
    if (epoch_mbs > 0 && epoch_kl / epoch_mbs > cfg.kl_limit) {
      stats.early_stopped = true;
      break;
    }
  }

  if (sample_count > 0) {
    stats.policy_loss = pl_sum / static_cast<double>(sample_count);
    stats.value_loss = vl_sum / static_cast<double>(sample_count);
    stats.entropy = ent_sum / static_cast<double>(sample_count);
    stats.clip_fraction = clip_sum / static_cast<double>(sample_count);
  }
  if (minibatches_run > 0) stats.approx_kl = kl_sum / minibatches_run;
  return stats;
}

DriverTaskEnv::DriverTaskEnv(ScenarioConfig scenario, DriverProfile profile)
    : env_(std::move(scenario), std::move(profile)) {}

int DriverTaskEnv::obs_dim() const { return env_.spec().driver_obs_dim; }

std::vector<double> DriverTaskEnv::reset(std::uint64_t seed) {
  return env_.reset(seed).driver_obs;
}

RolloutEnv::StepResult DriverTaskEnv::step(int action) {
  auto out = env_.step(static_cast<HumanAction>(action), AIAction::kNoAlert);
  StepResult r;
  r.obs = std::move(out.driver_obs);
  r.reward = out.rewards.driving_total();
  r.done = out.done;
  r.breakdown = out.rewards;
  r.crashed = out.info.crashed;
  return r;
}

HmiTaskEnv::HmiTaskEnv(ScenarioConfig scenario, DriverProfile profile, HmiObsConfig hmi_obs,
                       const PolicyNet* driver_policy)
    : env_(std::move(scenario), std::move(profile), hmi_obs), driver_(driver_policy) {
  if (!driver_) throw ContractError("HmiTaskEnv: driver policy required");
}

int HmiTaskEnv::obs_dim() const { return env_.spec().hmi_obs_dim; }

std::vector<double> HmiTaskEnv::reset(std::uint64_t seed) {
  auto out = env_.reset(seed);
  driver_rng_ = Rng(derive_seed(seed, "hmi-driver"));
  driver_obs_ = std::move(out.driver_obs);
  proposed_ = static_cast<HumanAction>(driver_->sample(driver_obs_, driver_rng_).action);
  return env_.hmi_observation(proposed_);
}

RolloutEnv::StepResult HmiTaskEnv::step(int action) {
  auto out = env_.step(proposed_, static_cast<AIAction>(action));
  StepResult r;
  r.reward = out.rewards.total();
  r.done = out.done;
  r.breakdown = out.rewards;
  r.crashed = out.info.crashed;
  if (!out.done) {
    driver_obs_ = std::move(out.driver_obs);
    proposed_ = static_cast<HumanAction>(driver_->sample(driver_obs_, driver_rng_).action);
    r.obs = env_.hmi_observation(proposed_);
  }
  return r;
}

namespace {

TrainPolicyResult train_loop(std::unique_ptr<RolloutEnv> env, const PpoConfig& cfg,
                             std::int64_t budget_steps, std::uint64_t seed) {
  cfg.validate();
  if (budget_steps < 1) throw ContractError("train: budget must be >= 1 step");
  Rng init_rng(derive_seed(seed, "init"));
  Rng action_rng(derive_seed(seed, "actions"));
  Rng update_rng(derive_seed(seed, "updates"));

  TrainPolicyResult result;
  result.policy = PolicyNet(env->obs_dim(), env->n_actions(), init_rng);
  result.value = ValueNet(env->obs_dim(), init_rng);
  Adam policy_opt(result.policy.net().param_count(), cfg.learning_rate);
  Adam value_opt(result.value.net().param_count(), cfg.learning_rate);

  RolloutCollector collector(std::move(env), derive_seed(seed, "episodes"));
  while (result.env_steps < budget_steps) {
    int n = static_cast<int>(std::min<std::int64_t>(cfg.rollout_steps, budget_steps - result.env_steps));
    RolloutBuffer buf = collector.collect(result.policy, result.value, n, action_rng);
    compute_advantages(buf, cfg.gamma, cfg.gae_lambda);
    PpoStats stats = ppo_update(buf, result.policy, result.value, policy_opt, value_opt, cfg,
                                update_rng);
    result.env_steps += n;

    auto episodes = collector.drain_episode_stats();
    CurveRow row;
    row.step = result.env_steps;
    row.entropy = stats.entropy;
    if (!episodes.empty()) {
      for (const auto& e : episodes) {
        row.mean_return += e.total_reward;
        row.mean_breakdown.accumulate(e.breakdown);
      }
      double inv = 1.0 / static_cast<double>(episodes.size());
      row.mean_return *= inv;
      RewardBreakdown scaled;
      auto v = row.mean_breakdown.to_vector();
      for (double& x : v) x *= inv;
      scaled = RewardBreakdown::from_vector(v);
      row.mean_breakdown = scaled;
    }
    result.curve.push_back(row);
    if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
      throw ContractError("train: non-finite training statistics");
  }
  return result;
}

}  // namespace

TrainPolicyResult train_driver_policy(const DriverProfile& profile, const ScenarioConfig& scenario,
                                      const PpoConfig& config, std::int64_t budget_steps,
                                      std::uint64_t seed) {
  return train_loop(std::make_unique<DriverTaskEnv>(scenario, profile), config, budget_steps, seed);
}

TrainPolicyResult train_hmi_policy(const PolicyNet& driver_policy, const DriverProfile& profile,
                                   const ScenarioConfig& scenario, const HmiObsConfig& hmi_obs,
                                   const PpoConfig& config, std::int64_t budget_steps,
                                   std::uint64_t seed) {
  return train_loop(std::make_unique<HmiTaskEnv>(scenario, profile, hmi_obs, &driver_policy),
                    config, budget_steps, seed);
}

void write_curve_csv(const std::vector<CurveRow>& curve, const std::string& path) {
  std::ostringstream os;
  os << "step,mean_return";
  for (const auto& name : RewardBreakdown::field_names()) os << ",mean_" << name;
  os << ",entropy\n";
  for (const auto& row : curve) {
    os << row.step << ',' << repr(row.mean_return);
    for (double x : row.mean_breakdown.to_vector()) os << ',' << repr(x);
    os << ',' << repr(row.entropy) << '\n';
  }
  write_file_atomic(path, os.str());
}

void save_policy(const PolicyNet& policy, const ValueNet& value, const std::string& kind,
                 const std::string& path) {
  Checkpoint ck;
  nlohmann::json meta;
  meta["type"] = "policy";
  meta["kind"] = kind;
  meta["obs_dim"] = policy.obs_dim();
  meta["n_actions"] = policy.n_actions();
  meta["policy_widths"] = policy.net().widths();
  meta["value_widths"] = value.net().widths();
  ck.meta_json = meta.dump();
  ck.add("policy.params", policy.net().params());
  ck.add("value.params", value.net().params());
  ck.save(path);
}

LoadedPolicy load_policy(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  nlohmann::json meta = nlohmann::json::parse(ck.meta_json);
  if (meta.value("type", "") != "policy")
    throw IoError(path + ": not a policy checkpoint");
  LoadedPolicy out;
  out.kind = meta.value("kind", "");
  auto pw = meta.at("policy_widths").get<std::vector<int>>();
  auto vw = meta.at("value_widths").get<std::vector<int>>();
  Rng dummy(0);
  out.policy = PolicyNet(pw.front(), pw.back(), dummy, pw[1]);
  out.value = ValueNet(vw.front(), dummy, vw[1]);
  if (out.policy.net().params().size() != ck.section("policy.params").size() ||
      out.value.net().params().size() != ck.section("value.params").size())
    throw IoError(path + ": checkpoint layout does not match the declared widths");
  out.policy.net().params() = ck.section("policy.params");
  out.value.net().params() = ck.section("value.params");
  return out;
}

}  // namespace hmiway
