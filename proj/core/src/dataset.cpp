#include "hmiway/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "hmiway/errors.hpp"
#include "hmiway/util.hpp"

namespace hmiway {

using nlohmann::json;

std::size_t Dataset::total_transitions() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

std::vector<int> Dataset::driver_ids() const {
  std::vector<int> ids;
  for (const auto& t : trajectories)
    if (std::find(ids.begin(), ids.end(), t.driver_id) == ids.end()) ids.push_back(t.driver_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

const DriverProfile& Dataset::profile_for(int driver_id) const {
  for (const auto& p : profiles)
    if (p.id == driver_id) return p;
  throw ContractError("Dataset: no profile for driver id " + std::to_string(driver_id));
}

std::map<int, std::int64_t> Dataset::steps_per_driver() const {
  std::map<int, std::int64_t> out;
  for (const auto& t : trajectories) out[t.driver_id] += static_cast<std::int64_t>(t.steps.size());
  return out;
}

std::uint64_t Dataset::fingerprint() const {
  std::ostringstream os;
  os << seed << '|' << trajectories.size() << '|' << total_transitions() << '|'
     << labeled_fraction;
  for (const auto& p : profiles) os << '|' << p.id << ':' << repr(p.beta) << ':' << repr(p.eta);
  return fnv1a64(os.str());
}

BehaviorPolicy scripted_behavior() {
  return [](const HmiwayEnv& env, std::span<const double>, Rng&) {
    return scripted_driver_action(env);
  };
}

Dataset generate_dataset(const std::vector<DriverProfile>& profiles, std::int64_t steps_per_type,
                         const BehaviorPolicy& behavior, const ScenarioConfig& scenario,
                         std::uint64_t seed, const GenerateOptions& options) {
  if (steps_per_type < scenario.episode_steps)
    throw ContractError("generate_dataset: step budget smaller than one episode");
  if (options.labeled_fraction < 0 || options.labeled_fraction > 1)
    throw ContractError("generate_dataset: labeled_fraction must be in [0,1]");

  Dataset ds;
  ds.profiles = profiles;
  ds.seed = seed;
  ds.labeled_fraction = options.labeled_fraction;

  for (const auto& profile : profiles) {
    HmiwayEnv env(scenario, profile);
    ds.env_spec = env.spec();
    std::int64_t recorded = 0;
    std::int64_t episode = 0;
    Rng behavior_rng(derive_seed(seed, derive_seed(static_cast<std::uint64_t>(profile.id), "behavior")));
    while (recorded < steps_per_type) {
      std::uint64_t ep_seed =
          derive_seed(seed, derive_seed(static_cast<std::uint64_t>(profile.id),
                                        static_cast<std::uint64_t>(episode)));
      Trajectory traj;
      traj.driver_id = profile.id;
      traj.labeled = true;  // masked below
      traj.trait_label = profile.distract_label;
      traj.pref_label = profile.pref_label;
      traj.seed = ep_seed;

      StepOutputs out = env.reset(ep_seed);
      while (!out.done) {
        Transition tr;
        tr.obs = out.driver_obs;
        HumanAction a_h = behavior(env, tr.obs, behavior_rng);
        AIAction a_a = options.alerts_during_demos ? AIAction::kAlert : AIAction::kNoAlert;
        out = env.step(a_h, a_a);
        tr.human_action = static_cast<int>(a_h);
        tr.ai_action = static_cast<int>(a_a);
        tr.applied_action = static_cast<int>(out.info.applied);
        tr.rewards = out.rewards;
        tr.d = out.info.d;
        tr.i = out.info.i;
        tr.c = out.info.c;
        tr.next_obs = out.driver_obs;
        traj.steps.push_back(std::move(tr));
      }
      recorded += static_cast<std::int64_t>(traj.steps.size());
      ds.trajectories.push_back(std::move(traj));
      ++episode;
    }
  }

  // Per-driver deterministic label masking.
  Rng mask_rng(derive_seed(seed, "label-mask"));
  for (const auto& profile : profiles) {
    std::vector<int> idx;
    for (int k = 0; k < static_cast<int>(ds.trajectories.size()); ++k)
      if (ds.trajectories[static_cast<size_t>(k)].driver_id == profile.id) idx.push_back(k);
    mask_rng.shuffle(idx);
    auto keep = static_cast<std::size_t>(
        std::llround(options.labeled_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = keep; k < idx.size(); ++k) {
      Trajectory& t = ds.trajectories[static_cast<size_t>(idx[k])];
      t.labeled = false;
      t.trait_label.reset();
      t.pref_label.reset();
    }
  }
  return ds;
}

PoolSampler::PoolSampler(const Dataset& dataset, int pool_size, int window_steps)
    : dataset_(&dataset), pool_size_(pool_size), window_steps_(window_steps) {
  if (pool_size < 1) throw ContractError("PoolSampler: pool_size must be >= 1");
  if (window_steps < 1) throw ContractError("PoolSampler: window_steps must be >= 1");
  for (int ti = 0; ti < static_cast<int>(dataset.trajectories.size()); ++ti) {
    const Trajectory& t = dataset.trajectories[static_cast<size_t>(ti)];
    int n_segments = static_cast<int>(t.steps.size()) / window_steps;
    for (int s = 0; s < n_segments; ++s) {
      SegmentRef ref{ti, s * window_steps, window_steps};
      segments_[t.driver_id].push_back(ref);
      if (t.labeled) labeled_segments_[t.driver_id].push_back(ref);
    }
  }
  for (int id : dataset.driver_ids()) {
    if (static_cast<int>(segments_[id].size()) < pool_size) skipped_.push_back(id);
    if (static_cast<int>(labeled_segments_[id].size()) < pool_size)
      skipped_labeled_.push_back(id);
  }
}

std::vector<PooledBatch> PoolSampler::sample_round(Rng& rng, bool labeled_only) const {
  std::vector<PooledBatch> out;
  for (const auto& [driver, segs] : table(labeled_only)) {
    if (static_cast<int>(segs.size()) < pool_size_) continue;  // reported via skipped_drivers()
    std::vector<SegmentRef> shuffled = segs;
    rng.shuffle(shuffled);
    int n_pools = static_cast<int>(shuffled.size()) / pool_size_;
    for (int p = 0; p < n_pools; ++p) {
      PooledBatch batch;
      batch.driver_id = driver;
      batch.labeled = labeled_only;
      batch.segments.assign(shuffled.begin() + static_cast<long>(p) * pool_size_,
                            shuffled.begin() + static_cast<long>(p + 1) * pool_size_);
      out.push_back(std::move(batch));
    }
  }
  return out;
}

PooledBatch PoolSampler::sample_pool(int driver_id, Rng& rng, bool labeled_only) const {
  auto it = table(labeled_only).find(driver_id);
  if (it == table(labeled_only).end() || static_cast<int>(it->second.size()) < pool_size_)
    throw ContractError("PoolSampler: driver " + std::to_string(driver_id) +
                        " has too few segments for pooling");
  std::vector<SegmentRef> shuffled = it->second;
  rng.shuffle(shuffled);
  PooledBatch batch;
  batch.driver_id = driver_id;
  batch.labeled = labeled_only;
  batch.segments.assign(shuffled.begin(), shuffled.begin() + pool_size_);
  return batch;
}

const std::vector<int>& PoolSampler::skipped_drivers(bool labeled_only) const {
  return labeled_only ? skipped_labeled_ : skipped_;
}

std::vector<int> PoolSampler::eligible_drivers(bool labeled_only) const {
  std::vector<int> out;
  for (const auto& [driver, segs] : table(labeled_only))
    if (static_cast<int>(segs.size()) >= pool_size_) out.push_back(driver);
  return out;
}

int PoolSampler::segment_count(int driver_id, bool labeled_only) const {
  auto it = table(labeled_only).find(driver_id);
  return it == table(labeled_only).end() ? 0 : static_cast<int>(it->second.size());
}

namespace {

constexpr int kDatasetVersion = 1;
constexpr const char* kBinaryMagic = "HMWD1";

json vec_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::vector<double> json_to_vec(const json& a, const char* what, int line) {
  if (!a.is_array())
    throw DatasetError(DatasetErrorKind::kSchema,
                       "dataset line " + std::to_string(line) + ": " + what + " must be an array");
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) {
    if (!x.is_number())
      throw DatasetError(DatasetErrorKind::kSchema,
                         "dataset line " + std::to_string(line) + ": " + what +
                             " must contain numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

json spec_to_json(const EnvSpec& s) {
  return json{{"driver_obs_dim", s.driver_obs_dim}, {"hmi_obs_dim", s.hmi_obs_dim},
              {"n_human_actions", s.n_human_actions}, {"n_ai_actions", s.n_ai_actions},
              {"episode_steps", s.episode_steps},     {"lidar_sectors", s.lidar_sectors},
              {"ticks_per_action", s.ticks_per_action}, {"tick_dt", s.tick_dt}};
}

EnvSpec spec_from_json(const json& j) {
  EnvSpec s;
  s.driver_obs_dim = j.at("driver_obs_dim").get<int>();
  s.hmi_obs_dim = j.at("hmi_obs_dim").get<int>();
  s.n_human_actions = j.at("n_human_actions").get<int>();
  s.n_ai_actions = j.at("n_ai_actions").get<int>();
  s.episode_steps = j.at("episode_steps").get<int>();
  s.lidar_sectors = j.at("lidar_sectors").get<int>();
  s.ticks_per_action = j.at("ticks_per_action").get<int>();
  s.tick_dt = j.at("tick_dt").get<double>();
  return s;
}

json profile_to_json(const DriverProfile& p) {
  return json{{"name", p.name},           {"id", p.id},   {"beta", p.beta}, {"alpha", p.alpha},
              {"eta", p.eta},             {"inflation", p.inflation}};
}

DriverProfile profile_from_json(const json& j) {
  return make_profile(j.at("name").get<std::string>(), j.at("id").get<int>(),
                      j.at("beta").get<double>(), j.at("alpha").get<double>(),
                      j.at("eta").get<double>(), j.at("inflation").get<double>());
}

void save_text(const Dataset& ds, const std::string& path) {
  std::ostringstream out;
  json header;
  header["hmiway_dataset"] = kDatasetVersion;
  header["env"] = spec_to_json(ds.env_spec);
  json profs = json::array();
  for (const auto& p : ds.profiles) profs.push_back(profile_to_json(p));
  header["profiles"] = profs;
  header["seed"] = ds.seed;
  header["labeled_fraction"] = ds.labeled_fraction;
  header["trajectories"] = ds.trajectories.size();
  header["transitions"] = ds.total_transitions();
  out << header.dump() << '\n';

  for (const auto& t : ds.trajectories) {
    json tj;
    tj["driver"] = t.driver_id;
    tj["seed"] = t.seed;
    tj["labeled"] = t.labeled;
    if (t.trait_label)
      tj["distract"] = *t.trait_label == Distractibility::kHigh ? "high" : "low";
    if (t.pref_label) tj["pref"] = *t.pref_label == Preference::kHigh ? "high" : "low";
    tj["len"] = t.steps.size();
    out << json{{"traj", tj}}.dump() << '\n';
    for (const auto& s : t.steps) {
      json sj;
      sj["s"] = vec_to_json(s.obs);
      sj["aH"] = s.human_action;
      sj["aA"] = s.ai_action;
      sj["v"] = s.applied_action;
      sj["r"] = vec_to_json(s.rewards.to_vector());
      sj["cog"] = json::array({s.d, s.i, s.c});
      sj["sn"] = vec_to_json(s.next_obs);
      out << sj.dump() << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

Dataset load_text(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;

  auto next_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty()) return true;
    }
    if (required)
      throw DatasetError(DatasetErrorKind::kTruncated,
                         path + ": unexpected end of file at line " + std::to_string(lineno));
    return false;
  };

  auto parse = [&](const std::string& text) -> json {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw DatasetError(DatasetErrorKind::kSchema,
                         path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
  };

  next_line(true);
  json header = parse(line);
  if (!header.contains("hmiway_dataset"))
    throw DatasetError(DatasetErrorKind::kSchema, path + ": missing dataset header");
  int version = header["hmiway_dataset"].get<int>();
  if (version != kDatasetVersion)
    throw DatasetError(DatasetErrorKind::kVersionMismatch,
                       path + ": dataset version " + std::to_string(version) +
                           ", expected " + std::to_string(kDatasetVersion));

  Dataset ds;
  try {
    ds.env_spec = spec_from_json(header.at("env"));
    for (const auto& pj : header.at("profiles")) ds.profiles.push_back(profile_from_json(pj));
    ds.seed = header.at("seed").get<std::uint64_t>();
    ds.labeled_fraction = header.at("labeled_fraction").get<double>();
  } catch (const json::exception& e) {
    throw DatasetError(DatasetErrorKind::kSchema, path + ": bad header: " + e.what());
  }
  const auto n_traj = header.at("trajectories").get<std::size_t>();
  const auto n_trans = header.at("transitions").get<std::size_t>();

  std::size_t seen_transitions = 0;
  for (std::size_t ti = 0; ti < n_traj; ++ti) {
    next_line(true);
    json tj = parse(line);
    if (!tj.contains("traj"))
      throw DatasetError(DatasetErrorKind::kSchema,
                         path + ":" + std::to_string(lineno) + ": expected a trajectory record");
    const json& t = tj["traj"];
    Trajectory traj;
    traj.driver_id = t.at("driver").get<int>();
    traj.seed = t.at("seed").get<std::uint64_t>();
    traj.labeled = t.at("labeled").get<bool>();
    if (t.contains("distract"))
      traj.trait_label = t["distract"].get<std::string>() == "high" ? Distractibility::kHigh
                                                                    : Distractibility::kLow;
    if (t.contains("pref"))
      traj.pref_label =
          t["pref"].get<std::string>() == "high" ? Preference::kHigh : Preference::kLow;
    auto len = t.at("len").get<std::size_t>();
    for (std::size_t k = 0; k < len; ++k) {
      next_line(true);
      json sj = parse(line);
      Transition tr;
      try {
        tr.obs = json_to_vec(sj.at("s"), "s", lineno);
        tr.human_action = sj.at("aH").get<int>();
        tr.ai_action = sj.at("aA").get<int>();
        tr.applied_action = sj.at("v").get<int>();
        tr.rewards = RewardBreakdown::from_vector(json_to_vec(sj.at("r"), "r", lineno));
        auto cog = sj.at("cog");
        tr.d = cog.at(0).get<int>();
        tr.i = cog.at(1).get<int>();
        tr.c = cog.at(2).get<int>();
        tr.next_obs = json_to_vec(sj.at("sn"), "sn", lineno);
      } catch (const json::exception& e) {
        throw DatasetError(DatasetErrorKind::kSchema,
                           path + ":" + std::to_string(lineno) + ": bad transition: " + e.what());
      }
      if (static_cast<int>(tr.obs.size()) != ds.env_spec.driver_obs_dim ||
          static_cast<int>(tr.next_obs.size()) != ds.env_spec.driver_obs_dim)
        throw DatasetError(DatasetErrorKind::kSchema,
                           path + ":" + std::to_string(lineno) +
                               ": observation width does not match the env spec");
      traj.steps.push_back(std::move(tr));
      ++seen_transitions;
    }
    ds.trajectories.push_back(std::move(traj));
  }
  if (seen_transitions != n_trans)
    throw DatasetError(DatasetErrorKind::kTruncated,
                       path + ": header declares " + std::to_string(n_trans) +
                           " transitions, found " + std::to_string(seen_transitions));
  if (next_line(false))
    throw DatasetError(DatasetErrorKind::kTruncated,
                       path + ": trailing content after the declared trajectories");
  return ds;
}

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) { data_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64v(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  const std::string& data() const { return data_; }

 private:
  std::string data_;
};

class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& path) : data_(data), path_(path) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > data_.size())
      throw DatasetError(DatasetErrorKind::kTruncated, path_ + ": truncated binary dataset");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { std::uint32_t v = 0; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v = 0; raw(&v, sizeof v); return v; }
  std::vector<double> f64v() {
    std::uint64_t n = u64();
    if (n > (data_.size() - pos_) / sizeof(double))
      throw DatasetError(DatasetErrorKind::kTruncated, path_ + ": truncated binary dataset");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (n > data_.size() - pos_)
      throw DatasetError(DatasetErrorKind::kTruncated, path_ + ": truncated binary dataset");
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

void save_binary(const Dataset& ds, const std::string& path) {
  ByteWriter w;
  w.raw(kBinaryMagic, 5);
  w.u32(kDatasetVersion);
  json header;
  header["env"] = spec_to_json(ds.env_spec);
  json profs = json::array();
  for (const auto& p : ds.profiles) profs.push_back(profile_to_json(p));
  header["profiles"] = profs;
  header["seed"] = ds.seed;
  header["labeled_fraction"] = ds.labeled_fraction;
  w.str(header.dump());
  w.u64(ds.trajectories.size());
  w.u64(ds.total_transitions());
  for (const auto& t : ds.trajectories) {
    w.u32(static_cast<std::uint32_t>(t.driver_id));
    w.u64(t.seed);
    w.u32(t.labeled ? 1 : 0);
    w.u32(t.trait_label ? (*t.trait_label == Distractibility::kHigh ? 2u : 1u) : 0u);
    w.u32(t.pref_label ? (*t.pref_label == Preference::kHigh ? 2u : 1u) : 0u);
    w.u64(t.steps.size());
    for (const auto& s : t.steps) {
      w.f64v(s.obs);
      w.u32(static_cast<std::uint32_t>(s.human_action));
      w.u32(static_cast<std::uint32_t>(s.ai_action));
      w.u32(static_cast<std::uint32_t>(s.applied_action));
      w.f64v(s.rewards.to_vector());
      w.u32(static_cast<std::uint32_t>(s.d));
      w.u32(static_cast<std::uint32_t>(s.i));
      w.u32(static_cast<std::uint32_t>(s.c));
      w.f64v(s.next_obs);
    }
  }
  write_file_atomic(path, w.data());
}

Dataset load_binary(const std::string& path) {
  std::string data = read_file(path);
  ByteReader r(data, path);
  char magic[5];
  r.raw(magic, 5);
  if (std::memcmp(magic, kBinaryMagic, 5) != 0)
    throw DatasetError(DatasetErrorKind::kSchema, path + ": not a binary dataset (bad magic)");
  std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw DatasetError(DatasetErrorKind::kVersionMismatch,
                       path + ": dataset version " + std::to_string(version) + ", expected " +
                           std::to_string(kDatasetVersion));
  Dataset ds;
  try {
    json header = json::parse(r.str());
    ds.env_spec = spec_from_json(header.at("env"));
    for (const auto& pj : header.at("profiles")) ds.profiles.push_back(profile_from_json(pj));
    ds.seed = header.at("seed").get<std::uint64_t>();
    ds.labeled_fraction = header.at("labeled_fraction").get<double>();
  } catch (const json::exception& e) {
    throw DatasetError(DatasetErrorKind::kSchema, path + ": bad header: " + e.what());
  }
  std::uint64_t n_traj = r.u64();
  std::uint64_t n_trans = r.u64();
  std::uint64_t seen = 0;
  for (std::uint64_t ti = 0; ti < n_traj; ++ti) {
    Trajectory t;
    t.driver_id = static_cast<int>(r.u32());
    t.seed = r.u64();
    t.labeled = r.u32() != 0;
    std::uint32_t trait = r.u32();
    if (trait) t.trait_label = trait == 2 ? Distractibility::kHigh : Distractibility::kLow;
    std::uint32_t pref = r.u32();
    if (pref) t.pref_label = pref == 2 ? Preference::kHigh : Preference::kLow;
    std::uint64_t len = r.u64();
    for (std::uint64_t k = 0; k < len; ++k) {
      Transition s;
      s.obs = r.f64v();
      s.human_action = static_cast<int>(r.u32());
      s.ai_action = static_cast<int>(r.u32());
      s.applied_action = static_cast<int>(r.u32());
      s.rewards = RewardBreakdown::from_vector(r.f64v());
      s.d = static_cast<int>(r.u32());
      s.i = static_cast<int>(r.u32());
      s.c = static_cast<int>(r.u32());
      s.next_obs = r.f64v();
      t.steps.push_back(std::move(s));
      ++seen;
    }
    ds.trajectories.push_back(std::move(t));
  }
  if (seen != n_trans)
    throw DatasetError(DatasetErrorKind::kTruncated,
                       path + ": header declares " + std::to_string(n_trans) +
                           " transitions, found " + std::to_string(seen));
  if (!r.at_end())
    throw DatasetError(DatasetErrorKind::kTruncated, path + ": trailing bytes");
  return ds;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ends_with(path, ".bin"))
    save_binary(ds, path);
  else
    save_text(ds, path);
}

Dataset load_dataset(const std::string& path) {
  if (ends_with(path, ".bin")) return load_binary(path);
  return load_text(path);
}

}  // namespace hmiway
