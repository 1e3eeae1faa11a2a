#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmiway/env.hpp"

namespace hmiway {

struct Transition {
  std::vector<double> obs;       // driver view before the step
  int human_action = 0;
  int ai_action = 0;
  int applied_action = 0;
  RewardBreakdown rewards;
  int d = 0, i = 0, c = 0;       // cognitive snapshot after the step
  std::vector<double> next_obs;  // driver view after the step
};

struct Trajectory {
  std::vector<Transition> steps;
  int driver_id = -1;
  bool labeled = false;
  std::optional<Distractibility> trait_label;
  std::optional<Preference> pref_label;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  EnvSpec env_spec;
  std::vector<DriverProfile> profiles;
  std::uint64_t seed = 0;
  double labeled_fraction = 1.0;

  std::size_t total_transitions() const;
  std::vector<int> driver_ids() const;
  const DriverProfile& profile_for(int driver_id) const;
  std::map<int, std::int64_t> steps_per_driver() const;
  // Fingerprint of the identifying header fields, used by resume checks.
  std::uint64_t fingerprint() const;
};

// Produces the human action for the next step of an episode.
using BehaviorPolicy = std::function<HumanAction(const HmiwayEnv&, std::span<const double> obs, Rng&)>;

BehaviorPolicy scripted_behavior();

struct GenerateOptions {
  double labeled_fraction = 0.2;
  bool alerts_during_demos = false;  // default: pure driver behavior
};

// Records whole episodes per profile until each profile's step budget is
// met, then masks labels down to the configured fraction (per driver,
// deterministic in the dataset seed).
Dataset generate_dataset(const std::vector<DriverProfile>& profiles, std::int64_t steps_per_type,
                         const BehaviorPolicy& behavior, const ScenarioConfig& scenario,
                         std::uint64_t seed, const GenerateOptions& options = {});

struct SegmentRef {
  int trajectory = 0;
  int start = 0;
  int length = 0;
};

struct PooledBatch {
  int driver_id = -1;
  bool labeled = false;
  std::vector<SegmentRef> segments;  // exactly pool_size, one driver
};

// Fixed-size same-driver pools over fixed-length trajectory segments,
// reshuffled per round. Drivers with too few segments are skipped and
// reported.
class PoolSampler {
 public:
  PoolSampler(const Dataset& dataset, int pool_size, int window_steps);

  int pool_size() const { return pool_size_; }
  int window_steps() const { return window_steps_; }

  // All pools for one training round, shuffled per driver.
  std::vector<PooledBatch> sample_round(Rng& rng, bool labeled_only = false) const;
  // One pool for a specific driver (segments drawn without replacement).
  PooledBatch sample_pool(int driver_id, Rng& rng, bool labeled_only = false) const;

  const std::vector<int>& skipped_drivers(bool labeled_only = false) const;
  std::vector<int> eligible_drivers(bool labeled_only = false) const;
  int segment_count(int driver_id, bool labeled_only = false) const;

  const Dataset& dataset() const { return *dataset_; }

 private:
  const std::map<int, std::vector<SegmentRef>>& table(bool labeled_only) const {
    return labeled_only ? labeled_segments_ : segments_;
  }

  const Dataset* dataset_;
  int pool_size_;
  int window_steps_;
  std::map<int, std::vector<SegmentRef>> segments_;
  std::map<int, std::vector<SegmentRef>> labeled_segments_;
  std::vector<int> skipped_, skipped_labeled_;
};

// Text (JSON lines) when the path ends in .jsonl, compact binary when it
// ends in .bin. Round-trips are bit-exact either way.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace hmiway
