#pragma once

#include <span>
#include <vector>

#include "hmiway/rng.hpp"

namespace hmiway {

// Gap value passed to idm_acceleration when there is no leader.
inline constexpr double kNoLeaderGap = 1.0e9;
inline constexpr double kVehicleWidth = 2.0;

struct IdmParams {
  double desired_speed = 30.0;   // m/s
  double min_gap = 10.0;         // m
  double time_headway = 1.5;     // s
  double max_accel = 3.0;        // m/s^2
  double comfort_decel = 5.0;    // m/s^2
  double exponent = 4.0;
  double emergency_decel = 10.0; // clamp bound for hard braking

  void validate() const;
};

// a = a_max * [1 - (v/v0)^delta - (s*/gap)^2],
// s* = s0 + v*T + v*dv / (2*sqrt(a_max*b)), clamped to [-b_emergency, a_max].
// gap <= 0 signals an overlap with the leader and throws.
double idm_acceleration(double ego_speed, double gap, double lead_speed, const IdmParams& params);

struct RoadGeometry {
  int lane_count = 3;
  double lane_length = 1000.0;
  std::vector<std::uint8_t> merging;  // flag per lane
  double merge_point = 800.0;         // merging lane ends here
  double speed_min = 20.0;            // spawn speed range
  double speed_max = 30.0;
  double lane_width = 4.0;

  int merge_lane() const;  // index of the single merging lane, -1 if none
  void validate() const;
};

struct VehicleState {
  double position = 0.0;  // m along the road
  int lane = 0;           // 0 is the leftmost lane
  double speed = 0.0;     // m/s
  int target_lane = 0;    // != lane only while a lane change is in progress
  double length = 5.0;    // m
  bool is_ego = false;
  int lane_change_ticks_left = 0;

  bool changing_lane() const { return lane_change_ticks_left > 0; }
  bool occupies_lane(int l) const { return l == lane || (changing_lane() && l == target_lane); }
  double lateral(const RoadGeometry& g) const { return lane * g.lane_width; }
};

enum class LaneCommand { kKeep, kLeft, kRight };

struct StepVehicleResult {
  VehicleState vehicle;
  bool lane_command_ignored = false;
};

// One simulation tick: kinematic integration plus lane-change bookkeeping.
// A lane command off the road edge (or while a change is in progress) is
// ignored and flagged.
StepVehicleResult step_vehicle(const VehicleState& v, double accel, LaneCommand command,
                               double dt, const RoadGeometry& geometry, double v_max,
                               int lane_change_ticks);

struct SpawnParams {
  double extent = 700.0;        // vehicles placed in [0, extent]
  double min_bumper_gap = 10.0; // same-lane bumper-to-bumper clearance
  double vehicle_length = 5.0;
  double merge_lane_margin = 150.0;  // keep clear of the merge point
  int attempts_per_vehicle = 100;
};

// Places up to max_vehicles without same-lane overlap (bumper gap >= min gap),
// speeds uniform in the geometry's speed range. Returns fewer when the road
// fills up; callers read the count from the result size.
std::vector<VehicleState> spawn_traffic(const RoadGeometry& geometry, int max_vehicles, Rng& rng,
                                        const SpawnParams& params,
                                        std::span<const VehicleState> existing = {});

struct SensorParams {
  double range = 60.0;  // m
  double v_max = 40.0;  // normalizes relative speeds
};

struct Observation {
  std::vector<double> distance;   // per sector, in [0,1]; 1 = no hit
  std::vector<double> rel_speed;  // per sector, in [-1,1]; 0 when no hit
  double ego_speed_norm = 0.0;
  double ego_lane_norm = 0.0;
  double merging_flag = 0.0;

  static int dim(int sectors) { return 2 * sectors + 3; }
  std::vector<double> to_vector() const;
};

// Lidar-style scan of K angular sectors. Every other vehicle's rectangular
// footprint is dilated by `inflation` about its center before ray
// intersection; the true footprints are untouched.
Observation lidar_observe(const VehicleState& ego, std::span<const VehicleState> others,
                          double inflation, int sectors, const RoadGeometry& geometry,
                          const SensorParams& sensor);

// Undilated rectangle overlap; symmetric in the pair. Vehicles mid lane
// change occupy both their current and target lanes.
bool vehicles_collide(const VehicleState& a, const VehicleState& b);

// Plain ray vs axis-aligned box, returns hit distance or a negative value.
// Exposed for the geometric tests.
double ray_box_distance(double ox, double oy, double dx, double dy, double cx, double cy,
                        double half_len, double half_wid);

}  // namespace hmiway
