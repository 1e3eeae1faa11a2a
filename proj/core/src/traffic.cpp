#include "hmiway/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hmiway/errors.hpp"

namespace hmiway {

void IdmParams::validate() const {
  if (desired_speed <= 0 || min_gap <= 0 || time_headway <= 0 || max_accel <= 0 ||
      comfort_decel <= 0 || exponent <= 0 || emergency_decel <= 0)
    throw ContractError("IdmParams: all parameters must be strictly positive");
}

double idm_acceleration(double ego_speed, double gap, double lead_speed, const IdmParams& p) {
  if (gap <= 0.0)
    throw ContractError("idm_acceleration: non-positive gap (collision overlap)");
  double dv = ego_speed - lead_speed;
  double s_star = p.min_gap + ego_speed * p.time_headway +
                  ego_speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  s_star = std::max(s_star, 0.0);
  double a = p.max_accel * (1.0 - std::pow(ego_speed / p.desired_speed, p.exponent) -
                            (s_star / gap) * (s_star / gap));
  return std::clamp(a, -p.emergency_decel, p.max_accel);
}

int RoadGeometry::merge_lane() const {
  for (int l = 0; l < lane_count; ++l)
    if (l < static_cast<int>(merging.size()) && merging[l]) return l;
  return -1;
}

void RoadGeometry::validate() const {
  if (lane_count < 1) throw ContractError("RoadGeometry: lane_count must be >= 1");
  if (lane_length <= 0) throw ContractError("RoadGeometry: lane_length must be positive");
  if (static_cast<int>(merging.size()) != lane_count)
    throw ContractError("RoadGeometry: merge flags must cover every lane");
  int n_merging = 0;
  for (auto f : merging) n_merging += f ? 1 : 0;
  if (n_merging > 1) throw ContractError("RoadGeometry: at most one merging lane");
  if (n_merging == 1 && (merge_point <= 0 || merge_point > lane_length))
    throw ContractError("RoadGeometry: merge point must lie within the lane length");
  if (speed_min < 0 || speed_max < speed_min)
    throw ContractError("RoadGeometry: invalid speed limit range");
}

StepVehicleResult step_vehicle(const VehicleState& v, double accel, LaneCommand command,
                               double dt, const RoadGeometry& geometry, double v_max,
                               int lane_change_ticks) {
  if (dt <= 0) throw ContractError("step_vehicle: dt must be positive");
  StepVehicleResult out;
  VehicleState& n = out.vehicle;
  n = v;

  double delta = v.speed * dt + 0.5 * accel * dt * dt;
  if (delta < 0) delta = 0;  // no reversing
  n.position = v.position + delta;
  n.speed = std::clamp(v.speed + accel * dt, 0.0, v_max);

  // Progress an ongoing change first; the lane index flips on completion.
  if (v.changing_lane()) {
    n.lane_change_ticks_left = v.lane_change_ticks_left - 1;
    if (n.lane_change_ticks_left == 0) n.lane = v.target_lane;
  }

  if (command != LaneCommand::kKeep) {
    if (n.changing_lane()) {
      out.lane_command_ignored = true;
    } else {
      int target = n.lane + (command == LaneCommand::kLeft ? -1 : 1);
      if (target < 0 || target >= geometry.lane_count) {
        out.lane_command_ignored = true;
      } else {
        n.target_lane = target;
        n.lane_change_ticks_left = lane_change_ticks;
      }
    }
  }
  if (!n.changing_lane()) n.target_lane = n.lane;
  return out;
}

namespace {

bool same_lane_clearance_ok(const VehicleState& a, const VehicleState& b, double min_gap) {
  bool share = false;
  for (int l : {a.lane, a.target_lane})
    if (b.occupies_lane(l) && a.occupies_lane(l)) share = true;
  if (!share) return true;
  double bumper = std::abs(a.position - b.position) - 0.5 * (a.length + b.length);
  return bumper >= min_gap;
}

}  // namespace

std::vector<VehicleState> spawn_traffic(const RoadGeometry& geometry, int max_vehicles, Rng& rng,
                                        const SpawnParams& params,
                                        std::span<const VehicleState> existing) {
  if (max_vehicles < 0) throw ContractError("spawn_traffic: max_vehicles must be >= 0");
  geometry.validate();
  std::vector<VehicleState> placed;
  placed.reserve(static_cast<size_t>(max_vehicles));
  int merge = geometry.merge_lane();
  for (int i = 0; i < max_vehicles; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < params.attempts_per_vehicle && !ok; ++attempt) {
      VehicleState v;
      v.lane = rng.uniform_int(geometry.lane_count);
      v.target_lane = v.lane;
      double hi = params.extent;
      if (v.lane == merge) hi = std::min(hi, geometry.merge_point - params.merge_lane_margin);
      if (hi <= 0) continue;
      v.position = rng.uniform(0.0, hi);
      v.speed = rng.uniform(geometry.speed_min, geometry.speed_max);
      v.length = params.vehicle_length;
      ok = true;
      for (const auto& other : placed)
        if (!same_lane_clearance_ok(v, other, params.min_bumper_gap)) { ok = false; break; }
      if (ok)
        for (const auto& other : existing)
          if (!same_lane_clearance_ok(v, other, params.min_bumper_gap)) { ok = false; break; }
      if (ok) placed.push_back(v);
    }
    if (!ok) break;  // road is full; report fewer via the result size
  }
  return placed;
}

double ray_box_distance(double ox, double oy, double dx, double dy, double cx, double cy,
                        double half_len, double half_wid) {
  double lo[2] = {cx - half_len, cy - half_wid};
  double hi[2] = {cx + half_len, cy + half_wid};
  double o[2] = {ox, oy};
  double d[2] = {dx, dy};
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(d[axis]) < 1e-12) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return -1.0;
      continue;
    }
    double ta = (lo[axis] - o[axis]) / d[axis];
    double tb = (hi[axis] - o[axis]) / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 < t0 || t1 < 0) return -1.0;
  return std::max(t0, 0.0);
}

Observation lidar_observe(const VehicleState& ego, std::span<const VehicleState> others,
                          double inflation, int sectors, const RoadGeometry& geometry,
                          const SensorParams& sensor) {
  if (sectors < 4) throw ContractError("lidar_observe: need at least 4 sectors");
  if (inflation <= 0) throw ContractError("lidar_observe: inflation must be positive");
  Observation obs;
  obs.distance.assign(static_cast<size_t>(sectors), 1.0);
  obs.rel_speed.assign(static_cast<size_t>(sectors), 0.0);

  double ox = ego.position;
  double oy = ego.lateral(geometry);
  for (int k = 0; k < sectors; ++k) {
    double theta = 2.0 * std::numbers::pi * k / sectors;
    double dx = std::cos(theta);
    double dy = std::sin(theta);
    double best = sensor.range;
    const VehicleState* hit = nullptr;
    for (const auto& v : others) {
      if (&v == &ego) continue;
      double t = ray_box_distance(ox, oy, dx, dy, v.position, v.lateral(geometry),
                                  inflation * 0.5 * v.length, inflation * 0.5 * kVehicleWidth);
      if (t >= 0 && t < best) {
        best = t;
        hit = &v;
      }
    }
    if (hit) {
      obs.distance[static_cast<size_t>(k)] = best / sensor.range;
      obs.rel_speed[static_cast<size_t>(k)] =
          std::clamp((hit->speed - ego.speed) / sensor.v_max, -1.0, 1.0);
    }
  }
  obs.ego_speed_norm = std::clamp(ego.speed / sensor.v_max, 0.0, 1.0);
  obs.ego_lane_norm =
      geometry.lane_count > 1 ? static_cast<double>(ego.lane) / (geometry.lane_count - 1) : 0.0;
  int merge = geometry.merge_lane();
  obs.merging_flag = (merge >= 0 && ego.lane == merge) ? 1.0 : 0.0;
  return obs;
}

std::vector<double> Observation::to_vector() const {
  std::vector<double> v;
  v.reserve(distance.size() * 2 + 3);
  v.insert(v.end(), distance.begin(), distance.end());
  v.insert(v.end(), rel_speed.begin(), rel_speed.end());
  v.push_back(ego_speed_norm);
  v.push_back(ego_lane_norm);
  v.push_back(merging_flag);
  return v;
}

bool vehicles_collide(const VehicleState& a, const VehicleState& b) {
  bool share = b.occupies_lane(a.lane) || (a.changing_lane() && b.occupies_lane(a.target_lane));
  if (!share) return false;
  return std::abs(a.position - b.position) < 0.5 * (a.length + b.length);
}

}  // namespace hmiway
