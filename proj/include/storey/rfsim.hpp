#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "storey/geo.hpp"
#include "storey/scan.hpp"

namespace storey {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

enum class ApPlacement { Random, Grid };

// Multistory building with rectangular floors anchored at `origin` (the
// south-west corner of every footprint).
struct BuildingSpec {
  std::string building_id = "synthetic";
  int floors = 1;
  double floor_height_m = 3.5;
  double width_m = 50.0;  // east-west
  double depth_m = 30.0;  // north-south
  // Optional per-floor (width, depth); overrides the shared footprint.
  std::vector<std::pair<double, double>> floor_footprints;
  std::vector<int> aps_per_floor;
  ApPlacement placement = ApPlacement::Random;
  // Optional explicit local AP positions per floor; overrides the counts.
  std::vector<std::vector<Vec2>> explicit_aps;
  double ap_margin_m = 1.0;
  double ap_height_m = 2.5;      // above the floor slab
  double device_height_m = 1.2;  // above the floor slab
  GeoPoint origin{38.9897, -76.9378};
  std::uint64_t seed = 1;
};

// Registry plus the vertical geometry the propagation model needs.
struct SimBuilding {
  ApRegistry registry;
  double floor_height_m = 3.5;
  double ap_height_m = 2.5;
  double device_height_m = 1.2;

  Vec3 ap_position(std::size_t index) const;
  Vec3 device_position(Vec2 xy, int floor) const;
};

// Throws Error(InvalidArgument) when the spec is invalid or an explicit AP
// lies outside its footprint.
SimBuilding generate_building(const BuildingSpec& spec);

// Emulates an existing registry with the given vertical geometry.
SimBuilding emulate_registry(ApRegistry registry, double floor_height_m = 3.5, double ap_height_m = 2.5,
                             double device_height_m = 1.2);

struct PropagationParams {
  double reference_power_dbm = -40.0;  // at 1 m
  double path_loss_exponent = 3.0;
  double floor_loss_db = 15.0;
  double shadowing_sigma_db = 4.0;
  double detection_threshold_dbm = -90.0;
  double rolloff_db = 3.0;  // 0 gives a hard cut at the threshold
  double device_offset_db = 0.0;
  int virtual_aps = 1;  // >1 emits that many virtual MACs per physical AP
  double virtual_sigma_db = 1.0;
  // Optional extra loss between an AP and the device (walls).
  std::function<double(const Vec3& ap, const Vec3& device)> wall_loss;

  void validate() const;
};

// Deterministic part of the model: log-distance path loss plus per-floor
// loss.
double mean_rss(double distance_3d, int floor_delta, const PropagationParams& params);

// One draw of the model. Consumes exactly two variates from `rng` (shadowing
// and detection) so streams stay aligned across calls. Returns nullopt when
// the AP is not heard. Visible values are clamped to >= -100 dBm.
std::optional<double> simulate_rss(const Vec3& ap, int ap_floor, const Vec3& device, int device_floor,
                                   const PropagationParams& params, std::mt19937_64& rng);

struct TrajectorySegment {
  int floor = 1;
  std::vector<Vec2> waypoints;  // local meters
  double dwell_s = 0.0;         // time held at the first waypoint
};

struct Trajectory {
  std::vector<TrajectorySegment> segments;
  double speed_mps = 1.2;
  double scan_interval_s = 2.0;
  double start_time_s = 0.0;

  double duration() const;
  // Floor and position at time `t` (seconds since start).
  std::pair<int, Vec2> at(double t) const;
};

struct TruthFix {
  double t = 0.0;
  int floor = 1;
  GeoPoint point;
  Vec2 local;
};

struct SimTrace {
  std::vector<WifiScan> scans;
  std::vector<TruthFix> truth;  // one per scan
};

// Throws Error(InvalidArgument) when a waypoint leaves its floor.
SimTrace generate_trace(const SimBuilding& building, const Trajectory& trajectory, const PropagationParams& params,
                        std::uint64_t seed);

// Uniform point inside a floor's polygon.
Vec2 random_point_on_floor(const ApRegistry& registry, int floor, std::mt19937_64& rng, double margin_m = 0.5);

// Random-waypoint walk on one floor.
TrajectorySegment random_walk(const ApRegistry& registry, int floor, int waypoints, std::mt19937_64& rng);

}  // namespace storey
