#include "storey/rfsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "storey/error.hpp"

namespace storey {

namespace {

constexpr double kMinRssDbm = -100.0;
constexpr std::uint64_t kSyntheticOui = 0x020000000000ULL;  // locally administered

std::vector<Vec2> grid_positions(int count, double width, double depth) {
  std::vector<Vec2> out;
  if (count <= 0) return out;
  const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(count * width / depth))));
  const int rows = (count + cols - 1) / cols;
  for (int r = 0; r < rows && static_cast<int>(out.size()) < count; ++r) {
    for (int c = 0; c < cols && static_cast<int>(out.size()) < count; ++c) {
      out.push_back({(c + 0.5) * width / cols, (r + 0.5) * depth / rows});
    }
  }
  return out;
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)); }

Vec3 SimBuilding::ap_position(std::size_t index) const {
  const Vec2 p = registry.local_position(index);
  return {p.x, p.y, (registry.ap(index).floor - 1) * floor_height_m + ap_height_m};
}

Vec3 SimBuilding::device_position(Vec2 xy, int floor) const {
  return {xy.x, xy.y, (floor - 1) * floor_height_m + device_height_m};
}

SimBuilding generate_building(const BuildingSpec& spec) {
  if (spec.floors < 1) throw Error(ErrorKind::InvalidArgument, "building needs at least one floor");
  if (!(spec.floor_height_m > 0.0)) throw Error(ErrorKind::InvalidArgument, "floor height must be positive");
  if (!spec.floor_footprints.empty() && static_cast<int>(spec.floor_footprints.size()) != spec.floors) {
    throw Error(ErrorKind::InvalidArgument, "floor_footprints must list every floor");
  }
  const bool explicit_layout = !spec.explicit_aps.empty();
  if (explicit_layout && static_cast<int>(spec.explicit_aps.size()) != spec.floors) {
    throw Error(ErrorKind::InvalidArgument, "explicit_aps must list every floor");
  }
  if (!explicit_layout && static_cast<int>(spec.aps_per_floor.size()) != spec.floors) {
    throw Error(ErrorKind::InvalidArgument, "aps_per_floor must list every floor");
  }

  const LocalFrame frame(spec.origin);
  std::mt19937_64 rng(spec.seed);
  std::vector<std::vector<GeoPoint>> outlines;
  std::vector<AccessPoint> aps;
  for (int f = 1; f <= spec.floors; ++f) {
    const auto [width, depth] = spec.floor_footprints.empty()
                                    ? std::pair{spec.width_m, spec.depth_m}
                                    : spec.floor_footprints[static_cast<std::size_t>(f - 1)];
    if (!(width > 0.0 && depth > 0.0)) throw Error(ErrorKind::InvalidArgument, "footprint must be positive");
    outlines.push_back({frame.to_geo({0, 0}), frame.to_geo({width, 0}), frame.to_geo({width, depth}),
                        frame.to_geo({0, depth})});

    std::vector<Vec2> positions;
    if (explicit_layout) {
      positions = spec.explicit_aps[static_cast<std::size_t>(f - 1)];
    } else {
      const int count = spec.aps_per_floor[static_cast<std::size_t>(f - 1)];
      if (count < 0) throw Error(ErrorKind::InvalidArgument, "AP count must be non-negative");
      if (spec.placement == ApPlacement::Grid) {
        positions = grid_positions(count, width, depth);
      } else {
        const double m = std::min({spec.ap_margin_m, width / 2.0, depth / 2.0});
        std::uniform_real_distribution<double> ux(m, width - m);
        std::uniform_real_distribution<double> uy(m, depth - m);
        for (int i = 0; i < count; ++i) {
          const double x = ux(rng);
          positions.push_back({x, uy(rng)});
        }
      }
    }
    for (const Vec2& p : positions) {
      if (p.x < 0.0 || p.x > width || p.y < 0.0 || p.y > depth) {
        std::ostringstream os;
        os << "AP at (" << p.x << ", " << p.y << ") lies outside floor " << f << " footprint";
        throw Error(ErrorKind::InvalidArgument, os.str());
      }
      const std::uint64_t serial = aps.size() + 1;
      aps.push_back({Mac(kSyntheticOui | (serial << 4)), f, frame.to_geo(p)});
    }
  }

  SimBuilding out{ApRegistry(spec.building_id, spec.floors, std::move(outlines), std::move(aps), spec.origin),
                  spec.floor_height_m, spec.ap_height_m, spec.device_height_m};
  return out;
}

SimBuilding emulate_registry(ApRegistry registry, double floor_height_m, double ap_height_m, double device_height_m) {
  return SimBuilding{std::move(registry), floor_height_m, ap_height_m, device_height_m};
}

void PropagationParams::validate() const {
  const bool ok = path_loss_exponent > 0.0 && shadowing_sigma_db >= 0.0 && rolloff_db >= 0.0 &&
                  detection_threshold_dbm < reference_power_dbm && virtual_aps >= 1 && virtual_aps <= 15 &&
                  virtual_sigma_db >= 0.0 && floor_loss_db >= 0.0;
  if (!ok) throw Error(ErrorKind::InvalidArgument, "invalid propagation parameters");
}

double mean_rss(double distance_3d, int floor_delta, const PropagationParams& params) {
  return params.reference_power_dbm - 10.0 * params.path_loss_exponent * std::log10(std::max(distance_3d, 1.0)) -
         params.floor_loss_db * std::abs(floor_delta);
}

std::optional<double> simulate_rss(const Vec3& ap, int ap_floor, const Vec3& device, int device_floor,
                                   const PropagationParams& params, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double shadow = gauss(rng);
  const double u = unit(rng);

  double rss = mean_rss(distance(ap, device), device_floor - ap_floor, params) + params.shadowing_sigma_db * shadow;
  if (params.wall_loss) rss -= params.wall_loss(ap, device);
  if (rss < params.detection_threshold_dbm) return std::nullopt;
  if (params.rolloff_db > 0.0) {
    const double p_detect = std::tanh((rss - params.detection_threshold_dbm) / (2.0 * params.rolloff_db));
    if (u >= p_detect) return std::nullopt;
  }
  return std::max(rss + params.device_offset_db, kMinRssDbm);
}

double Trajectory::duration() const {
  double total = 0.0;
  for (const TrajectorySegment& s : segments) {
    total += s.dwell_s;
    for (std::size_t i = 1; i < s.waypoints.size(); ++i) total += distance(s.waypoints[i - 1], s.waypoints[i]) / speed_mps;
  }
  return total;
}

std::pair<int, Vec2> Trajectory::at(double t) const {
  if (segments.empty()) throw Error(ErrorKind::InvalidArgument, "trajectory has no segments");
  double remaining = std::max(t, 0.0);
  for (const TrajectorySegment& s : segments) {
    if (s.waypoints.empty()) throw Error(ErrorKind::InvalidArgument, "trajectory segment has no waypoints");
    if (remaining <= s.dwell_s) return {s.floor, s.waypoints.front()};
    remaining -= s.dwell_s;
    for (std::size_t i = 1; i < s.waypoints.size(); ++i) {
      const double leg = distance(s.waypoints[i - 1], s.waypoints[i]) / speed_mps;
      if (remaining <= leg) {
        const double frac = leg > 0.0 ? remaining / leg : 1.0;
        return {s.floor, s.waypoints[i - 1] + frac * (s.waypoints[i] - s.waypoints[i - 1])};
      }
      remaining -= leg;
    }
  }
  return {segments.back().floor, segments.back().waypoints.back()};
}

SimTrace generate_trace(const SimBuilding& building, const Trajectory& trajectory, const PropagationParams& params,
                        std::uint64_t seed) {
  params.validate();
  if (!(trajectory.speed_mps > 0.0) || !(trajectory.scan_interval_s > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "trajectory speed and scan interval must be positive");
  }
  const ApRegistry& registry = building.registry;
  for (const TrajectorySegment& s : trajectory.segments) {
    if (s.floor < 1 || s.floor > registry.floor_count()) {
      throw Error(ErrorKind::InvalidArgument, "trajectory floor " + std::to_string(s.floor) + " not in building");
    }
    for (const Vec2& p : s.waypoints) {
      if (!registry.floor_polygon(s.floor).contains(p, 1e-6)) {
        throw Error(ErrorKind::InvalidArgument, "trajectory waypoint outside floor " + std::to_string(s.floor));
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SimTrace trace;
  const double total = trajectory.duration();
  const auto steps = static_cast<long>(std::floor(total / trajectory.scan_interval_s + 1e-9));
  for (long k = 0; k <= steps; ++k) {
    const double elapsed = static_cast<double>(k) * trajectory.scan_interval_s;
    const auto [floor, xy] = trajectory.at(elapsed);
    const Vec3 device = building.device_position(xy, floor);
    WifiScan scan;
    scan.timestamp = trajectory.start_time_s + elapsed;
    for (std::size_t i = 0; i < registry.aps().size(); ++i) {
      const auto rss = simulate_rss(building.ap_position(i), registry.ap(i).floor, device, floor, params, rng);
      if (!rss) continue;
      const Mac mac = registry.ap(i).mac;
      if (params.virtual_aps == 1) {
        scan.observations.push_back({mac, *rss});
        continue;
      }
      for (int v = 1; v <= params.virtual_aps; ++v) {
        const double jitter = params.virtual_sigma_db * gauss(rng);
        scan.observations.push_back({Mac(mac.value() | static_cast<std::uint64_t>(v)), std::max(*rss + jitter, kMinRssDbm)});
      }
    }
    trace.scans.push_back(std::move(scan));
    trace.truth.push_back({trajectory.start_time_s + elapsed, floor, registry.frame().to_geo(xy), xy});
  }
  return trace;
}

Vec2 random_point_on_floor(const ApRegistry& registry, int floor, std::mt19937_64& rng, double margin_m) {
  const Polygon2& poly = registry.floor_polygon(floor);
  const Box2 box = poly.bounds();
  const double mx = std::min(margin_m, (box.max.x - box.min.x) / 2.0);
  const double my = std::min(margin_m, (box.max.y - box.min.y) / 2.0);
  std::uniform_real_distribution<double> ux(box.min.x + mx, box.max.x - mx);
  std::uniform_real_distribution<double> uy(box.min.y + my, box.max.y - my);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double x = ux(rng);
    const Vec2 p{x, uy(rng)};
    if (poly.contains(p)) return p;
  }
  throw Error(ErrorKind::InvalidArgument, "could not sample a point on floor " + std::to_string(floor));
}

TrajectorySegment random_walk(const ApRegistry& registry, int floor, int waypoints, std::mt19937_64& rng) {
  TrajectorySegment seg;
  seg.floor = floor;
  for (int i = 0; i < std::max(waypoints, 1); ++i) seg.waypoints.push_back(random_point_on_floor(registry, floor, rng));
  return seg;
}

}  // namespace storey
