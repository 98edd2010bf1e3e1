#pragma once

#include <random>
#include <vector>

#include "storey/engine.hpp"
#include "storey/loc2d.hpp"
#include "storey/rfsim.hpp"
#include "storey/scan.hpp"

namespace storey::test {

inline SimBuilding small_building(int floors, int aps_per_floor, std::uint64_t seed, double width = 50.0,
                                  double depth = 30.0) {
  BuildingSpec spec;
  spec.floors = floors;
  spec.width_m = width;
  spec.depth_m = depth;
  spec.aps_per_floor.assign(static_cast<std::size_t>(floors), aps_per_floor);
  spec.seed = seed;
  return generate_building(spec);
}

// Random profile over a subset of the registry's APs.
inline WifiProfile random_profile(const ApRegistry& registry, std::mt19937_64& rng, double visible_fraction = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> rss(-99.0, -30.0);
  WifiProfile p;
  for (const AccessPoint& ap : registry.aps()) {
    if (u(rng) < visible_fraction) p.rss[ap.mac] = rss(rng);
  }
  if (p.empty()) p.rss[registry.ap(rng() % registry.aps().size()).mac] = rss(rng);
  return p;
}

// Walks `walks` random routes on every floor.
inline SimTrace random_walk_trace(const SimBuilding& b, int walks, int waypoints, const PropagationParams& params,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Trajectory traj;
  for (int k = 0; k < walks; ++k) {
    for (int f = 1; f <= b.registry.floor_count(); ++f) {
      TrajectorySegment seg = random_walk(b.registry, f, waypoints, rng);
      seg.dwell_s = 4.0;
      traj.segments.push_back(std::move(seg));
    }
  }
  return generate_trace(b, traj, params, seed);
}

inline std::vector<int> floors_of(const SimTrace& t) {
  std::vector<int> out;
  for (const TruthFix& f : t.truth) out.push_back(f.floor);
  return out;
}

// Rank model fitted on a separate simulated walk through the same building.
inline RankGaussianModel simulated_rank_model(const SimBuilding& b, const PropagationParams& params,
                                              std::uint64_t seed, double nl = 15.0, double wf = 15.0) {
  const SimTrace t = random_walk_trace(b, 12, 8, params, seed);
  const auto samples = collect_distance_samples(b.registry, t.scans, t.truth, nl, wf);
  return fit_rank_model(samples, 0.8, "simulated");
}

}  // namespace storey::test
