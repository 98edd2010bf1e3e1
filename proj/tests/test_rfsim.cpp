#include <doctest.h>

#include <cmath>
#include <random>

#include "storey/error.hpp"
#include "storey/rfsim.hpp"
#include "support.hpp"

using namespace storey;

namespace {

PropagationParams noiseless() {
  PropagationParams p;
  p.shadowing_sigma_db = 0.0;
  p.rolloff_db = 0.0;
  return p;
}

BuildingSpec nine_floor_building() {
  BuildingSpec spec;
  spec.building_id = "nine_floor_building";
  spec.floors = 9;
  spec.width_m = 60;
  spec.depth_m = 40;
  spec.aps_per_floor = {8, 12, 10, 11, 11, 10, 9, 12, 17};
  spec.seed = 98;
  return spec;
}

}  // namespace

TEST_CASE("path loss formula") {
  const PropagationParams p = noiseless();
  CHECK(mean_rss(1.0, 0, p) == -40.0);
  CHECK(mean_rss(0.2, 0, p) == -40.0);
  CHECK(mean_rss(10.0, 0, p) == doctest::Approx(-70.0));
  CHECK(mean_rss(10.0, 2, p) == doctest::Approx(mean_rss(10.0, 0, p) - 30.0));
  CHECK(mean_rss(10.0, -2, p) == mean_rss(10.0, 2, p));

  std::mt19937_64 rng(1);
  const auto v = simulate_rss({0, 0, 0}, 1, {10, 0, 0}, 1, p, rng);
  REQUIRE(v);
  CHECK(*v == doctest::Approx(-70.0));
  CHECK_FALSE(simulate_rss({0, 0, 0}, 1, {500, 0, 0}, 1, p, rng));
}

TEST_CASE("rss is monotone and visibility nests without shadowing") {
  const PropagationParams p = noiseless();
  std::mt19937_64 rng(2);
  double prev = 1e9;
  bool was_visible = true;
  for (double d = 1.0; d < 200.0; d += 0.5) {
    const auto v = simulate_rss({0, 0, 0}, 1, {d, 0, 0}, 1, p, rng);
    if (d > 1.0 && v) CHECK(*v < prev);
    if (v) prev = *v;
    if (!was_visible) CHECK_FALSE(v);
    was_visible = v.has_value();
  }
  for (int df = 0; df < 4; ++df) CHECK(mean_rss(7.0, df + 1, p) < mean_rss(7.0, df, p));
}

TEST_CASE("visible values are clamped") {
  PropagationParams p = noiseless();
  p.detection_threshold_dbm = -150;
  std::mt19937_64 rng(3);
  const auto v = simulate_rss({0, 0, 0}, 1, {0, 0, 0}, 8, p, rng);
  REQUIRE(v);
  CHECK(*v == -100.0);
}

TEST_CASE("nine-floor layout") {
  const SimBuilding b = generate_building(nine_floor_building());
  const int want[] = {8, 12, 10, 11, 11, 10, 9, 12, 17};
  CHECK(b.registry.floor_count() == 9);
  CHECK(b.registry.aps().size() == 100);
  for (int f = 1; f <= 9; ++f) CHECK(b.registry.aps_on_floor(f).size() == static_cast<std::size_t>(want[f - 1]));
  for (const AccessPoint& ap : b.registry.aps()) CHECK((ap.mac.value() & 0xf) == 0);
  for (std::size_t i = 0; i < b.registry.aps().size(); ++i) {
    CHECK(b.registry.floor_polygon(b.registry.ap(i).floor).contains(b.registry.local_position(i)));
  }

  const SimBuilding again = generate_building(nine_floor_building());
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(b.registry.ap(i).mac == again.registry.ap(i).mac);
    CHECK(b.registry.ap(i).location == again.registry.ap(i).location);
  }

  BuildingSpec one;
  one.aps_per_floor = {1};
  CHECK(generate_building(one).registry.aps().size() == 1);

  BuildingSpec bad;
  bad.explicit_aps = {{{60, 5}}};
  CHECK_THROWS_AS(generate_building(bad), Error);
  bad = BuildingSpec{};
  bad.floors = 0;
  CHECK_THROWS_AS(generate_building(bad), Error);
}

TEST_CASE("trace determinism and stationary scans") {
  const SimBuilding b = test::small_building(3, 8, 4);
  Trajectory traj;
  std::mt19937_64 rng(5);
  traj.segments = {random_walk(b.registry, 2, 4, rng)};
  const PropagationParams p;
  const SimTrace a = generate_trace(b, traj, p, 7);
  const SimTrace c = generate_trace(b, traj, p, 7);
  REQUIRE(a.scans.size() == c.scans.size());
  for (std::size_t i = 0; i < a.scans.size(); ++i) {
    CHECK(a.scans[i] == c.scans[i]);
    CHECK(a.truth[i].local == c.truth[i].local);
  }
  for (std::size_t i = 1; i < a.scans.size(); ++i) CHECK(a.scans[i].timestamp - a.scans[i - 1].timestamp == 2.0);

  Trajectory still;
  still.segments = {{1, {{10, 10}}, 60.0}};
  const SimTrace s = generate_trace(b, still, noiseless(), 9);
  CHECK(s.scans.size() == 31);
  for (const WifiScan& scan : s.scans) CHECK(scan.observations == s.scans.front().observations);

  Trajectory outside;
  outside.segments = {{1, {{10, 10}, {80, 10}}, 0.0}};
  CHECK_THROWS_AS(generate_trace(b, outside, p, 1), Error);
}

TEST_CASE("virtual APs share the physical prefix") {
  const SimBuilding b = test::small_building(1, 3, 6);
  Trajectory traj;
  traj.segments = {{1, {{20, 15}}, 4.0}};
  PropagationParams p;
  p.virtual_aps = 3;
  const SimTrace t = generate_trace(b, traj, p, 1);
  for (const WifiScan& scan : t.scans) {
    CHECK(scan.observations.size() % 3 == 0);
    for (const WifiObservation& o : scan.observations) CHECK(b.registry.index_of(canonicalize_mac(o.mac)));
  }
}

TEST_CASE("same floor is heard more than two floors away") {
  const SimBuilding b = generate_building(nine_floor_building());
  std::mt19937_64 rng(10);
  const PropagationParams p;
  double same = 0, far = 0;
  for (int k = 0; k < 1000; ++k) {
    const int floor = 3 + static_cast<int>(rng() % 5);
    const Vec3 dev = b.device_position(random_point_on_floor(b.registry, floor, rng), floor);
    for (std::size_t i = 0; i < b.registry.aps().size(); ++i) {
      const int af = b.registry.ap(i).floor;
      const auto v = simulate_rss(b.ap_position(i), af, dev, floor, p, rng);
      if (!v) continue;
      if (af == floor) same += 1;
      if (std::abs(af - floor) == 2) far += 1;
    }
  }
  CHECK(same / 1000 > far / 1000);
}

TEST_CASE("almost every visible observation is within four floors") {
  const SimBuilding b = generate_building(nine_floor_building());
  std::mt19937_64 rng(11);
  std::size_t within = 0, total = 0;
  for (int w = 0; w < 9; ++w) {
    Trajectory traj;
    traj.segments = {random_walk(b.registry, w + 1, 5, rng)};
    const SimTrace t = generate_trace(b, traj, PropagationParams{}, 100 + static_cast<std::uint64_t>(w));
    for (std::size_t s = 0; s < t.scans.size(); ++s) {
      for (const WifiObservation& o : t.scans[s].observations) {
        const int af = b.registry.ap(*b.registry.index_of(o.mac)).floor;
        within += std::abs(af - t.truth[s].floor) <= 4;
        ++total;
      }
    }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(within) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("propagation params validation") {
  PropagationParams p;
  p.detection_threshold_dbm = -30;
  CHECK_THROWS_AS(p.validate(), Error);
  p = PropagationParams{};
  p.path_loss_exponent = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = PropagationParams{};
  p.shadowing_sigma_db = -1;
  CHECK_THROWS_AS(p.validate(), Error);
}
