#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "storey/error.hpp"
#include "storey/floor_detect.hpp"
#include "storey/train_synth.hpp"
#include "support.hpp"

using namespace storey;

TEST_CASE("balanced synthesis has exact label counts") {
  const SimBuilding b = test::small_building(7, 8, 12);
  SynthConfig cfg;
  cfg.instances_per_floor = 500;
  cfg.seed = 3;
  const LabeledFeatureSet set = synthesize_training_set(b, cfg);
  REQUIRE(set.size() == 2000);
  std::map<int, int> counts;
  for (int l : set.labels) ++counts[l];
  CHECK(counts.size() == 4);
  for (const auto& [label, n] : counts) CHECK(n == 500);

  for (std::size_t i = 0; i < set.size(); ++i) {
    const FloorFeatureVector& f = set.features[i];
    CHECK(set.labels[i] < f.range.count);
    CHECK(f.range.first >= 1);
    CHECK(f.range.last() <= 7);
    for (int k = 0; k < f.range.count; ++k) {
      const FloorFeatures& ff = f.floors[static_cast<std::size_t>(k)];
      CHECK(ff.num >= 0);
      CHECK(ff.var >= 0);
      CHECK(ff.str >= ff.avg);
    }
    for (double v : f.flatten()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("synthesis is deterministic for a seed") {
  const SimBuilding b = test::small_building(5, 6, 2);
  SynthConfig cfg;
  cfg.instances_per_floor = 50;
  cfg.seed = 9;
  const LabeledFeatureSet a = synthesize_training_set(b, cfg);
  const LabeledFeatureSet c = synthesize_training_set(b, cfg);
  REQUIRE(a.size() == c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] == c.labels[i]);
    CHECK(a.features[i].flatten() == c.features[i].flatten());
  }
  cfg.seed = 10;
  const LabeledFeatureSet d = synthesize_training_set(b, cfg);
  CHECK(d.features[0].flatten() != a.features[0].flatten());
}

TEST_CASE("zero perturbation repeats instances at one position") {
  const SimBuilding b = test::small_building(5, 6, 2);
  SynthConfig cfg;
  cfg.sigma_db = 0.0;
  const FloorSearchRange range{1, 4, 4};
  std::mt19937_64 rng(1);
  const Vec2 pos{20, 12};
  const auto first = synthesize_instance(b, cfg, range, 2, range, pos, rng);
  const auto second = synthesize_instance(b, cfg, range, 2, range, pos, rng);
  REQUIRE(first);
  REQUIRE(second);
  CHECK(first->profile == second->profile);
  CHECK(first->features.flatten() == second->features.flatten());
}

TEST_CASE("perturbation has the configured spread") {
  const SimBuilding b = test::small_building(3, 6, 5);
  SynthConfig cfg;
  cfg.match_window_counts = false;
  const FloorSearchRange range{1, 4, 3};
  const Vec2 pos{25, 15};
  const int label = 1;
  const Vec3 device = b.device_position(pos, 2);
  // Strongest AP on the user's floor stays well inside the visible range.
  std::size_t pick = b.registry.aps_on_floor(2)[0];
  for (std::size_t idx : b.registry.aps_on_floor(2)) {
    if (distance(b.ap_position(idx), device) < distance(b.ap_position(pick), device)) pick = idx;
  }
  const double clean = mean_rss(distance(b.ap_position(pick), device), 0, cfg.emulation);
  REQUIRE(clean > -80.0);
  std::mt19937_64 rng(77);
  double sum = 0, sq = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto inst = synthesize_instance(b, cfg, range, label, range, pos, rng);
    REQUIRE(inst);
    const double d = inst->profile.rss.at(b.registry.ap(pick).mac) - clean;
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(sd - 1.5) <= 0.15);
  CHECK(std::abs(mean) < 0.1);
}

TEST_CASE("count matching keeps the strongest APs") {
  BuildingSpec spec;
  spec.floors = 2;
  spec.aps_per_floor = {10, 3};
  spec.seed = 4;
  const SimBuilding b = generate_building(spec);
  SynthConfig cfg;
  cfg.sigma_db = 0.0;
  const FloorSearchRange range{1, 4, 2};
  // Slot 0 is capped by the target's first floor, which has 3 APs.
  const FloorSearchRange small_target{2, 4, 1};
  std::mt19937_64 rng(3);
  const auto inst = synthesize_instance(b, cfg, range, 0, small_target, {25, 15}, rng);
  REQUIRE(inst);
  int on_floor1 = 0;
  double weakest_kept = 0.0;
  for (const auto& [mac, rss] : inst->profile.rss) {
    if (b.registry.ap(*b.registry.index_of(mac)).floor == 1) {
      ++on_floor1;
      weakest_kept = on_floor1 == 1 ? rss : std::min(weakest_kept, rss);
    }
  }
  CHECK(on_floor1 == 3);
  SynthConfig unmatched = cfg;
  unmatched.match_window_counts = false;
  const auto full = synthesize_instance(b, unmatched, range, 0, small_target, {25, 15}, rng);
  REQUIRE(full);
  int stronger = 0;
  for (const auto& [mac, rss] : full->profile.rss) {
    if (b.registry.ap(*b.registry.index_of(mac)).floor == 1 && rss > weakest_kept) ++stronger;
  }
  CHECK(stronger == 2);
}

TEST_CASE("natural sampling labels come from the computed range") {
  const SimBuilding b = test::small_building(8, 6, 6);
  SynthConfig cfg;
  cfg.balance = false;
  cfg.match_window_counts = false;
  cfg.sigma_db = 0.0;
  cfg.instances_per_floor = 100;
  const LabeledFeatureSet set = synthesize_training_set(b, cfg);
  CHECK(set.size() == 400);
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(set.labels[i] < set.features[i].range.count);
}

TEST_CASE("invalid configurations are rejected") {
  const SimBuilding b = test::small_building(3, 2, 1);
  SynthConfig cfg;
  cfg.instances_per_floor = 0;
  CHECK_THROWS_AS(synthesize_training_set(b, cfg), Error);
  cfg = SynthConfig{};
  cfg.sigma_db = -1;
  CHECK_THROWS_AS(synthesize_training_set(b, cfg), Error);
}

TEST_CASE("a classifier trained on synthetic data finds a clearly heard floor") {
  const SimBuilding b = test::small_building(6, 8, 21);
  SynthConfig cfg;
  cfg.instances_per_floor = 300;
  cfg.seed = 2;
  const LabeledFeatureSet set = synthesize_training_set(b, cfg);
  FloorClassifier model = FloorClassifier::make(4, 5);
  TrainConfig tc;
  tc.epochs = 15;
  model.network = train(model.network, set.to_dataset(model.normalization), tc).model;

  PropagationParams clean = clean_emulation_params();
  std::mt19937_64 rng(8);
  int hits = 0, total = 0;
  for (int floor = 1; floor <= 6; ++floor) {
    for (int k = 0; k < 10; ++k) {
      const Vec2 pos = random_point_on_floor(b.registry, floor, rng);
      WifiProfile p;
      for (std::size_t idx = 0; idx < b.registry.aps().size(); ++idx) {
        const auto rss = simulate_rss(b.ap_position(idx), b.registry.ap(idx).floor, b.device_position(pos, floor), floor,
                                      clean, rng);
        if (rss) p.rss[b.registry.ap(idx).mac] = *rss;
      }
      const FloorEstimate est = detect_floor(p, b.registry, model);
      hits += est.floor == floor ? 1 : 0;
      ++total;
    }
  }
  CHECK(hits >= total * 9 / 10);
}
