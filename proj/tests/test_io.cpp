#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "storey/error.hpp"
#include "storey/io.hpp"
#include "support.hpp"

using namespace storey;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "storey_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

// Parse or schema: both map to the input-error exit code.
bool rejects_input(const std::function<void()>& f) {
  const ErrorKind k = kind_of(f);
  return k == ErrorKind::Parse || k == ErrorKind::Schema;
}

}  // namespace

TEST_CASE("registry round trip") {
  const SimBuilding b = test::small_building(3, 5, 21);
  const fs::path path = scratch("registry.json");
  io::write_json(path, io::registry_to_json(b.registry));
  const ApRegistry back = io::registry_from_json(io::read_json(path));
  CHECK(back.building_id() == b.registry.building_id());
  CHECK(back.floor_count() == 3);
  REQUIRE(back.aps().size() == b.registry.aps().size());
  for (std::size_t i = 0; i < back.aps().size(); ++i) {
    CHECK(back.ap(i).mac == b.registry.ap(i).mac);
    CHECK(back.ap(i).floor == b.registry.ap(i).floor);
    CHECK(back.ap(i).location == b.registry.ap(i).location);
  }
  for (int f = 1; f <= 3; ++f) CHECK(back.floor_outline(f) == b.registry.floor_outline(f));
  CHECK(back.frame().anchor() == b.registry.frame().anchor());
  CHECK(io::registry_to_json(back) == io::registry_to_json(b.registry));
}

TEST_CASE("registry schema errors") {
  const SimBuilding b = test::small_building(1, 2, 1);
  io::Json doc = io::registry_to_json(b.registry);
  io::Json bad = doc;
  bad.erase("schema_version");
  CHECK(kind_of([&] { io::registry_from_json(bad); }) == ErrorKind::Schema);
  bad = doc;
  bad["schema_version"] = 99;
  CHECK(kind_of([&] { io::registry_from_json(bad); }) == ErrorKind::Schema);
  bad = doc;
  bad["aps"][0]["mac"] = "zz:00:00:00:00:00";
  CHECK(rejects_input([&] { io::registry_from_json(bad); }));
  bad = doc;
  bad["aps"][0]["floor"] = 7;
  CHECK(kind_of([&] { io::registry_from_json(bad); }) == ErrorKind::Schema);
  bad = doc;
  bad["floor_count"] = "one";
  CHECK(kind_of([&] { io::registry_from_json(bad); }) == ErrorKind::Schema);
  CHECK(kind_of([&] { io::parse_json("{\"a\": ", "x"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { io::read_json(scratch("missing/none.json")); }) == ErrorKind::Io);
}

TEST_CASE("trace round trip") {
  const SimBuilding b = test::small_building(2, 6, 3);
  Trajectory traj;
  std::mt19937_64 rng(1);
  traj.segments = {random_walk(b.registry, 1, 3, rng), random_walk(b.registry, 2, 3, rng)};
  const SimTrace trace = generate_trace(b, traj, PropagationParams{}, 4);
  const fs::path path = scratch("trace.jsonl");
  io::write_trace(path, trace);
  const auto records = io::read_trace(path);
  const SimTrace back = io::to_sim_trace(records);
  REQUIRE(back.scans.size() == trace.scans.size());
  for (std::size_t i = 0; i < back.scans.size(); ++i) {
    CHECK(back.scans[i] == trace.scans[i]);
    CHECK(back.truth[i].floor == trace.truth[i].floor);
    CHECK(back.truth[i].point == trace.truth[i].point);
    CHECK(back.truth[i].t == trace.truth[i].t);
  }

  std::vector<io::TraceRecord> partial(records.begin(), records.end());
  partial[1].truth.reset();
  CHECK(kind_of([&] { io::to_sim_trace(partial); }) == ErrorKind::Schema);

  std::vector<io::Json> lines = {io::parse_json(R"({"t": 5, "observations": []})"),
                                 io::parse_json(R"({"t": 5, "observations": []})")};
  io::write_json_lines(scratch("dup.jsonl"), lines);
  CHECK(kind_of([&] { io::read_trace(scratch("dup.jsonl")); }) == ErrorKind::Schema);
  CHECK(rejects_input([&] { io::trace_line_from_json(io::parse_json(R"({"t": 1, "observations": [{"mac": "nope", "rss": -50}]})")); }));
}

TEST_CASE("fixes round trip") {
  std::vector<FixRecord> fixes = {{1.5, 2, GeoPoint(38.99, -76.93), 4.25}, {3.0, 1, std::nullopt, std::nullopt}};
  const fs::path path = scratch("fixes.jsonl");
  io::write_fixes(path, fixes);
  CHECK(io::read_fixes(path) == fixes);
}

TEST_CASE("model round trips") {
  FloorClassifier fc = FloorClassifier::make(4, 17);
  fc.normalization.variance_scale = 1.0 / 300.0;
  const FloorClassifier fb = io::floor_model_from_json(io::parse_json(io::floor_model_to_json(fc).dump()));
  CHECK(fb.width == 4);
  CHECK(fb.network == fc.network);
  CHECK(fb.normalization == fc.normalization);

  io::Json broken = io::floor_model_to_json(fc);
  broken["layers"][0]["weights"].erase(0);
  CHECK(kind_of([&] { io::floor_model_from_json(broken); }) == ErrorKind::Schema);
  broken = io::floor_model_to_json(fc);
  broken["feature_order"][0] = "str";
  CHECK(kind_of([&] { io::floor_model_from_json(broken); }) == ErrorKind::Schema);

  RankGaussianModel rm;
  const double means[kRankCount] = {31.5, 22, 14.25, 8, 4, 1.5};
  for (int r = 0; r < kRankCount; ++r) rm.ranks[static_cast<std::size_t>(r)] = {means[r], 1.0 + r, static_cast<std::size_t>(40 + r)};
  rm.provenance = "simulated";
  CHECK(io::rank_model_from_json(io::parse_json(io::rank_model_to_json(rm).dump())) == rm);

  QualityModel qm;
  qm.weights = {0.1, -0.2, 0.3, 1e-3};
  qm.intercept = 2.5;
  CHECK(io::quality_model_from_json(io::parse_json(io::quality_model_to_json(qm).dump())) == qm);
  io::Json wrong = io::quality_model_to_json(qm);
  wrong["kind"] = "rank-gaussian";
  CHECK(kind_of([&] { io::quality_model_from_json(wrong); }) == ErrorKind::Schema);
}

TEST_CASE("dataset and sample round trips") {
  const SimBuilding b = test::small_building(6, 5, 2);
  SynthConfig cfg;
  cfg.instances_per_floor = 5;
  cfg.width = 3;
  const LabeledFeatureSet data = synthesize_training_set(b, cfg);
  const LabeledFeatureSet back = io::dataset_from_json(io::parse_json(io::dataset_to_json(data).dump()));
  CHECK(back.width == data.width);
  CHECK(back.labels == data.labels);
  REQUIRE(back.features.size() == data.features.size());
  for (std::size_t i = 0; i < back.features.size(); ++i) {
    CHECK(back.features[i].flatten() == data.features[i].flatten());
    CHECK(back.features[i].range.first == data.features[i].range.first);
    CHECK(back.features[i].range.count == data.features[i].range.count);
    CHECK(back.features[i].alpha == data.features[i].alpha);
  }
  const DistanceSample s{12.75, -63.5};
  const DistanceSample t = io::distance_sample_from_json(io::distance_sample_to_json(s));
  CHECK(t.distance_m == s.distance_m);
  CHECK(t.rss == s.rss);
}

TEST_CASE("config round trips") {
  BuildingSpec spec;
  spec.floors = 4;
  spec.aps_per_floor = {3, 4, 5, 6};
  spec.placement = ApPlacement::Grid;
  spec.seed = 77;
  const BuildingSpec sb = io::building_spec_from_json(io::building_spec_to_json(spec));
  CHECK(io::building_spec_to_json(sb) == io::building_spec_to_json(spec));

  PropagationParams pp;
  pp.floor_loss_db = 12;
  pp.shadowing_sigma_db = 2.5;
  CHECK(io::propagation_to_json(io::propagation_from_json(io::propagation_to_json(pp))) == io::propagation_to_json(pp));

  Trajectory tr;
  tr.speed_mps = 1.4;
  tr.segments = {{2, {{1, 2}, {3, 4}}, 10.0}};
  CHECK(io::trajectory_to_json(io::trajectory_from_json(io::trajectory_to_json(tr))) == io::trajectory_to_json(tr));

  SynthConfig sc;
  sc.sigma_db = 0.0;
  sc.balance = false;
  CHECK(io::synth_config_to_json(io::synth_config_from_json(io::synth_config_to_json(sc))) == io::synth_config_to_json(sc));

  TrainConfig tc;
  tc.epochs = 7;
  CHECK(io::train_config_to_json(io::train_config_from_json(io::train_config_to_json(tc))) == io::train_config_to_json(tc));

  io::Json bad = io::train_config_to_json(tc);
  bad["batch_size"] = 0;
  CHECK(kind_of([&] { io::train_config_from_json(bad); }) == ErrorKind::Schema);
}

TEST_CASE("metrics round trip and csv") {
  MetricsReport r;
  r.fixes = 4;
  r.exact_floor_pct = 75;
  r.floor_error_counts = {{0, 3}, {1, 1}};
  r.located = 4;
  r.errors_m = {0.5, 1.0, 2.0, 8.0};
  r.error_p50_m = 1.5;
  r.error_p75_m = 3.5;
  r.error_p90_m = 6.2;
  r.config = {{"nf_s", "120"}};
  CHECK(io::metrics_from_json(io::parse_json(io::metrics_to_json(r).dump())) == r);
  CHECK(io::cdf_csv(r) == "error_m,cdf\n0.5,0.25\n1,0.5\n2,0.75\n8,1\n");
  const std::vector<EpochStats> curve = {{1, 0.5, 0.25}};
  CHECK(io::loss_curve_csv(curve) == "epoch,train_loss,validation_loss\n1,0.5,0.25\n");
}

TEST_CASE("evaluate examples") {
  const LocalFrame frame(GeoPoint(38.9897, -76.9378));
  std::vector<TruthFix> truth;
  std::vector<FixRecord> fixes;
  for (int i = 0; i < 10; ++i) {
    const Vec2 p{1.0 * i, 2.0};
    truth.push_back({2.0 * i, 1 + i % 3, frame.to_geo(p), p});
    fixes.push_back({2.0 * i, 1 + i % 3, frame.to_geo(p), 1.0});
  }
  const MetricsReport same = evaluate(fixes, truth);
  CHECK(same.exact_floor_pct == 100.0);
  CHECK(same.error_p50_m < 1e-6);
  CHECK(same.fixes == 10);

  fixes[0].floor = 3;
  fixes[1].floor = 1;
  fixes[2].point.reset();
  fixes.push_back({99.0, 1, std::nullopt, std::nullopt});
  const MetricsReport r = evaluate(fixes, truth);
  CHECK(r.fixes == 10);
  CHECK(r.unmatched == 1);
  CHECK(r.exact_floor_pct == 80.0);
  CHECK(r.floor_error_counts.at(2) == 1);
  CHECK(r.floor_error_counts.at(1) == 1);
  CHECK(r.located == 9);
}

TEST_CASE("evaluate equals an independent recomputation") {
  std::mt19937_64 rng(33);
  const LocalFrame frame(GeoPoint(38.9897, -76.9378));
  std::uniform_real_distribution<double> u(0, 60), noise(-8, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<TruthFix> truth;
    std::vector<FixRecord> fixes;
    std::vector<double> errors;
    std::size_t exact = 0;
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 p{u(rng), u(rng)};
      const int tf = 1 + static_cast<int>(rng() % 5);
      const int ff = std::clamp(tf + static_cast<int>(rng() % 3) - 1, 1, 5);
      truth.push_back({static_cast<double>(i), tf, frame.to_geo(p), p});
      const GeoPoint est = frame.to_geo({p.x + noise(rng), p.y + noise(rng)});
      fixes.push_back({static_cast<double>(i), ff, est, std::nullopt});
      exact += ff == tf;
      ++counts[std::abs(ff - tf)];
      errors.push_back(oracle::haversine(est.lat(), est.lon(), truth.back().point.lat(), truth.back().point.lon()));
    }
    const MetricsReport r = evaluate(fixes, truth);
    CHECK(std::abs(r.exact_floor_pct - 100.0 * static_cast<double>(exact) / static_cast<double>(n)) < 1e-9);
    CHECK(r.floor_error_counts == counts);
    CHECK(std::abs(r.error_p50_m - oracle::percentile(errors, 0.5)) < 1e-9);
    CHECK(std::abs(r.error_p75_m - oracle::percentile(errors, 0.75)) < 1e-9);
    CHECK(std::abs(r.error_p90_m - oracle::percentile(errors, 0.9)) < 1e-9);
    CHECK(r.error_p50_m <= r.error_p75_m);
    CHECK(r.error_p75_m <= r.error_p90_m);
  }
}

TEST_CASE("pearson correlation") {
  const std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 6, 8}, c = {4, 3, 2, 1};
  CHECK(pearson_correlation(a, b) == doctest::Approx(1.0));
  CHECK(pearson_correlation(a, c) == doctest::Approx(-1.0));
}
