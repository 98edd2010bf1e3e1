#pragma once

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "storey/floor_detect.hpp"
#include "storey/loc2d.hpp"
#include "storey/refine.hpp"
#include "storey/rfsim.hpp"
#include "storey/scan.hpp"

namespace storey {

struct EngineParams {
  double floor_window_s = 120.0;   // N_f
  double location_window_s = 15.0; // N_l
  double floor_weight_db = kDefaultFloorWeightDb;
  double threshold = kDefaultLikelihoodThreshold;
  double kf_window_s = kDefaultKfWindowS;
  double grid_resolution_m = kDefaultGridResolutionM;
  bool use_faf = true;
  bool use_kf = true;
  bool floors_only = false;
  // Use only the APs installed on the estimated floor for the 2D stage.
  bool user_floor_aps_only = false;
  KfParams kf;

  void validate() const;
};

struct EngineFix {
  double t = 0.0;
  int floor = 0;
  std::optional<GeoPoint> point;  // absent for floors-only runs or when nothing is heard within N_l
  std::optional<Vec2> local;
  std::optional<double> quality_m;
  std::optional<LocationFix> raw;  // centroid before refinement
  std::optional<QualityFeatures> features;
};

// One tracking session over a time-ordered scan stream.
class Locator {
 public:
  // `floor_model` may be null when every call passes a known floor and
  // `rank_model` may be null for floors-only runs.
  Locator(const ApRegistry& registry, const FloorClassifier* floor_model, const RankGaussianModel* rank_model,
          QualityModel quality, EngineParams params, VirtualApMapper mapper = canonicalize_mac);

  // Throws Error(InvalidArgument) when timestamps do not increase. Returns
  // nullopt while no registered AP is heard within N_f.
  std::optional<EngineFix> process(const WifiScan& scan, std::optional<int> known_floor = std::nullopt);

  const EngineParams& params() const noexcept { return params_; }

 private:
  const ApRegistry& registry_;
  const FloorClassifier* floor_model_;
  const RankGaussianModel* rank_model_;
  QualityModel quality_;
  EngineParams params_;
  VirtualApMapper mapper_;
  std::deque<WifiScan> history_;
  FixWindow window_;
};

// Runs a whole trace. `known_floors`, when non-empty, holds one floor per scan.
std::vector<EngineFix> locate_trace(const ApRegistry& registry, const FloorClassifier* floor_model,
                                    const RankGaussianModel* rank_model, const QualityModel& quality,
                                    const EngineParams& params, std::span<const WifiScan> scans,
                                    std::span<const int> known_floors = {});

// Distance/rss pairs from a trace with ground truth: each scan's N_l profile,
// FAF-corrected to the true floor, against the planar distance to every heard
// AP.
std::vector<DistanceSample> collect_distance_samples(const ApRegistry& registry, std::span<const WifiScan> scans,
                                                     std::span<const TruthFix> truth, double location_window_s,
                                                     double floor_weight_db);

// Quality features of every raw fix paired with its true error.
std::vector<QualitySample> collect_quality_samples(std::span<const EngineFix> fixes, std::span<const TruthFix> truth);

}  // namespace storey
