#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "storey/geo.hpp"
#include "storey/mlp.hpp"
#include "storey/scan.hpp"

namespace storey {

// rss assumed for a registered AP that is not in the profile.
inline constexpr double kInvisibleRssDbm = -100.0;
inline constexpr int kFeaturesPerFloor = 8;
inline constexpr int kDefaultSearchWidth = 4;

// Order here is the flattening order inside each floor slot.
enum class FloorFeature { Num, Str, Avg, Var, LocAvg30, LocAvg80, LocAvgAlpha, Far };

inline constexpr std::array<FloorFeature, kFeaturesPerFloor> kFeatureOrder = {
    FloorFeature::Num,      FloorFeature::Str,      FloorFeature::Avg,         FloorFeature::Var,
    FloorFeature::LocAvg30, FloorFeature::LocAvg80, FloorFeature::LocAvgAlpha, FloorFeature::Far};

std::string_view to_string(FloorFeature feature);
std::optional<FloorFeature> parse_floor_feature(std::string_view name);

// Consecutive floors [first, first + count - 1] out of a window of `width`.
struct FloorSearchRange {
  int first = 1;
  int width = kDefaultSearchWidth;
  int count = 0;  // real floors in range, <= width

  int last() const noexcept { return first + count - 1; }
  bool contains(int floor) const noexcept { return floor >= first && floor <= last(); }

  friend bool operator==(const FloorSearchRange&, const FloorSearchRange&) = default;
};

// Contribution of one observation to a window's aggregate strength: dB above
// a -101 dBm reference, floored at zero, so every heard AP adds weight.
double range_strength(double rss);

// Picks the w-floor window with the largest aggregate strength of the
// profile's registered APs. Ties go to the lowest first floor. Throws
// Error(NoVisibleAps) when no registered AP is in the profile.
FloorSearchRange compute_search_range(const WifiProfile& profile, const ApRegistry& registry,
                                      int width = kDefaultSearchWidth);

// Registered APs of the profile installed inside the range.
WifiProfile restrict_to_range(const WifiProfile& profile, const ApRegistry& registry, const FloorSearchRange& range);

// Points within `radius` of the convex hull of a point set. Degenerate hulls
// give a disc (one point) or a capsule (collinear points). Closed.
class ProximityRegion {
 public:
  ProximityRegion(std::span<const Vec2> points, double radius);

  const std::vector<Vec2>& hull() const noexcept { return hull_; }
  double radius() const noexcept { return radius_; }
  ProximityRegion with_radius(double radius) const;

  double distance_to_hull(Vec2 p) const;
  bool contains(Vec2 p) const;

 private:
  ProximityRegion() = default;

  std::vector<Vec2> hull_;
  double radius_ = 0.0;
};

// Counter-clockwise hull without collinear vertices. 1 or 2 points back for
// degenerate input.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// Region around the profile's registered APs. Throws Error(NoVisibleAps) on
// an empty profile.
ProximityRegion proximity_region(const WifiProfile& profile, const ApRegistry& registry, double radius);

struct FloorFeatures {
  double num = 0.0;
  double str = kInvisibleRssDbm;
  double avg = kInvisibleRssDbm;
  double var = 0.0;
  double loc_avg_30 = kInvisibleRssDbm;
  double loc_avg_80 = kInvisibleRssDbm;
  double loc_avg_alpha = kInvisibleRssDbm;
  double far = 0.0;  // meters

  double get(FloorFeature feature) const;

  friend bool operator==(const FloorFeatures&, const FloorFeatures&) = default;
};

struct FloorFeatureVector {
  FloorSearchRange range;
  std::vector<FloorFeatures> floors;  // `range.width` slots, padding after range.count
  double alpha = 0.0;                 // farthest pairwise distance over the working profile

  // Floor-major, feature-minor. Padding slots are all zero.
  std::vector<double> flatten() const;
};

// Features for every floor in the range over the profile's APs installed in
// the range. Floors without visible APs get the empty-floor defaults.
FloorFeatureVector extract_features(const WifiProfile& profile, const ApRegistry& registry,
                                    const FloorSearchRange& range);

// Fixed scaling into network inputs. Recorded in the model file.
struct FeatureNormalization {
  double count_scale = 1.0 / 20.0;
  double rss_offset = 100.0;
  double rss_scale = 1.0 / 70.0;
  double variance_scale = 1.0 / 400.0;
  double distance_scale = 1.0 / 100.0;

  std::vector<double> apply(const FloorFeatureVector& features) const;

  friend bool operator==(const FeatureNormalization&, const FeatureNormalization&) = default;
};

struct FloorClassifier {
  int width = kDefaultSearchWidth;
  FeatureNormalization normalization;
  Mlp network;

  // Untrained network with the expected shape.
  static FloorClassifier make(int width, std::uint64_t seed);
  void validate() const;
};

struct FloorEstimate {
  int floor = 0;           // absolute, 1-based
  int in_range_index = 0;  // 0-based inside the search range
  std::vector<double> probabilities;
  FloorSearchRange range;
};

FloorEstimate detect_floor(const WifiProfile& profile, const ApRegistry& registry, const FloorClassifier& model);

// Floor in the range with the largest value of one feature, ties to the
// lowest floor.
int baseline_floor(const FloorFeatureVector& features, FloorFeature feature);
int baseline_floor(const WifiProfile& profile, const ApRegistry& registry, const FloorSearchRange& range,
                   FloorFeature feature);

}  // namespace storey
