#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storey/geo.hpp"
#include "storey/scan.hpp"

namespace storey {

inline constexpr double kDefaultFloorWeightDb = 15.0;
inline constexpr double kDefaultLikelihoodThreshold = 0.98;
inline constexpr double kDefaultGridResolutionM = 0.5;

// Six ordered rss bands. Each band is [lower, upper).
enum class RssRank { VeryWeak, Weak, Mild, Moderate, Strong, VeryStrong };
inline constexpr int kRankCount = 6;

RssRank rank_of(double rss);
std::string_view to_string(RssRank rank);

// Adds W_f dB per floor between the user and each AP's installation floor.
// Throws Error(InvalidArgument) for MACs missing from the registry.
WifiProfile apply_faf(const WifiProfile& profile, const ApRegistry& registry, int user_floor, double floor_weight_db);

struct RankGaussian {
  double mean_m = 0.0;
  double sigma_m = 1.0;
  std::size_t samples = 0;  // retained after outlier removal

  friend bool operator==(const RankGaussian&, const RankGaussian&) = default;
};

// Distance-to-AP distribution per rss rank.
struct RankGaussianModel {
  std::array<RankGaussian, kRankCount> ranks;
  double anomaly_threshold = 0.8;
  std::string provenance;

  const RankGaussian& operator[](RssRank r) const { return ranks[static_cast<std::size_t>(r)]; }
  // Throws Error(Schema) if sigma <= 0, mean < 0 or means increase with rank.
  void validate() const;

  friend bool operator==(const RankGaussianModel&, const RankGaussianModel&) = default;
};

struct DistanceSample {
  double distance_m = 0.0;
  double rss = 0.0;
};

inline constexpr std::size_t kMinSamplesPerRank = 30;
inline constexpr double kMinRankSigmaM = 0.5;

// Fits mean and sigma of the distance per rank after iterative outlier
// trimming. Throws Error(InvalidArgument) naming any rank with fewer than 30
// samples.
RankGaussianModel fit_rank_model(std::span<const DistanceSample> samples, double anomaly_threshold = 0.8,
                                 std::string provenance = {});

// Cell grid over a floor: centers at min + (i + 0.5) * resolution, kept only
// when inside the polygon.
struct LocationPdf {
  int floor = 0;
  double resolution = kDefaultGridResolutionM;
  std::vector<Vec2> cells;
  std::vector<double> values;
  double max_value = 0.0;  // before normalization
  bool normalized = false;
};

double gaussian_density(double x, double mean, double sigma);

// Sum over APs of the rank Gaussian density at the cell-to-AP distance, then
// scaled so the largest cell is 1. Distances are planar in the registry frame.
// Throws Error(NoVisibleAps) for an empty profile.
LocationPdf compute_pdf(const WifiProfile& profile, const ApRegistry& registry, int floor,
                        const RankGaussianModel& model, double resolution = kDefaultGridResolutionM);

struct LocationFix {
  double t = 0.0;
  int floor = 0;
  GeoPoint point;
  Vec2 local;
  double area_m2 = 0.0;  // |T|
};

// Weighted centroid of the cells at or above `threshold`.
LocationFix estimate_location(const LocationPdf& pdf, const LocalFrame& frame,
                              double threshold = kDefaultLikelihoodThreshold);

}  // namespace storey
