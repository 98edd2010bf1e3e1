#include "storey/floor_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "storey/error.hpp"

namespace storey {

namespace {

constexpr double kRangeReferenceDbm = -101.0;
constexpr double kNearRadiusM = 30.0;
constexpr double kFarRadiusM = 80.0;
constexpr double kRegionTolM = 1e-9;

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

struct VisibleAp {
  std::size_t index;
  double rss;
};

std::vector<VisibleAp> registered_observations(const WifiProfile& profile, const ApRegistry& registry) {
  std::vector<VisibleAp> out;
  out.reserve(profile.size());
  for (const auto& [mac, rss] : profile.rss) {
    if (auto idx = registry.index_of(mac)) out.push_back({*idx, rss});
  }
  return out;
}

double max_pairwise_distance(const ApRegistry& registry, std::span<const VisibleAp> aps) {
  double far = 0.0;
  for (std::size_t i = 0; i < aps.size(); ++i) {
    for (std::size_t j = i + 1; j < aps.size(); ++j) {
      far = std::max(far, haversine_distance(registry.ap(aps[i].index).location, registry.ap(aps[j].index).location));
    }
  }
  return far;
}

}  // namespace

std::string_view to_string(FloorFeature feature) {
  switch (feature) {
    case FloorFeature::Num: return "num";
    case FloorFeature::Str: return "str";
    case FloorFeature::Avg: return "avg";
    case FloorFeature::Var: return "var";
    case FloorFeature::LocAvg30: return "locavg30";
    case FloorFeature::LocAvg80: return "locavg80";
    case FloorFeature::LocAvgAlpha: return "locavg_alpha";
    case FloorFeature::Far: return "far";
  }
  return "?";
}

std::optional<FloorFeature> parse_floor_feature(std::string_view name) {
  for (FloorFeature f : kFeatureOrder) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

double range_strength(double rss) { return std::max(rss - kRangeReferenceDbm, 0.0); }

FloorSearchRange compute_search_range(const WifiProfile& profile, const ApRegistry& registry, int width) {
  if (width < 1) throw Error(ErrorKind::InvalidArgument, "search width must be positive");
  const int floors = registry.floor_count();
  std::vector<double> per_floor(static_cast<std::size_t>(floors) + 1, 0.0);
  bool any = false;
  for (const VisibleAp& v : registered_observations(profile, registry)) {
    per_floor[static_cast<std::size_t>(registry.ap(v.index).floor)] += range_strength(v.rss);
    any = true;
  }
  if (!any) throw Error(ErrorKind::NoVisibleAps, "profile has no registered APs");

  FloorSearchRange best;
  best.width = width;
  double best_sum = -std::numeric_limits<double>::infinity();
  const int last_start = std::max(1, floors - width + 1);
  for (int first = 1; first <= last_start; ++first) {
    double sum = 0.0;
    for (int f = first; f <= std::min(first + width - 1, floors); ++f) sum += per_floor[static_cast<std::size_t>(f)];
    if (sum > best_sum) {
      best_sum = sum;
      best.first = first;
    }
  }
  best.count = std::min(width, floors - best.first + 1);
  return best;
}

WifiProfile restrict_to_range(const WifiProfile& profile, const ApRegistry& registry, const FloorSearchRange& range) {
  WifiProfile out;
  out.t = profile.t;
  out.window = profile.window;
  for (const auto& [mac, rss] : profile.rss) {
    const auto idx = registry.index_of(mac);
    if (idx && range.contains(registry.ap(*idx).floor)) out.rss.emplace(mac, rss);
  }
  return out;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  std::vector<Vec2> hull(2 * points.size());
  std::size_t k = 0;
  for (const Vec2& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    const Vec2& p = points[i];
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

ProximityRegion::ProximityRegion(std::span<const Vec2> points, double radius)
    : hull_(convex_hull(std::vector<Vec2>(points.begin(), points.end()))), radius_(radius) {
  if (hull_.empty()) throw Error(ErrorKind::InvalidArgument, "proximity region needs at least one point");
  if (!(radius >= 0.0)) throw Error(ErrorKind::InvalidArgument, "proximity radius must be non-negative");
}

ProximityRegion ProximityRegion::with_radius(double radius) const {
  ProximityRegion out = *this;
  out.radius_ = radius;
  return out;
}

double ProximityRegion::distance_to_hull(Vec2 p) const {
  if (hull_.size() == 1) return distance(p, hull_.front());
  if (hull_.size() == 2) return distance_to_segment(p, hull_[0], hull_[1]);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull_.size(); ++i) {
    const Vec2 a = hull_[i];
    const Vec2 b = hull_[(i + 1) % hull_.size()];
    if (cross(a, b, p) < 0.0) inside = false;
    best = std::min(best, distance_to_segment(p, a, b));
  }
  return inside ? 0.0 : best;
}

bool ProximityRegion::contains(Vec2 p) const { return distance_to_hull(p) <= radius_ + kRegionTolM; }

ProximityRegion proximity_region(const WifiProfile& profile, const ApRegistry& registry, double radius) {
  std::vector<Vec2> points;
  for (const VisibleAp& v : registered_observations(profile, registry)) points.push_back(registry.local_position(v.index));
  if (points.empty()) throw Error(ErrorKind::NoVisibleAps, "profile has no registered APs");
  return ProximityRegion(points, radius);
}

double FloorFeatures::get(FloorFeature feature) const {
  switch (feature) {
    case FloorFeature::Num: return num;
    case FloorFeature::Str: return str;
    case FloorFeature::Avg: return avg;
    case FloorFeature::Var: return var;
    case FloorFeature::LocAvg30: return loc_avg_30;
    case FloorFeature::LocAvg80: return loc_avg_80;
    case FloorFeature::LocAvgAlpha: return loc_avg_alpha;
    case FloorFeature::Far: return far;
  }
  return 0.0;
}

std::vector<double> FloorFeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(floors.size() * kFeaturesPerFloor);
  for (std::size_t k = 0; k < floors.size(); ++k) {
    for (FloorFeature f : kFeatureOrder) out.push_back(static_cast<int>(k) < range.count ? floors[k].get(f) : 0.0);
  }
  return out;
}

FloorFeatureVector extract_features(const WifiProfile& profile, const ApRegistry& registry,
                                    const FloorSearchRange& range) {
  if (range.count < 1 || range.count > range.width || range.first < 1 || range.last() > registry.floor_count()) {
    throw Error(ErrorKind::InvalidArgument, "search range does not fit the registry");
  }
  std::vector<VisibleAp> working;
  for (const VisibleAp& v : registered_observations(profile, registry)) {
    if (range.contains(registry.ap(v.index).floor)) working.push_back(v);
  }

  FloorFeatureVector out;
  out.range = range;
  out.floors.assign(static_cast<std::size_t>(range.width), FloorFeatures{});
  if (working.empty()) return out;

  out.alpha = max_pairwise_distance(registry, working);
  std::vector<Vec2> points;
  points.reserve(working.size());
  for (const VisibleAp& v : working) points.push_back(registry.local_position(v.index));
  const ProximityRegion base(points, 0.0);
  const std::array<ProximityRegion, 3> regions = {base.with_radius(kNearRadiusM), base.with_radius(kFarRadiusM),
                                                  base.with_radius(out.alpha)};

  // rss of every visible AP by registry index, for the local averages.
  std::vector<double> visible_rss(registry.aps().size(), std::numeric_limits<double>::quiet_NaN());
  for (const VisibleAp& v : working) visible_rss[v.index] = v.rss;

  for (int k = 0; k < range.count; ++k) {
    const int floor = range.first + k;
    FloorFeatures& feat = out.floors[static_cast<std::size_t>(k)];
    std::vector<VisibleAp> on_floor;
    for (const VisibleAp& v : working) {
      if (registry.ap(v.index).floor == floor) on_floor.push_back(v);
    }
    if (!on_floor.empty()) {
      const double n = static_cast<double>(on_floor.size());
      double sum = 0.0;
      double strongest = -std::numeric_limits<double>::infinity();
      for (const VisibleAp& v : on_floor) {
        sum += v.rss;
        strongest = std::max(strongest, v.rss);
      }
      const double mean = sum / n;
      double sq = 0.0;
      for (const VisibleAp& v : on_floor) sq += (v.rss - mean) * (v.rss - mean);
      feat.num = n;
      feat.str = strongest;
      feat.avg = mean;
      feat.var = sq / n;
      feat.far = max_pairwise_distance(registry, on_floor);
    }

    std::array<double, 3> local_avg{};
    for (std::size_t r = 0; r < regions.size(); ++r) {
      double sum = 0.0;
      int members = 0;
      for (std::size_t idx : registry.aps_on_floor(floor)) {
        if (!regions[r].contains(registry.local_position(idx))) continue;
        sum += std::isnan(visible_rss[idx]) ? kInvisibleRssDbm : visible_rss[idx];
        ++members;
      }
      local_avg[r] = members > 0 ? sum / members : kInvisibleRssDbm;
    }
    feat.loc_avg_30 = local_avg[0];
    feat.loc_avg_80 = local_avg[1];
    feat.loc_avg_alpha = local_avg[2];
  }
  return out;
}

std::vector<double> FeatureNormalization::apply(const FloorFeatureVector& features) const {
  std::vector<double> x;
  x.reserve(features.floors.size() * kFeaturesPerFloor);
  auto rss = [&](double v) { return (v + rss_offset) * rss_scale; };
  for (std::size_t k = 0; k < features.floors.size(); ++k) {
    if (static_cast<int>(k) >= features.range.count) {
      x.insert(x.end(), kFeaturesPerFloor, 0.0);
      continue;
    }
    const FloorFeatures& f = features.floors[k];
    x.push_back(f.num * count_scale);
    x.push_back(rss(f.str));
    x.push_back(rss(f.avg));
    x.push_back(f.var * variance_scale);
    x.push_back(rss(f.loc_avg_30));
    x.push_back(rss(f.loc_avg_80));
    x.push_back(rss(f.loc_avg_alpha));
    x.push_back(f.far * distance_scale);
  }
  return x;
}

FloorClassifier FloorClassifier::make(int width, std::uint64_t seed) {
  if (width < 1) throw Error(ErrorKind::InvalidArgument, "search width must be positive");
  FloorClassifier model;
  model.width = width;
  model.network = Mlp::floor_classifier(width * kFeaturesPerFloor, width);
  model.network.init_he_uniform(seed);
  return model;
}

void FloorClassifier::validate() const {
  if (width < 1 || network.input_dim() != width * kFeaturesPerFloor || network.output_dim() != width) {
    throw Error(ErrorKind::Schema, "floor model dimensions do not match its search width");
  }
}

FloorEstimate detect_floor(const WifiProfile& profile, const ApRegistry& registry, const FloorClassifier& model) {
  model.validate();
  FloorEstimate est;
  est.range = compute_search_range(profile, registry, model.width);
  const FloorFeatureVector features = extract_features(profile, registry, est.range);
  est.probabilities = model.network.forward(model.normalization.apply(features));

  // Padding slots (buildings shorter than the window) are not floors.
  double kept = 0.0;
  for (std::size_t k = 0; k < est.probabilities.size(); ++k) {
    if (static_cast<int>(k) >= est.range.count) est.probabilities[k] = 0.0;
    kept += est.probabilities[k];
  }
  if (kept > 0.0) {
    for (double& p : est.probabilities) p /= kept;
  } else {
    for (int k = 0; k < est.range.count; ++k) est.probabilities[static_cast<std::size_t>(k)] = 1.0 / est.range.count;
  }
  est.in_range_index = static_cast<int>(std::max_element(est.probabilities.begin(), est.probabilities.end()) -
                                        est.probabilities.begin());
  est.floor = est.range.first + est.in_range_index;
  return est;
}

int baseline_floor(const FloorFeatureVector& features, FloorFeature feature) {
  int best = 0;
  for (int k = 1; k < features.range.count; ++k) {
    if (features.floors[static_cast<std::size_t>(k)].get(feature) >
        features.floors[static_cast<std::size_t>(best)].get(feature)) {
      best = k;
    }
  }
  return features.range.first + best;
}

int baseline_floor(const WifiProfile& profile, const ApRegistry& registry, const FloorSearchRange& range,
                   FloorFeature feature) {
  return baseline_floor(extract_features(profile, registry, range), feature);
}

}  // namespace storey
