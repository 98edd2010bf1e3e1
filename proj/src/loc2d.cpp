#include "storey/loc2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "storey/error.hpp"

namespace storey {

namespace {

constexpr double kTrimSigmas = 3.0;
constexpr double kMadToSigma = 1.4826;
constexpr int kMaxTrimIterations = 100;

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid))) / 2.0;
  return m;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

// Keeps points within kTrimSigmas of the center, but never fewer than
// `min_keep_fraction` of the current set (then the closest ones).
std::vector<double> trim_once(const std::vector<double>& current, double center, double scale,
                              double min_keep_fraction) {
  std::vector<double> kept;
  for (double d : current) {
    if (std::abs(d - center) <= kTrimSigmas * scale) kept.push_back(d);
  }
  const auto floor_count = static_cast<std::size_t>(std::ceil(min_keep_fraction * static_cast<double>(current.size())));
  if (kept.size() >= floor_count) return kept;
  kept = current;
  std::stable_sort(kept.begin(), kept.end(),
                   [center](double a, double b) { return std::abs(a - center) < std::abs(b - center); });
  kept.resize(floor_count);
  return kept;
}

RankGaussian fit_one(std::vector<double> distances, double min_keep_fraction) {
  std::sort(distances.begin(), distances.end());
  // Seed with median/MAD so gross outliers cannot inflate the first pass.
  const double med = median_of(distances);
  std::vector<double> dev;
  dev.reserve(distances.size());
  for (double d : distances) dev.push_back(std::abs(d - med));
  double scale = kMadToSigma * median_of(dev);
  if (scale == 0.0) scale = mean_sd(distances).second;
  std::vector<double> kept = trim_once(distances, med, scale, min_keep_fraction);

  for (int it = 0; it < kMaxTrimIterations; ++it) {
    const auto [mean, sd] = mean_sd(kept);
    std::vector<double> next = trim_once(kept, mean, sd, min_keep_fraction);
    if (next.size() == kept.size()) break;
    kept = std::move(next);
  }
  const auto [mean, sd] = mean_sd(kept);
  return {mean, std::max(sd, kMinRankSigmaM), kept.size()};
}

// Pool-adjacent-violators for a non-increasing fit of the means.
void enforce_non_increasing(std::array<RankGaussian, kRankCount>& ranks) {
  struct Block {
    double value;
    double weight;
    int size;
  };
  std::vector<Block> blocks;
  for (const RankGaussian& r : ranks) {
    blocks.push_back({r.mean_m, static_cast<double>(std::max<std::size_t>(r.samples, 1)), 1});
    while (blocks.size() >= 2 && blocks[blocks.size() - 2].value < blocks.back().value) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.size += b.size;
    }
  }
  std::size_t i = 0;
  for (const Block& b : blocks) {
    for (int k = 0; k < b.size; ++k) ranks[i++].mean_m = b.value;
  }
}

}  // namespace

RssRank rank_of(double rss) {
  if (rss < -80.0) return RssRank::VeryWeak;
  if (rss < -70.0) return RssRank::Weak;
  if (rss < -60.0) return RssRank::Mild;
  if (rss < -50.0) return RssRank::Moderate;
  if (rss < -40.0) return RssRank::Strong;
  return RssRank::VeryStrong;
}

std::string_view to_string(RssRank rank) {
  switch (rank) {
    case RssRank::VeryWeak: return "very_weak";
    case RssRank::Weak: return "weak";
    case RssRank::Mild: return "mild";
    case RssRank::Moderate: return "moderate";
    case RssRank::Strong: return "strong";
    case RssRank::VeryStrong: return "very_strong";
  }
  return "?";
}

WifiProfile apply_faf(const WifiProfile& profile, const ApRegistry& registry, int user_floor, double floor_weight_db) {
  WifiProfile out;
  out.t = profile.t;
  out.window = profile.window;
  for (const auto& [mac, rss] : profile.rss) {
    const auto idx = registry.index_of(mac);
    if (!idx) throw Error(ErrorKind::InvalidArgument, "AP " + mac.to_string() + " is not registered");
    out.rss.emplace(mac, rss + floor_weight_db * std::abs(user_floor - registry.ap(*idx).floor));
  }
  return out;
}

void RankGaussianModel::validate() const {
  for (int r = 0; r < kRankCount; ++r) {
    const RankGaussian& g = ranks[static_cast<std::size_t>(r)];
    const std::string name(to_string(static_cast<RssRank>(r)));
    if (!(g.sigma_m > 0.0) || !std::isfinite(g.sigma_m)) throw Error(ErrorKind::Schema, "rank " + name + " sigma must be positive");
    if (!(g.mean_m >= 0.0) || !std::isfinite(g.mean_m)) throw Error(ErrorKind::Schema, "rank " + name + " mean must be >= 0");
    if (r > 0 && g.mean_m > ranks[static_cast<std::size_t>(r - 1)].mean_m) {
      throw Error(ErrorKind::Schema, "rank means must not increase with signal strength (" + name + ")");
    }
  }
  if (!(anomaly_threshold > 0.0 && anomaly_threshold <= 1.0)) {
    throw Error(ErrorKind::Schema, "anomaly threshold must be in (0, 1]");
  }
}

RankGaussianModel fit_rank_model(std::span<const DistanceSample> samples, double anomaly_threshold,
                                 std::string provenance) {
  if (!(anomaly_threshold > 0.0 && anomaly_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "anomaly threshold must be in (0, 1]");
  }
  std::array<std::vector<double>, kRankCount> buckets;
  for (const DistanceSample& s : samples) {
    if (!std::isfinite(s.distance_m) || s.distance_m < 0.0 || !std::isfinite(s.rss)) {
      throw Error(ErrorKind::InvalidArgument, "distance samples must be finite with non-negative distance");
    }
    buckets[static_cast<std::size_t>(rank_of(s.rss))].push_back(s.distance_m);
  }
  std::ostringstream short_ranks;
  for (int r = 0; r < kRankCount; ++r) {
    const auto n = buckets[static_cast<std::size_t>(r)].size();
    if (n < kMinSamplesPerRank) short_ranks << ' ' << to_string(static_cast<RssRank>(r)) << " (" << n << ")";
  }
  if (!short_ranks.str().empty()) {
    throw Error(ErrorKind::InvalidArgument,
                "need at least " + std::to_string(kMinSamplesPerRank) + " samples per rank; short:" + short_ranks.str());
  }

  RankGaussianModel model;
  model.anomaly_threshold = anomaly_threshold;
  model.provenance = std::move(provenance);
  for (int r = 0; r < kRankCount; ++r) {
    model.ranks[static_cast<std::size_t>(r)] = fit_one(std::move(buckets[static_cast<std::size_t>(r)]), anomaly_threshold);
  }
  enforce_non_increasing(model.ranks);
  return model;
}

double gaussian_density(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

LocationPdf compute_pdf(const WifiProfile& profile, const ApRegistry& registry, int floor,
                        const RankGaussianModel& model, double resolution) {
  if (profile.empty()) throw Error(ErrorKind::NoVisibleAps, "cannot build a location pdf from an empty profile");
  if (!(resolution > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid resolution must be positive");

  struct Source {
    Vec2 at;
    double mean;
    double sigma;
  };
  std::vector<Source> sources;
  for (const auto& [mac, rss] : profile.rss) {
    const auto idx = registry.index_of(mac);
    if (!idx) throw Error(ErrorKind::InvalidArgument, "AP " + mac.to_string() + " is not registered");
    const RankGaussian& g = model[rank_of(rss)];
    sources.push_back({registry.local_position(*idx), g.mean_m, g.sigma_m});
  }

  LocationPdf pdf;
  pdf.floor = floor;
  pdf.resolution = resolution;
  const Polygon2& poly = registry.floor_polygon(floor);
  const Box2 box = poly.bounds();
  const auto nx = static_cast<long>(std::ceil((box.max.x - box.min.x) / resolution - 1e-9));
  const auto ny = static_cast<long>(std::ceil((box.max.y - box.min.y) / resolution - 1e-9));
  for (long j = 0; j < ny; ++j) {
    for (long i = 0; i < nx; ++i) {
      const Vec2 c{box.min.x + (static_cast<double>(i) + 0.5) * resolution,
                   box.min.y + (static_cast<double>(j) + 0.5) * resolution};
      if (poly.contains(c)) pdf.cells.push_back(c);
    }
  }
  if (pdf.cells.empty()) throw Error(ErrorKind::InvalidArgument, "floor polygon is smaller than one grid cell");

  pdf.values.resize(pdf.cells.size());
  for (std::size_t c = 0; c < pdf.cells.size(); ++c) {
    double sum = 0.0;
    for (const Source& s : sources) sum += gaussian_density(distance(pdf.cells[c], s.at), s.mean, s.sigma);
    pdf.values[c] = sum;
  }
  pdf.max_value = *std::max_element(pdf.values.begin(), pdf.values.end());

  if (pdf.max_value > 0.0 && std::isfinite(pdf.max_value)) {
    for (double& v : pdf.values) v /= pdf.max_value;
  } else {
    // Every density underflowed: redo the sum in the log domain.
    std::vector<double> logs(pdf.cells.size());
    std::vector<double> terms(sources.size());
    for (std::size_t c = 0; c < pdf.cells.size(); ++c) {
      for (std::size_t k = 0; k < sources.size(); ++k) {
        const double z = (distance(pdf.cells[c], sources[k].at) - sources[k].mean) / sources[k].sigma;
        terms[k] = -0.5 * z * z - std::log(sources[k].sigma);
      }
      const double peak = *std::max_element(terms.begin(), terms.end());
      double acc = 0.0;
      for (double t : terms) acc += std::exp(t - peak);
      logs[c] = peak + std::log(acc);
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    for (std::size_t c = 0; c < logs.size(); ++c) pdf.values[c] = std::exp(logs[c] - top);
  }
  pdf.normalized = true;
  return pdf;
}

LocationFix estimate_location(const LocationPdf& pdf, const LocalFrame& frame, double threshold) {
  if (!pdf.normalized) throw Error(ErrorKind::InvalidArgument, "estimate_location needs a normalized pdf");
  double wx = 0.0;
  double wy = 0.0;
  double wsum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < pdf.cells.size(); ++c) {
    const double v = pdf.values[c];
    if (v < threshold) continue;
    wx += v * pdf.cells[c].x;
    wy += v * pdf.cells[c].y;
    wsum += v;
    ++count;
  }
  if (count == 0 || !(wsum > 0.0)) throw Error(ErrorKind::InvalidArgument, "no cell reaches the likelihood threshold");
  LocationFix fix;
  fix.floor = pdf.floor;
  fix.local = {wx / wsum, wy / wsum};
  fix.point = frame.to_geo(fix.local);
  fix.area_m2 = static_cast<double>(count) * pdf.resolution * pdf.resolution;
  return fix;
}

}  // namespace storey
