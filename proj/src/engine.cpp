#include "storey/engine.hpp"

#include <algorithm>
#include <cmath>

#include "storey/error.hpp"

namespace storey {

void EngineParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be positive");
  };
  positive(floor_window_s, "N_f");
  positive(location_window_s, "N_l");
  positive(kf_window_s, "w_k");
  positive(grid_resolution_m, "grid resolution");
  if (!(floor_weight_db >= 0.0) || !std::isfinite(floor_weight_db)) {
    throw Error(ErrorKind::InvalidArgument, "W_f must be non-negative");
  }
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidArgument, "l_thr must be in (0, 1]");
  if (!(kf.initial_variance > 0.0)) throw Error(ErrorKind::InvalidArgument, "KF initial variance must be positive");
  if (!(kf.sigma_position >= 0.0 && kf.sigma_velocity >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "KF process noise must be non-negative");
  }
}

Locator::Locator(const ApRegistry& registry, const FloorClassifier* floor_model, const RankGaussianModel* rank_model,
                 QualityModel quality, EngineParams params, VirtualApMapper mapper)
    : registry_(registry),
      floor_model_(floor_model),
      rank_model_(rank_model),
      quality_(quality),
      params_(params),
      mapper_(std::move(mapper)),
      window_(params.kf_window_s) {
  params_.validate();
  if (!params_.floors_only && !rank_model_) {
    throw Error(ErrorKind::InvalidArgument, "a rank model is required unless running floors only");
  }
  if (floor_model_) floor_model_->validate();
  if (rank_model_) rank_model_->validate();
}

std::optional<EngineFix> Locator::process(const WifiScan& raw_scan, std::optional<int> known_floor) {
  validate_scan(raw_scan);
  if (!history_.empty() && !(raw_scan.timestamp > history_.back().timestamp)) {
    throw Error(ErrorKind::InvalidArgument, "scan timestamps must strictly increase");
  }
  const double t = raw_scan.timestamp;
  history_.push_back(merge_virtual(raw_scan, mapper_));
  const double keep = std::max(params_.floor_window_s, params_.location_window_s);
  while (history_.front().timestamp < t - keep) history_.pop_front();
  const std::vector<WifiScan> scans(history_.begin(), history_.end());

  const WifiProfile floor_profile = restrict_to_registry(build_profile(scans, t, params_.floor_window_s), registry_);
  if (floor_profile.empty() && !known_floor) return std::nullopt;

  EngineFix out;
  out.t = t;
  if (known_floor) {
    out.floor = *known_floor;
  } else {
    if (!floor_model_) throw Error(ErrorKind::InvalidArgument, "a floor model is required without known floors");
    out.floor = detect_floor(floor_profile, registry_, *floor_model_).floor;
  }
  if (params_.floors_only) return out;

  WifiProfile profile = restrict_to_registry(build_profile(scans, t, params_.location_window_s), registry_);
  if (params_.user_floor_aps_only) {
    std::erase_if(profile.rss, [&](const auto& kv) {
      return registry_.ap(*registry_.index_of(kv.first)).floor != out.floor;
    });
  }
  if (profile.empty()) return out;
  if (params_.use_faf) profile = apply_faf(profile, registry_, out.floor, params_.floor_weight_db);

  const LocationPdf pdf = compute_pdf(profile, registry_, out.floor, *rank_model_, params_.grid_resolution_m);
  LocationFix fix = estimate_location(pdf, registry_.frame(), params_.threshold);
  fix.t = t;
  const QualityFeatures features = quality_features(profile, fix.area_m2);
  const double quality = quality_.predict(features);
  out.raw = fix;
  out.features = features;
  out.quality_m = quality;

  LocationFix final_fix = fix;
  if (params_.use_kf) {
    window_.push({fix, quality});
    final_fix = kf_refine(window_, registry_.frame(), params_.kf);
  }
  out.point = final_fix.point;
  out.local = final_fix.local;
  return out;
}

std::vector<EngineFix> locate_trace(const ApRegistry& registry, const FloorClassifier* floor_model,
                                    const RankGaussianModel* rank_model, const QualityModel& quality,
                                    const EngineParams& params, std::span<const WifiScan> scans,
                                    std::span<const int> known_floors) {
  if (!known_floors.empty() && known_floors.size() != scans.size()) {
    throw Error(ErrorKind::InvalidArgument, "known floors must match the scan count");
  }
  Locator locator(registry, floor_model, rank_model, quality, params);
  std::vector<EngineFix> fixes;
  fixes.reserve(scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i) {
    std::optional<int> floor;
    if (!known_floors.empty()) floor = known_floors[i];
    if (auto fix = locator.process(scans[i], floor)) fixes.push_back(std::move(*fix));
  }
  return fixes;
}

std::vector<DistanceSample> collect_distance_samples(const ApRegistry& registry, std::span<const WifiScan> scans,
                                                     std::span<const TruthFix> truth, double location_window_s,
                                                     double floor_weight_db) {
  if (truth.size() != scans.size()) throw Error(ErrorKind::InvalidArgument, "every scan needs a truth record");
  std::vector<WifiScan> merged;
  merged.reserve(scans.size());
  for (const auto& s : scans) merged.push_back(merge_virtual(s));
  std::vector<DistanceSample> out;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double t = merged[i].timestamp;
    const std::span<const WifiScan> upto(merged.data(), i + 1);
    WifiProfile p = restrict_to_registry(build_profile(upto, t, location_window_s), registry);
    if (p.empty()) continue;
    p = apply_faf(p, registry, truth[i].floor, floor_weight_db);
    const Vec2 user = registry.frame().to_local(truth[i].point);
    for (const auto& [mac, rss] : p.rss) {
      const std::size_t idx = *registry.index_of(mac);
      out.push_back({distance(user, registry.local_position(idx)), rss});
    }
  }
  return out;
}

std::vector<QualitySample> collect_quality_samples(std::span<const EngineFix> fixes, std::span<const TruthFix> truth) {
  std::vector<QualitySample> out;
  std::size_t j = 0;
  for (const auto& f : fixes) {
    if (!f.raw || !f.features) continue;
    while (j < truth.size() && truth[j].t < f.t) ++j;
    if (j == truth.size()) break;
    if (truth[j].t != f.t) continue;
    out.push_back({*f.features, haversine_distance(f.raw->point, truth[j].point)});
  }
  return out;
}

}  // namespace storey
