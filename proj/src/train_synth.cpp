#include "storey/train_synth.hpp"

#include <algorithm>
#include <numeric>

#include "storey/error.hpp"

namespace storey {

PropagationParams clean_emulation_params() {
  PropagationParams p;
  p.shadowing_sigma_db = 0.0;
  p.rolloff_db = 0.0;
  return p;
}

void SynthConfig::validate() const {
  emulation.validate();
  if (!(sigma_db >= 0.0) || instances_per_floor < 1 || width < 1 || max_retries < 1) {
    throw Error(ErrorKind::InvalidArgument, "invalid synthesis configuration");
  }
}

Dataset LabeledFeatureSet::to_dataset(const FeatureNormalization& normalization) const {
  Dataset data;
  data.inputs.reserve(size());
  for (const FloorFeatureVector& f : features) data.inputs.push_back(normalization.apply(f));
  data.labels = labels;
  return data;
}

namespace {

FloorSearchRange window_at(int first, int width, int floors) {
  return {first, width, std::min(width, floors - first + 1)};
}

}  // namespace

std::optional<SynthInstance> synthesize_instance(const SimBuilding& building, const SynthConfig& config,
                                                 const FloorSearchRange& range, int label,
                                                 const FloorSearchRange& target, Vec2 position,
                                                 std::mt19937_64& rng) {
  const ApRegistry& registry = building.registry;
  const int user_floor = range.first + label;
  const Vec3 device = building.device_position(position, user_floor);
  std::normal_distribution<double> gauss(0.0, 1.0);

  WifiProfile profile;
  for (int k = 0; k < range.count; ++k) {
    const int floor = range.first + k;
    std::vector<std::pair<double, Mac>> heard;
    for (std::size_t idx : registry.aps_on_floor(floor)) {
      const auto rss = simulate_rss(building.ap_position(idx), floor, device, user_floor, config.emulation, rng);
      if (rss) heard.emplace_back(*rss, registry.ap(idx).mac);
    }
    if (config.match_window_counts) {
      const std::size_t cap = k < target.count ? registry.aps_on_floor(target.first + k).size() : heard.size();
      if (heard.size() > cap) {
        if (config.strongest_first) {
          std::stable_sort(heard.begin(), heard.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        } else {
          std::shuffle(heard.begin(), heard.end(), rng);
        }
        heard.resize(cap);
      }
    }
    for (const auto& [rss, mac] : heard) profile.rss.emplace(mac, rss + config.sigma_db * gauss(rng));
  }
  if (profile.empty()) return std::nullopt;

  SynthInstance out;
  out.features = extract_features(profile, registry, range);
  out.profile = std::move(profile);
  out.label = label;
  return out;
}

LabeledFeatureSet synthesize_training_set(const SimBuilding& building, const SynthConfig& config) {
  config.validate();
  const ApRegistry& registry = building.registry;
  const int floors = registry.floor_count();
  const int width = config.width;
  const int last_start = std::max(1, floors - width + 1);
  const int labels = std::min(width, floors);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick_window(1, last_start);
  std::uniform_int_distribution<int> pick_floor(1, floors);

  LabeledFeatureSet set;
  set.width = width;
  const long total = static_cast<long>(config.instances_per_floor) * labels;
  for (long i = 0; i < total; ++i) {
    std::optional<SynthInstance> instance;
    for (int attempt = 0; attempt < config.max_retries && !instance; ++attempt) {
      if (config.balance) {
        const int label = static_cast<int>(i % labels);
        const FloorSearchRange range = window_at(pick_window(rng), width, floors);
        const FloorSearchRange target = window_at(pick_window(rng), width, floors);
        const Vec2 pos = random_point_on_floor(registry, range.first + label, rng);
        instance = synthesize_instance(building, config, range, label, target, pos, rng);
        continue;
      }
      // Natural sampling: the label follows from the engine's own range pick.
      const int floor = pick_floor(rng);
      const Vec2 pos = random_point_on_floor(registry, floor, rng);
      const FloorSearchRange all = window_at(1, floors, floors);
      SynthConfig whole = config;
      whole.match_window_counts = false;
      auto full = synthesize_instance(building, whole, all, floor - 1, all, pos, rng);
      if (!full) continue;
      const FloorSearchRange range = compute_search_range(full->profile, registry, width);
      if (!range.contains(floor)) continue;
      SynthInstance inst;
      inst.profile = restrict_to_range(full->profile, registry, range);
      inst.features = extract_features(inst.profile, registry, range);
      inst.label = floor - range.first;
      instance = std::move(inst);
    }
    if (!instance) {
      throw Error(ErrorKind::Numerical, "simulator produced no usable scan after " +
                                            std::to_string(config.max_retries) + " attempts");
    }
    set.features.push_back(std::move(instance->features));
    set.labels.push_back(instance->label);
  }
  return set;
}

}  // namespace storey
