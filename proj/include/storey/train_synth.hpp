#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "storey/floor_detect.hpp"
#include "storey/mlp.hpp"
#include "storey/rfsim.hpp"

namespace storey {

// Emulation defaults are noise-free so that variability comes only from
// the explicit perturbation.
PropagationParams clean_emulation_params();

struct SynthConfig {
  double sigma_db = 1.5;          // rss perturbation
  int instances_per_floor = 500;  // per in-range label
  int width = kDefaultSearchWidth;
  std::uint64_t seed = 1;
  PropagationParams emulation = clean_emulation_params();
  // Subsample each floor's heard APs to the installed count of the matching
  // floor in a second, randomly drawn window.
  bool match_window_counts = true;
  bool strongest_first = true;  // otherwise a random subset
  // Balanced labels over random windows. When false, user floors are drawn
  // uniformly over the building and labelled against the computed search
  // range, which leaves the natural label skew in place.
  bool balance = true;
  int max_retries = 100;

  void validate() const;
};

struct LabeledFeatureSet {
  int width = kDefaultSearchWidth;
  std::vector<FloorFeatureVector> features;
  std::vector<int> labels;  // 0-based floor within each instance's range

  std::size_t size() const noexcept { return labels.size(); }
  Dataset to_dataset(const FeatureNormalization& normalization) const;
};

struct SynthInstance {
  WifiProfile profile;  // perturbed, restricted to the window
  FloorFeatureVector features;
  int label = 0;
};

// One instance for a user at `position` on floor range.first + label. `target`
// supplies the per-floor AP counts to match. Returns nullopt when nothing
// is heard.
std::optional<SynthInstance> synthesize_instance(const SimBuilding& building, const SynthConfig& config,
                                                 const FloorSearchRange& range, int label,
                                                 const FloorSearchRange& target, Vec2 position,
                                                 std::mt19937_64& rng);

// Throws Error(Numerical) when the simulator keeps producing empty scans.
LabeledFeatureSet synthesize_training_set(const SimBuilding& building, const SynthConfig& config);

}  // namespace storey
