#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "storey/engine.hpp"
#include "storey/floor_detect.hpp"
#include "storey/loc2d.hpp"
#include "storey/metrics.hpp"
#include "storey/mlp.hpp"
#include "storey/refine.hpp"
#include "storey/rfsim.hpp"
#include "storey/train_synth.hpp"

namespace storey::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Text helpers. Errors are Error(Io) for the file system, Error(Parse) for
// malformed JSON and Error(Schema) for missing or mistyped fields.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
Json parse_json(const std::string& text, const std::string& source = "input");
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& doc);
std::vector<Json> read_json_lines(const std::filesystem::path& path);
void write_json_lines(const std::filesystem::path& path, std::span<const Json> lines);

// Registry
Json registry_to_json(const ApRegistry& registry);
ApRegistry registry_from_json(const Json& doc);

// Trace lines
struct TraceRecord {
  WifiScan scan;
  std::optional<TruthFix> truth;
};

Json trace_line_to_json(const WifiScan& scan, const TruthFix* truth);
TraceRecord trace_line_from_json(const Json& line);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, const SimTrace& trace);
void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records);
// Throws Error(Schema) unless every record carries truth.
SimTrace to_sim_trace(std::span<const TraceRecord> records);

// Fixes
FixRecord to_record(const EngineFix& fix);
Json fix_to_json(const FixRecord& fix);
FixRecord fix_from_json(const Json& line);
void write_fixes(const std::filesystem::path& path, std::span<const FixRecord> fixes);
std::vector<FixRecord> read_fixes(const std::filesystem::path& path);

// Models
Json floor_model_to_json(const FloorClassifier& model);
FloorClassifier floor_model_from_json(const Json& doc);
Json rank_model_to_json(const RankGaussianModel& model);
RankGaussianModel rank_model_from_json(const Json& doc);
Json quality_model_to_json(const QualityModel& model);
QualityModel quality_model_from_json(const Json& doc);

// Training data
Json dataset_to_json(const LabeledFeatureSet& data);
LabeledFeatureSet dataset_from_json(const Json& doc);
Json distance_sample_to_json(const DistanceSample& s);
DistanceSample distance_sample_from_json(const Json& line);

// Configurations. Missing fields keep their defaults.
Json building_spec_to_json(const BuildingSpec& spec);
BuildingSpec building_spec_from_json(const Json& doc);
Json propagation_to_json(const PropagationParams& params);
PropagationParams propagation_from_json(const Json& doc, PropagationParams base = {});
Json trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const Json& doc);
Json synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const Json& doc, SynthConfig base = {});
Json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& doc, TrainConfig base = {});
Json engine_params_to_json(const EngineParams& params);

// Evaluation
Json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const Json& doc);
std::string cdf_csv(const MetricsReport& report);
std::string loss_curve_csv(std::span<const EpochStats> curve);

}  // namespace storey::io
