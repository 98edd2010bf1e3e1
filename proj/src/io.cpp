#include "storey/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "storey/error.hpp"

namespace storey::io {

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorKind::Schema, what); }

const Json& field(const Json& doc, const char* key, const std::string& context) {
  if (!doc.is_object()) schema_error(context + ": expected an object");
  const auto it = doc.find(key);
  if (it == doc.end()) schema_error(context + ": missing field '" + key + "'");
  return *it;
}

double number(const Json& doc, const char* key, const std::string& context) {
  const Json& v = field(doc, key, context);
  if (!v.is_number()) schema_error(context + ": field '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(context + ": field '" + key + "' must be finite");
  return d;
}

long long integer(const Json& doc, const char* key, const std::string& context) {
  const Json& v = field(doc, key, context);
  if (!v.is_number_integer()) schema_error(context + ": field '" + key + "' must be an integer");
  return v.get<long long>();
}

std::string text(const Json& doc, const char* key, const std::string& context) {
  const Json& v = field(doc, key, context);
  if (!v.is_string()) schema_error(context + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const Json& doc, const char* key, const std::string& context) {
  const Json& v = field(doc, key, context);
  if (!v.is_boolean()) schema_error(context + ": field '" + key + "' must be a boolean");
  return v.get<bool>();
}

const Json& array(const Json& doc, const char* key, const std::string& context) {
  const Json& v = field(doc, key, context);
  if (!v.is_array()) schema_error(context + ": field '" + key + "' must be an array");
  return v;
}

std::vector<double> numbers(const Json& arr, const std::string& context) {
  if (!arr.is_array()) schema_error(context + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const Json& v : arr) {
    if (!v.is_number()) schema_error(context + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

// Optional overrides keep the caller's default when the key is absent.
void maybe(const Json& doc, const char* key, double& out, const std::string& ctx) {
  if (doc.contains(key)) out = number(doc, key, ctx);
}
void maybe(const Json& doc, const char* key, int& out, const std::string& ctx) {
  if (doc.contains(key)) out = static_cast<int>(integer(doc, key, ctx));
}
void maybe(const Json& doc, const char* key, bool& out, const std::string& ctx) {
  if (doc.contains(key)) out = boolean(doc, key, ctx);
}
void maybe(const Json& doc, const char* key, std::uint64_t& out, const std::string& ctx) {
  if (doc.contains(key)) {
    const Json& v = field(doc, key, ctx);
    if (!v.is_number_unsigned()) schema_error(ctx + ": field '" + key + "' must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }
}

void check_version(const Json& doc, const std::string& context, const char* kind = nullptr) {
  const long long v = integer(doc, "schema_version", context);
  if (v != kSchemaVersion) schema_error(context + ": unsupported schema_version " + std::to_string(v));
  if (kind && text(doc, "kind", context) != kind) schema_error(context + ": expected kind '" + kind + "'");
}

GeoPoint geo(double lat, double lon, const std::string& context) {
  try {
    return GeoPoint(lat, lon);
  } catch (const Error& e) {
    schema_error(context + ": " + e.what());
  }
}

Json geo_pair(const GeoPoint& p) { return Json::array({p.lat(), p.lon()}); }

GeoPoint geo_from_pair(const Json& v, const std::string& context) {
  const auto xs = numbers(v, context);
  if (xs.size() != 2) schema_error(context + ": expected [lat, lon]");
  return geo(xs[0], xs[1], context);
}

Mac mac_from(const Json& doc, const std::string& context) { return Mac::parse(text(doc, "mac", context)); }

double& feature_slot(FloorFeatures& f, FloorFeature which) {
  switch (which) {
    case FloorFeature::Num: return f.num;
    case FloorFeature::Str: return f.str;
    case FloorFeature::Avg: return f.avg;
    case FloorFeature::Var: return f.var;
    case FloorFeature::LocAvg30: return f.loc_avg_30;
    case FloorFeature::LocAvg80: return f.loc_avg_80;
    case FloorFeature::LocAvgAlpha: return f.loc_avg_alpha;
    case FloorFeature::Far: return f.far;
  }
  return f.num;
}

Json feature_order() {
  Json names = Json::array();
  for (FloorFeature f : kFeatureOrder) names.push_back(std::string(to_string(f)));
  return names;
}

void check_feature_order(const Json& doc, const std::string& context) {
  const Json& names = array(doc, "feature_order", context);
  if (names != feature_order()) schema_error(context + ": feature order does not match this build");
}

const char* placement_name(ApPlacement p) { return p == ApPlacement::Grid ? "grid" : "random"; }

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Json parse_json(const std::string& content, const std::string& source) {
  try {
    return Json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, source + ": " + e.what());
  }
}

Json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

void write_json(const std::filesystem::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::vector<Json> read_json_lines(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<Json> out;
  std::string line;
  std::size_t number_of_line = 0;
  while (std::getline(in, line)) {
    ++number_of_line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_json(line, path.string() + ":" + std::to_string(number_of_line)));
  }
  return out;
}

void write_json_lines(const std::filesystem::path& path, std::span<const Json> lines) {
  std::string content;
  for (const Json& l : lines) {
    content += l.dump();
    content += '\n';
  }
  write_text(path, content);
}

Json registry_to_json(const ApRegistry& registry) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "registry";
  doc["building_id"] = registry.building_id();
  doc["floor_count"] = registry.floor_count();
  doc["anchor"] = {{"lat", registry.frame().anchor().lat()}, {"lon", registry.frame().anchor().lon()}};
  Json floors = Json::array();
  for (int f = 1; f <= registry.floor_count(); ++f) {
    Json ring = Json::array();
    for (const GeoPoint& p : registry.floor_outline(f)) ring.push_back(geo_pair(p));
    floors.push_back({{"floor", f}, {"polygon", ring}});
  }
  doc["floors"] = floors;
  Json aps = Json::array();
  for (const AccessPoint& ap : registry.aps()) {
    aps.push_back({{"mac", ap.mac.to_string()}, {"floor", ap.floor}, {"lat", ap.location.lat()},
                   {"lon", ap.location.lon()}});
  }
  doc["aps"] = aps;
  return doc;
}

ApRegistry registry_from_json(const Json& doc) {
  const std::string ctx = "registry";
  check_version(doc, ctx);
  const std::string id = text(doc, "building_id", ctx);
  const long long floor_count = integer(doc, "floor_count", ctx);
  if (floor_count < 1 || floor_count > 1000) schema_error(ctx + ": floor_count out of range");
  std::vector<std::vector<GeoPoint>> polygons(static_cast<std::size_t>(floor_count));
  std::vector<bool> seen(polygons.size(), false);
  for (const Json& f : array(doc, "floors", ctx)) {
    const long long idx = integer(f, "floor", ctx + ".floors");
    if (idx < 1 || idx > floor_count) schema_error(ctx + ": floor index " + std::to_string(idx) + " out of range");
    if (seen[idx - 1]) schema_error(ctx + ": floor " + std::to_string(idx) + " listed twice");
    seen[idx - 1] = true;
    for (const Json& p : array(f, "polygon", ctx + ".floors")) polygons[idx - 1].push_back(geo_from_pair(p, ctx));
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) schema_error(ctx + ": floor " + std::to_string(i + 1) + " has no polygon");
  }
  std::vector<AccessPoint> aps;
  for (const Json& a : array(doc, "aps", ctx)) {
    const std::string actx = ctx + ".aps";
    AccessPoint ap;
    ap.mac = mac_from(a, actx);
    ap.floor = static_cast<int>(integer(a, "floor", actx));
    ap.location = geo(number(a, "lat", actx), number(a, "lon", actx), actx);
    aps.push_back(ap);
  }
  std::optional<GeoPoint> anchor;
  if (doc.contains("anchor")) {
    const Json& an = doc["anchor"];
    anchor = geo(number(an, "lat", ctx + ".anchor"), number(an, "lon", ctx + ".anchor"), ctx);
  }
  return ApRegistry(id, static_cast<int>(floor_count), std::move(polygons), std::move(aps), anchor);
}

Json trace_line_to_json(const WifiScan& scan, const TruthFix* truth) {
  Json line;
  line["t"] = scan.timestamp;
  Json obs = Json::array();
  for (const auto& o : scan.observations) obs.push_back({{"mac", o.mac.to_string()}, {"rss", o.rss}});
  line["observations"] = obs;
  if (truth) {
    line["truth"] = {{"floor", truth->floor}, {"lat", truth->point.lat()}, {"lon", truth->point.lon()}};
  }
  return line;
}

TraceRecord trace_line_from_json(const Json& line) {
  const std::string ctx = "trace line";
  TraceRecord rec;
  rec.scan.timestamp = number(line, "t", ctx);
  for (const Json& o : array(line, "observations", ctx)) {
    rec.scan.observations.push_back({mac_from(o, ctx), number(o, "rss", ctx)});
  }
  validate_scan(rec.scan);
  if (line.contains("truth") && !line["truth"].is_null()) {
    const Json& tr = line["truth"];
    TruthFix fix;
    fix.t = rec.scan.timestamp;
    fix.floor = static_cast<int>(integer(tr, "floor", ctx + ".truth"));
    fix.point = geo(number(tr, "lat", ctx + ".truth"), number(tr, "lon", ctx + ".truth"), ctx);
    rec.truth = fix;
  }
  return rec;
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::vector<TraceRecord> out;
  for (const Json& line : read_json_lines(path)) {
    out.push_back(trace_line_from_json(line));
    if (out.size() > 1 && !(out.back().scan.timestamp > out[out.size() - 2].scan.timestamp)) {
      schema_error(path.string() + ": timestamps must strictly increase (line " + std::to_string(out.size()) + ")");
    }
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const SimTrace& trace) {
  std::vector<Json> lines;
  lines.reserve(trace.scans.size());
  for (std::size_t i = 0; i < trace.scans.size(); ++i) {
    lines.push_back(trace_line_to_json(trace.scans[i], i < trace.truth.size() ? &trace.truth[i] : nullptr));
  }
  write_json_lines(path, lines);
}

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records) {
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(trace_line_to_json(r.scan, r.truth ? &*r.truth : nullptr));
  write_json_lines(path, lines);
}

SimTrace to_sim_trace(std::span<const TraceRecord> records) {
  SimTrace out;
  for (const auto& r : records) {
    if (!r.truth) schema_error("trace line at t=" + std::to_string(r.scan.timestamp) + " has no truth");
    out.scans.push_back(r.scan);
    out.truth.push_back(*r.truth);
  }
  return out;
}

FixRecord to_record(const EngineFix& fix) { return {fix.t, fix.floor, fix.point, fix.quality_m}; }

Json fix_to_json(const FixRecord& fix) {
  Json line;
  line["t"] = fix.t;
  line["floor"] = fix.floor;
  line["lat"] = fix.point ? Json(fix.point->lat()) : Json(nullptr);
  line["lon"] = fix.point ? Json(fix.point->lon()) : Json(nullptr);
  line["quality"] = fix.quality_m ? Json(*fix.quality_m) : Json(nullptr);
  return line;
}

FixRecord fix_from_json(const Json& line) {
  const std::string ctx = "fix line";
  FixRecord fix;
  fix.t = number(line, "t", ctx);
  fix.floor = static_cast<int>(integer(line, "floor", ctx));
  const bool has_lat = line.contains("lat") && !line["lat"].is_null();
  const bool has_lon = line.contains("lon") && !line["lon"].is_null();
  if (has_lat != has_lon) schema_error(ctx + ": lat and lon must both be present or both null");
  if (has_lat) fix.point = geo(number(line, "lat", ctx), number(line, "lon", ctx), ctx);
  if (line.contains("quality") && !line["quality"].is_null()) fix.quality_m = number(line, "quality", ctx);
  return fix;
}

void write_fixes(const std::filesystem::path& path, std::span<const FixRecord> fixes) {
  std::vector<Json> lines;
  lines.reserve(fixes.size());
  for (const auto& f : fixes) lines.push_back(fix_to_json(f));
  write_json_lines(path, lines);
}

std::vector<FixRecord> read_fixes(const std::filesystem::path& path) {
  std::vector<FixRecord> out;
  for (const Json& line : read_json_lines(path)) out.push_back(fix_from_json(line));
  return out;
}

Json floor_model_to_json(const FloorClassifier& model) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "floor-classifier";
  doc["width"] = model.width;
  doc["input_dim"] = model.network.input_dim();
  doc["hidden_dims"] = model.network.hidden_dims();
  doc["output_dim"] = model.network.output_dim();
  doc["feature_order"] = feature_order();
  const auto& n = model.normalization;
  doc["normalization"] = {{"count_scale", n.count_scale},       {"rss_offset", n.rss_offset},
                          {"rss_scale", n.rss_scale},           {"variance_scale", n.variance_scale},
                          {"distance_scale", n.distance_scale}, {"padding", 0.0}};
  doc["dropout"] = model.network.dropout();
  Json layers = Json::array();
  for (const DenseLayer& l : model.network.layers()) {
    layers.push_back({{"inputs", l.inputs}, {"outputs", l.outputs}, {"weights", l.weights}, {"bias", l.bias}});
  }
  doc["layers"] = layers;
  return doc;
}

FloorClassifier floor_model_from_json(const Json& doc) {
  const std::string ctx = "floor model";
  check_version(doc, ctx, "floor-classifier");
  check_feature_order(doc, ctx);
  FloorClassifier model;
  model.width = static_cast<int>(integer(doc, "width", ctx));
  const Json& n = field(doc, "normalization", ctx);
  model.normalization.count_scale = number(n, "count_scale", ctx);
  model.normalization.rss_offset = number(n, "rss_offset", ctx);
  model.normalization.rss_scale = number(n, "rss_scale", ctx);
  model.normalization.variance_scale = number(n, "variance_scale", ctx);
  model.normalization.distance_scale = number(n, "distance_scale", ctx);
  std::vector<DenseLayer> layers;
  for (const Json& l : array(doc, "layers", ctx)) {
    DenseLayer layer;
    layer.inputs = static_cast<int>(integer(l, "inputs", ctx));
    layer.outputs = static_cast<int>(integer(l, "outputs", ctx));
    layer.weights = numbers(field(l, "weights", ctx), ctx);
    layer.bias = numbers(field(l, "bias", ctx), ctx);
    layers.push_back(std::move(layer));
  }
  try {
    model.network = Mlp(std::move(layers), number(doc, "dropout", ctx));
    model.validate();
  } catch (const Error& e) {
    schema_error(ctx + ": " + e.what());
  }
  if (model.network.input_dim() != integer(doc, "input_dim", ctx) ||
      model.network.output_dim() != integer(doc, "output_dim", ctx)) {
    schema_error(ctx + ": declared dimensions do not match the layers");
  }
  return model;
}

Json rank_model_to_json(const RankGaussianModel& model) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "rank-gaussian";
  doc["anomaly_threshold"] = model.anomaly_threshold;
  doc["provenance"] = model.provenance;
  Json ranks = Json::array();
  for (int r = 0; r < kRankCount; ++r) {
    const RankGaussian& g = model.ranks[static_cast<std::size_t>(r)];
    ranks.push_back({{"rank", std::string(to_string(static_cast<RssRank>(r)))},
                     {"mean_m", g.mean_m},
                     {"sigma_m", g.sigma_m},
                     {"samples", g.samples}});
  }
  doc["ranks"] = ranks;
  return doc;
}

RankGaussianModel rank_model_from_json(const Json& doc) {
  const std::string ctx = "rank model";
  check_version(doc, ctx, "rank-gaussian");
  RankGaussianModel model;
  model.anomaly_threshold = number(doc, "anomaly_threshold", ctx);
  if (doc.contains("provenance")) model.provenance = text(doc, "provenance", ctx);
  const Json& ranks = array(doc, "ranks", ctx);
  if (ranks.size() != static_cast<std::size_t>(kRankCount)) schema_error(ctx + ": expected 6 ranks");
  for (int r = 0; r < kRankCount; ++r) {
    const Json& g = ranks[static_cast<std::size_t>(r)];
    if (text(g, "rank", ctx) != to_string(static_cast<RssRank>(r))) schema_error(ctx + ": ranks out of order");
    RankGaussian& out = model.ranks[static_cast<std::size_t>(r)];
    out.mean_m = number(g, "mean_m", ctx);
    out.sigma_m = number(g, "sigma_m", ctx);
    const long long n = integer(g, "samples", ctx);
    if (n < 0) schema_error(ctx + ": negative sample count");
    out.samples = static_cast<std::size_t>(n);
  }
  try {
    model.validate();
  } catch (const Error& e) {
    schema_error(ctx + ": " + e.what());
  }
  return model;
}

Json quality_model_to_json(const QualityModel& model) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "quality-linear";
  doc["features"] = {"ap_count", "mean_rss_dbm", "max_rss_dbm", "area_m2"};
  doc["weights"] = model.weights;
  doc["intercept"] = model.intercept;
  return doc;
}

QualityModel quality_model_from_json(const Json& doc) {
  const std::string ctx = "quality model";
  check_version(doc, ctx, "quality-linear");
  QualityModel model;
  const auto w = numbers(field(doc, "weights", ctx), ctx);
  if (w.size() != model.weights.size()) schema_error(ctx + ": expected 4 weights");
  std::copy(w.begin(), w.end(), model.weights.begin());
  model.intercept = number(doc, "intercept", ctx);
  return model;
}

Json dataset_to_json(const LabeledFeatureSet& data) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "floor-dataset";
  doc["width"] = data.width;
  doc["feature_order"] = feature_order();
  Json items = Json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const FloorFeatureVector& fv = data.features[i];
    Json slots = Json::array();
    for (const FloorFeatures& f : fv.floors) {
      Json values = Json::array();
      for (FloorFeature which : kFeatureOrder) values.push_back(f.get(which));
      slots.push_back(values);
    }
    items.push_back({{"label", data.labels[i]},
                     {"first_floor", fv.range.first},
                     {"floor_count", fv.range.count},
                     {"alpha", fv.alpha},
                     {"floors", slots}});
  }
  doc["instances"] = items;
  return doc;
}

LabeledFeatureSet dataset_from_json(const Json& doc) {
  const std::string ctx = "dataset";
  check_version(doc, ctx, "floor-dataset");
  check_feature_order(doc, ctx);
  LabeledFeatureSet data;
  data.width = static_cast<int>(integer(doc, "width", ctx));
  if (data.width < 1) schema_error(ctx + ": width must be positive");
  for (const Json& item : array(doc, "instances", ctx)) {
    FloorFeatureVector fv;
    fv.range.width = data.width;
    fv.range.first = static_cast<int>(integer(item, "first_floor", ctx));
    fv.range.count = static_cast<int>(integer(item, "floor_count", ctx));
    fv.alpha = number(item, "alpha", ctx);
    const int label = static_cast<int>(integer(item, "label", ctx));
    if (fv.range.count < 1 || fv.range.count > data.width || label < 0 || label >= fv.range.count) {
      schema_error(ctx + ": label or floor count out of range");
    }
    const Json& slots = array(item, "floors", ctx);
    if (slots.size() != static_cast<std::size_t>(data.width)) schema_error(ctx + ": expected one slot per window floor");
    for (const Json& s : slots) {
      const auto values = numbers(s, ctx);
      if (values.size() != kFeatureOrder.size()) schema_error(ctx + ": expected 8 features per slot");
      FloorFeatures f;
      for (std::size_t k = 0; k < values.size(); ++k) feature_slot(f, kFeatureOrder[k]) = values[k];
      fv.floors.push_back(f);
    }
    data.features.push_back(std::move(fv));
    data.labels.push_back(label);
  }
  return data;
}

Json distance_sample_to_json(const DistanceSample& s) { return {{"distance_m", s.distance_m}, {"rss", s.rss}}; }

DistanceSample distance_sample_from_json(const Json& line) {
  const std::string ctx = "distance sample";
  DistanceSample s{number(line, "distance_m", ctx), number(line, "rss", ctx)};
  if (s.distance_m < 0.0) schema_error(ctx + ": negative distance");
  return s;
}

Json building_spec_to_json(const BuildingSpec& spec) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "building-spec";
  doc["building_id"] = spec.building_id;
  doc["floors"] = spec.floors;
  doc["floor_height_m"] = spec.floor_height_m;
  doc["width_m"] = spec.width_m;
  doc["depth_m"] = spec.depth_m;
  Json footprints = Json::array();
  for (const auto& [w, d] : spec.floor_footprints) footprints.push_back({w, d});
  doc["floor_footprints"] = footprints;
  doc["aps_per_floor"] = spec.aps_per_floor;
  doc["placement"] = placement_name(spec.placement);
  Json explicit_aps = Json::array();
  for (const auto& floor : spec.explicit_aps) {
    Json pts = Json::array();
    for (const Vec2& p : floor) pts.push_back({p.x, p.y});
    explicit_aps.push_back(pts);
  }
  doc["explicit_aps"] = explicit_aps;
  doc["ap_margin_m"] = spec.ap_margin_m;
  doc["ap_height_m"] = spec.ap_height_m;
  doc["device_height_m"] = spec.device_height_m;
  doc["origin"] = {{"lat", spec.origin.lat()}, {"lon", spec.origin.lon()}};
  doc["seed"] = spec.seed;
  return doc;
}

BuildingSpec building_spec_from_json(const Json& doc) {
  const std::string ctx = "building spec";
  check_version(doc, ctx, "building-spec");
  BuildingSpec spec;
  if (doc.contains("building_id")) spec.building_id = text(doc, "building_id", ctx);
  maybe(doc, "floors", spec.floors, ctx);
  maybe(doc, "floor_height_m", spec.floor_height_m, ctx);
  maybe(doc, "width_m", spec.width_m, ctx);
  maybe(doc, "depth_m", spec.depth_m, ctx);
  if (doc.contains("floor_footprints")) {
    for (const Json& fp : array(doc, "floor_footprints", ctx)) {
      const auto wd = numbers(fp, ctx);
      if (wd.size() != 2) schema_error(ctx + ": footprints are [width, depth]");
      spec.floor_footprints.emplace_back(wd[0], wd[1]);
    }
  }
  if (doc.contains("aps_per_floor")) {
    for (const Json& n : array(doc, "aps_per_floor", ctx)) {
      if (!n.is_number_integer()) schema_error(ctx + ": aps_per_floor must hold integers");
      spec.aps_per_floor.push_back(n.get<int>());
    }
  }
  if (doc.contains("placement")) {
    const std::string p = text(doc, "placement", ctx);
    if (p == "grid") spec.placement = ApPlacement::Grid;
    else if (p == "random") spec.placement = ApPlacement::Random;
    else schema_error(ctx + ": placement must be 'grid' or 'random'");
  }
  if (doc.contains("explicit_aps")) {
    for (const Json& floor : array(doc, "explicit_aps", ctx)) {
      std::vector<Vec2> pts;
      if (!floor.is_array()) schema_error(ctx + ": explicit_aps holds one array per floor");
      for (const Json& p : floor) {
        const auto xy = numbers(p, ctx);
        if (xy.size() != 2) schema_error(ctx + ": AP positions are [x, y]");
        pts.push_back({xy[0], xy[1]});
      }
      spec.explicit_aps.push_back(std::move(pts));
    }
  }
  maybe(doc, "ap_margin_m", spec.ap_margin_m, ctx);
  maybe(doc, "ap_height_m", spec.ap_height_m, ctx);
  maybe(doc, "device_height_m", spec.device_height_m, ctx);
  if (doc.contains("origin")) {
    const Json& o = doc["origin"];
    spec.origin = geo(number(o, "lat", ctx), number(o, "lon", ctx), ctx);
  }
  maybe(doc, "seed", spec.seed, ctx);
  return spec;
}

Json propagation_to_json(const PropagationParams& p) {
  Json doc;
  doc["reference_power_dbm"] = p.reference_power_dbm;
  doc["path_loss_exponent"] = p.path_loss_exponent;
  doc["floor_loss_db"] = p.floor_loss_db;
  doc["shadowing_sigma_db"] = p.shadowing_sigma_db;
  doc["detection_threshold_dbm"] = p.detection_threshold_dbm;
  doc["rolloff_db"] = p.rolloff_db;
  doc["device_offset_db"] = p.device_offset_db;
  doc["virtual_aps"] = p.virtual_aps;
  doc["virtual_sigma_db"] = p.virtual_sigma_db;
  return doc;
}

PropagationParams propagation_from_json(const Json& doc, PropagationParams p) {
  const std::string ctx = "propagation";
  if (!doc.is_object()) schema_error(ctx + ": expected an object");
  maybe(doc, "reference_power_dbm", p.reference_power_dbm, ctx);
  maybe(doc, "path_loss_exponent", p.path_loss_exponent, ctx);
  maybe(doc, "floor_loss_db", p.floor_loss_db, ctx);
  maybe(doc, "shadowing_sigma_db", p.shadowing_sigma_db, ctx);
  maybe(doc, "detection_threshold_dbm", p.detection_threshold_dbm, ctx);
  maybe(doc, "rolloff_db", p.rolloff_db, ctx);
  maybe(doc, "device_offset_db", p.device_offset_db, ctx);
  maybe(doc, "virtual_aps", p.virtual_aps, ctx);
  maybe(doc, "virtual_sigma_db", p.virtual_sigma_db, ctx);
  try {
    p.validate();
  } catch (const Error& e) {
    schema_error(ctx + ": " + e.what());
  }
  return p;
}

Json trajectory_to_json(const Trajectory& t) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "trajectory";
  doc["speed_mps"] = t.speed_mps;
  doc["scan_interval_s"] = t.scan_interval_s;
  doc["start_time_s"] = t.start_time_s;
  Json segs = Json::array();
  for (const auto& s : t.segments) {
    Json pts = Json::array();
    for (const Vec2& p : s.waypoints) pts.push_back({p.x, p.y});
    segs.push_back({{"floor", s.floor}, {"dwell_s", s.dwell_s}, {"waypoints", pts}});
  }
  doc["segments"] = segs;
  return doc;
}

Trajectory trajectory_from_json(const Json& doc) {
  const std::string ctx = "trajectory";
  check_version(doc, ctx, "trajectory");
  Trajectory t;
  maybe(doc, "speed_mps", t.speed_mps, ctx);
  maybe(doc, "scan_interval_s", t.scan_interval_s, ctx);
  maybe(doc, "start_time_s", t.start_time_s, ctx);
  if (!(t.speed_mps > 0.0) || !(t.scan_interval_s > 0.0)) schema_error(ctx + ": speed and scan interval must be positive");
  if (doc.contains("segments")) {
    for (const Json& s : array(doc, "segments", ctx)) {
      TrajectorySegment seg;
      seg.floor = static_cast<int>(integer(s, "floor", ctx));
      if (s.contains("dwell_s")) seg.dwell_s = number(s, "dwell_s", ctx);
      for (const Json& p : array(s, "waypoints", ctx)) {
        const auto xy = numbers(p, ctx);
        if (xy.size() != 2) schema_error(ctx + ": waypoints are [x, y]");
        seg.waypoints.push_back({xy[0], xy[1]});
      }
      if (seg.waypoints.empty()) schema_error(ctx + ": segment without waypoints");
      t.segments.push_back(std::move(seg));
    }
  }
  return t;
}

Json synth_config_to_json(const SynthConfig& c) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "synth-config";
  doc["sigma_db"] = c.sigma_db;
  doc["instances_per_floor"] = c.instances_per_floor;
  doc["width"] = c.width;
  doc["seed"] = c.seed;
  doc["match_window_counts"] = c.match_window_counts;
  doc["strongest_first"] = c.strongest_first;
  doc["balance"] = c.balance;
  doc["max_retries"] = c.max_retries;
  doc["emulation"] = propagation_to_json(c.emulation);
  return doc;
}

SynthConfig synth_config_from_json(const Json& doc, SynthConfig c) {
  const std::string ctx = "synth config";
  check_version(doc, ctx, "synth-config");
  maybe(doc, "sigma_db", c.sigma_db, ctx);
  maybe(doc, "instances_per_floor", c.instances_per_floor, ctx);
  maybe(doc, "width", c.width, ctx);
  maybe(doc, "seed", c.seed, ctx);
  maybe(doc, "match_window_counts", c.match_window_counts, ctx);
  maybe(doc, "strongest_first", c.strongest_first, ctx);
  maybe(doc, "balance", c.balance, ctx);
  maybe(doc, "max_retries", c.max_retries, ctx);
  if (doc.contains("emulation")) c.emulation = propagation_from_json(doc["emulation"], c.emulation);
  try {
    c.validate();
  } catch (const Error& e) {
    schema_error(ctx + ": " + e.what());
  }
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "train-config";
  doc["learning_rate"] = c.learning_rate;
  doc["beta1"] = c.beta1;
  doc["beta2"] = c.beta2;
  doc["epsilon"] = c.epsilon;
  doc["batch_size"] = c.batch_size;
  doc["epochs"] = c.epochs;
  doc["patience"] = c.patience;
  doc["validation_fraction"] = c.validation_fraction;
  doc["seed"] = c.seed;
  return doc;
}

TrainConfig train_config_from_json(const Json& doc, TrainConfig c) {
  const std::string ctx = "train config";
  check_version(doc, ctx, "train-config");
  maybe(doc, "learning_rate", c.learning_rate, ctx);
  maybe(doc, "beta1", c.beta1, ctx);
  maybe(doc, "beta2", c.beta2, ctx);
  maybe(doc, "epsilon", c.epsilon, ctx);
  maybe(doc, "batch_size", c.batch_size, ctx);
  maybe(doc, "epochs", c.epochs, ctx);
  maybe(doc, "patience", c.patience, ctx);
  maybe(doc, "validation_fraction", c.validation_fraction, ctx);
  maybe(doc, "seed", c.seed, ctx);
  try {
    c.validate();
  } catch (const Error& e) {
    schema_error(ctx + ": " + e.what());
  }
  return c;
}

Json engine_params_to_json(const EngineParams& p) {
  Json doc;
  doc["nf_s"] = p.floor_window_s;
  doc["nl_s"] = p.location_window_s;
  doc["wf_db"] = p.floor_weight_db;
  doc["lthr"] = p.threshold;
  doc["wk_s"] = p.kf_window_s;
  doc["grid_m"] = p.grid_resolution_m;
  doc["faf"] = p.use_faf;
  doc["kf"] = p.use_kf;
  doc["floors_only"] = p.floors_only;
  doc["user_floor_aps_only"] = p.user_floor_aps_only;
  doc["kf_initial_variance"] = p.kf.initial_variance;
  doc["kf_sigma_position"] = p.kf.sigma_position;
  doc["kf_sigma_velocity"] = p.kf.sigma_velocity;
  return doc;
}

Json metrics_to_json(const MetricsReport& r) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "metrics";
  doc["fixes"] = r.fixes;
  doc["unmatched"] = r.unmatched;
  doc["exact_floor_pct"] = r.exact_floor_pct;
  Json confusion = Json::object();
  for (const auto& [delta, count] : r.floor_error_counts) confusion[std::to_string(delta)] = count;
  doc["floor_error_counts"] = confusion;
  doc["located"] = r.located;
  doc["error_m"] = {{"p50", r.error_p50_m}, {"p75", r.error_p75_m}, {"p90", r.error_p90_m}};
  doc["cdf_errors_m"] = r.errors_m;
  Json config = Json::object();
  for (const auto& [k, v] : r.config) config[k] = v;
  doc["config"] = config;
  return doc;
}

MetricsReport metrics_from_json(const Json& doc) {
  const std::string ctx = "metrics";
  check_version(doc, ctx, "metrics");
  MetricsReport r;
  r.fixes = static_cast<std::size_t>(integer(doc, "fixes", ctx));
  r.unmatched = static_cast<std::size_t>(integer(doc, "unmatched", ctx));
  r.exact_floor_pct = number(doc, "exact_floor_pct", ctx);
  const Json& confusion = field(doc, "floor_error_counts", ctx);
  if (!confusion.is_object()) schema_error(ctx + ": floor_error_counts must be an object");
  for (const auto& [k, v] : confusion.items()) {
    if (!v.is_number_integer()) schema_error(ctx + ": counts must be integers");
    r.floor_error_counts[std::stoi(k)] = v.get<std::size_t>();
  }
  r.located = static_cast<std::size_t>(integer(doc, "located", ctx));
  const Json& e = field(doc, "error_m", ctx);
  r.error_p50_m = number(e, "p50", ctx);
  r.error_p75_m = number(e, "p75", ctx);
  r.error_p90_m = number(e, "p90", ctx);
  r.errors_m = numbers(field(doc, "cdf_errors_m", ctx), ctx);
  if (doc.contains("config")) {
    for (const auto& [k, v] : doc["config"].items()) {
      if (!v.is_string()) schema_error(ctx + ": config values must be strings");
      r.config[k] = v.get<std::string>();
    }
  }
  return r;
}

std::string cdf_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << std::setprecision(17) << "error_m,cdf\n";
  const double n = static_cast<double>(report.errors_m.size());
  for (std::size_t i = 0; i < report.errors_m.size(); ++i) {
    out << report.errors_m[i] << ',' << static_cast<double>(i + 1) / n << '\n';
  }
  return out.str();
}

std::string loss_curve_csv(std::span<const EpochStats> curve) {
  std::ostringstream out;
  out << std::setprecision(17) << "epoch,train_loss,validation_loss\n";
  for (const auto& e : curve) out << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << '\n';
  return out.str();
}

}  // namespace storey::io
