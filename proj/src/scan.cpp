#include "storey/scan.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "storey/error.hpp"

namespace storey {

namespace {

constexpr std::uint64_t kMacMask = 0xFFFFFFFFFFFFULL;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Mac::Mac(std::uint64_t value) : value_(value) {
  if ((value & ~kMacMask) != 0) throw Error(ErrorKind::InvalidArgument, "MAC value exceeds 48 bits");
}

Mac Mac::parse(std::string_view text) {
  std::uint64_t value = 0;
  int digits = 0;
  char separator = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const int v = hex_value(c);
    if (v >= 0) {
      value = (value << 4) | static_cast<std::uint64_t>(v);
      ++digits;
      continue;
    }
    // Separators must sit between byte pairs and be used consistently.
    const bool sep_ok = (c == ':' || c == '-') && digits % 2 == 0 && digits > 0 && digits < 12 &&
                        (separator == 0 || separator == c);
    if (!sep_ok) throw Error(ErrorKind::Parse, "malformed MAC '" + std::string(text) + "'");
    separator = c;
  }
  if (digits != 12) throw Error(ErrorKind::Parse, "malformed MAC '" + std::string(text) + "'");
  return Mac(value);
}

std::string Mac::to_string() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(17);
  for (int byte = 5; byte >= 0; --byte) {
    const auto b = static_cast<unsigned>((value_ >> (8 * byte)) & 0xFF);
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
    if (byte > 0) out.push_back(':');
  }
  return out;
}

Mac canonicalize_mac(Mac raw) { return Mac(raw.value() & ~std::uint64_t{0xF}); }

ApRegistry::ApRegistry(std::string building_id, int floor_count,
                       std::vector<std::vector<GeoPoint>> floor_polygons, std::vector<AccessPoint> aps,
                       std::optional<GeoPoint> anchor)
    : building_id_(std::move(building_id)),
      floor_count_(floor_count),
      outlines_(std::move(floor_polygons)),
      aps_(std::move(aps)) {
  if (floor_count_ < 1) throw Error(ErrorKind::Schema, "registry needs at least one floor");
  if (static_cast<int>(outlines_.size()) != floor_count_) {
    throw Error(ErrorKind::Schema, "expected one polygon per floor");
  }
  if (outlines_.front().empty()) throw Error(ErrorKind::Schema, "floor 1 polygon is empty");
  frame_ = LocalFrame(anchor.value_or(outlines_.front().front()));

  polygons_.reserve(outlines_.size());
  for (std::size_t f = 0; f < outlines_.size(); ++f) {
    std::vector<Vec2> ring;
    ring.reserve(outlines_[f].size());
    for (const GeoPoint& g : outlines_[f]) ring.push_back(frame_.to_local(g));
    try {
      polygons_.emplace_back(std::move(ring));
    } catch (const Error& e) {
      throw Error(ErrorKind::Schema, "floor " + std::to_string(f + 1) + ": " + e.what());
    }
  }

  by_floor_.resize(static_cast<std::size_t>(floor_count_));
  local_.reserve(aps_.size());
  for (std::size_t i = 0; i < aps_.size(); ++i) {
    const AccessPoint& a = aps_[i];
    if (a.floor < 1 || a.floor > floor_count_) {
      throw Error(ErrorKind::Schema, "AP " + a.mac.to_string() + " has floor " + std::to_string(a.floor) +
                                         " outside [1, " + std::to_string(floor_count_) + "]");
    }
    if (!by_mac_.emplace(a.mac.value(), i).second) {
      throw Error(ErrorKind::Schema, "duplicate AP " + a.mac.to_string());
    }
    const Vec2 p = frame_.to_local(a.location);
    if (!polygons_[static_cast<std::size_t>(a.floor - 1)].contains(p, 1e-6)) {
      throw Error(ErrorKind::Schema, "AP " + a.mac.to_string() + " lies outside its floor polygon");
    }
    local_.push_back(p);
    by_floor_[static_cast<std::size_t>(a.floor - 1)].push_back(i);
  }
}

std::optional<std::size_t> ApRegistry::index_of(Mac mac) const {
  const auto it = by_mac_.find(mac.value());
  if (it == by_mac_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> ApRegistry::aps_on_floor(int floor) const { return by_floor_.at(check_floor(floor)); }

std::size_t ApRegistry::check_floor(int floor) const {
  if (floor < 1 || floor > floor_count_) {
    throw Error(ErrorKind::InvalidArgument, "floor " + std::to_string(floor) + " out of range");
  }
  return static_cast<std::size_t>(floor - 1);
}

void validate_scan(const WifiScan& scan) {
  if (!std::isfinite(scan.timestamp)) throw Error(ErrorKind::Schema, "scan timestamp is not finite");
  std::set<Mac> seen;
  for (const WifiObservation& o : scan.observations) {
    if (!std::isfinite(o.rss)) throw Error(ErrorKind::Schema, "rss for " + o.mac.to_string() + " is not finite");
    if (!seen.insert(o.mac).second) throw Error(ErrorKind::Schema, "duplicate MAC " + o.mac.to_string() + " in scan");
  }
}

WifiScan merge_virtual(const WifiScan& scan, const VirtualApMapper& mapper) {
  std::map<Mac, std::pair<double, int>> sums;
  for (const WifiObservation& o : scan.observations) {
    auto& [sum, count] = sums[mapper(o.mac)];
    sum += o.rss;
    ++count;
  }
  WifiScan out;
  out.timestamp = scan.timestamp;
  out.observations.reserve(sums.size());
  for (const auto& [mac, acc] : sums) out.observations.push_back({mac, acc.first / acc.second});
  return out;
}

WifiProfile build_profile(std::span<const WifiScan> scans, double t, double window) {
  WifiProfile profile;
  profile.t = t;
  profile.window = window;
  const double lower = std::max(0.0, t - window);
  // Scans are time ordered: skip straight to the first one inside the window.
  auto first = std::lower_bound(scans.begin(), scans.end(), lower,
                                [](const WifiScan& s, double v) { return s.timestamp < v; });
  for (auto it = first; it != scans.end() && it->timestamp <= t; ++it) {
    for (const WifiObservation& o : it->observations) {
      auto [pos, inserted] = profile.rss.emplace(o.mac, o.rss);
      if (!inserted) pos->second = std::max(pos->second, o.rss);
    }
  }
  return profile;
}

WifiProfile restrict_to_registry(const WifiProfile& profile, const ApRegistry& registry) {
  WifiProfile out;
  out.t = profile.t;
  out.window = profile.window;
  for (const auto& [mac, rss] : profile.rss) {
    if (registry.index_of(mac)) out.rss.emplace(mac, rss);
  }
  return out;
}

}  // namespace storey
