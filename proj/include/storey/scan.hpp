#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "storey/geo.hpp"

namespace storey {

// 48-bit hardware address. Text form is lowercase, colon separated.
class Mac {
 public:
  Mac() = default;
  // Throws Error(InvalidArgument) if value has bits above 48.
  explicit Mac(std::uint64_t value);

  // Accepts 12 hex digits, optionally separated by ':' or '-'. Throws
  // Error(Parse) otherwise.
  static Mac parse(std::string_view text);

  std::uint64_t value() const noexcept { return value_; }
  std::string to_string() const;

  friend auto operator<=>(const Mac&, const Mac&) = default;

 private:
  std::uint64_t value_ = 0;
};

// Default virtual-AP rule: the last hex digit of a physical radio is 0.
Mac canonicalize_mac(Mac raw);

using VirtualApMapper = std::function<Mac(Mac)>;

struct AccessPoint {
  Mac mac;
  int floor = 1;  // 1-based installation floor
  GeoPoint location;
};

class ApRegistry {
 public:
  ApRegistry() = default;
  // `floor_polygons[f - 1]` is the outline of floor f. The local frame
  // anchors at `anchor`, or at the first vertex of floor 1 when absent.
  // Throws Error(Schema) on any invariant violation.
  ApRegistry(std::string building_id, int floor_count, std::vector<std::vector<GeoPoint>> floor_polygons,
             std::vector<AccessPoint> aps, std::optional<GeoPoint> anchor = std::nullopt);

  const std::string& building_id() const noexcept { return building_id_; }
  int floor_count() const noexcept { return floor_count_; }
  const LocalFrame& frame() const noexcept { return frame_; }

  const std::vector<AccessPoint>& aps() const noexcept { return aps_; }
  const AccessPoint& ap(std::size_t index) const { return aps_.at(index); }
  Vec2 local_position(std::size_t index) const { return local_.at(index); }
  std::optional<std::size_t> index_of(Mac mac) const;
  // Indices of the APs installed on floor f (A_f), in registry order.
  std::span<const std::size_t> aps_on_floor(int floor) const;

  const std::vector<GeoPoint>& floor_outline(int floor) const { return outlines_.at(check_floor(floor)); }
  const Polygon2& floor_polygon(int floor) const { return polygons_.at(check_floor(floor)); }

 private:
  std::size_t check_floor(int floor) const;

  std::string building_id_;
  int floor_count_ = 0;
  LocalFrame frame_;
  std::vector<std::vector<GeoPoint>> outlines_;
  std::vector<Polygon2> polygons_;
  std::vector<AccessPoint> aps_;
  std::vector<Vec2> local_;
  std::unordered_map<std::uint64_t, std::size_t> by_mac_;
  std::vector<std::vector<std::size_t>> by_floor_;
};

struct WifiObservation {
  Mac mac;
  double rss = -100.0;  // dBm

  friend bool operator==(const WifiObservation&, const WifiObservation&) = default;
};

struct WifiScan {
  double timestamp = 0.0;  // seconds
  std::vector<WifiObservation> observations;

  friend bool operator==(const WifiScan&, const WifiScan&) = default;
};

// Throws Error(Schema) for a non-finite timestamp or rss, or duplicate MACs.
void validate_scan(const WifiScan& scan);

// Maps every observation to its physical MAC and averages the rss of the
// virtual radios that share one. Output is sorted by MAC.
WifiScan merge_virtual(const WifiScan& scan, const VirtualApMapper& mapper = canonicalize_mac);

// Union of the APs seen over a time window, each with its strongest rss.
struct WifiProfile {
  double t = 0.0;
  double window = 0.0;
  std::map<Mac, double> rss;

  bool empty() const noexcept { return rss.empty(); }
  std::size_t size() const noexcept { return rss.size(); }

  friend bool operator==(const WifiProfile&, const WifiProfile&) = default;
};

// Scans must be time ordered, canonicalized and merged. Includes every scan
// with timestamp in [max(0, t - window), t].
WifiProfile build_profile(std::span<const WifiScan> scans, double t, double window);

// Drops observations of MACs the registry does not know.
WifiProfile restrict_to_registry(const WifiProfile& profile, const ApRegistry& registry);

}  // namespace storey
