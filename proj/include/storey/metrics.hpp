#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "storey/geo.hpp"
#include "storey/rfsim.hpp"

namespace storey {

// A fix as read back from a fixes file.
struct FixRecord {
  double t = 0.0;
  int floor = 0;
  std::optional<GeoPoint> point;
  std::optional<double> quality_m;

  friend bool operator==(const FixRecord&, const FixRecord&) = default;
};

struct MetricsReport {
  std::size_t fixes = 0;    // fixes with a truth record at the same timestamp
  std::size_t unmatched = 0;
  double exact_floor_pct = 0.0;
  std::map<int, std::size_t> floor_error_counts;  // |floor - true floor| -> count
  std::size_t located = 0;  // matched fixes that carry a position
  double error_p50_m = 0.0;
  double error_p75_m = 0.0;
  double error_p90_m = 0.0;
  std::vector<double> errors_m;  // sorted ascending, the empirical CDF support
  std::map<std::string, std::string> config;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Linear interpolation between order statistics at rank q * (n - 1).
// `sorted` must be ascending and non-empty.
double quantile(std::span<const double> sorted, double q);

// Matches fixes to truth by exact timestamp. 2D errors are great-circle
// distances. Error terms are computed in parallel.
MetricsReport evaluate(std::span<const FixRecord> fixes, std::span<const TruthFix> truth);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace storey
