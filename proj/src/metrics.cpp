#include "storey/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>
#include <unordered_map>

#include "storey/error.hpp"

namespace storey {

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::InvalidArgument, "quantile level must be in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

MetricsReport evaluate(std::span<const FixRecord> fixes, std::span<const TruthFix> truth) {
  std::unordered_map<double, std::size_t> by_time;
  by_time.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) by_time.emplace(truth[i].t, i);

  MetricsReport report;
  std::vector<std::pair<const FixRecord*, const TruthFix*>> located;
  std::size_t exact = 0;
  for (const auto& f : fixes) {
    const auto it = by_time.find(f.t);
    if (it == by_time.end()) {
      ++report.unmatched;
      continue;
    }
    const TruthFix& tr = truth[it->second];
    ++report.fixes;
    const int delta = std::abs(f.floor - tr.floor);
    ++report.floor_error_counts[delta];
    exact += delta == 0 ? 1 : 0;
    if (f.point) located.emplace_back(&f, &tr);
  }
  if (report.fixes > 0) {
    report.exact_floor_pct = 100.0 * static_cast<double>(exact) / static_cast<double>(report.fixes);
  }

  report.located = located.size();
  report.errors_m.resize(located.size());
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, located.size() / 256));
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (located.size() + workers - 1) / std::max<std::size_t>(workers, 1);
  for (std::size_t begin = 0; begin < located.size(); begin += chunk) {
    const std::size_t end = std::min(located.size(), begin + chunk);
    jobs.push_back(std::async(std::launch::async, [&, begin, end] {
      for (std::size_t i = begin; i < end; ++i) {
        report.errors_m[i] = haversine_distance(*located[i].first->point, located[i].second->point);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  std::sort(report.errors_m.begin(), report.errors_m.end());
  if (!report.errors_m.empty()) {
    report.error_p50_m = quantile(report.errors_m, 0.5);
    report.error_p75_m = quantile(report.errors_m, 0.75);
    report.error_p90_m = quantile(report.errors_m, 0.9);
  }
  return report;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "correlation needs two equally sized samples of at least 2");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace storey
