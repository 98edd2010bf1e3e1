#include "storey/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "storey/error.hpp"

namespace storey {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kLocalRangeM = 2000.0;

}  // namespace

GeoPoint::GeoPoint(double lat_deg, double lon_deg) : lat_(lat_deg), lon_(lon_deg) {
  if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg) || lat_deg < -90.0 || lat_deg > 90.0 ||
      lon_deg < -180.0 || lon_deg > 180.0) {
    std::ostringstream os;
    os << "invalid geo point (" << lat_deg << ", " << lon_deg << ")";
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
}

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

double distance(Vec2 a, Vec2 b) { return norm(a - b); }

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat() * kDegToRad;
  const double phi2 = b.lat() * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon() - a.lon()) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

LocalPoint project_local(const GeoPoint& anchor, const GeoPoint& p) {
  const double cos_lat = std::cos(anchor.lat() * kDegToRad);
  LocalPoint out;
  out.x = kEarthRadiusM * (p.lon() - anchor.lon()) * kDegToRad * cos_lat;
  out.y = kEarthRadiusM * (p.lat() - anchor.lat()) * kDegToRad;
  out.anchor = anchor;
  if (std::hypot(out.x, out.y) > kLocalRangeM) {
    std::ostringstream os;
    os << "point " << std::hypot(out.x, out.y) << " m from local anchor; projection error grows";
    warn(os.str());
  }
  return out;
}

GeoPoint unproject_local(const LocalPoint& p) {
  const double cos_lat = std::cos(p.anchor.lat() * kDegToRad);
  const double lat = p.anchor.lat() + p.y / kEarthRadiusM / kDegToRad;
  const double lon = p.anchor.lon() + p.x / (kEarthRadiusM * cos_lat) / kDegToRad;
  return GeoPoint(lat, lon);
}

Polygon2::Polygon2(std::vector<Vec2> ring) : ring_(std::move(ring)) {
  if (ring_.size() < 3) throw Error(ErrorKind::InvalidArgument, "polygon needs at least 3 vertices");
  if (ring_.front() == ring_.back()) ring_.pop_back();
  if (ring_.size() < 3) throw Error(ErrorKind::InvalidArgument, "polygon needs at least 3 distinct vertices");
  bounds_.min = bounds_.max = ring_.front();
  for (const Vec2& v : ring_) {
    bounds_.min.x = std::min(bounds_.min.x, v.x);
    bounds_.min.y = std::min(bounds_.min.y, v.y);
    bounds_.max.x = std::max(bounds_.max.x, v.x);
    bounds_.max.y = std::max(bounds_.max.y, v.y);
  }
}

double Polygon2::area() const {
  double twice = 0.0;
  for (std::size_t i = 0, j = ring_.size() - 1; i < ring_.size(); j = i++) {
    twice += ring_[j].x * ring_[i].y - ring_[i].x * ring_[j].y;
  }
  return std::abs(twice) / 2.0;
}

bool Polygon2::contains(Vec2 p, double tol) const {
  if (ring_.empty()) return false;
  if (p.x < bounds_.min.x - tol || p.x > bounds_.max.x + tol || p.y < bounds_.min.y - tol ||
      p.y > bounds_.max.y + tol) {
    return false;
  }
  bool inside = false;
  for (std::size_t i = 0, j = ring_.size() - 1; i < ring_.size(); j = i++) {
    const Vec2 a = ring_[j];
    const Vec2 b = ring_[i];
    if (distance_to_segment(p, a, b) <= tol) return true;
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 == 0.0) return distance(p, a);
  const Vec2 ap = p - a;
  const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

}  // namespace storey
