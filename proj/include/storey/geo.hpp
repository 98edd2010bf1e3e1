#pragma once

#include <span>
#include <vector>

namespace storey {

inline constexpr double kEarthRadiusM = 6371000.0;

class GeoPoint {
 public:
  GeoPoint() = default;
  // Throws Error(InvalidArgument) when non-finite or out of range.
  GeoPoint(double lat_deg, double lon_deg);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

// Meters east (x) and north (y) of an anchor.
struct LocalPoint {
  double x = 0.0;
  double y = 0.0;
  GeoPoint anchor;

  Vec2 xy() const { return {x, y}; }
};

// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversine_distance(const GeoPoint& a, const GeoPoint& b);

// Equirectangular projection around `anchor`. Emits a warning (does not
// throw) for points more than 2 km away.
LocalPoint project_local(const GeoPoint& anchor, const GeoPoint& p);
GeoPoint unproject_local(const LocalPoint& p);

// A fixed anchor shared by every projection in one building.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(GeoPoint anchor) : anchor_(anchor) {}

  const GeoPoint& anchor() const noexcept { return anchor_; }
  Vec2 to_local(const GeoPoint& p) const { return project_local(anchor_, p).xy(); }
  GeoPoint to_geo(Vec2 v) const { return unproject_local({v.x, v.y, anchor_}); }

 private:
  GeoPoint anchor_;
};

struct Box2 {
  Vec2 min;
  Vec2 max;
};

// Simple closed polygon in the local plane. Vertices in ring order, the
// closing edge is implicit.
class Polygon2 {
 public:
  Polygon2() = default;
  explicit Polygon2(std::vector<Vec2> ring);

  const std::vector<Vec2>& ring() const noexcept { return ring_; }
  Box2 bounds() const noexcept { return bounds_; }
  double area() const;
  // Boundary points count as inside (within `tol` meters).
  bool contains(Vec2 p, double tol = 1e-9) const;

 private:
  std::vector<Vec2> ring_;
  Box2 bounds_;
};

// Euclidean distance from p to the segment [a, b].
double distance_to_segment(Vec2 p, Vec2 a, Vec2 b);

}  // namespace storey
