#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace drivesim
{

struct Vec2
{
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

double dot(Vec2 a, Vec2 b);
double cross(Vec2 a, Vec2 b);
double norm(Vec2 a);
double distance(Vec2 a, Vec2 b);

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

struct Pose2D
{
  double x{0.0};
  double y{0.0};
  double heading{0.0};

  Pose2D() = default;
  Pose2D(double x_, double y_, double heading_)
  : x(x_), y(y_), heading(normalize_angle(heading_))
  {
  }

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D &, const Pose2D &) = default;
};

/// Oriented rectangle; `length` along heading, `width` across it.
struct OrientedBox
{
  Pose2D center;
  double length{0.0};
  double width{0.0};

  std::array<Vec2, 4> corners() const;
};

// Corners are ordered front-left, front-right, rear-right, rear-left.
std::array<Vec2, 4> box_corners(const Pose2D & center, double length, double width);

/// Separating-axis test. Touching boxes count as intersecting.
bool boxes_intersect(const OrientedBox & a, const OrientedBox & b);

/// Intersection polygon of two convex polygons (Sutherland-Hodgman); empty if disjoint.
std::vector<Vec2> convex_clip(std::span<const Vec2> subject, std::span<const Vec2> clip);
Vec2 polygon_centroid(std::span<const Vec2> polygon);

bool point_in_polygon(Vec2 p, std::span<const Vec2> polygon);
double distance_to_segment(Vec2 p, Vec2 a, Vec2 b);
double distance_to_polygon_boundary(Vec2 p, std::span<const Vec2> polygon);

/// Result of projecting a point onto a polyline.
struct PolylineProjection
{
  double arc_length{0.0};
  /// Positive to the left of the direction of travel.
  double lateral_offset{0.0};
  double heading{0.0};
  std::size_t segment{0};
};

/// Piecewise-linear curve with cached cumulative arc length. Projection
/// extrapolates beyond both ends along the first/last segment.
class Polyline
{
public:
  Polyline() = default;
  /// Throws std::invalid_argument unless there are at least two points with
  /// strictly increasing arc length.
  explicit Polyline(std::vector<Vec2> points);

  std::span<const Vec2> points() const { return points_; }
  std::span<const double> arc_lengths() const { return arc_; }
  double length() const { return arc_.empty() ? 0.0 : arc_.back(); }
  bool empty() const { return points_.empty(); }

  PolylineProjection project(Vec2 p) const;
  /// Restricts the search to segments overlapping [s_min, s_max].
  PolylineProjection project_within(Vec2 p, double s_min, double s_max) const;

  Pose2D pose_at(double s) const;
  double heading_at(double s) const;

  /// Sub-curve covering [s0, s1] (clamped to the curve).
  Polyline slice(double s0, double s1) const;
  /// Shift every vertex by `d` along the averaged left normal.
  Polyline offset(double d) const;
  /// Resample so that consecutive vertices are at most `max_spacing` apart.
  Polyline resampled(double max_spacing) const;

private:
  std::size_t segment_at(double s) const;
  PolylineProjection project_segments(Vec2 p, std::size_t first, std::size_t last) const;

  std::vector<Vec2> points_;
  std::vector<double> arc_;
  // Axis-aligned bounds of consecutive segment blocks, used to prune projections.
  struct Block
  {
    Vec2 lo;
    Vec2 hi;
  };
  std::vector<Block> blocks_;
};

}  // namespace drivesim
