#include "drivesim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace drivesim
{
namespace
{
constexpr std::size_t kBlockSegments = 32;
constexpr double kPi = std::numbers::pi;

double bbox_distance(Vec2 p, Vec2 lo, Vec2 hi)
{
  const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
  const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
  return std::hypot(dx, dy);
}

double signed_area(std::span<const Vec2> poly)
{
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * area;
}
}  // namespace

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

double normalize_angle(double angle)
{
  if (!std::isfinite(angle)) {
    throw std::invalid_argument("angle must be finite");
  }
  double a = std::fmod(angle + kPi, 2.0 * kPi);
  if (a < 0.0) {
    a += 2.0 * kPi;
  }
  a -= kPi;
  // fmod maps +pi to -pi; the range is half-open on the negative side.
  if (a <= -kPi) {
    a = kPi;
  }
  return a;
}

std::array<Vec2, 4> box_corners(const Pose2D & center, double length, double width)
{
  const double c = std::cos(center.heading);
  const double s = std::sin(center.heading);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  const auto place = [&](double lx, double ly) {
    return Vec2{center.x + c * lx - s * ly, center.y + s * lx + c * ly};
  };
  return {place(hl, hw), place(hl, -hw), place(-hl, -hw), place(-hl, hw)};
}

std::array<Vec2, 4> OrientedBox::corners() const { return box_corners(center, length, width); }

bool boxes_intersect(const OrientedBox & a, const OrientedBox & b)
{
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 axes[4] = {
    {std::cos(a.center.heading), std::sin(a.center.heading)},
    {-std::sin(a.center.heading), std::cos(a.center.heading)},
    {std::cos(b.center.heading), std::sin(b.center.heading)},
    {-std::sin(b.center.heading), std::cos(b.center.heading)},
  };
  for (const Vec2 & axis : axes) {
    double amin = std::numeric_limits<double>::infinity();
    double amax = -amin;
    double bmin = amin;
    double bmax = -amin;
    for (int i = 0; i < 4; ++i) {
      const double pa = dot(ca[i], axis);
      const double pb = dot(cb[i], axis);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    if (amax < bmin || bmax < amin) {
      return false;
    }
  }
  return true;
}

std::vector<Vec2> convex_clip(std::span<const Vec2> subject, std::span<const Vec2> clip)
{
  std::vector<Vec2> output(subject.begin(), subject.end());
  const double orientation = signed_area(clip) >= 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Vec2 a = clip[i];
    const Vec2 b = clip[(i + 1) % clip.size()];
    const auto inside = [&](Vec2 p) { return orientation * cross(b - a, p - a) >= 0.0; };
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Vec2 cur = input[j];
      const Vec2 prev = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in != prev_in) {
        const Vec2 d = cur - prev;
        const double denom = cross(b - a, d);
        if (std::abs(denom) > 1e-15) {
          const double t = cross(b - a, a - prev) / denom;
          output.push_back(prev + t * d);
        }
      }
      if (cur_in) {
        output.push_back(cur);
      }
    }
  }
  return output;
}

Vec2 polygon_centroid(std::span<const Vec2> polygon)
{
  if (polygon.empty()) {
    return {};
  }
  const double area = signed_area(polygon);
  if (std::abs(area) < 1e-12) {
    Vec2 mean{};
    for (const Vec2 & p : polygon) {
      mean = mean + p;
    }
    return (1.0 / static_cast<double>(polygon.size())) * mean;
  }
  Vec2 c{};
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2 p = polygon[i];
    const Vec2 q = polygon[(i + 1) % polygon.size()];
    const double w = cross(p, q);
    c = c + w * (p + q);
  }
  return (1.0 / (6.0 * area)) * c;
}

bool point_in_polygon(Vec2 p, std::span<const Vec2> polygon)
{
  bool inside = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) {
        inside = !inside;
      }
    }
  }
  return inside;
}

double distance_to_segment(Vec2 p, Vec2 a, Vec2 b)
{
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) {
    return distance(p, a);
  }
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

double distance_to_polygon_boundary(Vec2 p, std::span<const Vec2> polygon)
{
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    best = std::min(best, distance_to_segment(p, polygon[i], polygon[(i + 1) % polygon.size()]));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Polyline

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points))
{
  if (points_.size() < 2) {
    throw std::invalid_argument("polyline needs at least two points");
  }
  arc_.reserve(points_.size());
  arc_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double ds = distance(points_[i - 1], points_[i]);
    if (!(ds > 0.0)) {
      throw std::invalid_argument("polyline arc length must be strictly increasing");
    }
    arc_.push_back(arc_.back() + ds);
  }
  const std::size_t segments = points_.size() - 1;
  for (std::size_t first = 0; first < segments; first += kBlockSegments) {
    const std::size_t last = std::min(first + kBlockSegments, segments);
    Block block{points_[first], points_[first]};
    for (std::size_t i = first; i <= last; ++i) {
      block.lo = {std::min(block.lo.x, points_[i].x), std::min(block.lo.y, points_[i].y)};
      block.hi = {std::max(block.hi.x, points_[i].x), std::max(block.hi.y, points_[i].y)};
    }
    blocks_.push_back(block);
  }
}

PolylineProjection Polyline::project_segments(Vec2 p, std::size_t first, std::size_t last) const
{
  // Segments [first, last) are scanned block by block, nearest block first.
  const std::size_t segments = points_.size() - 1;
  struct Candidate
  {
    double bound;
    std::size_t block;
  };
  std::vector<Candidate> order;
  const std::size_t b0 = first / kBlockSegments;
  const std::size_t b1 = (last + kBlockSegments - 1) / kBlockSegments;
  order.reserve(b1 - b0);
  for (std::size_t b = b0; b < b1; ++b) {
    order.push_back({bbox_distance(p, blocks_[b].lo, blocks_[b].hi), b});
  }
  std::sort(order.begin(), order.end(), [](const Candidate & l, const Candidate & r) {
    return l.bound < r.bound || (l.bound == r.bound && l.block < r.block);
  });

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_seg = first;
  for (const Candidate & c : order) {
    if (c.bound > best) {
      break;
    }
    const std::size_t s0 = std::max(first, c.block * kBlockSegments);
    const std::size_t s1 = std::min(last, (c.block + 1) * kBlockSegments);
    for (std::size_t i = s0; i < s1; ++i) {
      const double d = distance_to_segment(p, points_[i], points_[i + 1]);
      if (d < best || (d == best && i < best_seg)) {
        best = d;
        best_seg = i;
      }
    }
  }

  const Vec2 a = points_[best_seg];
  const Vec2 b = points_[best_seg + 1];
  const Vec2 ab = b - a;
  const double seg_len = arc_[best_seg + 1] - arc_[best_seg];
  double t = dot(p - a, ab) / (seg_len * seg_len);
  const bool open_start = best_seg == 0;
  const bool open_end = best_seg + 1 == segments;
  if (!(open_start && t < 0.0) && !(open_end && t > 1.0)) {
    t = std::clamp(t, 0.0, 1.0);
  }
  PolylineProjection proj;
  proj.segment = best_seg;
  proj.arc_length = arc_[best_seg] + t * seg_len;
  proj.heading = std::atan2(ab.y, ab.x);
  proj.lateral_offset = cross((1.0 / seg_len) * ab, p - a);
  return proj;
}

PolylineProjection Polyline::project(Vec2 p) const
{
  if (points_.empty()) {
    throw std::logic_error("projection onto empty polyline");
  }
  return project_segments(p, 0, points_.size() - 1);
}

PolylineProjection Polyline::project_within(Vec2 p, double s_min, double s_max) const
{
  if (points_.empty()) {
    throw std::logic_error("projection onto empty polyline");
  }
  const std::size_t first = segment_at(s_min);
  const std::size_t last = segment_at(s_max) + 1;
  return project_segments(p, first, last);
}

std::size_t Polyline::segment_at(double s) const
{
  if (s <= 0.0) {
    return 0;
  }
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  const auto idx = static_cast<std::size_t>(it - arc_.begin());
  return std::min(idx == 0 ? 0 : idx - 1, points_.size() - 2);
}

Pose2D Polyline::pose_at(double s) const
{
  const std::size_t i = segment_at(s);
  const Vec2 a = points_[i];
  const Vec2 b = points_[i + 1];
  const double seg_len = arc_[i + 1] - arc_[i];
  const double t = (s - arc_[i]) / seg_len;
  const Vec2 p = a + t * (b - a);
  return {p.x, p.y, std::atan2(b.y - a.y, b.x - a.x)};
}

double Polyline::heading_at(double s) const
{
  const std::size_t i = segment_at(s);
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

Polyline Polyline::slice(double s0, double s1) const
{
  s0 = std::clamp(s0, 0.0, length());
  s1 = std::clamp(s1, 0.0, length());
  if (s1 - s0 < 1e-6) {
    throw std::invalid_argument("polyline slice is empty");
  }
  std::vector<Vec2> pts;
  pts.push_back(pose_at(s0).position());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (arc_[i] > s0 + 1e-9 && arc_[i] < s1 - 1e-9) {
      pts.push_back(points_[i]);
    }
  }
  pts.push_back(pose_at(s1).position());
  return Polyline(std::move(pts));
}

Polyline Polyline::offset(double d) const
{
  if (d == 0.0) {
    return *this;
  }
  const std::size_t n = points_.size();
  std::vector<Vec2> normals(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 t = (1.0 / (arc_[i + 1] - arc_[i])) * (points_[i + 1] - points_[i]);
    normals[i] = {-t.y, t.x};
  }
  std::vector<Vec2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 nrm;
    if (i == 0) {
      nrm = normals.front();
    } else if (i + 1 == n) {
      nrm = normals.back();
    } else {
      const Vec2 sum = normals[i - 1] + normals[i];
      const double len = norm(sum);
      nrm = len > 1e-9 ? (1.0 / len) * sum : normals[i];
      // Miter scaling keeps the shifted segments parallel, capped for sharp corners.
      const double c = std::max(dot(nrm, normals[i]), 0.5);
      nrm = (1.0 / c) * nrm;
    }
    const Vec2 p = points_[i] + d * nrm;
    if (out.empty() || distance(out.back(), p) > 1e-6) {
      out.push_back(p);
    }
  }
  if (out.size() < 2) {
    throw std::invalid_argument("offset polyline degenerated");
  }
  return Polyline(std::move(out));
}

Polyline Polyline::resampled(double max_spacing) const
{
  if (!(max_spacing > 0.0)) {
    throw std::invalid_argument("resample spacing must be positive");
  }
  std::vector<Vec2> out;
  out.push_back(points_.front());
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const double seg = arc_[i + 1] - arc_[i];
    const auto pieces = static_cast<std::size_t>(std::ceil(seg / max_spacing - 1e-9));
    for (std::size_t k = 1; k <= pieces; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(pieces);
      out.push_back(points_[i] + t * (points_[i + 1] - points_[i]));
    }
  }
  return Polyline(std::move(out));
}

}  // namespace drivesim
