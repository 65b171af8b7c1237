#include "drivesim/road_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace drivesim
{
namespace
{
constexpr double kLaneSearchMargin = 0.25;
}

RoadMap::RoadMap(const Scenario & scenario) : scenario_(&scenario)
{
  if (scenario.lanes.empty()) {
    throw std::invalid_argument("road map needs at least one lane");
  }
  for (const Lane & lane : scenario.lanes) {
    LaneIndex entry{&lane, lane.centerline().points().front(), lane.centerline().points().front(), 0.0};
    for (const Polyline * line : {&lane.centerline(), &lane.left_boundary(), &lane.right_boundary()}) {
      for (const Vec2 & p : line->points()) {
        entry.lo = {std::min(entry.lo.x, p.x), std::min(entry.lo.y, p.y)};
        entry.hi = {std::max(entry.hi.x, p.x), std::max(entry.hi.y, p.y)};
      }
    }
    entry.half_width = lane.half_width_at(0.5 * lane.centerline().length());
    index_.push_back(entry);
  }

  // Start lane: the lane containing the ego, preferring heading agreement.
  const Pose2D ego = scenario.ego_init.pose;
  const Lane * start = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const Lane & lane : scenario.lanes) {
    const auto proj = lane.centerline().project(ego.position());
    const double misalign = std::abs(normalize_angle(ego.heading - proj.heading));
    const double cost = std::abs(proj.lateral_offset) + (misalign > 1.57 ? 100.0 : 0.0);
    if (cost < best) {
      best = cost;
      start = &lane;
    }
  }

  std::set<const Lane *> visited;
  std::vector<Vec2> pts;
  for (const Lane * lane = start; lane != nullptr && !visited.count(lane);) {
    visited.insert(lane);
    route_lanes_.push_back(lane);
    double start_arc = 0.0;
    if (!pts.empty()) {
      start_arc = Polyline(pts).length();
    }
    route_lane_start_.push_back(start_arc);
    for (const Vec2 & p : lane->centerline().points()) {
      if (pts.empty() || distance(pts.back(), p) > 1e-6) {
        pts.push_back(p);
      }
    }
    lane = lane->successors().empty() ? nullptr : scenario.find_lane(lane->successors().front());
  }
  route_end_ = Polyline(pts).length();
  const Vec2 a = pts[pts.size() - 2];
  const Vec2 b = pts.back();
  pts.push_back(b + (kRouteExtension / distance(a, b)) * (b - a));
  route_ = Polyline(std::move(pts));

  for (const TrafficLight & light : scenario.traffic_lights) {
    for (std::size_t i = 0; i < route_lanes_.size(); ++i) {
      if (route_lanes_[i]->id() == light.lane_id) {
        const double along = light.stop_arc_length.value_or(route_lanes_[i]->centerline().length());
        stop_lines_.push_back({route_lane_start_[i] + along, &light});
      }
    }
  }
  std::sort(stop_lines_.begin(), stop_lines_.end(), [](const StopLine & l, const StopLine & r) {
    return l.route_arc < r.route_arc;
  });
}

const Lane * RoadMap::route_lane_at(double route_arc) const
{
  const Lane * lane = route_lanes_.front();
  for (std::size_t i = 0; i < route_lanes_.size(); ++i) {
    if (route_arc >= route_lane_start_[i]) {
      lane = route_lanes_[i];
    }
  }
  return lane;
}

bool RoadMap::on_route(const Lane * lane) const
{
  return std::find(route_lanes_.begin(), route_lanes_.end(), lane) != route_lanes_.end();
}

const Lane * RoadMap::lane_at(Vec2 p) const
{
  const Lane * found = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const LaneIndex & entry : index_) {
    if (p.x < entry.lo.x - kLaneSearchMargin || p.x > entry.hi.x + kLaneSearchMargin ||
        p.y < entry.lo.y - kLaneSearchMargin || p.y > entry.hi.y + kLaneSearchMargin) {
      continue;
    }
    const Polyline & center = entry.lane->centerline();
    const auto proj = center.project(p);
    if (proj.arc_length < -kLaneSearchMargin || proj.arc_length > center.length() + kLaneSearchMargin) {
      continue;
    }
    const double lat = std::abs(proj.lateral_offset);
    if (lat <= entry.half_width + kLaneSearchMargin && lat < best) {
      best = lat;
      found = entry.lane;
    }
  }
  return found;
}

std::optional<double> RoadMap::speed_limit_of(const Lane & lane) const
{
  if (!lane.is_connector()) {
    return lane.speed_limit();
  }
  std::optional<double> limit = lane.speed_limit();
  const auto consider = [&](const std::optional<double> & other) {
    if (other && (!limit || *other > *limit)) {
      limit = other;
    }
  };
  for (const Lane & other : scenario_->lanes) {
    const auto & succ = other.successors();
    if (std::find(succ.begin(), succ.end(), lane.id()) != succ.end()) {
      consider(other.speed_limit());
    }
  }
  for (const std::string & id : lane.successors()) {
    if (const Lane * next = scenario_->find_lane(id)) {
      consider(next->speed_limit());
    }
  }
  return limit;
}

std::optional<double> RoadMap::speed_limit_at(Vec2 p) const
{
  const Lane * lane = lane_at(p);
  return lane ? speed_limit_of(*lane) : std::nullopt;
}

std::optional<double> RoadMap::route_speed_limit_at(double route_arc) const
{
  return speed_limit_of(*route_lane_at(route_arc));
}

}  // namespace drivesim
