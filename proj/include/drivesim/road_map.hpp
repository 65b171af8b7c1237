#pragma once

#include <optional>
#include <span>
#include <vector>

#include "drivesim/types.hpp"

namespace drivesim
{

/// Lane-level queries over a scenario: the ego route (the start lane followed
/// through first successors), lane lookup by position, speed limits and
/// stop lines. Immutable after construction.
class RoadMap
{
public:
  /// Straight extension appended to the route so rollouts never run off its end.
  static constexpr double kRouteExtension = 300.0;

  struct StopLine
  {
    double route_arc{0.0};
    const TrafficLight * light{nullptr};
  };

  explicit RoadMap(const Scenario & scenario);

  const Scenario & scenario() const { return *scenario_; }
  const Polyline & route() const { return route_; }
  /// Arc length at which the mapped route ends (the extension starts there).
  double route_end() const { return route_end_; }
  std::span<const Lane * const> route_lanes() const { return route_lanes_; }
  const Lane * route_lane_at(double route_arc) const;
  bool on_route(const Lane * lane) const;

  /// Nearest lane whose corridor contains `p`; nullptr when off every lane.
  const Lane * lane_at(Vec2 p) const;
  /// Limit of the lane at `p`; lane connectors take the highest limit among
  /// the lanes they connect.
  std::optional<double> speed_limit_at(Vec2 p) const;
  std::optional<double> speed_limit_of(const Lane & lane) const;
  std::optional<double> route_speed_limit_at(double route_arc) const;
  std::span<const Vec2> drivable_polygon() const { return scenario_->drivable_polygon; }
  std::span<const StopLine> stop_lines() const { return stop_lines_; }

private:
  struct LaneIndex
  {
    const Lane * lane;
    Vec2 lo;
    Vec2 hi;
    double half_width;
  };

  const Scenario * scenario_;
  Polyline route_;
  double route_end_{0.0};
  std::vector<const Lane *> route_lanes_;
  std::vector<double> route_lane_start_;
  std::vector<LaneIndex> index_;
  std::vector<StopLine> stop_lines_;
};

}  // namespace drivesim
