#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "drivesim/geometry.hpp"

namespace drivesim
{

class RoadMap;

enum class AgentKind { vehicle, pedestrian, static_object };

const char * to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string & name);

struct VehicleDims
{
  double length{4.6};
  double width{2.0};
};

struct AgentState
{
  std::string id;
  AgentKind kind{AgentKind::vehicle};
  Pose2D pose;
  double speed{0.0};
  double length{4.6};
  double width{2.0};
  std::optional<std::string> lane_id;

  OrientedBox box() const { return {pose, length, width}; }
  /// Throws std::invalid_argument on non-positive dimensions or a negative/non-finite speed.
  void validate() const;
};

struct EgoState
{
  Pose2D pose;
  double velocity{0.0};
  double acceleration{0.0};
  double length{4.6};
  double width{2.0};
  double timestamp{0.0};

  OrientedBox box() const { return {pose, length, width}; }
  VehicleDims dims() const { return {length, width}; }
  void validate() const;
};

std::array<Vec2, 4> bounding_box_corners(const AgentState & state);
std::array<Vec2, 4> bounding_box_corners(const EgoState & state);

/// Lanes are resampled at construction so centerline spacing never exceeds 1 m.
class Lane
{
public:
  static constexpr double kMaxSpacing = 1.0;
  static constexpr double kDefaultWidth = 3.5;

  /// Missing boundaries are generated at half the default lane width on
  /// either side. Throws std::invalid_argument on a degenerate centerline or
  /// a non-positive speed limit.
  Lane(
    std::string id, std::vector<Vec2> centerline, std::optional<double> speed_limit,
    std::vector<Vec2> left_boundary = {}, std::vector<Vec2> right_boundary = {},
    std::vector<std::string> successors = {}, bool is_connector = false);

  const std::string & id() const { return id_; }
  const Polyline & centerline() const { return centerline_; }
  const Polyline & left_boundary() const { return left_; }
  const Polyline & right_boundary() const { return right_; }
  const std::optional<double> & speed_limit() const { return speed_limit_; }
  const std::vector<std::string> & successors() const { return successors_; }
  bool is_connector() const { return is_connector_; }
  /// Centerline vertices as poses (heading of the outgoing segment).
  std::vector<Pose2D> centerline_poses() const;

  /// Half width at the given arc length, measured from the boundaries.
  double half_width_at(double arc_length) const;

private:
  std::string id_;
  Polyline centerline_;
  Polyline left_;
  Polyline right_;
  std::optional<double> speed_limit_;
  std::vector<std::string> successors_;
  bool is_connector_{false};
};

/// Projects `point` onto the lane centerline. Offset is positive to the left
/// of travel. Throws std::invalid_argument for an empty lane.
PolylineProjection project_to_centerline(const Lane & lane, Vec2 point);

enum class LightState { green, yellow, red };
const char * to_string(LightState state);
LightState light_state_from_string(const std::string & name);

/// Fixed-schedule traffic light guarding the end of `lane_id` (or `stop_arc_length` along it).
struct TrafficLight
{
  struct Phase
  {
    double start_time{0.0};
    LightState state{LightState::green};
  };
  std::string lane_id;
  std::optional<double> stop_arc_length;
  std::vector<Phase> schedule;

  LightState state_at(double time) const;
};

/// Scripted motion of a background agent: it travels along its lane (or its
/// initial heading if it has none) following a piecewise-linear speed profile.
struct AgentScript
{
  struct Keyframe
  {
    double time{0.0};
    double speed{0.0};
  };
  std::string agent_id;
  std::vector<Keyframe> speed_profile;

  double speed_at(double time) const;
  /// Distance travelled in [0, time] (exact integral of the profile).
  double distance_at(double time) const;
};

enum class AgentPolicy { non_reactive_replay, reactive_idm };
const char * to_string(AgentPolicy policy);
AgentPolicy agent_policy_from_string(const std::string & name);

struct Scenario
{
  std::string id;
  std::string description;
  std::vector<Lane> lanes;
  std::vector<Vec2> drivable_polygon;
  EgoState ego_init;
  std::vector<AgentState> agents_init;
  std::vector<AgentScript> agent_scripts;
  AgentPolicy agent_policy{AgentPolicy::non_reactive_replay};
  std::vector<TrafficLight> traffic_lights;
  int duration_steps{150};
  double dt{0.1};
  std::optional<double> expert_progress;

  double duration() const { return duration_steps * dt; }
  const Lane * find_lane(const std::string & lane_id) const;
  const AgentScript * find_script(const std::string & agent_id) const;
  /// Throws std::invalid_argument on any broken invariant.
  void validate() const;
};

struct TrajectorySample
{
  double t{0.0};
  Pose2D pose;
  double velocity{0.0};

  friend bool operator==(const TrajectorySample &, const TrajectorySample &) = default;
};

/// Samples at a fixed `dt`; the first sample is the state the trajectory starts from.
struct Trajectory
{
  double dt{0.1};
  std::vector<TrajectorySample> samples;

  double horizon() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
  bool empty() const { return samples.empty(); }

  friend bool operator==(const Trajectory &, const Trajectory &) = default;
};

/// Snapshot of everything a planner sees at one tick.
struct WorldView
{
  const Scenario * scenario{nullptr};
  const RoadMap * road{nullptr};
  int tick{0};
  double time{0.0};
  EgoState ego;
  std::vector<AgentState> agents;
};

}  // namespace drivesim
