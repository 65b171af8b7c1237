#include "drivesim/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace drivesim
{

const char * to_string(AgentKind kind)
{
  switch (kind) {
    case AgentKind::vehicle:
      return "vehicle";
    case AgentKind::pedestrian:
      return "pedestrian";
    case AgentKind::static_object:
      return "static_object";
  }
  return "vehicle";
}

AgentKind agent_kind_from_string(const std::string & name)
{
  if (name == "vehicle") return AgentKind::vehicle;
  if (name == "pedestrian") return AgentKind::pedestrian;
  if (name == "static_object") return AgentKind::static_object;
  throw std::invalid_argument("unknown agent kind: " + name);
}

const char * to_string(LightState state)
{
  switch (state) {
    case LightState::green:
      return "green";
    case LightState::yellow:
      return "yellow";
    case LightState::red:
      return "red";
  }
  return "green";
}

LightState light_state_from_string(const std::string & name)
{
  if (name == "green") return LightState::green;
  if (name == "yellow") return LightState::yellow;
  if (name == "red") return LightState::red;
  throw std::invalid_argument("unknown light state: " + name);
}

const char * to_string(AgentPolicy policy)
{
  return policy == AgentPolicy::reactive_idm ? "reactive_idm" : "non_reactive_replay";
}

AgentPolicy agent_policy_from_string(const std::string & name)
{
  if (name == "non_reactive_replay") return AgentPolicy::non_reactive_replay;
  if (name == "reactive_idm") return AgentPolicy::reactive_idm;
  throw std::invalid_argument("unknown agent policy: " + name);
}

void AgentState::validate() const
{
  if (!(length > 0.0) || !(width > 0.0)) {
    throw std::invalid_argument("agent " + id + ": dimensions must be positive");
  }
  if (!std::isfinite(speed) || speed < 0.0) {
    throw std::invalid_argument("agent " + id + ": speed must be finite and non-negative");
  }
}

void EgoState::validate() const
{
  if (!(length > 0.0) || !(width > 0.0)) {
    throw std::invalid_argument("ego dimensions must be positive");
  }
  if (!std::isfinite(velocity) || velocity < 0.0) {
    throw std::invalid_argument("ego velocity must be finite and non-negative");
  }
}

std::array<Vec2, 4> bounding_box_corners(const AgentState & state)
{
  return box_corners(state.pose, state.length, state.width);
}

std::array<Vec2, 4> bounding_box_corners(const EgoState & state)
{
  return box_corners(state.pose, state.length, state.width);
}

// ---------------------------------------------------------------------------

Lane::Lane(
  std::string id, std::vector<Vec2> centerline, std::optional<double> speed_limit,
  std::vector<Vec2> left_boundary, std::vector<Vec2> right_boundary,
  std::vector<std::string> successors, bool is_connector)
: id_(std::move(id)),
  speed_limit_(speed_limit),
  successors_(std::move(successors)),
  is_connector_(is_connector)
{
  if (centerline.size() < 2) {
    throw std::invalid_argument("lane " + id_ + ": centerline needs at least two points");
  }
  if (speed_limit_ && !(*speed_limit_ > 0.0)) {
    throw std::invalid_argument("lane " + id_ + ": speed limit must be positive");
  }
  try {
    centerline_ = Polyline(std::move(centerline)).resampled(kMaxSpacing);
  } catch (const std::invalid_argument & e) {
    throw std::invalid_argument("lane " + id_ + ": " + e.what());
  }
  left_ = left_boundary.size() >= 2 ? Polyline(std::move(left_boundary))
                                    : centerline_.offset(0.5 * kDefaultWidth);
  right_ = right_boundary.size() >= 2 ? Polyline(std::move(right_boundary))
                                      : centerline_.offset(-0.5 * kDefaultWidth);
  const Vec2 mid = centerline_.pose_at(0.5 * centerline_.length()).position();
  if (left_.project(mid).lateral_offset > 0.0 || right_.project(mid).lateral_offset < 0.0) {
    throw std::invalid_argument("lane " + id_ + ": boundaries do not bracket the centerline");
  }
}

std::vector<Pose2D> Lane::centerline_poses() const
{
  std::vector<Pose2D> poses;
  const auto pts = centerline_.points();
  const auto arc = centerline_.arc_lengths();
  poses.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    poses.emplace_back(pts[i].x, pts[i].y, centerline_.heading_at(arc[i]));
  }
  return poses;
}

double Lane::half_width_at(double arc_length) const
{
  const Vec2 p = centerline_.pose_at(arc_length).position();
  return 0.5 * (std::abs(left_.project(p).lateral_offset) +
                std::abs(right_.project(p).lateral_offset));
}

PolylineProjection project_to_centerline(const Lane & lane, Vec2 point)
{
  if (lane.centerline().empty()) {
    throw std::invalid_argument("lane " + lane.id() + " has no centerline");
  }
  return lane.centerline().project(point);
}

LightState TrafficLight::state_at(double time) const
{
  LightState state = schedule.empty() ? LightState::green : schedule.front().state;
  for (const Phase & phase : schedule) {
    if (phase.start_time <= time + 1e-9) {
      state = phase.state;
    }
  }
  return state;
}

double AgentScript::speed_at(double time) const
{
  if (speed_profile.empty()) {
    return 0.0;
  }
  if (time <= speed_profile.front().time) {
    return speed_profile.front().speed;
  }
  for (std::size_t i = 1; i < speed_profile.size(); ++i) {
    const Keyframe & a = speed_profile[i - 1];
    const Keyframe & b = speed_profile[i];
    if (time <= b.time) {
      const double span = b.time - a.time;
      const double u = span > 0.0 ? (time - a.time) / span : 1.0;
      return a.speed + u * (b.speed - a.speed);
    }
  }
  return speed_profile.back().speed;
}

double AgentScript::distance_at(double time) const
{
  if (speed_profile.empty() || time <= 0.0) {
    return 0.0;
  }
  // Integrate the piecewise-linear profile over [0, time].
  std::vector<double> knots{0.0};
  for (const Keyframe & k : speed_profile) {
    if (k.time > 0.0 && k.time < time) {
      knots.push_back(k.time);
    }
  }
  knots.push_back(time);
  double total = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    total += 0.5 * (speed_at(knots[i - 1]) + speed_at(knots[i])) * (knots[i] - knots[i - 1]);
  }
  return total;
}

const Lane * Scenario::find_lane(const std::string & lane_id) const
{
  const auto it = std::find_if(lanes.begin(), lanes.end(), [&](const Lane & l) {
    return l.id() == lane_id;
  });
  return it == lanes.end() ? nullptr : &*it;
}

const AgentScript * Scenario::find_script(const std::string & agent_id) const
{
  const auto it = std::find_if(agent_scripts.begin(), agent_scripts.end(), [&](const AgentScript & s) {
    return s.agent_id == agent_id;
  });
  return it == agent_scripts.end() ? nullptr : &*it;
}

void Scenario::validate() const
{
  const auto fail = [&](const std::string & what) {
    throw std::invalid_argument("scenario " + id + ": " + what);
  };
  if (!(dt > 0.0)) fail("dt must be positive");
  if (duration_steps <= 0) fail("duration_steps must be positive");
  if (lanes.empty()) fail("at least one lane is required");
  std::set<std::string> lane_ids;
  for (const Lane & lane : lanes) {
    if (!lane_ids.insert(lane.id()).second) fail("duplicate lane id " + lane.id());
  }
  for (const Lane & lane : lanes) {
    for (const std::string & succ : lane.successors()) {
      if (!lane_ids.count(succ)) fail("lane " + lane.id() + " has unknown successor " + succ);
    }
  }
  if (drivable_polygon.size() < 3) fail("drivable polygon needs at least three vertices");
  ego_init.validate();
  if (!point_in_polygon(ego_init.pose.position(), drivable_polygon)) {
    fail("ego_init lies outside the drivable polygon");
  }
  std::set<std::string> agent_ids;
  for (const AgentState & agent : agents_init) {
    agent.validate();
    if (!agent_ids.insert(agent.id).second) fail("duplicate agent id " + agent.id);
    if (agent.lane_id && !lane_ids.count(*agent.lane_id)) {
      fail("agent " + agent.id + " references unknown lane " + *agent.lane_id);
    }
  }
  for (const AgentScript & script : agent_scripts) {
    if (!agent_ids.count(script.agent_id)) fail("script for unknown agent " + script.agent_id);
    for (std::size_t i = 0; i < script.speed_profile.size(); ++i) {
      const auto & k = script.speed_profile[i];
      if (k.speed < 0.0 || !std::isfinite(k.speed)) fail("script speeds must be non-negative");
      if (i > 0 && k.time < script.speed_profile[i - 1].time) fail("script keyframes out of order");
    }
  }
  for (const TrafficLight & light : traffic_lights) {
    if (!lane_ids.count(light.lane_id)) fail("traffic light on unknown lane " + light.lane_id);
  }
  if (expert_progress && *expert_progress < 0.0) fail("expert_progress must be non-negative");
}

}  // namespace drivesim
