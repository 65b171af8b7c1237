#include "drivesim/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "drivesim/idm_planner.hpp"
#include "drivesim/road_map.hpp"

namespace drivesim
{
namespace
{
constexpr double kHalfLane = 0.5 * Lane::kDefaultWidth;

Lane straight_lane(
  std::string id, Vec2 from, Vec2 to, std::optional<double> limit, std::vector<std::string> successors = {},
  bool connector = false)
{
  return Lane(std::move(id), {from, to}, limit, {}, {}, std::move(successors), connector);
}

// Polygon bounded by the path shifted `left` to the left and `right` to the right.
std::vector<Vec2> corridor_polygon(const Polyline & path, double left, double right)
{
  const Polyline coarse = path.resampled(2.0);
  const Polyline l = coarse.offset(left);
  const Polyline r = coarse.offset(-right);
  std::vector<Vec2> poly(l.points().begin(), l.points().end());
  for (auto it = r.points().rbegin(); it != r.points().rend(); ++it) {
    poly.push_back(*it);
  }
  return poly;
}

EgoState ego_at(double x, double y, double heading, double speed)
{
  EgoState ego;
  ego.pose = Pose2D(x, y, heading);
  ego.velocity = speed;
  return ego;
}

AgentState agent(std::string id, AgentKind kind, Pose2D pose, double speed, double length, double width,
                 std::optional<std::string> lane = std::nullopt)
{
  AgentState a;
  a.id = std::move(id);
  a.kind = kind;
  a.pose = pose;
  a.speed = speed;
  a.length = length;
  a.width = width;
  a.lane_id = std::move(lane);
  return a;
}

void finish(Scenario & s, std::optional<double> expert)
{
  s.validate();
  s.expert_progress = expert ? expert : std::optional(free_flow_progress(s));
}
}  // namespace

double free_flow_progress(const Scenario & scenario)
{
  const RoadMap road(scenario);
  const PlannerParams params;
  double s = road.route().project(scenario.ego_init.pose.position()).arc_length;
  double v = scenario.ego_init.velocity;
  double travelled = 0.0;
  for (int k = 0; k + 1 < scenario.duration_steps; ++k) {
    const double target = road.route_speed_limit_at(s).value_or(params.fallback_target_velocity);
    const double a = idm_acceleration(v, target, std::nullopt, 0.0, params);
    s += v * scenario.dt;
    travelled += v * scenario.dt;
    v = std::max(0.0, v + a * scenario.dt);
  }
  return travelled;
}

Scenario make_free_road(double length, double speed_limit, double initial_speed)
{
  Scenario s;
  s.id = "free_road";
  s.description = "Straight empty road. The default planner should drive near the limit and score close to 1.";
  s.lanes.push_back(straight_lane("main", {-20.0, 0.0}, {length, 0.0}, speed_limit));
  s.drivable_polygon = {{-20.0, -3.5}, {length, -3.5}, {length, 3.5}, {-20.0, 3.5}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, initial_speed);
  finish(s, std::nullopt);
  return s;
}

Scenario make_lead_follow(double bumper_gap, double leader_speed, double initial_speed)
{
  Scenario s;
  s.id = "lead_follow";
  s.description = "A slower car ahead at constant speed. The default planner should settle behind it.";
  s.lanes.push_back(straight_lane("main", {-20.0, 0.0}, {500.0, 0.0}, 15.0));
  s.drivable_polygon = {{-20.0, -3.5}, {500.0, -3.5}, {500.0, 3.5}, {-20.0, 3.5}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, initial_speed);
  const double lead_x = 4.6 + bumper_gap;
  s.agents_init.push_back(agent("lead", AgentKind::vehicle, {lead_x, 0.0, 0.0}, leader_speed, 4.6, 2.0, "main"));
  s.agent_scripts.push_back({"lead", {{0.0, leader_speed}}});
  // A follower ends up one equilibrium gap behind the leader.
  const PlannerParams params;
  const double eq_gap = idm_desired_gap(leader_speed, 0.0, params) /
                        std::sqrt(1.0 - std::pow(leader_speed / 15.0, params.idm_exponent));
  finish(s, leader_speed * (s.duration_steps - 1) * s.dt + bumper_gap - eq_gap);
  return s;
}

Scenario make_stopped_leader(double bumper_gap, double initial_speed)
{
  Scenario s;
  s.id = "stopped_leader";
  s.description = "A broken-down car blocks the lane. The default planner should stop behind it.";
  s.lanes.push_back(straight_lane("main", {-20.0, 0.0}, {500.0, 0.0}, 15.0));
  s.drivable_polygon = {{-20.0, -3.5}, {500.0, -3.5}, {500.0, 3.5}, {-20.0, 3.5}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, initial_speed);
  s.agents_init.push_back(agent("stalled", AgentKind::vehicle, {4.6 + bumper_gap, 0.0, 0.0}, 0.0, 4.6, 2.0, "main"));
  finish(s, bumper_gap - PlannerParams{}.min_gap_to_lead_agent);
  return s;
}

Scenario make_cone_corridor(double intrusion, double start, double corridor_length)
{
  Scenario s;
  s.id = "cone_corridor";
  s.description =
    "Cones reach into the lane from the left while the right shoulder is drivable. The default offsets treat "
    "the cones as a lead obstacle and stop; a larger right offset passes them.";
  s.lanes.push_back(straight_lane("main", {-20.0, 0.0}, {450.0, 0.0}, 12.0));
  s.drivable_polygon = {{-20.0, -4.75}, {450.0, -4.75}, {450.0, kHalfLane}, {-20.0, kHalfLane}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, 10.0);
  const double cone = 0.5;
  const double y = kHalfLane - intrusion + 0.5 * cone;
  int index = 0;
  for (double x = start; x <= start + corridor_length + 1e-9; x += 5.0) {
    s.agents_init.push_back(agent(fmt::format("cone_{:02d}", index++), AgentKind::static_object, {x, y, 0.0}, 0.0, cone, cone));
  }
  finish(s, std::nullopt);
  return s;
}

Scenario make_lane_narrowing(double taper_start, double taper_length)
{
  Scenario s;
  s.id = "lane_narrowing";
  s.description =
    "The drivable area tapers from two lanes to one while the mapped ego lane runs straight on. The default "
    "offsets cannot reach the remaining lane, so the planner crawls towards the taper; a 3 m left offset "
    "keeps full speed.";
  s.lanes.push_back(straight_lane("right", {-20.0, 0.0}, {450.0, 0.0}, 13.0));
  s.lanes.push_back(straight_lane("left", {-20.0, Lane::kDefaultWidth}, {450.0, Lane::kDefaultWidth}, 13.0));
  const double top = Lane::kDefaultWidth + kHalfLane;
  s.drivable_polygon = {
    {-20.0, -kHalfLane}, {taper_start, -kHalfLane}, {taper_start + taper_length, kHalfLane},
    {450.0, kHalfLane},  {450.0, top},              {-20.0, top}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, 10.0);
  finish(s, std::nullopt);
  return s;
}

Scenario make_cross_traffic(double start_time, double cross_speed)
{
  Scenario s;
  s.id = "cross_traffic";
  s.description =
    "A car waiting on a perpendicular lane pulls out across the ego lane without yielding. The default "
    "planner reacts only once the constant-velocity forecast shows the conflict and may be too late.";
  const double cx = 60.0;
  const double w = 3.5;
  s.lanes.push_back(straight_lane("main", {-20.0, 0.0}, {350.0, 0.0}, 12.0));
  s.lanes.push_back(straight_lane("cross", {cx, -60.0}, {cx, 60.0}, 10.0));
  s.drivable_polygon = {
    {-20.0, -2.5}, {cx - w, -2.5}, {cx - w, -60.0}, {cx + w, -60.0}, {cx + w, -2.5}, {350.0, -2.5},
    {350.0, 2.5},  {cx + w, 2.5},  {cx + w, 60.0},  {cx - w, 60.0},  {cx - w, 2.5},  {-20.0, 2.5}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, 10.0);
  s.agents_init.push_back(
    agent("crosser", AgentKind::vehicle, {cx, -14.0, 0.5 * std::numbers::pi}, 0.0, 4.6, 2.0, "cross"));
  s.agent_scripts.push_back({"crosser", {{0.0, 0.0}, {start_time, 0.0}, {start_time + 2.0, cross_speed}}});
  finish(s, std::nullopt);
  return s;
}

Scenario make_sharp_turn(double radius, double speed_limit, double initial_speed, double approach)
{
  Scenario s;
  s.id = "sharp_turn";
  s.description =
    "The ego reaches a tight left turn fast, with a slower car in the inner lane and no shoulder outside. "
    "With the default deceleration limit every proposal runs wide off the road; braking harder before the "
    "turn stays on it.";
  const double pi = std::numbers::pi;
  const auto arc = [&](double r) {
    std::vector<Vec2> pts;
    for (int i = 0; i <= 36; ++i) {
      const double th = 0.5 * pi * i / 36.0;
      pts.push_back({r * std::sin(th), radius - r * std::cos(th)});
    }
    return pts;
  };
  const double w = Lane::kDefaultWidth;
  const double inner = radius - w;
  const double start = -approach - 40.0;
  s.lanes.push_back(straight_lane("approach", {start, 0.0}, {0.0, 0.0}, speed_limit, {"turn"}));
  s.lanes.push_back(Lane("turn", arc(radius), speed_limit, {}, {}, {"exit"}));
  s.lanes.push_back(straight_lane("exit", {radius, radius}, {radius, radius + 250.0}, speed_limit));
  s.lanes.push_back(straight_lane("inner_approach", {start, w}, {0.0, w}, speed_limit, {"inner_turn"}));
  s.lanes.push_back(Lane("inner_turn", arc(inner), speed_limit, {}, {}, {"inner_exit"}));
  s.lanes.push_back(straight_lane("inner_exit", {inner, radius}, {inner, radius + 250.0}, speed_limit));

  std::vector<Vec2> route_pts{{start, 0.0}};
  const auto turn = arc(radius);
  route_pts.insert(route_pts.end(), turn.begin() + 1, turn.end());
  route_pts.push_back({radius, radius + 250.0});
  s.drivable_polygon = corridor_polygon(Polyline(route_pts), w + kHalfLane, kHalfLane + 0.5);
  s.ego_init = ego_at(-approach, 0.0, 0.0, initial_speed);
  s.agents_init.push_back(agent("inner_car", AgentKind::vehicle, {-approach + 20.0, w, 0.0}, 7.0, 4.6, 2.0, "inner_approach"));
  s.agent_scripts.push_back({"inner_car", {{0.0, 7.0}}});
  finish(s, std::nullopt);
  return s;
}

Scenario make_pedestrian_crossing(double start_time, double crossing_x)
{
  Scenario s;
  s.id = "pedestrian_crossing";
  s.description = "A pedestrian steps onto the road ahead. The default planner should brake and wait.";
  s.lanes.push_back(straight_lane("main", {-20.0, 0.0}, {450.0, 0.0}, 12.0));
  s.drivable_polygon = {{-20.0, -3.5}, {450.0, -3.5}, {450.0, 3.5}, {-20.0, 3.5}};
  s.ego_init = ego_at(0.0, 0.0, 0.0, 10.0);
  s.agents_init.push_back(
    agent("walker", AgentKind::pedestrian, {crossing_x, -6.0, 0.5 * std::numbers::pi}, 0.0, 0.6, 0.6));
  s.agent_scripts.push_back({"walker", {{0.0, 0.0}, {start_time, 0.0}, {start_time + 0.5, 1.4}}});
  finish(s, std::nullopt);
  return s;
}

std::vector<Scenario> builtin_scenarios()
{
  std::vector<Scenario> out;
  out.push_back(make_free_road());
  out.push_back(make_lead_follow());
  out.push_back(make_stopped_leader());
  out.push_back(make_cone_corridor());
  out.push_back(make_lane_narrowing());
  out.push_back(make_cross_traffic());
  out.push_back(make_sharp_turn());
  out.push_back(make_pedestrian_crossing());
  return out;
}

std::vector<std::string> adversarial_scenario_ids()
{
  return {"cone_corridor", "lane_narrowing", "cross_traffic", "sharp_turn"};
}

std::vector<Scenario> adversarial_scenarios()
{
  std::vector<Scenario> out;
  out.push_back(make_cone_corridor());
  out.push_back(make_lane_narrowing());
  out.push_back(make_cross_traffic());
  out.push_back(make_sharp_turn());
  return out;
}

}  // namespace drivesim
