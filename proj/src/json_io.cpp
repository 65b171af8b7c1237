#include "drivesim/json_io.hpp"

#include <fmt/format.h>
#include <fstream>
#include <set>
#include <stdexcept>

namespace drivesim
{
using nlohmann::json;

namespace
{
template <typename T>
T field(const json & j, const char * key)
{
  if (!j.contains(key)) {
    throw std::invalid_argument(fmt::format("missing field '{}'", key));
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception & e) {
    throw std::invalid_argument(fmt::format("field '{}': {}", key, e.what()));
  }
}

template <typename T>
T field_or(const json & j, const char * key, T fallback)
{
  if (!j.contains(key) || j.at(key).is_null()) {
    return fallback;
  }
  return field<T>(j, key);
}

std::optional<double> optional_number(const json & j, const char * key)
{
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::nullopt;
  }
  return field<double>(j, key);
}

void require_object(const json & j, const char * what)
{
  if (!j.is_object()) {
    throw std::invalid_argument(fmt::format("{} must be a JSON object", what));
  }
}

std::vector<Vec2> points_of(const json & j, const char * key)
{
  std::vector<Vec2> pts;
  if (!j.contains(key) || j.at(key).is_null()) {
    return pts;
  }
  for (const json & p : j.at(key)) {
    if (p.is_object() && p.contains("x")) {
      pts.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
    } else {
      pts.push_back(p.get<Vec2>());
    }
  }
  return pts;
}

json points_json(std::span<const Vec2> pts)
{
  json arr = json::array();
  for (const Vec2 & p : pts) {
    arr.push_back(p);
  }
  return arr;
}
}  // namespace

void to_json(json & j, const Vec2 & v) { j = json::array({v.x, v.y}); }

void from_json(const json & j, Vec2 & v)
{
  if (!j.is_array() || j.size() != 2) {
    throw std::invalid_argument("point must be an [x, y] pair");
  }
  v = {j[0].get<double>(), j[1].get<double>()};
}

void to_json(json & j, const Pose2D & p) { j = {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

void from_json(const json & j, Pose2D & p)
{
  require_object(j, "pose");
  p = Pose2D(field<double>(j, "x"), field<double>(j, "y"), field_or<double>(j, "heading", 0.0));
}

void to_json(json & j, const AgentState & a)
{
  j = {{"id", a.id},       {"kind", to_string(a.kind)}, {"pose", a.pose},
       {"speed", a.speed}, {"length", a.length},        {"width", a.width}};
  if (a.lane_id) {
    j["lane_id"] = *a.lane_id;
  }
}

void from_json(const json & j, AgentState & a)
{
  require_object(j, "agent");
  a.id = field<std::string>(j, "id");
  a.kind = agent_kind_from_string(field_or<std::string>(j, "kind", "vehicle"));
  a.pose = field<Pose2D>(j, "pose");
  a.speed = field_or<double>(j, "speed", 0.0);
  a.length = field_or<double>(j, "length", a.kind == AgentKind::vehicle ? 4.6 : 0.5);
  a.width = field_or<double>(j, "width", a.kind == AgentKind::vehicle ? 2.0 : 0.5);
  a.lane_id = j.contains("lane_id") && !j["lane_id"].is_null() ? std::optional(j["lane_id"].get<std::string>())
                                                                 : std::nullopt;
}

void to_json(json & j, const EgoState & e)
{
  j = {{"pose", e.pose},     {"velocity", e.velocity}, {"acceleration", e.acceleration},
       {"length", e.length}, {"width", e.width},       {"timestamp", e.timestamp}};
}

void from_json(const json & j, EgoState & e)
{
  require_object(j, "ego state");
  e.pose = field<Pose2D>(j, "pose");
  e.velocity = field_or<double>(j, "velocity", 0.0);
  e.acceleration = field_or<double>(j, "acceleration", 0.0);
  e.length = field_or<double>(j, "length", 4.6);
  e.width = field_or<double>(j, "width", 2.0);
  e.timestamp = field_or<double>(j, "timestamp", 0.0);
}

void to_json(json & j, const TrafficLight & l)
{
  json schedule = json::array();
  for (const auto & phase : l.schedule) {
    schedule.push_back({{"start_time", phase.start_time}, {"state", to_string(phase.state)}});
  }
  j = {{"lane_id", l.lane_id}, {"schedule", schedule}};
  if (l.stop_arc_length) {
    j["stop_arc_length"] = *l.stop_arc_length;
  }
}

void from_json(const json & j, TrafficLight & l)
{
  require_object(j, "traffic light");
  l.lane_id = field<std::string>(j, "lane_id");
  l.stop_arc_length = j.contains("stop_arc_length") ? std::optional(j["stop_arc_length"].get<double>()) : std::nullopt;
  l.schedule.clear();
  for (const json & phase : field_or<json>(j, "schedule", json::array())) {
    l.schedule.push_back(
      {field<double>(phase, "start_time"), light_state_from_string(field<std::string>(phase, "state"))});
  }
}

void to_json(json & j, const AgentScript & s)
{
  json profile = json::array();
  for (const auto & k : s.speed_profile) {
    profile.push_back({k.time, k.speed});
  }
  j = {{"agent_id", s.agent_id}, {"speed_profile", profile}};
}

void from_json(const json & j, AgentScript & s)
{
  require_object(j, "agent script");
  s.agent_id = field<std::string>(j, "agent_id");
  s.speed_profile.clear();
  for (const json & k : field<json>(j, "speed_profile")) {
    s.speed_profile.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
  }
}

void to_json(json & j, const MetricReport & r)
{
  j = {{"score", r.aggregate},
       {"collisions", r.collisions},
       {"ttc", r.ttc},
       {"drivable", r.drivable},
       {"comfort", r.comfort},
       {"progress", r.progress},
       {"speed_limit", r.speed_limit},
       {"direction", r.direction},
       {"making_progress", r.making_progress}};
  json violations = json::array();
  for (const Violation & v : r.violations) {
    violations.push_back({{"metric", v.metric}, {"tick", v.tick}, {"detail", v.detail}});
  }
  j["violations"] = violations;
  json events = json::array();
  for (const CollisionEvent & e : r.collision_events) {
    events.push_back({{"tick", e.tick}, {"agent_id", e.agent_id}, {"kind", to_string(e.kind)}, {"at_fault", e.at_fault}});
  }
  j["collision_events"] = events;
}

void from_json(const json & j, MetricReport & r)
{
  require_object(j, "metric report");
  r.aggregate = field<double>(j, "score");
  r.collisions = field<double>(j, "collisions");
  r.ttc = field<double>(j, "ttc");
  r.drivable = field<double>(j, "drivable");
  r.comfort = field<double>(j, "comfort");
  r.progress = field<double>(j, "progress");
  r.speed_limit = field<double>(j, "speed_limit");
  r.direction = field<double>(j, "direction");
  r.making_progress = field_or<bool>(j, "making_progress", true);
  r.violations.clear();
  for (const json & v : field_or<json>(j, "violations", json::array())) {
    r.violations.push_back({field<std::string>(v, "metric"), field<int>(v, "tick"), field<std::string>(v, "detail")});
  }
  r.collision_events.clear();
  for (const json & e : field_or<json>(j, "collision_events", json::array())) {
    r.collision_events.push_back(
      {field<int>(e, "tick"), field<std::string>(e, "agent_id"), agent_kind_from_string(field<std::string>(e, "kind")),
       field<bool>(e, "at_fault")});
  }
}

json lane_to_json(const Lane & lane)
{
  json j{
    {"id", lane.id()},
    {"centerline", points_json(lane.centerline().points())},
    {"speed_limit", lane.speed_limit() ? json(*lane.speed_limit()) : json(nullptr)},
    {"left_boundary", points_json(lane.left_boundary().points())},
    {"right_boundary", points_json(lane.right_boundary().points())},
    {"successors", lane.successors()}};
  if (lane.is_connector()) {
    j["is_connector"] = true;
  }
  return j;
}

Lane lane_from_json(const json & j)
{
  require_object(j, "lane");
  const auto id = field<std::string>(j, "id");
  try {
    return Lane(
      id, points_of(j, "centerline"), optional_number(j, "speed_limit"),
      points_of(j, "left_boundary"), points_of(j, "right_boundary"),
      field_or<std::vector<std::string>>(j, "successors", {}), field_or<bool>(j, "is_connector", false));
  } catch (const json::exception & e) {
    throw std::invalid_argument("lane " + id + ": " + e.what());
  }
}

json scenario_to_json(const Scenario & s)
{
  json lanes = json::array();
  for (const Lane & lane : s.lanes) {
    lanes.push_back(lane_to_json(lane));
  }
  json j{
    {"id", s.id},
    {"description", s.description},
    {"lanes", lanes},
    {"drivable_polygon", points_json(s.drivable_polygon)},
    {"ego_init", s.ego_init},
    {"agents_init", s.agents_init},
    {"agent_scripts", s.agent_scripts},
    {"agent_policy", to_string(s.agent_policy)},
    {"traffic_lights", s.traffic_lights},
    {"duration_steps", s.duration_steps},
    {"dt", s.dt}};
  j["expert_progress"] = s.expert_progress ? json(*s.expert_progress) : json(nullptr);
  return j;
}

Scenario scenario_from_json(const json & j)
{
  require_object(j, "scenario");
  static const std::set<std::string> known{
    "id",          "description",    "lanes",          "drivable_polygon", "ego_init", "agents_init",
    "agent_scripts", "agent_policy", "traffic_lights", "duration_steps",   "dt",       "expert_progress"};
  for (const auto & [key, value] : j.items()) {
    if (!known.count(key)) {
      throw std::invalid_argument("scenario: unknown field '" + key + "'");
    }
  }
  Scenario s;
  s.id = field<std::string>(j, "id");
  try {
    s.description = field_or<std::string>(j, "description", "");
    for (const json & lane : field<json>(j, "lanes")) {
      s.lanes.push_back(lane_from_json(lane));
    }
    s.drivable_polygon = points_of(j, "drivable_polygon");
    s.ego_init = field<EgoState>(j, "ego_init");
    s.agents_init = field_or<std::vector<AgentState>>(j, "agents_init", {});
    s.agent_scripts = field_or<std::vector<AgentScript>>(j, "agent_scripts", {});
    s.agent_policy = agent_policy_from_string(field_or<std::string>(j, "agent_policy", "non_reactive_replay"));
    s.traffic_lights = field_or<std::vector<TrafficLight>>(j, "traffic_lights", {});
    s.duration_steps = field_or<int>(j, "duration_steps", 150);
    s.dt = field_or<double>(j, "dt", 0.1);
    s.expert_progress = optional_number(j, "expert_progress");
  } catch (const std::invalid_argument & e) {
    throw std::invalid_argument("scenario " + s.id + ": " + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open scenario " + path.string());
  }
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw std::invalid_argument("scenario " + path.string() + " is not valid JSON");
  }
  return scenario_from_json(j);
}

void save_scenario(const Scenario & scenario, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << scenario_to_json(scenario).dump(2) << '\n';
}

json params_to_json(const PlannerParams & p)
{
  return {
    {"lateral_offsets", p.lateral_offsets},
    {"speed_limit_fraction", p.speed_limit_fractions},
    {"fallback_target_velocity", p.fallback_target_velocity},
    {"min_gap_to_lead_agent", p.min_gap_to_lead_agent},
    {"headway_time", p.headway_time},
    {"accel_max", p.accel_max},
    {"decel_max", p.decel_max},
    {"idm_exponent", p.idm_exponent}};
}

PlannerParams params_from_json(const json & j, const PlannerParams & defaults)
{
  require_object(j, "planner params");
  PlannerParams p = defaults;
  for (const auto & [key, value] : j.items()) {
    try {
      if (key == "lateral_offsets") {
        p.lateral_offsets = value.get<std::vector<double>>();
      } else if (key == "speed_limit_fraction") {
        p.speed_limit_fractions = value.get<std::vector<double>>();
      } else if (key == "fallback_target_velocity") {
        p.fallback_target_velocity = value.get<double>();
      } else if (key == "min_gap_to_lead_agent") {
        p.min_gap_to_lead_agent = value.get<double>();
      } else if (key == "headway_time") {
        p.headway_time = value.get<double>();
      } else if (key == "accel_max") {
        p.accel_max = value.get<double>();
      } else if (key == "decel_max") {
        p.decel_max = value.get<double>();
      } else if (key == "idm_exponent") {
        p.idm_exponent = value.get<double>();
      } else {
        throw std::invalid_argument("planner params: unknown key '" + key + "'");
      }
    } catch (const json::exception & e) {
      throw std::invalid_argument("planner params: key '" + key + "': " + e.what());
    }
  }
  p.validate();
  return p;
}

}  // namespace drivesim
