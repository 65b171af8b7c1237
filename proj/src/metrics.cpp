#include "drivesim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace drivesim
{
namespace
{
// Comparisons against comfort limits tolerate floating-point noise of the differences.
constexpr double kLimitSlack = 1e-9;

OrientedBox ego_box(const TrajectorySample & s, VehicleDims dims)
{
  return {s.pose, dims.length, dims.width};
}

void record(std::vector<Violation> * out, std::string metric, int tick, std::string detail)
{
  if (out != nullptr) {
    out->push_back({std::move(metric), tick, std::move(detail)});
  }
}

std::vector<const Lane *> lanes_along(const Trajectory & ego, const RoadMap & road)
{
  std::vector<const Lane *> lanes;
  lanes.reserve(ego.samples.size());
  for (const auto & s : ego.samples) {
    lanes.push_back(road.lane_at(s.pose.position()));
  }
  return lanes;
}

double speed_limit_score(
  const Trajectory & ego, const RoadMap & road, std::span<const Lane * const> lanes,
  const MetricConfig & config, std::vector<Violation> * violations)
{
  if (ego.samples.empty()) {
    return 1.0;
  }
  double penalty = 0.0;
  for (std::size_t k = 0; k < ego.samples.size(); ++k) {
    if (lanes[k] == nullptr) {
      continue;
    }
    const auto limit = road.speed_limit_of(*lanes[k]);
    if (!limit) {
      continue;
    }
    const double over = ego.samples[k].velocity - *limit;
    if (over > 0.0) {
      penalty += std::min(1.0, over / config.max_overspeed);
      record(violations, "speed_limit", static_cast<int>(k), fmt::format("{:.2f} m/s over", over));
    }
  }
  return std::clamp(1.0 - penalty / static_cast<double>(ego.samples.size()), 0.0, 1.0);
}

DirectionOutcome direction_score(
  const Trajectory & ego, const RoadMap & road, std::span<const Lane * const> lanes,
  const MetricConfig & config)
{
  DirectionOutcome out;
  const std::size_t n = ego.samples.size();
  if (n < 2) {
    return out;
  }
  std::vector<double> along(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const Vec2 p = ego.samples[k].pose.position();
    const double heading = lanes[k] != nullptr ? lanes[k]->centerline().project(p).heading
                                               : road.route().project(p).heading;
    const Vec2 tangent{std::cos(heading), std::sin(heading)};
    along[k] = dot(p - ego.samples[k - 1].pose.position(), tangent);
  }
  const auto window = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config.direction_window / ego.dt)));
  double worst = 0.0;
  double running = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    running += along[k];
    if (k > window) {
      running -= along[k - window];
    }
    worst = std::max(worst, -running);
  }
  out.max_against_flow = worst;
  if (worst > config.direction_violation) {
    out.score = 0.0;
  } else if (worst > config.direction_compliant) {
    out.score = 0.5;
  }
  return out;
}

CollisionOutcome collisions_with_lanes(
  const Trajectory & ego, VehicleDims dims, const AgentFrames & agents, const RoadMap & road,
  const MetricConfig & config, std::span<const Lane * const> lanes)
{
  CollisionOutcome out;
  std::map<std::string, int> collided;
  const std::size_t n = std::min(ego.samples.size(), agents.size());
  int object_hits = 0;
  bool fatal = false;
  for (std::size_t k = 0; k < n; ++k) {
    const TrajectorySample & s = ego.samples[k];
    const OrientedBox ebox = ego_box(s, dims);
    const double ego_radius = 0.5 * std::hypot(dims.length, dims.width);
    for (const AgentState & agent : agents[k]) {
      if (collided.count(agent.id)) {
        continue;
      }
      const double reach = ego_radius + 0.5 * std::hypot(agent.length, agent.width);
      if (distance(s.pose.position(), agent.pose.position()) > reach) {
        continue;
      }
      if (!boxes_intersect(ebox, agent.box())) {
        continue;
      }
      collided.emplace(agent.id, static_cast<int>(k));
      CollisionEvent event{static_cast<int>(k), agent.id, agent.kind, false};
      if (s.velocity > config.stopped_speed) {
        const auto ec = ebox.corners();
        const auto ac = agent.box().corners();
        const auto overlap = convex_clip(ec, ac);
        const Vec2 impact = overlap.empty() ? agent.pose.position() : polygon_centroid(overlap);
        const Vec2 fwd{std::cos(s.pose.heading), std::sin(s.pose.heading)};
        const bool front_impact = dot(impact - s.pose.position(), fwd) > 0.0;
        const Lane * lane = lanes[k];
        const bool off_route = lane == nullptr || !road.on_route(lane);
        event.at_fault = front_impact || off_route;
      }
      if (event.at_fault) {
        if (agent.kind == AgentKind::static_object) {
          ++object_hits;
        } else {
          fatal = true;
        }
      }
      out.events.push_back(event);
    }
  }
  if (fatal || object_hits >= 2) {
    out.score = 0.0;
  } else if (object_hits == 1) {
    out.score = 0.5;
  }
  return out;
}

std::map<std::string, int> collision_ticks(const std::vector<CollisionEvent> & events)
{
  std::map<std::string, int> ticks;
  for (const auto & e : events) {
    ticks.emplace(e.agent_id, e.tick);
  }
  return ticks;
}
}  // namespace

CollisionOutcome metric_collisions(
  const Trajectory & ego, VehicleDims dims, const AgentFrames & agents, const RoadMap & road,
  const MetricConfig & config)
{
  const auto lanes = lanes_along(ego, road);
  return collisions_with_lanes(ego, dims, agents, road, config, lanes);
}

std::optional<double> time_to_collision(
  const TrajectorySample & ego, VehicleDims dims, std::span<const AgentState> agents,
  const MetricConfig & config)
{
  const auto steps = static_cast<int>(std::lround(config.ttc_horizon / config.ttc_step));
  const Vec2 fwd{std::cos(ego.pose.heading), std::sin(ego.pose.heading)};
  const double ego_radius = 0.5 * std::hypot(dims.length, dims.width);
  std::optional<double> earliest;
  for (const AgentState & agent : agents) {
    const Vec2 rel = agent.pose.position() - ego.pose.position();
    if (dot(rel, fwd) < -0.5 * dims.length) {
      continue;  // behind the ego
    }
    const double reach = ego_radius + 0.5 * std::hypot(agent.length, agent.width) +
                         (ego.velocity + agent.speed) * config.ttc_horizon;
    if (norm(rel) > reach) {
      continue;
    }
    const Vec2 adir{std::cos(agent.pose.heading), std::sin(agent.pose.heading)};
    for (int m = 1; m <= steps; ++m) {
      const double t = m * config.ttc_step;
      if (earliest && t >= *earliest) {
        break;
      }
      const Vec2 ep = ego.pose.position() + (ego.velocity * t) * fwd;
      const Vec2 ap = agent.pose.position() + (agent.speed * t) * adir;
      const OrientedBox eb{{ep.x, ep.y, ego.pose.heading}, dims.length, dims.width};
      const OrientedBox ab{{ap.x, ap.y, agent.pose.heading}, agent.length, agent.width};
      if (boxes_intersect(eb, ab)) {
        earliest = t;
        break;
      }
    }
  }
  return earliest;
}

double metric_ttc(
  const Trajectory & ego, VehicleDims dims, const AgentFrames & agents, const MetricConfig & config,
  const std::map<std::string, int> & collided, std::vector<Violation> * violations)
{
  double score = 1.0;
  const std::size_t n = std::min(ego.samples.size(), agents.size());
  std::vector<AgentState> active;
  for (std::size_t k = 0; k < n; ++k) {
    const TrajectorySample & s = ego.samples[k];
    if (s.velocity <= config.stopped_speed) {
      continue;
    }
    active.clear();
    for (const AgentState & a : agents[k]) {
      const auto it = collided.find(a.id);
      if (it == collided.end() || static_cast<int>(k) < it->second) {
        active.push_back(a);
      }
    }
    const auto ttc = time_to_collision(s, dims, active, config);
    if (ttc && *ttc < config.ttc_threshold) {
      score = 0.0;
      record(violations, "ttc", static_cast<int>(k), fmt::format("ttc {:.1f} s", *ttc));
      if (violations == nullptr) {
        break;
      }
    }
  }
  return score;
}

double metric_drivable(
  const Trajectory & ego, VehicleDims dims, std::span<const Vec2> drivable_polygon,
  const MetricConfig & config, std::vector<Violation> * violations)
{
  double score = 1.0;
  for (std::size_t k = 0; k < ego.samples.size(); ++k) {
    for (const Vec2 & corner : box_corners(ego.samples[k].pose, dims.length, dims.width)) {
      if (point_in_polygon(corner, drivable_polygon)) {
        continue;
      }
      const double outside = distance_to_polygon_boundary(corner, drivable_polygon);
      if (outside > config.drivable_tolerance) {
        score = 0.0;
        record(violations, "drivable", static_cast<int>(k), fmt::format("corner {:.2f} m outside", outside));
        break;
      }
    }
    if (score == 0.0 && violations == nullptr) {
      break;
    }
  }
  return score;
}

std::vector<double> differentiate(std::span<const double> f, double dt)
{
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  if (n == 2) {
    d[0] = d[1] = (f[1] - f[0]) / dt;
  } else if (n >= 3) {
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      d[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
    }
  }
  return d;
}

ComfortSignals comfort_signals(const Trajectory & ego)
{
  const std::size_t n = ego.samples.size();
  std::vector<double> v(n);
  std::vector<double> yaw(n);
  std::vector<double> vx(n);
  std::vector<double> vy(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto & s = ego.samples[k];
    v[k] = s.velocity;
    yaw[k] = k == 0 ? s.pose.heading
                    : yaw[k - 1] + normalize_angle(s.pose.heading - ego.samples[k - 1].pose.heading);
    vx[k] = s.velocity * std::cos(s.pose.heading);
    vy[k] = s.velocity * std::sin(s.pose.heading);
  }
  ComfortSignals out;
  out.lon_accel = differentiate(v, ego.dt);
  out.yaw_rate = differentiate(yaw, ego.dt);
  out.yaw_accel = differentiate(out.yaw_rate, ego.dt);
  out.lon_jerk = differentiate(out.lon_accel, ego.dt);
  out.lat_accel.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.lat_accel[k] = v[k] * out.yaw_rate[k];
  }
  const auto ax = differentiate(vx, ego.dt);
  const auto ay = differentiate(vy, ego.dt);
  const auto jx = differentiate(ax, ego.dt);
  const auto jy = differentiate(ay, ego.dt);
  out.jerk_magnitude.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.jerk_magnitude[k] = std::hypot(jx[k], jy[k]);
  }
  return out;
}

double metric_comfort(const Trajectory & ego, const MetricConfig & config, std::vector<Violation> * violations)
{
  if (ego.samples.size() < 3) {
    return 1.0;
  }
  const ComfortSignals sig = comfort_signals(ego);
  const ComfortLimits & lim = config.comfort;
  double score = 1.0;
  const auto check = [&](const std::vector<double> & values, double lo, double hi, const char * what) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (values[k] < lo - kLimitSlack || values[k] > hi + kLimitSlack) {
        score = 0.0;
        record(violations, "comfort", static_cast<int>(k), fmt::format("{} {:.2f}", what, values[k]));
        return;
      }
    }
  };
  check(sig.lon_accel, lim.min_lon_accel, lim.max_lon_accel, "lon_accel");
  check(sig.lat_accel, -lim.max_abs_lat_accel, lim.max_abs_lat_accel, "lat_accel");
  check(sig.yaw_rate, -lim.max_abs_yaw_rate, lim.max_abs_yaw_rate, "yaw_rate");
  check(sig.yaw_accel, -lim.max_abs_yaw_accel, lim.max_abs_yaw_accel, "yaw_accel");
  check(sig.lon_jerk, -lim.max_abs_lon_jerk, lim.max_abs_lon_jerk, "lon_jerk");
  check(sig.jerk_magnitude, 0.0, lim.max_abs_jerk_magnitude, "jerk_magnitude");
  return score;
}

double route_progress(const Trajectory & ego, const RoadMap & road)
{
  if (ego.samples.size() < 2) {
    return 0.0;
  }
  const Polyline & route = road.route();
  double s_prev = route.project(ego.samples.front().pose.position()).arc_length;
  double total = 0.0;
  for (std::size_t k = 1; k < ego.samples.size(); ++k) {
    const Vec2 p = ego.samples[k].pose.position();
    const double step = distance(p, ego.samples[k - 1].pose.position());
    const double s = route.project_within(p, s_prev - step - 5.0, s_prev + step + 5.0).arc_length;
    total += s - s_prev;
    s_prev = s;
  }
  return total;
}

ProgressOutcome metric_progress(
  const Trajectory & ego, std::optional<double> expert_progress, const RoadMap & road,
  const MetricConfig & config)
{
  ProgressOutcome out;
  out.ego_progress = route_progress(ego, road);
  if (out.ego_progress < config.negative_progress_threshold) {
    out.ratio = 0.0;
  } else if (!expert_progress || *expert_progress < config.min_expert_progress) {
    out.ratio = 1.0;
  } else {
    out.ratio = std::clamp(out.ego_progress / *expert_progress, 0.0, 1.0);
  }
  return out;
}

double metric_speed_limit(
  const Trajectory & ego, const RoadMap & road, const MetricConfig & config,
  std::vector<Violation> * violations)
{
  const auto lanes = lanes_along(ego, road);
  return speed_limit_score(ego, road, lanes, config, violations);
}

DirectionOutcome metric_direction(const Trajectory & ego, const RoadMap & road, const MetricConfig & config)
{
  const auto lanes = lanes_along(ego, road);
  return direction_score(ego, road, lanes, config);
}

std::optional<double> metric_by_name(const MetricReport & r, std::string_view name)
{
  if (name == "score" || name == "aggregate") return r.aggregate;
  if (name == "collisions") return r.collisions;
  if (name == "ttc") return r.ttc;
  if (name == "drivable") return r.drivable;
  if (name == "comfort") return r.comfort;
  if (name == "progress") return r.progress;
  if (name == "speed_limit") return r.speed_limit;
  if (name == "direction") return r.direction;
  return std::nullopt;
}

double aggregate_score(const MetricReport & report, const MetricConfig & config)
{
  const double multiplier =
    report.collisions * report.drivable * report.direction * (report.making_progress ? 1.0 : 0.0);
  if (multiplier == 0.0) {
    return 0.0;
  }
  const MetricWeights & w = config.weights;
  const double total = w.ttc + w.progress + w.speed_limit + w.comfort;
  const double weighted = (w.ttc * report.ttc + w.progress * report.progress +
                           w.speed_limit * report.speed_limit + w.comfort * report.comfort) /
                          total;
  return std::clamp(multiplier * weighted, 0.0, 1.0);
}

MetricReport evaluate(const EpisodeView & episode, const MetricConfig & config)
{
  MetricReport report;
  const auto lanes = lanes_along(episode.ego, episode.road);
  auto collisions =
    collisions_with_lanes(episode.ego, episode.dims, episode.agents, episode.road, config, lanes);
  report.collisions = collisions.score;
  for (const auto & e : collisions.events) {
    report.violations.push_back(
      {"collisions", e.tick, fmt::format("{} {}{}", to_string(e.kind), e.agent_id, e.at_fault ? " at-fault" : "")});
  }
  report.ttc = metric_ttc(
    episode.ego, episode.dims, episode.agents, config, collision_ticks(collisions.events), &report.violations);
  report.collision_events = std::move(collisions.events);
  report.drivable =
    metric_drivable(episode.ego, episode.dims, episode.road.drivable_polygon(), config, &report.violations);
  report.comfort = metric_comfort(episode.ego, config, &report.violations);
  const auto progress = metric_progress(episode.ego, episode.expert_progress, episode.road, config);
  report.progress = progress.ratio;
  report.making_progress = progress.ratio >= config.min_progress_ratio;
  if (!report.making_progress) {
    report.violations.push_back(
      {"progress", static_cast<int>(episode.ego.samples.size()) - 1,
       fmt::format("ratio {:.2f} below {:.2f}", progress.ratio, config.min_progress_ratio)});
  }
  report.speed_limit = speed_limit_score(episode.ego, episode.road, lanes, config, &report.violations);
  const auto direction = direction_score(episode.ego, episode.road, lanes, config);
  report.direction = direction.score;
  if (direction.score < 1.0) {
    report.violations.push_back(
      {"direction", 0, fmt::format("{:.2f} m against traffic flow", direction.max_against_flow)});
  }
  report.aggregate = aggregate_score(report, config);
  return report;
}

}  // namespace drivesim
