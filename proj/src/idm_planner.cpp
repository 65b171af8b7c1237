#include "drivesim/idm_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace drivesim
{
namespace
{
// Upper bound for any target speed a parameter set can request; sizes the offset path.
constexpr double kMaxTargetSpeed = 30.0;

void require(bool ok, const std::string & what)
{
  if (!ok) {
    throw std::invalid_argument("planner params: " + what);
  }
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace

void PlannerParams::validate() const
{
  require(!lateral_offsets.empty(), "lateral_offsets must not be empty");
  require(!speed_limit_fractions.empty(), "speed_limit_fractions must not be empty");
  for (double o : lateral_offsets) {
    require(std::isfinite(o) && std::abs(o) <= kMaxAbsOffset, "lateral offsets must satisfy |o| <= 3 m");
  }
  for (double f : speed_limit_fractions) {
    require(std::isfinite(f) && f > 0.0 && f <= 1.0, "speed_limit_fractions must lie in (0, 1]");
  }
  require(positive_finite(fallback_target_velocity), "fallback_target_velocity must be positive");
  require(positive_finite(min_gap_to_lead_agent), "min_gap_to_lead_agent must be positive");
  require(positive_finite(headway_time), "headway_time must be positive");
  require(positive_finite(accel_max), "accel_max must be positive");
  require(positive_finite(decel_max), "decel_max must be positive");
  require(positive_finite(idm_exponent), "idm_exponent must be positive");
}

ProposalGrid ProposalGrid::from_params(const PlannerParams & params)
{
  return {
    params.lateral_offsets,
    params.speed_limit_fractions,
    {params.fallback_target_velocity},
    {params.min_gap_to_lead_agent},
    {params.headway_time},
    {params.accel_max},
    {params.decel_max},
    params.idm_exponent};
}

ProposalGrid ProposalGrid::enlarged(int offset_count)
{
  if (offset_count < 1) {
    throw std::invalid_argument("enlarged grid needs at least one offset");
  }
  ProposalGrid grid;
  // Evenly spaced offsets, symmetric about the centre line, spanning at most +-3 m.
  const double spacing = offset_count > 1 ? std::min(1.0, 6.0 / (offset_count - 1)) : 0.0;
  for (int i = 0; i < offset_count; ++i) {
    grid.lateral_offsets.push_back((i - 0.5 * (offset_count - 1)) * spacing);
  }
  grid.speed_limit_fractions = {0.2, 0.4, 0.6, 0.8, 1.0};
  grid.fallback_target_velocities = {10.0, 15.0, 20.0};
  grid.min_gaps = {0.5, 1.0, 2.0};
  grid.headway_times = {1.0, 1.5, 2.0};
  grid.accel_maxes = {1.0, 1.5, 2.0};
  grid.decel_maxes = {2.0, 3.0, 4.0};
  return grid;
}

std::size_t ProposalGrid::size() const
{
  return lateral_offsets.size() * speed_limit_fractions.size() * fallback_target_velocities.size() *
         min_gaps.size() * headway_times.size() * accel_maxes.size() * decel_maxes.size();
}

std::vector<PlannerParams> ProposalGrid::cells() const
{
  std::vector<PlannerParams> out;
  out.reserve(size());
  for (double o : lateral_offsets)
    for (double f : speed_limit_fractions)
      for (double fb : fallback_target_velocities)
        for (double gap : min_gaps)
          for (double hw : headway_times)
            for (double acc : accel_maxes)
              for (double dec : decel_maxes) {
                out.push_back({{o}, {f}, fb, gap, hw, acc, dec, idm_exponent});
              }
  return out;
}

double idm_desired_gap(double velocity, double closing_speed, const PlannerParams & p)
{
  const double dynamic = velocity * p.headway_time +
                         velocity * closing_speed / (2.0 * std::sqrt(p.accel_max * p.decel_max));
  return p.min_gap_to_lead_agent + std::max(0.0, dynamic);
}

double idm_acceleration(
  double velocity, double target_velocity, std::optional<double> gap, double closing_speed,
  const PlannerParams & p)
{
  if (gap && *gap <= 0.0) {
    return -p.decel_max;
  }
  double acc = 1.0 - std::pow(std::max(0.0, velocity) / target_velocity, p.idm_exponent);
  if (gap) {
    const double ratio = idm_desired_gap(velocity, closing_speed, p) / *gap;
    acc -= ratio * ratio;
  }
  return std::clamp(p.accel_max * acc, -p.decel_max, p.accel_max);
}

Trajectory emergency_brake(const EgoState & ego, double decel, double horizon, double dt)
{
  Trajectory traj{dt, {}};
  const auto steps = static_cast<std::size_t>(std::lround(horizon / dt));
  const double v0 = std::max(0.0, ego.velocity);
  const double stop_time = decel > 0.0 ? v0 / decel : 0.0;
  const Vec2 dir{std::cos(ego.pose.heading), std::sin(ego.pose.heading)};
  traj.samples.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = std::min(k * dt, stop_time);
    const double travelled = v0 * t - 0.5 * decel * t * t;
    const Vec2 p = ego.pose.position() + travelled * dir;
    const double v = k * dt >= stop_time ? 0.0 : v0 - decel * k * dt;
    traj.samples.push_back({ego.timestamp + k * dt, {p.x, p.y, ego.pose.heading}, v});
  }
  return traj;
}

ProposalGenerator::ProposalGenerator(const WorldView & world, const Forecast & forecast, RolloutOptions options)
: world_(world), forecast_(forecast), options_(options)
{
  if (world.road == nullptr || world.scenario == nullptr) {
    throw std::invalid_argument("proposal generation needs a scenario and a road map");
  }
  const double dt = world.scenario->dt;
  steps_ = static_cast<std::size_t>(std::lround(options_.horizon / dt));
  const auto proj = world.road->route().project(world.ego.pose.position());
  ego_route_arc_ = proj.arc_length;
  off_map_ = std::abs(proj.lateral_offset) > options_.off_map_distance;
  speed_limit_ = world.road->route_speed_limit_at(ego_route_arc_);
}

double ProposalGenerator::target_speed(double fraction, double fallback_target_velocity) const
{
  return speed_limit_ ? fraction * *speed_limit_ : fallback_target_velocity;
}

const ProposalGenerator::OffsetPath & ProposalGenerator::path_for(double offset)
{
  if (const auto it = paths_.find(offset); it != paths_.end()) {
    return it->second;
  }
  const Polyline & route = world_.road->route();
  const double reach = std::max(world_.ego.velocity, kMaxTargetSpeed) * options_.horizon + options_.path_margin;
  OffsetPath entry;
  const Polyline centre = route.slice(std::max(0.0, ego_route_arc_ - options_.path_behind), ego_route_arc_ + reach);
  entry.path = offset == 0.0 ? centre : centre.offset(offset);
  entry.ego_arc = entry.path.project(world_.ego.pose.position()).arc_length;
  entry.timeline.resize(steps_ + 1);

  const double half_corridor = 0.5 * (world_.ego.width + options_.corridor_margin);
  const std::size_t frames = std::min(steps_ + 1, forecast_.steps());
  for (std::size_t k = 0; k < frames; ++k) {
    for (const AgentState & agent : forecast_.frames[k]) {
      const auto proj = entry.path.project(agent.pose.position());
      const Vec2 tangent{std::cos(proj.heading), std::sin(proj.heading)};
      const Vec2 normal{-tangent.y, tangent.x};
      double lat_lo = std::numeric_limits<double>::infinity();
      double lat_hi = -lat_lo;
      double arc_lo = lat_lo;
      for (const Vec2 & c : bounding_box_corners(agent)) {
        const Vec2 rel = c - agent.pose.position();
        lat_lo = std::min(lat_lo, proj.lateral_offset + dot(rel, normal));
        lat_hi = std::max(lat_hi, proj.lateral_offset + dot(rel, normal));
        arc_lo = std::min(arc_lo, proj.arc_length + dot(rel, tangent));
      }
      if (lat_hi < -half_corridor || lat_lo > half_corridor) {
        continue;
      }
      if (proj.arc_length < 0.0 || proj.arc_length > entry.path.length()) {
        continue;
      }
      const double along = agent.speed * std::cos(normalize_angle(agent.pose.heading - proj.heading));
      entry.timeline[k].push_back({proj.arc_length, arc_lo, along});
    }
  }

  // Red lights on the route act as standing obstacles at their stop line.
  const double ego_front = entry.ego_arc + 0.5 * world_.ego.length;
  for (const RoadMap::StopLine & stop : world_.road->stop_lines()) {
    const Vec2 at = route.pose_at(stop.route_arc).position();
    const double arc = entry.path.project(at).arc_length;
    if (arc <= ego_front || arc > entry.path.length()) {
      continue;
    }
    for (std::size_t k = 0; k <= steps_; ++k) {
      if (stop.light->state_at(world_.time + k * world_.scenario->dt) == LightState::red) {
        entry.timeline[k].push_back({arc, arc, 0.0});
      }
    }
  }
  return paths_.emplace(offset, std::move(entry)).first->second;
}

Trajectory ProposalGenerator::integrate(
  const OffsetPath & path, double target_speed, const PlannerParams & params, bool obstacles)
{
  const double dt = world_.scenario->dt;
  const EgoState & ego = world_.ego;
  Trajectory traj{dt, {}};
  traj.samples.reserve(steps_ + 1);

  double x = ego.pose.x;
  double y = ego.pose.y;
  double heading = ego.pose.heading;
  double v = std::max(0.0, ego.velocity);
  double s = path.ego_arc;
  const bool capped = v <= target_speed;
  for (std::size_t k = 0;; ++k) {
    traj.samples.push_back({ego.timestamp + k * dt, {x, y, heading}, v});
    if (k == steps_) {
      break;
    }
    std::optional<double> gap;
    double closing = 0.0;
    if (obstacles) {
      for (const Obstacle & ob : path.timeline[k]) {
        if (ob.center_arc <= s) {
          continue;
        }
        const double g = ob.rear_arc - (s + 0.5 * ego.length);
        if (!gap || g < *gap) {
          gap = g;
          closing = v - ob.along_speed;
        }
      }
    }
    const double acc = idm_acceleration(v, target_speed, gap, closing, params);

    // Pure pursuit towards a speed-dependent lookahead point on the offset path.
    const double lookahead = std::max(options_.min_lookahead, v * options_.lookahead_time);
    const Vec2 target = path.path.pose_at(s + lookahead).position();
    const double alpha = normalize_angle(std::atan2(target.y - y, target.x - x) - heading);
    double kappa_limit = options_.max_curvature;
    if (v > 0.0) {
      kappa_limit = std::min(kappa_limit, options_.max_lateral_accel / (v * v));
    }
    const double kappa = std::clamp(2.0 * std::sin(alpha) / lookahead, -kappa_limit, kappa_limit);

    x += v * std::cos(heading) * dt;
    y += v * std::sin(heading) * dt;
    heading = normalize_angle(heading + v * kappa * dt);
    const double step = v * dt;
    v = std::max(0.0, v + acc * dt);
    if (capped) {
      v = std::min(v, target_speed);
    }
    s = path.path.project_within({x, y}, s - step - 2.0, s + step + 2.0).arc_length;
  }
  return traj;
}

Proposal ProposalGenerator::stop_proposal(const PlannerParams & params) const
{
  Proposal p;
  p.trajectory = emergency_brake(world_.ego, params.decel_max, options_.horizon, world_.scenario->dt);
  p.params = params;
  p.is_emergency_stop = true;
  return p;
}

Proposal ProposalGenerator::rollout(double offset, double fraction, const PlannerParams & params)
{
  Proposal p;
  p.source_offset = offset;
  p.source_target_speed = target_speed(fraction, params.fallback_target_velocity);
  p.params = params;
  p.params.lateral_offsets = {offset};
  p.params.speed_limit_fractions = {fraction};
  p.trajectory = integrate(path_for(offset), p.source_target_speed, params, true);
  return p;
}

Trajectory ProposalGenerator::free_flow(const PlannerParams & params)
{
  if (!free_path_) {
    OffsetPath entry;
    const double reach = std::max(world_.ego.velocity, kMaxTargetSpeed) * options_.horizon + options_.path_margin;
    entry.path = world_.road->route().slice(std::max(0.0, ego_route_arc_ - options_.path_behind), ego_route_arc_ + reach);
    entry.ego_arc = entry.path.project(world_.ego.pose.position()).arc_length;
    free_path_ = std::move(entry);
  }
  return integrate(*free_path_, target_speed(1.0, params.fallback_target_velocity), params, false);
}

std::vector<Proposal> ProposalGenerator::generate(const PlannerParams & params)
{
  params.validate();
  if (off_map_) {
    return {stop_proposal(params)};
  }
  std::vector<Proposal> out;
  out.reserve(params.proposal_count());
  for (double o : params.lateral_offsets) {
    for (double f : params.speed_limit_fractions) {
      out.push_back(rollout(o, f, params));
    }
  }
  return out;
}

std::vector<Proposal> ProposalGenerator::generate(const ProposalGrid & grid)
{
  const auto cells = grid.cells();
  if (cells.empty()) {
    throw std::invalid_argument("proposal grid is empty");
  }
  if (off_map_) {
    return {stop_proposal(cells.front())};
  }
  std::vector<Proposal> out;
  out.reserve(cells.size());
  for (const PlannerParams & cell : cells) {
    cell.validate();
    out.push_back(rollout(cell.lateral_offsets.front(), cell.speed_limit_fractions.front(), cell));
  }
  return out;
}

std::vector<Proposal> generate_proposals(
  const WorldView & world, const PlannerParams & params, const Forecast & forecast)
{
  ProposalGenerator generator(world, forecast);
  return generator.generate(params);
}

}  // namespace drivesim
