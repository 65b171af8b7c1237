#include "drivesim/internal_sim.hpp"

#include <cmath>
#include <stdexcept>

namespace drivesim
{

Forecast forecast_constant_velocity(
  const std::vector<AgentState> & agents, Vec2 ego_position, double horizon, double dt, double radius)
{
  if (!(horizon > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("forecast horizon and dt must be positive");
  }
  Forecast forecast;
  forecast.dt = dt;
  std::vector<AgentState> nearby;
  for (const AgentState & a : agents) {
    if (distance(a.pose.position(), ego_position) <= radius) {
      nearby.push_back(a);
    }
  }
  const auto steps = static_cast<std::size_t>(std::lround(horizon / dt));
  forecast.frames.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = k * dt;
    std::vector<AgentState> frame = nearby;
    for (AgentState & a : frame) {
      a.pose = Pose2D(
        a.pose.x + a.speed * t * std::cos(a.pose.heading), a.pose.y + a.speed * t * std::sin(a.pose.heading),
        a.pose.heading);
    }
    forecast.frames.push_back(std::move(frame));
  }
  return forecast;
}

MetricReport score_proposal(
  const Proposal & proposal, const Forecast & forecast, const RoadMap & road, VehicleDims dims,
  std::optional<double> reference_progress, const MetricConfig & config)
{
  return evaluate({proposal.trajectory, dims, forecast.frames, road, reference_progress}, config);
}

Selection select_best(std::span<const Proposal> proposals)
{
  if (proposals.empty()) {
    throw std::invalid_argument("select_best needs at least one proposal");
  }
  const auto aggregate_of = [](const Proposal & p) {
    if (!p.predicted_scores) {
      throw std::invalid_argument("select_best needs scored proposals");
    }
    return p.predicted_scores->aggregate;
  };
  Selection best{0, aggregate_of(proposals[0])};
  for (std::size_t i = 1; i < proposals.size(); ++i) {
    const double score = aggregate_of(proposals[i]);
    const Proposal & incumbent = proposals[best.index];
    const Proposal & challenger = proposals[i];
    bool better = score > best.aggregate;
    if (score == best.aggregate) {
      const double inc_offset = std::abs(incumbent.source_offset);
      const double ch_offset = std::abs(challenger.source_offset);
      better = ch_offset < inc_offset ||
               (ch_offset == inc_offset && challenger.source_target_speed > incumbent.source_target_speed);
    }
    if (better) {
      best = {i, score};
    }
  }
  return best;
}

bool check_emergency(const Trajectory & trajectory, VehicleDims dims, const Forecast & forecast, double window)
{
  const std::size_t n = std::min(trajectory.samples.size(), forecast.steps());
  for (std::size_t k = 0; k < n; ++k) {
    if (k * trajectory.dt > window + 1e-9) {
      break;
    }
    const OrientedBox ego{trajectory.samples[k].pose, dims.length, dims.width};
    for (const AgentState & agent : forecast.frames[k]) {
      if (boxes_intersect(ego, agent.box())) {
        return true;
      }
    }
  }
  return false;
}

InternalSimulator::InternalSimulator(
  const WorldView & world, const PlannerParams & base_params, MetricConfig config, RolloutOptions options)
: world_(world),
  config_(config),
  forecast_(forecast_constant_velocity(world.agents, world.ego.pose.position(), options.horizon, world.scenario->dt)),
  generator_(world, forecast_, options)
{
  if (!generator_.off_map()) {
    Trajectory reference = generator_.free_flow(base_params);
    reference_progress_ = route_progress(reference, *world.road);
  }
}

void InternalSimulator::score(Proposal & proposal) const
{
  proposal.predicted_scores =
    score_proposal(proposal, forecast_, *world_.road, world_.ego.dims(), reference_progress_, config_);
}

std::vector<Proposal> InternalSimulator::propose(const PlannerParams & params)
{
  auto proposals = generator_.generate(params);
  for (Proposal & p : proposals) {
    score(p);
  }
  return proposals;
}

std::vector<Proposal> InternalSimulator::propose(const ProposalGrid & grid)
{
  auto proposals = generator_.generate(grid);
  for (Proposal & p : proposals) {
    score(p);
  }
  return proposals;
}

bool InternalSimulator::emergency(const Proposal & proposal) const
{
  return check_emergency(proposal.trajectory, world_.ego.dims(), forecast_);
}

}  // namespace drivesim
