#pragma once

#include <vector>

#include "drivesim/metrics.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

/// Constant-velocity prediction of the agents near the ego.
/// `frames[k]` holds every forecast agent at `k * dt`; frame 0 is the current state.
struct Forecast
{
  double dt{0.1};
  AgentFrames frames;

  std::size_t steps() const { return frames.size(); }
  std::size_t agent_count() const { return frames.empty() ? 0 : frames.front().size(); }
};

/// Default radius around the ego inside which agents are forecast.
inline constexpr double kForecastRadius = 50.0;

/// Advances each agent within `radius` of `ego_position` along its heading at
/// its current speed. Agents keep their order; `horizon / dt` frames follow frame 0.
Forecast forecast_constant_velocity(
  const std::vector<AgentState> & agents, Vec2 ego_position, double horizon, double dt,
  double radius = kForecastRadius);

}  // namespace drivesim
