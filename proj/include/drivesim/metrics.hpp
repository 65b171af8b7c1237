#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drivesim/road_map.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

/// Agent states per tick, aligned with the samples of the ego trajectory.
using AgentFrames = std::vector<std::vector<AgentState>>;

struct ComfortLimits
{
  double min_lon_accel{-4.05};
  double max_lon_accel{2.40};
  double max_abs_lat_accel{4.89};
  double max_abs_yaw_rate{0.95};
  double max_abs_yaw_accel{1.93};
  double max_abs_lon_jerk{4.13};
  double max_abs_jerk_magnitude{8.37};
};

struct MetricWeights
{
  double ttc{5.0};
  double progress{5.0};
  double speed_limit{4.0};
  double comfort{2.0};
};

/// Thresholds of the closed-loop metric suite.
struct MetricConfig
{
  double stopped_speed{5e-3};
  double ttc_threshold{0.95};
  double ttc_horizon{3.0};
  double ttc_step{0.1};
  double drivable_tolerance{0.3};
  ComfortLimits comfort;
  double negative_progress_threshold{-0.1};
  /// Expert progress below this counts as "no expert route".
  double min_expert_progress{1.0};
  double min_progress_ratio{0.2};
  double max_overspeed{2.23};
  double direction_window{1.0};
  double direction_compliant{2.0};
  double direction_violation{6.0};
  MetricWeights weights;
};

struct Violation
{
  std::string metric;
  int tick{0};
  std::string detail;
};

struct CollisionEvent
{
  int tick{0};
  std::string agent_id;
  AgentKind kind{AgentKind::vehicle};
  bool at_fault{false};
};

struct MetricReport
{
  double collisions{1.0};
  double ttc{1.0};
  double drivable{1.0};
  double comfort{1.0};
  double progress{1.0};
  double speed_limit{1.0};
  double direction{1.0};
  bool making_progress{true};
  double aggregate{1.0};
  std::vector<Violation> violations;
  std::vector<CollisionEvent> collision_events;
};

/// Table-order metric names: score first, then the seven metrics.
inline constexpr std::array<std::string_view, 8> kMetricNames{
  "score", "collisions", "ttc", "drivable", "comfort", "progress", "speed_limit", "direction"};
/// Looks up a metric by its name in kMetricNames ("aggregate" is an alias of "score").
std::optional<double> metric_by_name(const MetricReport & report, std::string_view name);

struct CollisionOutcome
{
  double score{1.0};
  std::vector<CollisionEvent> events;
};

/// First-intersection frames per agent; an agent that collided is ignored in
/// later frames. The ego is at fault when the impact lies on its front half
/// or it is off its route lanes, unless it is standing still.
CollisionOutcome metric_collisions(
  const Trajectory & ego, VehicleDims dims, const AgentFrames & agents, const RoadMap & road,
  const MetricConfig & config = {});

/// Earliest projected intersection (constant velocity, `ttc_step` sub-steps up
/// to `ttc_horizon`) of the ego with an agent ahead or beside it.
std::optional<double> time_to_collision(
  const TrajectorySample & ego, VehicleDims dims, std::span<const AgentState> agents,
  const MetricConfig & config = {});
/// Zero if, at any tick with the ego moving, the TTC falls below the threshold.
/// `collided` maps agent ids to the tick from which they are ignored.
double metric_ttc(
  const Trajectory & ego, VehicleDims dims, const AgentFrames & agents,
  const MetricConfig & config = {}, const std::map<std::string, int> & collided = {},
  std::vector<Violation> * violations = nullptr);

double metric_drivable(
  const Trajectory & ego, VehicleDims dims, std::span<const Vec2> drivable_polygon,
  const MetricConfig & config = {}, std::vector<Violation> * violations = nullptr);

/// Finite-difference kinematics of a trajectory, one entry per sample.
struct ComfortSignals
{
  std::vector<double> lon_accel;
  std::vector<double> lat_accel;
  std::vector<double> yaw_rate;
  std::vector<double> yaw_accel;
  std::vector<double> lon_jerk;
  std::vector<double> jerk_magnitude;
};

/// Second-order finite differences: central inside, three-point one-sided at the ends.
std::vector<double> differentiate(std::span<const double> values, double dt);
ComfortSignals comfort_signals(const Trajectory & ego);
double metric_comfort(
  const Trajectory & ego, const MetricConfig & config = {}, std::vector<Violation> * violations = nullptr);

struct ProgressOutcome
{
  double ratio{1.0};
  double ego_progress{0.0};
};

/// Per-tick arc progress along the route, summed and compared with the expert.
ProgressOutcome metric_progress(
  const Trajectory & ego, std::optional<double> expert_progress, const RoadMap & road,
  const MetricConfig & config = {});
double route_progress(const Trajectory & ego, const RoadMap & road);

double metric_speed_limit(
  const Trajectory & ego, const RoadMap & road, const MetricConfig & config = {},
  std::vector<Violation> * violations = nullptr);

struct DirectionOutcome
{
  double score{1.0};
  double max_against_flow{0.0};
};
DirectionOutcome metric_direction(
  const Trajectory & ego, const RoadMap & road, const MetricConfig & config = {});

/// Hierarchical aggregate: multiplier metrics (collisions, drivable,
/// direction, making progress) times the weighted average of TTC, progress,
/// speed limit and comfort.
double aggregate_score(const MetricReport & report, const MetricConfig & config = {});

struct EpisodeView
{
  const Trajectory & ego;
  VehicleDims dims;
  const AgentFrames & agents;
  const RoadMap & road;
  std::optional<double> expert_progress;
};

/// Runs every metric and fills the aggregate.
MetricReport evaluate(const EpisodeView & episode, const MetricConfig & config = {});

}  // namespace drivesim
