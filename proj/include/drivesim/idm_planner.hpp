#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "drivesim/forecast.hpp"
#include "drivesim/metrics.hpp"
#include "drivesim/road_map.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

/// Parameters of the rule-based planner. The two lists span the proposal
/// grid; the scalars configure the car-following law.
struct PlannerParams
{
  std::vector<double> lateral_offsets{-1.0, 0.0, 1.0};
  std::vector<double> speed_limit_fractions{0.2, 0.4, 0.6, 0.8, 1.0};
  double fallback_target_velocity{15.0};
  double min_gap_to_lead_agent{1.0};
  double headway_time{1.5};
  double accel_max{1.5};
  /// Stored positive.
  double decel_max{3.0};
  double idm_exponent{4.0};

  static constexpr double kMaxAbsOffset = 3.0;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  std::size_t proposal_count() const { return lateral_offsets.size() * speed_limit_fractions.size(); }
  friend bool operator==(const PlannerParams &, const PlannerParams &) = default;
};

/// Full sweep over every planner parameter: one proposal per element of the
/// cartesian product of the seven lists.
struct ProposalGrid
{
  std::vector<double> lateral_offsets;
  std::vector<double> speed_limit_fractions;
  std::vector<double> fallback_target_velocities;
  std::vector<double> min_gaps;
  std::vector<double> headway_times;
  std::vector<double> accel_maxes;
  std::vector<double> decel_maxes;
  double idm_exponent{4.0};

  static ProposalGrid from_params(const PlannerParams & params);
  /// Enlarged sweep with three values per scalar; `offset_count` is 6 or 7.
  static ProposalGrid enlarged(int offset_count);

  std::size_t size() const;
  /// Expands into one single-cell PlannerParams per grid element, offsets varying slowest.
  std::vector<PlannerParams> cells() const;
};

/// Car-following acceleration with the standard desired gap
/// s* = s0 + max(0, v T + v dv / (2 sqrt(a b))). An absent `gap` means no leader.
/// A non-positive gap yields -decel_max. The result is clamped to
/// [-decel_max, accel_max].
double idm_acceleration(
  double velocity, double target_velocity, std::optional<double> gap, double closing_speed,
  const PlannerParams & params);

/// Desired dynamic gap s* of the car-following law.
double idm_desired_gap(double velocity, double closing_speed, const PlannerParams & params);

struct Proposal
{
  Trajectory trajectory;
  double source_offset{0.0};
  double source_target_speed{0.0};
  /// Single-cell parameters the proposal was rolled out with.
  PlannerParams params;
  bool is_emergency_stop{false};
  std::optional<MetricReport> predicted_scores;
};

/// Tuning of the proposal rollout that is not exposed as planner parameters.
struct RolloutOptions
{
  double horizon{8.0};
  double min_lookahead{5.0};
  double lookahead_time{1.0};
  double max_curvature{0.2};
  double max_lateral_accel{4.0};
  double corridor_margin{1.0};
  double off_map_distance{10.0};
  double path_behind{10.0};
  double path_margin{50.0};
};

/// Straight-line stop at `decel` until standstill, then stationary. Positions
/// follow the exact kinematics so the stopping distance is v^2 / (2 decel).
Trajectory emergency_brake(const EgoState & ego, double decel, double horizon = 8.0, double dt = 0.1);

/// Rolls out proposals for one world state. Offset paths and the obstacle
/// timeline seen along each of them are cached, so sweeping many parameter
/// cells is cheap. Not thread-safe.
class ProposalGenerator
{
public:
  ProposalGenerator(const WorldView & world, const Forecast & forecast, RolloutOptions options = {});

  /// True when the ego is farther than `off_map_distance` from its route.
  bool off_map() const { return off_map_; }
  double route_arc() const { return ego_route_arc_; }
  /// Route speed limit at the ego, if the lane has one.
  std::optional<double> speed_limit() const { return speed_limit_; }
  double target_speed(double fraction, double fallback_target_velocity) const;

  Proposal rollout(double offset, double fraction, const PlannerParams & params);
  /// Obstacle-free rollout at the full speed limit on the route centre line.
  Trajectory free_flow(const PlannerParams & params);

  std::vector<Proposal> generate(const PlannerParams & params);
  std::vector<Proposal> generate(const ProposalGrid & grid);

  const WorldView & world() const { return world_; }
  const RolloutOptions & options() const { return options_; }
  std::size_t steps() const { return steps_; }

private:
  struct Obstacle
  {
    double center_arc;
    double rear_arc;
    double along_speed;
  };
  struct OffsetPath
  {
    Polyline path;
    double ego_arc{0.0};
    std::vector<std::vector<Obstacle>> timeline;
  };

  const OffsetPath & path_for(double offset);
  Trajectory integrate(const OffsetPath & path, double target_speed, const PlannerParams & params, bool obstacles);
  Proposal stop_proposal(const PlannerParams & params) const;

  const WorldView & world_;
  const Forecast & forecast_;
  RolloutOptions options_;
  std::size_t steps_{0};
  bool off_map_{false};
  double ego_route_arc_{0.0};
  std::optional<double> speed_limit_;
  std::map<double, OffsetPath> paths_;
  std::optional<OffsetPath> free_path_;
};

/// Convenience wrapper building a generator for `world` and expanding `params`.
std::vector<Proposal> generate_proposals(
  const WorldView & world, const PlannerParams & params, const Forecast & forecast);

}  // namespace drivesim
