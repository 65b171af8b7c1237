#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "drivesim/forecast.hpp"
#include "drivesim/idm_planner.hpp"
#include "drivesim/metrics.hpp"

namespace drivesim
{

/// Window ahead of the current tick in which a predicted collision triggers the emergency brake.
inline constexpr double kEmergencyWindow = 2.0;

/// Scores `proposal` against the forecast with the full metric suite. The
/// progress metric compares against `reference_progress`.
MetricReport score_proposal(
  const Proposal & proposal, const Forecast & forecast, const RoadMap & road, VehicleDims dims,
  std::optional<double> reference_progress, const MetricConfig & config = {});

struct Selection
{
  std::size_t index{0};
  double aggregate{0.0};
};

/// Highest predicted aggregate; ties go to the smaller |offset|, then the
/// higher target speed, then the earlier proposal. Throws on an empty list or
/// an unscored proposal.
Selection select_best(std::span<const Proposal> proposals);

/// True iff the trajectory's box overlaps any forecast box at a tick within `window` seconds.
bool check_emergency(
  const Trajectory & trajectory, VehicleDims dims, const Forecast & forecast, double window = kEmergencyWindow);

/// One planning tick of the rule-based planner: forecast, proposal rollout and
/// scoring share the cached state of a single world snapshot.
class InternalSimulator
{
public:
  InternalSimulator(
    const WorldView & world, const PlannerParams & base_params, MetricConfig config = {},
    RolloutOptions options = {});
  InternalSimulator(const InternalSimulator &) = delete;
  InternalSimulator & operator=(const InternalSimulator &) = delete;

  const WorldView & world() const { return world_; }
  const Forecast & forecast() const { return forecast_; }
  ProposalGenerator & generator() { return generator_; }
  const MetricConfig & config() const { return config_; }
  /// Route progress of an unobstructed rollout at the speed limit; the
  /// reference for the predicted progress ratio.
  double reference_progress() const { return reference_progress_; }

  void score(Proposal & proposal) const;
  std::vector<Proposal> propose(const PlannerParams & params);
  std::vector<Proposal> propose(const ProposalGrid & grid);
  bool emergency(const Proposal & proposal) const;

private:
  const WorldView & world_;
  MetricConfig config_;
  Forecast forecast_;
  ProposalGenerator generator_;
  double reference_progress_{0.0};
};

}  // namespace drivesim
