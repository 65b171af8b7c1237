#pragma once

#include <optional>
#include <vector>

#include "drivesim/metrics.hpp"
#include "drivesim/types.hpp"

// Brute-force reference evaluator for the closed-loop metrics. It shares only
// the plain data types with the library and re-derives every rule with its own
// geometry. Lanes must be straight two-point segments without successors,
// which is what the random mini-episode generator produces.
namespace oracle
{

struct Scores
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
};

Scores evaluate(
  const drivesim::Scenario & scenario, const drivesim::Trajectory & ego, drivesim::VehicleDims dims,
  const drivesim::AgentFrames & agents);

/// Aggregate from already computed scores, re-derived from the rules.
double aggregate(const Scores & s);

/// Earliest constant-velocity projected overlap in 0.1 s sub-steps up to 3 s.
std::optional<double> ttc_at(
  const drivesim::TrajectorySample & ego, drivesim::VehicleDims dims, const std::vector<drivesim::AgentState> & agents);

/// True iff two closed oriented rectangles overlap.
bool overlap(double ax, double ay, double ah, double al, double aw, double bx, double by, double bh, double bl, double bw);

}  // namespace oracle
