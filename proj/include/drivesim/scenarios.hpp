#pragma once

#include <string>
#include <vector>

#include "drivesim/types.hpp"

namespace drivesim
{

// Synthetic scenario generators. Each description states what the default
// rule-based planner is expected to do in it.

Scenario make_free_road(double length = 500.0, double speed_limit = 15.0, double initial_speed = 10.0);
Scenario make_lead_follow(double bumper_gap = 30.0, double leader_speed = 8.0, double initial_speed = 10.0);
Scenario make_stopped_leader(double bumper_gap = 60.0, double initial_speed = 12.0);
/// Cones reach `intrusion` metres into the lane from its left edge; the right shoulder is drivable.
Scenario make_cone_corridor(double intrusion = 1.6, double start = 60.0, double corridor_length = 30.0);
/// The drivable area loses the ego lane over [taper_start, taper_start + taper_length]
/// while the mapped lane continues straight through the narrowed section.
Scenario make_lane_narrowing(double taper_start = 100.0, double taper_length = 40.0);
/// A car waiting on a perpendicular lane pulls out at `start_time` without yielding.
Scenario make_cross_traffic(double start_time = 2.5, double cross_speed = 8.0);
/// A left turn `approach` metres ahead whose mapped limit is far above what the
/// curvature allows, with a slower car in the adjacent inner lane.
Scenario make_sharp_turn(
  double radius = 20.0, double speed_limit = 18.0, double initial_speed = 18.0, double approach = 40.0);
Scenario make_pedestrian_crossing(double start_time = 1.0, double crossing_x = 45.0);

/// All eight generators with default parameters.
std::vector<Scenario> builtin_scenarios();
/// Ids of the scenarios built to defeat the default planner.
std::vector<std::string> adversarial_scenario_ids();
std::vector<Scenario> adversarial_scenarios();

/// Route progress of an unobstructed car-following rollout at the route speed limit over the whole episode.
double free_flow_progress(const Scenario & scenario);

}  // namespace drivesim
