#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "drivesim/idm_planner.hpp"
#include "drivesim/metrics.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

// nlohmann adapters. Readers throw std::invalid_argument with the offending
// field on malformed input.

void to_json(nlohmann::json & j, const Vec2 & v);
void from_json(const nlohmann::json & j, Vec2 & v);
void to_json(nlohmann::json & j, const Pose2D & p);
void from_json(const nlohmann::json & j, Pose2D & p);
void to_json(nlohmann::json & j, const AgentState & a);
void from_json(const nlohmann::json & j, AgentState & a);
void to_json(nlohmann::json & j, const EgoState & e);
void from_json(const nlohmann::json & j, EgoState & e);
void to_json(nlohmann::json & j, const TrafficLight & l);
void from_json(const nlohmann::json & j, TrafficLight & l);
void to_json(nlohmann::json & j, const AgentScript & s);
void from_json(const nlohmann::json & j, AgentScript & s);
void to_json(nlohmann::json & j, const MetricReport & r);
void from_json(const nlohmann::json & j, MetricReport & r);

nlohmann::json lane_to_json(const Lane & lane);
Lane lane_from_json(const nlohmann::json & j);
nlohmann::json scenario_to_json(const Scenario & scenario);
/// Parses and validates a scenario document.
Scenario scenario_from_json(const nlohmann::json & j);
Scenario load_scenario(const std::filesystem::path & path);
void save_scenario(const Scenario & scenario, const std::filesystem::path & path);

/// Planner parameters under the reply field names (plus `idm_exponent`).
/// Unknown keys are rejected; missing keys keep the values of `defaults`.
nlohmann::json params_to_json(const PlannerParams & params);
PlannerParams params_from_json(const nlohmann::json & j, const PlannerParams & defaults = {});

}  // namespace drivesim
