#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "drivesim/idm_planner.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

/// A reply that cannot be turned into a usable response; the caller may re-query.
class ParseError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Bounds applied to parameters returned by a language model. Values outside
/// are clamped with a warning.
struct ParamBounds
{
  double max_abs_offset{PlannerParams::kMaxAbsOffset};
  double min_fraction{0.05};
  double max_fraction{1.0};
  double min_fallback{0.5};
  double max_fallback{30.0};
  double min_gap_lo{0.5};
  double min_gap_hi{10.0};
  double headway_lo{0.1};
  double headway_hi{5.0};
  double accel_lo{0.1};
  double accel_hi{4.0};
  double decel_lo{0.5};
  double decel_hi{8.0};
};

struct LlmParamResponse
{
  PlannerParams params;
  std::optional<bool> invoke_emergency_brake;
  std::string rationale;
  std::vector<std::string> warnings;
};

struct LlmTrajectoryResponse
{
  std::array<Vec2, 4> waypoints{};
  std::optional<bool> invoke_emergency_brake;
  std::string rationale;
};

/// Field names of the parameter reply, in prompt order.
inline constexpr std::array<std::string_view, 7> kParamFieldNames{
  "lateral_offsets", "speed_limit_fraction", "fallback_target_velocity", "min_gap_to_lead_agent",
  "headway_time",    "accel_max",            "decel_max"};

/// Extracts the parameter object from free-form model output. Code fences,
/// surrounding prose, trailing commas and nesting are tolerated. The IDM
/// exponent is not model-controlled and is taken from `base`.
/// Throws ParseError when no object with all seven fields is found.
LlmParamResponse parse_param_response(
  std::string_view text, const PlannerParams & base = {}, const ParamBounds & bounds = {});

/// Extracts exactly four (x, y) waypoints, either from a JSON `waypoints`
/// array or from "(x, y)" pairs in the text. Throws ParseError otherwise.
LlmTrajectoryResponse parse_trajectory_response(std::string_view text);

/// Densifies the waypoints (world frame, `waypoint_dt` apart, the first one
/// `waypoint_dt` after the ego state) with monotone cubic interpolation of
/// x(t) and y(t). Heading follows the path tangent and speed is the finite
/// difference of positions. Throws ParseError when the implied speed exceeds
/// `max_speed`.
Trajectory densify_waypoints(
  const EgoState & ego, std::span<const Vec2> waypoints, double waypoint_dt, double dt,
  std::optional<double> max_speed = std::nullopt);

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
class MonotoneCubic
{
public:
  MonotoneCubic(std::vector<double> knots, std::vector<double> values);
  double value(double t) const;
  double derivative(double t) const;

private:
  std::size_t interval(double t) const;
  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> slope_;
};

/// Canonical reply texts, as a well-behaved model would produce them.
std::string format_param_response(const LlmParamResponse & response);
std::string format_trajectory_response(const LlmTrajectoryResponse & response);

}  // namespace drivesim
