#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drivesim/idm_planner.hpp"
#include "drivesim/internal_sim.hpp"
#include "drivesim/llm_backend.hpp"
#include "drivesim/llm_response.hpp"
#include "drivesim/metrics.hpp"

namespace drivesim
{

enum class PlannerMode { base, assist_par, assist_unc, llm_only };
const char * to_string(PlannerMode mode);
/// Accepts "base", "assist-par", "assist-unc" and "llm-only".
PlannerMode planner_mode_from_string(const std::string & name);

enum class Provenance { base, llm_par, llm_unc, emergency };
const char * to_string(Provenance provenance);
Provenance provenance_from_string(const std::string & name);

struct InvocationPolicy
{
  static constexpr int kMaxQueriesLimit = 16;

  double score_threshold{0.8};
  int max_queries{4};
  bool allow_llm_emergency_brake{true};
  double temperature{1.4};
  /// Optional per-metric minimums (keys from kMetricNames) that also trigger a query.
  std::map<std::string, double> metric_gates;

  void validate() const;
  friend bool operator==(const InvocationPolicy &, const InvocationPolicy &) = default;
};

/// True iff a query is allowed and the predicted aggregate is below the threshold.
bool should_invoke(double best_predicted_aggregate, const InvocationPolicy & policy);
/// Also honours the per-metric gates.
bool should_invoke(const MetricReport & best_predicted, const InvocationPolicy & policy);
/// Whether a candidate is good enough to stop querying.
bool meets_threshold(const MetricReport & predicted, const InvocationPolicy & policy);

/// Deterministic plain-text scene description: ego, agents (sorted by id),
/// lanes near the ego, traffic lights and the evaluated proposals.
std::string serialize_scene(const WorldView & world, std::span<const Proposal> proposals);

struct PromptSet
{
  std::string system_parameters;
  std::string system_waypoints;
  /// Placeholders: {{time}}, {{attempt}}, {{max_queries}}, {{scene}}, {{feedback}}.
  std::string user;

  /// The templates compiled into the binary.
  static PromptSet builtin();
};

/// Replaces every {{name}} in `text`; unknown placeholders are left intact.
std::string render_template(std::string text, const std::map<std::string, std::string> & values);

struct PlanResult
{
  Trajectory trajectory;
  Provenance provenance{Provenance::base};
  std::string rationale;
  /// Predicted scores of the selected candidate (before any emergency brake).
  MetricReport predicted;
  double base_aggregate{0.0};
  int queries{0};
  bool degraded{false};
  bool emergency{false};
  double selected_offset{0.0};
  double selected_target_speed{0.0};
  std::vector<std::string> notes;
};

struct HybridPlannerConfig
{
  PlannerMode mode{PlannerMode::base};
  PlannerParams base_params;
  InvocationPolicy policy;
  MetricConfig metrics;
  RolloutOptions rollout;
  std::string model_name;
  int max_tokens{512};
  /// Bound on waypoint speeds relative to the speed limit.
  double waypoint_speed_factor{1.5};
};

/// The rule-based planner, optionally assisted by a language model through
/// `backend`. Stateless between ticks; safe to share across threads when the
/// backend is.
class HybridPlanner
{
public:
  HybridPlanner(HybridPlannerConfig config, std::shared_ptr<LlmBackend> backend, PromptSet prompts = PromptSet::builtin());

  PlanResult plan_step(const WorldView & world, const std::string & session_id = {}) const;
  const HybridPlannerConfig & config() const { return config_; }

private:
  HybridPlannerConfig config_;
  std::shared_ptr<LlmBackend> backend_;
  PromptSet prompts_;
};

}  // namespace drivesim
