#include "drivesim/llm_assist.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <stdexcept>

#include "drivesim/prompts_embedded.hpp"
#include "drivesim/road_map.hpp"

namespace drivesim
{
namespace
{
// Fixed two-decimal rendering without "-0.00".
std::string num(double v)
{
  if (std::abs(v) < 0.005) {
    v = 0.0;
  }
  return fmt::format("{:.2f}", v);
}

std::string point(Vec2 p) { return "(" + num(p.x) + ", " + num(p.y) + ")"; }

std::string scores_line(const MetricReport & r)
{
  return fmt::format(
    "score {}, collisions {}, ttc {}, drivable {}, comfort {}, progress {}, speed_limit {}, direction {}",
    num(r.aggregate), num(r.collisions), num(r.ttc), num(r.drivable), num(r.comfort), num(r.progress),
    num(r.speed_limit), num(r.direction));
}

constexpr double kLaneSummaryRadius = 100.0;
constexpr double kLaneSampleSpacing = 10.0;

struct Candidate
{
  Proposal proposal;
  Provenance provenance{Provenance::base};
  std::string rationale;
  std::optional<bool> brake;
};
}  // namespace

const char * to_string(PlannerMode mode)
{
  switch (mode) {
    case PlannerMode::base:
      return "base";
    case PlannerMode::assist_par:
      return "assist-par";
    case PlannerMode::assist_unc:
      return "assist-unc";
    case PlannerMode::llm_only:
      return "llm-only";
  }
  return "base";
}

PlannerMode planner_mode_from_string(const std::string & name)
{
  for (PlannerMode m : {PlannerMode::base, PlannerMode::assist_par, PlannerMode::assist_unc, PlannerMode::llm_only}) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw std::invalid_argument("unknown planner mode: " + name);
}

const char * to_string(Provenance p)
{
  switch (p) {
    case Provenance::base:
      return "base";
    case Provenance::llm_par:
      return "llm_par";
    case Provenance::llm_unc:
      return "llm_unc";
    case Provenance::emergency:
      return "emergency";
  }
  return "base";
}

Provenance provenance_from_string(const std::string & name)
{
  for (Provenance p : {Provenance::base, Provenance::llm_par, Provenance::llm_unc, Provenance::emergency}) {
    if (name == to_string(p)) {
      return p;
    }
  }
  throw std::invalid_argument("unknown provenance: " + name);
}

void InvocationPolicy::validate() const
{
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw std::invalid_argument("score_threshold must lie in [0, 1]");
  }
  if (max_queries < 0 || max_queries > kMaxQueriesLimit) {
    throw std::invalid_argument(fmt::format("max_queries must lie in [0, {}]", kMaxQueriesLimit));
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be non-negative");
  }
  for (const auto & [name, value] : metric_gates) {
    if (!metric_by_name(MetricReport{}, name)) {
      throw std::invalid_argument("unknown metric gate: " + name);
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      throw std::invalid_argument("metric gate " + name + " must lie in [0, 1]");
    }
  }
}

bool should_invoke(double best_predicted_aggregate, const InvocationPolicy & policy)
{
  return policy.max_queries > 0 && best_predicted_aggregate < policy.score_threshold;
}

bool meets_threshold(const MetricReport & predicted, const InvocationPolicy & policy)
{
  if (predicted.aggregate < policy.score_threshold) {
    return false;
  }
  for (const auto & [name, minimum] : policy.metric_gates) {
    if (metric_by_name(predicted, name).value_or(1.0) < minimum) {
      return false;
    }
  }
  return true;
}

bool should_invoke(const MetricReport & best_predicted, const InvocationPolicy & policy)
{
  return policy.max_queries > 0 && !meets_threshold(best_predicted, policy);
}

std::string serialize_scene(const WorldView & world, std::span<const Proposal> proposals)
{
  const EgoState & ego = world.ego;
  const RoadMap * road = world.road;
  std::string out;
  const Lane * ego_lane = road ? road->lane_at(ego.pose.position()) : nullptr;
  out += "[ego]\n";
  out += fmt::format(
    "time {} s, position {}, heading {} rad, speed {} m/s, acceleration {} m/s^2, size {} x {} m, lane {}\n",
    num(world.time), point(ego.pose.position()), num(ego.pose.heading), num(ego.velocity), num(ego.acceleration),
    num(ego.length), num(ego.width), ego_lane ? ego_lane->id() : "none");

  std::vector<const AgentState *> agents;
  for (const AgentState & a : world.agents) {
    agents.push_back(&a);
  }
  std::sort(agents.begin(), agents.end(), [](const AgentState * l, const AgentState * r) { return l->id < r->id; });
  out += fmt::format("[agents] {}\n", agents.size());
  for (const AgentState * a : agents) {
    std::string lane = a->lane_id.value_or("");
    if (lane.empty() && road) {
      const Lane * found = road->lane_at(a->pose.position());
      lane = found ? found->id() : "none";
    }
    out += fmt::format(
      "id {}, {}, position {}, heading {} rad, speed {} m/s, size {} x {} m, lane {}, distance {} m\n", a->id,
      to_string(a->kind), point(a->pose.position()), num(a->pose.heading), num(a->speed), num(a->length), num(a->width),
      lane, num(distance(a->pose.position(), ego.pose.position())));
  }

  std::vector<std::string> lane_lines;
  if (world.scenario) {
    std::vector<const Lane *> lanes;
    for (const Lane & l : world.scenario->lanes) {
      lanes.push_back(&l);
    }
    std::sort(lanes.begin(), lanes.end(), [](const Lane * l, const Lane * r) { return l->id() < r->id(); });
    for (const Lane * lane : lanes) {
      const Polyline & c = lane->centerline();
      std::string samples;
      for (double s = 0.0;; s += kLaneSampleSpacing) {
        const double at = std::min(s, c.length());
        const Vec2 p = c.pose_at(at).position();
        if (distance(p, ego.pose.position()) <= kLaneSummaryRadius) {
          samples += " " + point(p);
        }
        if (at >= c.length()) {
          break;
        }
      }
      if (samples.empty()) {
        continue;
      }
      std::string successors;
      for (const std::string & id : lane->successors()) {
        successors += (successors.empty() ? "" : " ") + id;
      }
      const auto limit = road ? road->speed_limit_of(*lane) : lane->speed_limit();
      lane_lines.push_back(fmt::format(
        "lane {}, speed limit {}, successors {}, centre line{}\n", lane->id(),
        limit ? num(*limit) + " m/s" : std::string("none"), successors.empty() ? "none" : successors, samples));
    }
  }
  out += fmt::format("[lanes] {}\n", lane_lines.size());
  for (const std::string & line : lane_lines) {
    out += line;
  }

  const std::size_t light_count = world.scenario ? world.scenario->traffic_lights.size() : 0;
  out += fmt::format("[traffic lights] {}\n", light_count);
  for (std::size_t i = 0; i < light_count; ++i) {
    const TrafficLight & light = world.scenario->traffic_lights[i];
    out += fmt::format("lane {}, state {}\n", light.lane_id, to_string(light.state_at(world.time)));
  }

  out += fmt::format("[proposals] {}\n", proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const Proposal & p = proposals[i];
    out += fmt::format("#{} offset {} m, target speed {} m/s", i, num(p.source_offset), num(p.source_target_speed));
    if (p.predicted_scores) {
      out += ", " + scores_line(*p.predicted_scores);
    }
    out += "\n";
  }
  return out;
}

PromptSet PromptSet::builtin()
{
  return {prompts::kSystemParameters, prompts::kSystemWaypoints, prompts::kUser};
}

std::string render_template(std::string text, const std::map<std::string, std::string> & values)
{
  for (const auto & [key, value] : values) {
    const std::string token = "{{" + key + "}}";
    for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
      text.replace(pos, token.size(), value);
    }
  }
  return text;
}

HybridPlanner::HybridPlanner(HybridPlannerConfig config, std::shared_ptr<LlmBackend> backend, PromptSet prompts)
: config_(std::move(config)), backend_(std::move(backend)), prompts_(std::move(prompts))
{
  config_.base_params.validate();
  config_.policy.validate();
  if (config_.mode != PlannerMode::base && !backend_) {
    throw std::invalid_argument(std::string("planner mode ") + to_string(config_.mode) + " needs a backend");
  }
}

PlanResult HybridPlanner::plan_step(const WorldView & world, const std::string & session_id) const
{
  const InvocationPolicy & policy = config_.policy;
  InternalSimulator sim(world, config_.base_params, config_.metrics, config_.rollout);
  std::vector<Proposal> base = sim.propose(config_.base_params);
  const Selection base_best = select_best(base);

  PlanResult result;
  result.base_aggregate = base_best.aggregate;
  std::vector<Candidate> pool;
  const bool llm_only = config_.mode == PlannerMode::llm_only;
  if (!llm_only) {
    const Proposal & p = base[base_best.index];
    pool.push_back({p, Provenance::base,
                    fmt::format("base proposal, offset {} m at {} m/s", num(p.source_offset), num(p.source_target_speed)),
                    std::nullopt});
  }

  bool query = false;
  if (config_.mode == PlannerMode::assist_par || config_.mode == PlannerMode::assist_unc) {
    query = should_invoke(*base[base_best.index].predicted_scores, policy);
  } else if (llm_only) {
    query = policy.max_queries > 0;
  }
  const ResponseFormat format =
    config_.mode == PlannerMode::assist_par ? ResponseFormat::parameters : ResponseFormat::waypoints;

  std::optional<bool> latest_brake;
  if (query) {
    const std::string scene = serialize_scene(world, base);
    std::string feedback;
    for (int attempt = 1; attempt <= policy.max_queries; ++attempt) {
      ChatRequest request;
      request.system_prompt =
        format == ResponseFormat::parameters ? prompts_.system_parameters : prompts_.system_waypoints;
      request.user_prompt = render_template(
        prompts_.user, {{"time", num(world.time)},
                        {"attempt", std::to_string(attempt)},
                        {"max_queries", std::to_string(policy.max_queries)},
                        {"scene", scene},
                        {"feedback", feedback.empty() ? std::string() : "[previous queries]\n" + feedback}});
      request.temperature = policy.temperature;
      request.max_tokens = config_.max_tokens;
      request.model_name = config_.model_name;
      request.session_id = session_id;
      request.attempt = attempt;
      request.format = format;
      request.world = &world;

      ++result.queries;
      std::string text;
      try {
        text = backend_->complete(request);
      } catch (const BackendError & e) {
        result.degraded = true;
        result.notes.push_back(std::string("backend unavailable: ") + e.what());
        break;
      }

      try {
        Candidate c;
        if (format == ResponseFormat::parameters) {
          LlmParamResponse reply = parse_param_response(text, config_.base_params);
          for (const std::string & w : reply.warnings) {
            result.notes.push_back("query " + std::to_string(attempt) + ": " + w);
          }
          std::vector<Proposal> proposals = sim.propose(reply.params);
          const Selection best = select_best(proposals);
          c = {std::move(proposals[best.index]), Provenance::llm_par, reply.rationale, reply.invoke_emergency_brake};
        } else {
          const LlmTrajectoryResponse reply = parse_trajectory_response(text);
          const auto limit = sim.generator().speed_limit();
          const double reference = limit.value_or(config_.base_params.fallback_target_velocity);
          Proposal p;
          p.trajectory = densify_waypoints(
            world.ego, reply.waypoints, 2.0, world.scenario->dt, config_.waypoint_speed_factor * reference);
          p.params = config_.base_params;
          p.source_offset = sim.world().road->route().project(reply.waypoints.back()).lateral_offset;
          for (const TrajectorySample & s : p.trajectory.samples) {
            p.source_target_speed = std::max(p.source_target_speed, s.velocity);
          }
          sim.score(p);
          c = {std::move(p), Provenance::llm_unc, reply.rationale, reply.invoke_emergency_brake};
        }
        const MetricReport & scores = *c.proposal.predicted_scores;
        feedback += fmt::format("query {}: {}\n", attempt, scores_line(scores));
        latest_brake = c.brake;
        const bool good_enough = llm_only || meets_threshold(scores, policy);
        pool.push_back(std::move(c));
        if (good_enough) {
          break;
        }
      } catch (const ParseError & e) {
        feedback += fmt::format("query {}: reply rejected ({}); follow the reply format exactly\n", attempt, e.what());
        result.notes.push_back(fmt::format("query {}: {}", attempt, e.what()));
      }
    }
  }

  if (pool.empty()) {
    // Only reachable in llm-only mode without a usable reply.
    const Proposal & p = base[base_best.index];
    pool.push_back({p, Provenance::base, "no usable model reply; base proposal", std::nullopt});
    result.degraded = true;
  }

  // Earlier candidates win ties, so the base proposal is kept unless beaten.
  std::size_t chosen = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i].proposal.predicted_scores->aggregate > pool[chosen].proposal.predicted_scores->aggregate) {
      chosen = i;
    }
  }
  Candidate & selected = pool[chosen];
  result.trajectory = selected.proposal.trajectory;
  result.provenance = selected.provenance;
  result.rationale = selected.rationale;
  result.predicted = *selected.proposal.predicted_scores;
  result.selected_offset = selected.proposal.source_offset;
  result.selected_target_speed = selected.proposal.source_target_speed;

  const std::optional<bool> brake = selected.provenance == Provenance::base ? latest_brake : selected.brake;
  const bool llm_brake = policy.allow_llm_emergency_brake && brake.value_or(false);
  const bool predicted_collision = !llm_only && sim.emergency(selected.proposal);
  if (predicted_collision || llm_brake) {
    result.trajectory =
      emergency_brake(world.ego, selected.proposal.params.decel_max, config_.rollout.horizon, world.scenario->dt);
    result.provenance = Provenance::emergency;
    result.emergency = true;
    result.rationale += predicted_collision ? "; emergency brake: collision predicted within 2 s"
                                            : "; emergency brake requested by the model";
  }
  return result;
}

}  // namespace drivesim
