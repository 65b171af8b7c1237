// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--allow-fail N]...
//
// Exit status is 0 when every criterion passes or fails only where
// --allow-fail names it. Allowed failures are still printed as FAIL.

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "drivesim/config.hpp"
#include "drivesim/forecast.hpp"
#include "drivesim/harness.hpp"
#include "drivesim/idm_planner.hpp"
#include "drivesim/internal_sim.hpp"
#include "drivesim/llm_backend.hpp"
#include "drivesim/llm_response.hpp"
#include "drivesim/metrics.hpp"
#include "drivesim/road_map.hpp"
#include "drivesim/roc.hpp"
#include "drivesim/scenarios.hpp"
#include "metric_oracle.hpp"
#include "random_episode.hpp"
#include "reply_corpus.hpp"

using namespace drivesim;

namespace
{
constexpr double kPi = 3.14159265358979323846;

// Pinned tolerances and limits.
constexpr double kGridSeconds = 1.0;
constexpr double kConvergeBand = 0.1;
constexpr double kConvergeSeconds = 30.0;
constexpr double kEquilibriumResidual = 1e-9;
constexpr int kIdmDraws = 100;
constexpr int kOracleEpisodes = 500;
constexpr double kOracleTolerance = 1e-9;
constexpr double kOracleSeconds = 60.0;
constexpr double kAssistGain = 0.05;
constexpr double kAssistSeconds = 300.0;
constexpr double kRandomAucLo = 0.4;
constexpr double kRandomAucHi = 0.6;
constexpr int kRocScenarios = 200;
constexpr int kCorpusRequired = 95;
constexpr int kFuzzCases = 2000;

struct Outcome
{
  bool pass{true};
  std::vector<std::string> failures;
  std::string summary;

  void check(bool ok, std::string what)
  {
    if (!ok) {
      pass = false;
      if (failures.size() < 5) {
        failures.push_back(std::move(what));
      }
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const std::filesystem::path & p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string & name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("drivesim_acceptance_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct World
{
  Scenario scenario;
  RoadMap road;
  WorldView view;

  explicit World(Scenario sc) : scenario(std::move(sc)), road(scenario)
  {
    view.scenario = &scenario;
    view.road = &road;
    view.ego = scenario.ego_init;
    view.agents = scenario.agents_init;
  }
};

/// Counts calls and forwards them to the heuristic oracle.
class CountingOracle : public LlmBackend
{
public:
  std::string complete(const ChatRequest & request) override
  {
    ++calls_;
    return inner_.complete(request);
  }
  std::string name() const override { return inner_.name(); }
  std::size_t calls() const { return calls_; }

private:
  HeuristicOracleBackend inner_;
  std::atomic<std::size_t> calls_{0};
};

HybridPlannerConfig assist_config(int max_queries)
{
  HybridPlannerConfig c;
  c.mode = PlannerMode::assist_par;
  c.policy.max_queries = max_queries;
  return c;
}

// ---------------------------------------------------------------------------

Outcome proposal_grid()
{
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  World w(make_free_road());
  InternalSimulator sim(w.view, {});
  const std::size_t defaults = sim.generator().generate(PlannerParams{}).size();
  o.check(defaults == 15, fmt::format("default grid gave {} proposals", defaults));
  for (const auto [offsets, expected] : {std::pair{6, std::size_t{7290}}, std::pair{7, std::size_t{8505}}}) {
    const ProposalGrid grid = ProposalGrid::enlarged(offsets);
    const std::size_t product = grid.lateral_offsets.size() * grid.speed_limit_fractions.size() *
                                grid.fallback_target_velocities.size() * grid.min_gaps.size() *
                                grid.headway_times.size() * grid.accel_maxes.size() * grid.decel_maxes.size();
    const std::size_t produced = sim.generator().generate(grid).size();
    o.check(product == expected, fmt::format("{}-offset product is {}", offsets, product));
    o.check(produced == expected, fmt::format("{}-offset sweep produced {}", offsets, produced));
  }
  const double elapsed = seconds_since(start);
  o.check(elapsed < kGridSeconds, fmt::format("took {:.2f} s", elapsed));
  o.summary = fmt::format("15 / 7290 / 8505 proposals rolled out in {:.2f} s", elapsed);
  return o;
}

/// Minimum bumper gap over 60 s behind a leader at constant speed.
double min_following_gap(const PlannerParams & p, double leader_speed, double speed, double gap)
{
  double min_gap = gap;
  for (int k = 0; k < 600; ++k) {
    const double a = idm_acceleration(speed, p.fallback_target_velocity, gap, speed - leader_speed, p);
    const double next = std::max(0.0, speed + a * 0.1);
    gap -= 0.5 * (speed + next) * 0.1 - leader_speed * 0.1;
    speed = next;
    min_gap = std::min(min_gap, gap);
  }
  return min_gap;
}

Outcome idm_properties()
{
  Outcome o;
  const PlannerParams base;
  const double v0 = base.fallback_target_velocity;
  double v = 0.0;
  double t = 0.0;
  while (std::abs(v - v0) > kConvergeBand && t < 120.0) {
    v += idm_acceleration(v, v0, std::nullopt, 0.0, base) * 0.1;
    t += 0.1;
  }
  o.check(t <= kConvergeSeconds, fmt::format("free-road convergence took {:.1f} s", t));

  double worst_residual = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < kIdmDraws; ++draw) {
    PlannerParams p;
    p.min_gap_to_lead_agent = 0.5 + 4.5 * u(rng);
    p.headway_time = 0.5 + 2.5 * u(rng);
    p.accel_max = 0.5 + 2.5 * u(rng);
    p.decel_max = 1.5 + 4.5 * u(rng);
    p.fallback_target_velocity = 5.0 + 20.0 * u(rng);
    const double target = p.fallback_target_velocity;
    const double leader_speed = 2.0 + (target - 2.0) * u(rng);

    double lo = p.min_gap_to_lead_agent;
    double hi = 1e4;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (idm_acceleration(leader_speed, target, mid, 0.0, p) < 0.0 ? lo : hi) = mid;
    }
    const double equilibrium = 0.5 * (lo + hi);
    worst_residual = std::max(worst_residual, std::abs(idm_acceleration(leader_speed, target, equilibrium, 0.0, p)));

    // Even draws: perturbed steady following. Odd draws: start-up from a queue.
    const bool steady = draw % 2 == 0;
    const double speed = steady ? leader_speed : 0.0;
    const double gap = steady ? equilibrium * (1.0 + u(rng)) : p.min_gap_to_lead_agent * (1.0 + u(rng));
    const double margin = min_following_gap(p, leader_speed, speed, gap) - p.min_gap_to_lead_agent;
    worst_margin = std::min(worst_margin, margin);
    o.check(margin >= 0.0, fmt::format("draw {} came within {:.3f} m below the minimum gap", draw, -margin));
  }
  o.check(worst_residual < kEquilibriumResidual, fmt::format("equilibrium residual {:.2e}", worst_residual));
  o.summary = fmt::format(
    "converged in {:.1f} s, max equilibrium residual {:.1e}, min gap margin {:.3f} m over {} draws", t,
    worst_residual, worst_margin, kIdmDraws);
  return o;
}

Outcome metric_oracle_equivalence()
{
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  double worst = 0.0;
  for (int i = 0; i < kOracleEpisodes; ++i) {
    const auto ep = testsupport::random_episode(rng);
    const RoadMap road(ep.scenario);
    const MetricReport got = evaluate({ep.ego, ep.dims, ep.agents, road, ep.scenario.expert_progress});
    const oracle::Scores want = oracle::evaluate(ep.scenario, ep.ego, ep.dims, ep.agents);
    const auto exact = [&](const char * name, auto a, auto b) {
      o.check(a == b, fmt::format("episode {} {}: {} vs oracle {}", i, name, a, b));
    };
    const auto close = [&](const char * name, double a, double b) {
      worst = std::max(worst, std::abs(a - b));
      o.check(std::abs(a - b) < kOracleTolerance, fmt::format("episode {} {}: {} vs oracle {}", i, name, a, b));
    };
    exact("collisions", got.collisions, want.collisions);
    exact("ttc", got.ttc, want.ttc);
    exact("drivable", got.drivable, want.drivable);
    exact("comfort", got.comfort, want.comfort);
    exact("direction", got.direction, want.direction);
    exact("making_progress", got.making_progress, want.making_progress);
    close("progress", got.progress, want.progress);
    close("speed_limit", got.speed_limit, want.speed_limit);
    close("aggregate", got.aggregate, want.aggregate);
  }
  const double elapsed = seconds_since(start);
  o.check(elapsed < kOracleSeconds, fmt::format("took {:.1f} s", elapsed));
  o.summary = fmt::format("{} episodes, max continuous difference {:.1e}, {:.2f} s", kOracleEpisodes, worst, elapsed);
  return o;
}

Scenario straight_road(bool oncoming_lane)
{
  Scenario sc;
  sc.id = "straight";
  sc.lanes.emplace_back("main", std::vector<Vec2>{{-50, 0}, {500, 0}}, 15.0);
  if (oncoming_lane) {
    sc.lanes.emplace_back("oncoming", std::vector<Vec2>{{500, 3.5}, {-50, 3.5}}, 15.0);
  }
  const double top = oncoming_lane ? 5.25 : 1.75;
  sc.drivable_polygon = {{-60, -1.75}, {510, -1.75}, {510, top}, {-60, top}};
  return sc;
}

Trajectory drive_straight(Vec2 start, double speed, int ticks)
{
  Trajectory t;
  for (int k = 0; k < ticks; ++k) {
    t.samples.push_back({k * 0.1, {start.x + speed * k * 0.1, start.y, 0.0}, speed});
  }
  return t;
}

MetricReport score_constructed(Scenario sc, const Trajectory & ego, const std::vector<AgentState> & agents)
{
  sc.ego_init.pose = ego.samples.front().pose;
  sc.ego_init.velocity = ego.samples.front().velocity;
  const RoadMap road(sc);
  AgentFrames frames;
  for (const auto & s : ego.samples) {
    std::vector<AgentState> f;
    for (AgentState a : agents) {
      a.pose.x += a.speed * s.t * std::cos(a.pose.heading);
      a.pose.y += a.speed * s.t * std::sin(a.pose.heading);
      f.push_back(a);
    }
    frames.push_back(std::move(f));
  }
  return evaluate({ego, sc.ego_init.dims(), frames, road, sc.expert_progress});
}

/// Weighted average of the four averaged metrics.
double weighted_average(const MetricReport & r)
{
  return (5.0 * r.ttc + 5.0 * r.progress + 4.0 * r.speed_limit + 2.0 * r.comfort) / 16.0;
}

Outcome aggregation_rules()
{
  Outcome o;
  AgentState stopped;
  stopped.id = "stopped";
  stopped.pose = {20, 0, 0};
  const auto fault = score_constructed(straight_road(false), drive_straight({0, 0}, 10, 30), {stopped});
  o.check(!fault.collision_events.empty() && fault.collision_events.front().at_fault, "no at-fault collision");
  o.check(fault.aggregate == 0.0, fmt::format("at-fault aggregate {}", fault.aggregate));

  AgentState cone;
  cone.id = "cone";
  cone.kind = AgentKind::static_object;
  cone.pose = {20, 0, 0};
  cone.length = cone.width = 0.5;
  const auto object = score_constructed(straight_road(false), drive_straight({0, 0}, 10, 40), {cone});
  o.check(
    object.aggregate == 0.5 * weighted_average(object),
    fmt::format("object strike aggregate {} vs {}", object.aggregate, 0.5 * weighted_average(object)));

  const auto four = score_constructed(straight_road(true), drive_straight({0, 3.5}, 4, 30), {});
  o.check(four.direction == 0.5, fmt::format("4 m oncoming multiplier {}", four.direction));
  o.check(four.aggregate == 0.5 * weighted_average(four), fmt::format("4 m oncoming aggregate {}", four.aggregate));
  const auto seven = score_constructed(straight_road(true), drive_straight({0, 3.5}, 7, 30), {});
  o.check(seven.direction == 0.0, fmt::format("7 m oncoming multiplier {}", seven.direction));
  o.check(seven.aggregate == 0.0, fmt::format("7 m oncoming aggregate {}", seven.aggregate));
  o.summary = fmt::format(
    "at-fault {}, object {:.4f} = 0.5 x {:.4f}, 4 m {}, 7 m {}", fault.aggregate, object.aggregate,
    weighted_average(object), four.direction, seven.direction);
  return o;
}

Outcome emergency_brake_rules()
{
  Outcome o;
  Trajectory standing;
  for (int k = 0; k <= 80; ++k) {
    standing.samples.push_back({k * 0.1, {0, 0, 0}, 0.0});
  }
  // 4 m boxes closing at 10 m/s: the fronts touch when the oncoming centre reaches x = 4.
  const auto oncoming_impact_at = [](double seconds) {
    AgentState a;
    a.id = "oncoming";
    a.pose = {4.0 + 10.0 * seconds, 0, kPi};
    a.speed = 10.0;
    a.length = 4.0;
    return forecast_constant_velocity({a}, {0, 0}, 8.0, 0.1);
  };
  for (double at : {0.5, 1.0, 1.5, 2.0}) {
    o.check(check_emergency(standing, {4, 2}, oncoming_impact_at(at)), fmt::format("impact at {} s missed", at));
  }
  o.check(!check_emergency(standing, {4, 2}, oncoming_impact_at(2.5)), "impact at 2.5 s triggered");

  double worst = 0.0;
  for (double speed : {3.0, 6.0, 10.0, 13.7, 20.0}) {
    for (double decel : {2.0, 3.0, 4.5, 7.0}) {
      EgoState ego;
      ego.velocity = speed;
      const Trajectory t = emergency_brake(ego, decel, 20.0);
      const double travelled = t.samples.back().pose.x - t.samples.front().pose.x;
      const double expected = speed * speed / (2.0 * decel);
      const double error = std::abs(travelled - expected);
      worst = std::max(worst, error / (speed * 0.1));
      o.check(error <= speed * 0.1, fmt::format("{} m/s at {} m/s2: {} m vs {} m", speed, decel, travelled, expected));
      o.check(t.samples.back().velocity == 0.0, "did not stop");
    }
  }
  o.summary = fmt::format("triggers up to 2.0 s, not at 2.5 s; braking distance error at most {:.2f} dt steps", worst);
  return o;
}

Outcome invocation_no_regression()
{
  Outcome o;
  const auto dir = scratch_dir("traces");
  const HybridPlanner base(HybridPlannerConfig{}, nullptr);
  const auto scenarios = builtin_scenarios();
  EpisodeOptions named;
  named.planner_name = "trace";
  int ticks = 0;
  int queried_ticks = 0;
  for (const int budget : {0, 1, 2, 4}) {
    auto backend = std::make_shared<CountingOracle>();
    const HybridPlanner assisted(assist_config(budget), backend);
    const PlanFunction watched = [&](const WorldView & w, const std::string & session) {
      const std::size_t before = backend->calls();
      PlanResult r = assisted.plan_step(w, session);
      const std::size_t used = backend->calls() - before;
      o.check(
        used <= static_cast<std::size_t>(budget),
        fmt::format("budget {}: {} calls at tick {} of {}", budget, used, w.tick, w.scenario->id));
      o.check(static_cast<int>(used) == r.queries, "reported queries differ from backend calls");
      o.check(
        r.predicted.aggregate >= r.base_aggregate,
        fmt::format("budget {}: selected {} < base {} at tick {}", budget, r.predicted.aggregate, r.base_aggregate, w.tick));
      ++ticks;
      queried_ticks += used > 0;
      return r;
    };
    for (const Scenario & sc : scenarios) {
      const EpisodeLog log = run_episode(sc, watched, named);
      if (budget == 0) {
        write_episode_log(run_episode(sc, base, named), dir / "base.jsonl");
        write_episode_log(log, dir / "assisted.jsonl");
        o.check(slurp(dir / "base.jsonl") == slurp(dir / "assisted.jsonl"), "trace differs on " + sc.id);
      }
    }
  }
  std::filesystem::remove_all(dir);
  o.summary = fmt::format(
    "{} scenarios, zero budget byte-identical, {} planned ticks ({} queried) within budget and no worse than base",
    scenarios.size(), ticks, queried_ticks);
  return o;
}

Outcome assisted_improvement()
{
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const HybridPlanner base(HybridPlannerConfig{}, nullptr);
  const auto backend = std::make_shared<HeuristicOracleBackend>();
  const std::vector<int> budgets{0, 1, 2, 4};
  std::vector<HybridPlanner> planners;
  for (int q : budgets) {
    planners.emplace_back(assist_config(q), backend);
  }
  std::vector<PlannerEntry> entries{{"base", plan_with(base)}};
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    entries.push_back({fmt::format("q{}", budgets[i]), plan_with(planners[i])});
  }
  const auto result = run_benchmark(adversarial_scenarios(), entries);
  const double base_mean = result.rows[0].mean.aggregate;
  std::string means = fmt::format("base {:.4f}", base_mean);
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    means += fmt::format(", q{} {:.4f}", budgets[i], result.rows[i + 1].mean.aggregate);
  }
  const double q4 = result.rows.back().mean.aggregate;
  o.check(q4 >= base_mean + kAssistGain, fmt::format("q4 gain {:.4f} < {}", q4 - base_mean, kAssistGain));
  for (std::size_t i = 2; i < result.rows.size(); ++i) {
    const double prev = result.rows[i - 1].mean.aggregate;
    const double cur = result.rows[i].mean.aggregate;
    o.check(
      cur >= prev, fmt::format("not monotone: {} {:.4f} > {} {:.4f}", result.rows[i - 1].planner, prev,
                               result.rows[i].planner, cur));
  }
  const double elapsed = seconds_since(start);
  o.check(elapsed < kAssistSeconds, fmt::format("took {:.1f} s", elapsed));
  o.summary = fmt::format("mean aggregate {}; {:.1f} s", means, elapsed);
  return o;
}

Outcome roc_sanity()
{
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RocSample> exact;
  std::vector<RocSample> independent;
  for (int i = 0; i < kRocScenarios; ++i) {
    const double truth = u(rng);
    exact.push_back({fmt::format("s{}", i), truth, truth});
    independent.push_back({fmt::format("s{}", i), u(rng), truth});
  }
  const double perfect = roc_curve(exact, 0.5).auc;
  const double random = roc_curve(independent, 0.5).auc;
  o.check(perfect == 1.0, fmt::format("perfect predictions AUC {}", perfect));
  o.check(random >= kRandomAucLo && random <= kRandomAucHi, fmt::format("independent predictions AUC {}", random));

  std::vector<EpisodeLog> logs(40);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i].scenario.id = fmt::format("sc{:02d}", i);
    logs[i].report.aggregate = u(rng);
    for (int k = 0; k < 50; ++k) {
      TickRecord t;
      t.tick = k;
      if (u(rng) > 0.1) {
        t.predicted_aggregate = u(rng);
      }
      logs[i].ticks.push_back(t);
    }
  }
  logs[0].report.aggregate = 0.1;
  logs[1].report.aggregate = 0.9;
  const auto analysed = roc_analysis(logs, 0.5);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const TickRecord & t : logs[i].ticks) {
      if (t.predicted_aggregate) {
        lowest = std::min(lowest, *t.predicted_aggregate);
      }
    }
    o.check(analysed.samples.at(i).statistic == lowest, "min statistic differs for " + logs[i].scenario.id);
  }
  o.summary = fmt::format("AUC {} with exact predictions, {:.3f} with independent ones (n = {})", perfect, random, kRocScenarios);
  return o;
}

Outcome parser_robustness()
{
  Outcome o;
  int recovered = 0;
  const auto corpus = testsupport::reply_corpus();
  for (const auto & c : corpus) {
    try {
      recovered += parse_param_response(c.text).params == c.expected;
    } catch (const ParseError &) {
    }
  }
  o.check(corpus.size() == 100, fmt::format("corpus has {} cases", corpus.size()));
  o.check(recovered >= kCorpusRequired, fmt::format("recovered {} of {}", recovered, corpus.size()));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> wide(-1e4, 1e4);
  std::uniform_int_distribution<int> pick(0, 4);
  const ParamBounds b;
  const auto value = [&]() -> nlohmann::json {
    switch (pick(rng)) {
      case 0: return wide(rng);
      case 1: return std::to_string(wide(rng));
      case 2: return -1e300;
      case 3: return nlohmann::json::array({wide(rng)});
      default: return std::uniform_real_distribution<double>(-2, 10)(rng);
    }
  };
  const auto inside = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  int accepted = 0;
  for (int i = 0; i < kFuzzCases; ++i) {
    nlohmann::json j;
    j["lateral_offsets"] = nlohmann::json::array({wide(rng), value()});
    j["speed_limit_fraction"] = pick(rng) ? nlohmann::json::array({value(), value()}) : value();
    j["fallback_target_velocity"] = value();
    j["min_gap_to_lead_agent"] = value();
    j["headway_time"] = value();
    j["accel_max"] = value();
    j["decel_max"] = value();
    try {
      const PlannerParams p = parse_param_response("Sure:\n" + j.dump() + "\nDrive safely.").params;
      ++accepted;
      bool ok = true;
      for (double v : p.lateral_offsets) ok = ok && std::abs(v) <= b.max_abs_offset;
      for (double v : p.speed_limit_fractions) ok = ok && inside(v, b.min_fraction, b.max_fraction);
      ok = ok && inside(p.fallback_target_velocity, b.min_fallback, b.max_fallback);
      ok = ok && inside(p.min_gap_to_lead_agent, b.min_gap_lo, b.min_gap_hi);
      ok = ok && inside(p.headway_time, b.headway_lo, b.headway_hi);
      ok = ok && inside(p.accel_max, b.accel_lo, b.accel_hi);
      ok = ok && inside(p.decel_max, b.decel_lo, b.decel_hi);
      o.check(ok, fmt::format("fuzz case {} escaped the bounds: {}", i, j.dump()));
    } catch (const ParseError &) {
    }
  }
  o.summary = fmt::format("corpus {}/{}; {} of {} fuzz replies accepted, all clamped", recovered, corpus.size(), accepted, kFuzzCases);
  return o;
}

Outcome determinism()
{
  Outcome o;
  const auto dir = scratch_dir("determinism");
  const auto scenarios = builtin_scenarios();
  const auto run = [&](std::shared_ptr<LlmBackend> backend) {
    const HybridPlanner base(HybridPlannerConfig{}, nullptr);
    const HybridPlanner assisted(assist_config(2), std::move(backend));
    return format_report(run_benchmark(scenarios, {{"base", plan_with(base)}, {"assist-par", plan_with(assisted)}}).rows).csv;
  };
  const std::string mock_a = run(std::make_shared<HeuristicOracleBackend>());
  const std::string mock_b = run(std::make_shared<HeuristicOracleBackend>());
  o.check(mock_a == mock_b, "mock CSV differs between runs");

  const auto transcript = dir / "transcript.jsonl";
  const std::string recorded =
    run(std::make_shared<TranscriptRecorder>(std::make_shared<HeuristicOracleBackend>(), transcript));
  const std::string replay_a = run(std::make_shared<ReplayBackend>(transcript));
  const std::string replay_b = run(std::make_shared<ReplayBackend>(transcript));
  o.check(replay_a == replay_b, "replay CSV differs between runs");
  o.check(replay_a == recorded, "replay CSV differs from the recorded run");
  std::filesystem::remove_all(dir);
  o.summary = fmt::format("mock and replay CSVs identical across runs ({} bytes)", mock_a.size());
  return o;
}

struct Criterion
{
  int id;
  const char * name;
  std::function<Outcome()> run;
};

std::set<int> parse_ids(int argc, char ** argv, const std::string & flag)
{
  std::set<int> ids;
  for (int i = 1; i + 1 < argc; ++i) {
    if (argv[i] == flag) {
      ids.insert(std::atoi(argv[i + 1]));
    }
  }
  return ids;
}
}  // namespace

int main(int argc, char ** argv)
{
  const std::set<int> only = parse_ids(argc, argv, "--only");
  const std::set<int> allowed = parse_ids(argc, argv, "--allow-fail");
  const std::vector<Criterion> criteria{
    {1, "proposal grid", proposal_grid},
    {2, "IDM properties", idm_properties},
    {3, "metric oracle equivalence", metric_oracle_equivalence},
    {4, "aggregation rules", aggregation_rules},
    {5, "emergency brake", emergency_brake_rules},
    {6, "invocation and no-regression", invocation_no_regression},
    {7, "assisted improvement", assisted_improvement},
    {8, "ROC sanity", roc_sanity},
    {9, "parser robustness", parser_robustness},
    {10, "determinism", determinism},
  };
  int unexpected = 0;
  for (const Criterion & c : criteria) {
    if (!only.empty() && !only.count(c.id)) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception & e) {
      o.check(false, fmt::format("threw: {}", e.what()));
    }
    const bool tolerated = !o.pass && allowed.count(c.id);
    fmt::print(
      "[{:>2}] {:<30} {}  ({:.2f} s) {}{}\n", c.id, c.name, o.pass ? "PASS" : "FAIL", seconds_since(start), o.summary,
      tolerated ? "  [known failure, allowed]" : "");
    for (const std::string & f : o.failures) {
      fmt::print("       - {}\n", f);
    }
    std::fflush(stdout);
    unexpected += !o.pass && !tolerated;
  }
  return unexpected == 0 ? 0 : 1;
}
