#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "drivesim/harness.hpp"
#include "drivesim/scenarios.hpp"

using namespace drivesim;

namespace
{
HybridPlanner base_planner()
{
  HybridPlannerConfig c;
  c.mode = PlannerMode::base;
  return HybridPlanner(c, nullptr);
}

/// Straight ahead at a fixed speed, blind to everything else.
PlanFunction constant_speed(double speed)
{
  return [speed](const WorldView & w, const std::string &) {
    PlanResult r;
    const Vec2 dir{std::cos(w.ego.pose.heading), std::sin(w.ego.pose.heading)};
    for (int k = 0; k <= 80; ++k) {
      const double t = k * 0.1;
      r.trajectory.samples.push_back({t, {w.ego.pose.x + dir.x * speed * t, w.ego.pose.y + dir.y * speed * t, w.ego.pose.heading}, speed});
    }
    r.predicted.aggregate = 1.0;
    return r;
  };
}

PlanFunction braking(double decel)
{
  return [decel](const WorldView & w, const std::string &) {
    PlanResult r;
    r.trajectory = emergency_brake(w.ego, decel);
    r.predicted.aggregate = 1.0;
    return r;
  };
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
  const auto dir = std::filesystem::temp_directory_path() / ("drivesim_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Free road with a vehicle approaching the ego from behind in the same lane.
Scenario follower_behind()
{
  Scenario sc = make_free_road();
  sc.id = "follower_behind";
  AgentState a;
  a.id = "follower";
  a.pose = {-25.0, 0.0, 0.0};
  a.speed = 12.0;
  a.lane_id = sc.lanes.front().id();
  sc.agents_init = {a};
  sc.duration_steps = 100;
  return sc;
}
}  // namespace

TEST(Episode, EmptyRoadScoresHigh)
{
  const HybridPlanner planner = base_planner();
  const EpisodeLog log = run_episode(make_free_road(), planner);
  EXPECT_FALSE(log.failed);
  EXPECT_EQ(static_cast<int>(log.ticks.size()), make_free_road().duration_steps);
  EXPECT_GE(log.report.aggregate, 0.9);
  EXPECT_EQ(log.report.collisions, 1.0);
}

TEST(Episode, BasePlannerYieldsToVisibleCrossing)
{
  // Crossers already moving at tick 0, so the forecast shows the conflict early.
  // The default cross_traffic start is adversarial and not covered here.
  const HybridPlanner planner = base_planner();
  for (const Scenario & sc : {make_cross_traffic(0.0), make_pedestrian_crossing(0.0)}) {
    const EpisodeLog log = run_episode(sc, planner);
    EXPECT_TRUE(log.report.collision_events.empty()) << sc.id;
    EXPECT_EQ(log.report.collisions, 1.0) << sc.id;
  }
}

TEST(Episode, BlindDrivingIntoLeaderIsAtFault)
{
  const EpisodeLog log = run_episode(make_lead_follow(), constant_speed(15.0));
  ASSERT_FALSE(log.report.collision_events.empty());
  EXPECT_TRUE(log.report.collision_events.front().at_fault);
  EXPECT_EQ(log.report.collisions, 0.0);
  EXPECT_EQ(log.report.aggregate, 0.0);
}

TEST(Episode, ExecutesFirstPlannedStep)
{
  const EpisodeLog log = run_episode(make_free_road(), constant_speed(10.0));
  for (std::size_t k = 1; k < log.ticks.size(); ++k) {
    EXPECT_NEAR(log.ticks[k].ego.pose.x - log.ticks[k - 1].ego.pose.x, 1.0, 1e-9);
    EXPECT_NEAR(log.ticks[k].time, 0.1 * static_cast<double>(k), 1e-9);
  }
}

TEST(Episode, PlannerExceptionFailsEpisode)
{
  const PlanFunction base = constant_speed(10.0);
  const PlanFunction flaky = [&](const WorldView & w, const std::string & s) {
    if (w.tick == 5) {
      throw std::runtime_error("boom");
    }
    return base(w, s);
  };
  const EpisodeLog log = run_episode(make_free_road(), flaky);
  EXPECT_TRUE(log.failed);
  EXPECT_EQ(log.ticks.size(), 6u);
  EXPECT_EQ(log.report.aggregate, 0.0);
  ASSERT_FALSE(log.report.violations.empty());
  EXPECT_EQ(log.report.violations.back().metric, "planner");
  EXPECT_NE(log.failure.find("boom"), std::string::npos);
  EXPECT_FALSE(log.ticks.back().predicted_aggregate.has_value());
}

TEST(Episode, ReplayIsDeterministic)
{
  const HybridPlanner planner = base_planner();
  const auto dir = scratch_dir("replay");
  for (SimMode mode : {SimMode::non_reactive, SimMode::reactive}) {
    for (const Scenario & sc : builtin_scenarios()) {
      EpisodeOptions o;
      o.mode = mode;
      write_episode_log(run_episode(sc, planner, o), dir / "a.jsonl");
      write_episode_log(run_episode(sc, planner, o), dir / "b.jsonl");
      EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl")) << sc.id;
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(Agents, ReplayedFollowerRunsIntoBrakingEgoButReactiveOneStops)
{
  const Scenario sc = follower_behind();
  const double decel = PlannerParams{}.decel_max;
  const EpisodeLog passive = run_episode(sc, braking(decel));
  ASSERT_FALSE(passive.report.collision_events.empty());
  EXPECT_FALSE(passive.report.collision_events.front().at_fault);

  EpisodeOptions reactive;
  reactive.mode = SimMode::reactive;
  const EpisodeLog log = run_episode(sc, braking(decel), reactive);
  EXPECT_TRUE(log.report.collision_events.empty());
  for (const TickRecord & t : log.ticks) {
    const double bumper_gap = t.ego.pose.x - t.agents[0].pose.x - 0.5 * (t.ego.length + t.agents[0].length);
    EXPECT_GT(bumper_gap, 0.0) << "tick " << t.tick;
  }
  EXPECT_LT(log.ticks.back().agents[0].speed, 0.1);
}

TEST(Agents, ReactiveVehiclesNeverRearEndTheEgoAcrossTheSuite)
{
  const HybridPlanner planner = base_planner();
  EpisodeOptions reactive;
  reactive.mode = SimMode::reactive;
  for (const Scenario & sc : builtin_scenarios()) {
    const EpisodeLog log = run_episode(sc, planner, reactive);
    for (const CollisionEvent & e : log.report.collision_events) {
      const TickRecord & t = log.ticks.at(static_cast<std::size_t>(e.tick));
      for (const AgentState & a : t.agents) {
        if (a.id != e.agent_id || a.kind != AgentKind::vehicle) {
          continue;
        }
        const Vec2 rel = a.pose.position() - t.ego.pose.position();
        const double ahead = rel.x * std::cos(t.ego.pose.heading) + rel.y * std::sin(t.ego.pose.heading);
        EXPECT_GE(ahead, 0.0) << sc.id << ": " << a.id << " hit the ego from behind at tick " << e.tick;
      }
    }
  }
}

TEST(Agents, NonReactiveFollowsConstantVelocity)
{
  const Scenario sc = follower_behind();
  AgentSimulator sim(sc, SimMode::non_reactive);
  EgoState ego = sc.ego_init;
  for (int k = 0; k < 20; ++k) {
    sim.step(k * sc.dt, ego);
  }
  EXPECT_NEAR(sim.agents()[0].pose.x, -25.0 + 12.0 * 2.0, 1e-9);
  EXPECT_EQ(sim.agents()[0].speed, 12.0);
}

TEST(Logs, RoundTrip)
{
  const HybridPlanner planner = base_planner();
  const auto dir = scratch_dir("logs");
  const EpisodeLog log = run_episode(make_cross_traffic(), planner);
  const auto path = dir / log_file_name("base", log.scenario.id);
  write_episode_log(log, path);
  const EpisodeLog back = read_episode_log(path);
  EXPECT_EQ(back.scenario.id, log.scenario.id);
  EXPECT_EQ(back.planner, log.planner);
  ASSERT_EQ(back.ticks.size(), log.ticks.size());
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    EXPECT_EQ(back.ticks[k].ego.pose, log.ticks[k].ego.pose);
    EXPECT_EQ(back.ticks[k].predicted_aggregate, log.ticks[k].predicted_aggregate);
    EXPECT_EQ(back.ticks[k].provenance, log.ticks[k].provenance);
  }
  EXPECT_EQ(back.report.aggregate, log.report.aggregate);
  // Re-scoring the parsed log reproduces the recorded report.
  EXPECT_EQ(score_episode(back).aggregate, log.report.aggregate);
  write_episode_log(back, dir / "copy.jsonl");
  EXPECT_EQ(slurp(path), slurp(dir / "copy.jsonl"));
  EXPECT_EQ(read_episode_logs(dir).size(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(Benchmark, WorkerCountDoesNotChangeResults)
{
  const HybridPlanner planner = base_planner();
  const std::vector<PlannerEntry> planners{{"base", plan_with(planner)}, {"blind", constant_speed(12.0)}};
  BenchmarkOptions one;
  one.workers = 1;
  BenchmarkOptions many;
  many.workers = 4;
  const auto a = run_benchmark(builtin_scenarios(), planners, one);
  const auto b = run_benchmark(builtin_scenarios(), planners, many);
  ASSERT_EQ(a.rows.size(), 2u);
  ASSERT_EQ(a.logs.size(), b.logs.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].planner, b.rows[i].planner);
    EXPECT_EQ(a.rows[i].mean.aggregate, b.rows[i].mean.aggregate);
    EXPECT_EQ(a.rows[i].episodes, static_cast<int>(builtin_scenarios().size()));
  }
  for (std::size_t i = 1; i < a.logs.size(); ++i) {
    if (a.logs[i].planner == a.logs[i - 1].planner) {
      EXPECT_LT(a.logs[i - 1].scenario.id, a.logs[i].scenario.id);
    }
  }
}

TEST(Benchmark, MeanReport)
{
  MetricReport x;
  x.aggregate = 0.2;
  x.ttc = 0.0;
  MetricReport y;
  y.aggregate = 0.6;
  y.making_progress = false;
  const auto m = mean_report({x, y});
  EXPECT_DOUBLE_EQ(m.aggregate, 0.4);
  EXPECT_DOUBLE_EQ(m.ttc, 0.5);
  EXPECT_FALSE(m.making_progress);
}
