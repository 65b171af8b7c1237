#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "drivesim/forecast.hpp"
#include "drivesim/idm_planner.hpp"
#include "drivesim/internal_sim.hpp"
#include "drivesim/road_map.hpp"
#include "drivesim/scenarios.hpp"

using namespace drivesim;

namespace
{
/// Closed-form car-following acceleration without clamping, written from the model equation.
double reference_idm(double v, double v0, double gap, double closing, const PlannerParams & p)
{
  const double desired = p.min_gap_to_lead_agent +
                         std::max(0.0, v * p.headway_time + v * closing / (2.0 * std::sqrt(p.accel_max * p.decel_max)));
  return p.accel_max * (1.0 - std::pow(v / v0, p.idm_exponent) - std::pow(desired / gap, 2.0));
}

PlannerParams random_params(std::mt19937_64 & rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlannerParams p;
  p.min_gap_to_lead_agent = 0.5 + 4.5 * u(rng);
  p.headway_time = 0.5 + 2.5 * u(rng);
  p.accel_max = 0.5 + 2.5 * u(rng);
  p.decel_max = 1.5 + 4.5 * u(rng);
  p.fallback_target_velocity = 5.0 + 20.0 * u(rng);
  return p;
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
}  // namespace

TEST(Idm, FreeRoadFromRest)
{
  const PlannerParams p;
  EXPECT_DOUBLE_EQ(idm_acceleration(0.0, 15.0, std::nullopt, 0.0, p), p.accel_max);
}

TEST(Idm, AtTargetWithoutLeader)
{
  EXPECT_NEAR(idm_acceleration(15.0, 15.0, std::nullopt, 0.0, {}), 0.0, 1e-15);
}

TEST(Idm, NonPositiveGapBrakesFully)
{
  const PlannerParams p;
  EXPECT_EQ(idm_acceleration(10.0, 15.0, 0.0, 0.0, p), -p.decel_max);
  EXPECT_EQ(idm_acceleration(10.0, 15.0, -3.0, 2.0, p), -p.decel_max);
}

TEST(Idm, MatchesModelEquationAndClamps)
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const PlannerParams p = random_params(rng);
    const double v = 25.0 * u(rng);
    const double v0 = 1.0 + 25.0 * u(rng);
    const double gap = 0.2 + 80.0 * u(rng);
    const double closing = -10.0 + 20.0 * u(rng);
    const double expected = std::clamp(reference_idm(v, v0, gap, closing, p), -p.decel_max, p.accel_max);
    EXPECT_NEAR(idm_acceleration(v, v0, gap, closing, p), expected, 1e-9);
  }
}

TEST(Idm, EquilibriumGapByBisection)
{
  const PlannerParams p;
  const double v = 10.0;
  const double v0 = 15.0;
  // Acceleration grows with the gap, so bisect for its zero.
  double lo = p.min_gap_to_lead_agent;
  double hi = 1000.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (idm_acceleration(v, v0, mid, 0.0, p) < 0.0 ? lo : hi) = mid;
  }
  const double equilibrium = 0.5 * (lo + hi);
  EXPECT_LT(std::abs(idm_acceleration(v, v0, equilibrium, 0.0, p)), 1e-9);
  const double closed_form = idm_desired_gap(v, 0.0, p) / std::sqrt(1.0 - std::pow(v / v0, p.idm_exponent));
  EXPECT_NEAR(equilibrium, closed_form, 1e-9);
}

TEST(Idm, ConvergesToTargetOnFreeRoad)
{
  const PlannerParams p;
  double v = 0.0;
  double t = 0.0;
  while (std::abs(v - 15.0) > 0.1 && t < 60.0) {
    v += idm_acceleration(v, 15.0, std::nullopt, 0.0, p) * 0.1;
    t += 0.1;
  }
  EXPECT_LE(t, 30.0);
}

namespace
{
/// Minimum bumper gap over 60 s behind a leader at constant speed (ballistic 0.1 s steps).
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
}  // namespace

TEST(Idm, FollowingNeverViolatesMinimumGap)
{
  // Moving leaders only: behind a nearly stopped leader the model can dip
  // below the minimum gap (see the test below).
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 100; ++draw) {
    const PlannerParams p = random_params(rng);
    const double v0 = p.fallback_target_velocity;
    const double leader_speed = 2.0 + (v0 - 2.0) * u(rng);
    double speed = 0.0;
    double gap = 0.0;
    if (draw % 2 == 0) {
      // Perturbed steady following: leader speed, up to twice the equilibrium gap.
      const double equilibrium = idm_desired_gap(leader_speed, 0.0, p) / std::sqrt(1.0 - std::pow(leader_speed / v0, p.idm_exponent));
      speed = leader_speed;
      gap = equilibrium * (1.0 + u(rng));
    } else {
      // Start-up from a queue behind a leader that pulls away.
      gap = p.min_gap_to_lead_agent * (1.0 + u(rng));
    }
    EXPECT_GE(min_following_gap(p, leader_speed, speed, gap), p.min_gap_to_lead_agent) << "draw " << draw;
  }
}

TEST(Idm, ApproachToNearlyStoppedLeaderCanUndershoot)
{
  PlannerParams p;
  p.min_gap_to_lead_agent = 4.885;
  p.headway_time = 0.68;
  p.accel_max = 2.61;
  p.decel_max = 4.77;
  p.fallback_target_velocity = 24.59;
  const double min_gap = min_following_gap(p, 0.5, 0.26, 64.42);
  EXPECT_LT(min_gap, p.min_gap_to_lead_agent);
  EXPECT_GT(min_gap, 0.0);
}

TEST(Params, Validation)
{
  EXPECT_NO_THROW(PlannerParams{}.validate());
  const auto broken = [](auto mutate) {
    PlannerParams p;
    mutate(p);
    return p;
  };
  EXPECT_THROW(broken([](PlannerParams & p) { p.lateral_offsets = {3.5}; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](PlannerParams & p) { p.lateral_offsets.clear(); }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](PlannerParams & p) { p.speed_limit_fractions = {0.0}; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](PlannerParams & p) { p.speed_limit_fractions = {1.2}; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](PlannerParams & p) { p.accel_max = -1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](PlannerParams & p) { p.decel_max = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](PlannerParams & p) { p.headway_time = 0.0; }).validate(), std::invalid_argument);
  EXPECT_NO_THROW(broken([](PlannerParams & p) { p.lateral_offsets = {-3.0, 3.0}; }).validate());
}

TEST(Proposals, DefaultGridHasFifteen)
{
  World w(make_free_road());
  const auto forecast = forecast_constant_velocity(w.view.agents, w.view.ego.pose.position(), 8.0, 0.1);
  EXPECT_EQ(generate_proposals(w.view, {}, forecast).size(), 15u);
  EXPECT_EQ(PlannerParams{}.proposal_count(), 15u);
}

TEST(Proposals, SingleCell)
{
  World w(make_free_road());
  PlannerParams p;
  p.lateral_offsets = {0.0};
  p.speed_limit_fractions = {1.0};
  const auto forecast = forecast_constant_velocity({}, w.view.ego.pose.position(), 8.0, 0.1);
  EXPECT_EQ(generate_proposals(w.view, p, forecast).size(), 1u);
}

TEST(Proposals, EnlargedSweepCounts)
{
  EXPECT_EQ(ProposalGrid::enlarged(7).size(), 8505u);
  EXPECT_EQ(ProposalGrid::enlarged(6).size(), 7290u);
  EXPECT_EQ(ProposalGrid::enlarged(7).cells().size(), 8505u);
  EXPECT_EQ(ProposalGrid::from_params({}).size(), 15u);
  EXPECT_THROW(ProposalGrid::enlarged(0), std::invalid_argument);
}

TEST(Proposals, RolloutInvariants)
{
  for (const Scenario & sc : builtin_scenarios()) {
    World w(sc);
    const auto forecast = forecast_constant_velocity(w.view.agents, w.view.ego.pose.position(), 8.0, 0.1);
    for (const Proposal & prop : generate_proposals(w.view, {}, forecast)) {
      const auto & s = prop.trajectory.samples;
      ASSERT_FALSE(s.empty());
      EXPECT_NEAR(prop.trajectory.horizon(), 8.0, 1e-9) << sc.id;
      EXPECT_NEAR(s.front().pose.x, w.view.ego.pose.x, 1e-9);
      EXPECT_NEAR(s.front().pose.y, w.view.ego.pose.y, 1e-9);
      EXPECT_NEAR(s.front().velocity, w.view.ego.velocity, 1e-9);
      for (std::size_t k = 1; k < s.size(); ++k) {
        EXPECT_NEAR(s[k].t - s[k - 1].t, 0.1, 1e-9);
        EXPECT_GE(s[k].velocity, 0.0);
      }
    }
  }
}

TEST(Proposals, OffMapEgoGetsSingleStop)
{
  Scenario sc = make_free_road();
  sc.drivable_polygon = {{-100, -100}, {600, -100}, {600, 100}, {-100, 100}};
  sc.ego_init.pose = {50, 40, 0};
  World w(sc);
  const auto forecast = forecast_constant_velocity({}, w.view.ego.pose.position(), 8.0, 0.1);
  const auto props = generate_proposals(w.view, {}, forecast);
  ASSERT_EQ(props.size(), 1u);
  EXPECT_TRUE(props[0].is_emergency_stop);
  EXPECT_EQ(props[0].trajectory.samples.back().velocity, 0.0);
}

TEST(EmergencyBrake, Stationary)
{
  EgoState ego;
  const auto t = emergency_brake(ego, 3.0);
  for (const auto & s : t.samples) {
    EXPECT_EQ(s.pose.x, 0.0);
    EXPECT_EQ(s.velocity, 0.0);
  }
}

TEST(EmergencyBrake, StoppingDistances)
{
  for (const auto [v, secs, dist] : {std::tuple{6.0, 2.0, 6.0}, {12.0, 4.0, 24.0}}) {
    EgoState ego;
    ego.velocity = v;
    const auto t = emergency_brake(ego, 3.0);
    const auto stop = std::find_if(t.samples.begin(), t.samples.end(), [](const auto & s) { return s.velocity == 0.0; });
    ASSERT_NE(stop, t.samples.end());
    EXPECT_NEAR(stop->t, secs, 1e-9);
    EXPECT_NEAR(t.samples.back().pose.x, dist, 1e-9);
  }
}
