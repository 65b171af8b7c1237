#include "drivesim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "drivesim/road_map.hpp"

namespace drivesim
{
namespace
{
constexpr double kPathExtension = 2000.0;
constexpr double kLeaderRange = 100.0;
constexpr double kLateralClearance = 0.3;
constexpr double kStopTarget = 0.1;

Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Lane centerline followed by the first-successor chain, extended straight.
Polyline lane_chain(const Scenario & scenario, const Lane & first)
{
  std::set<const Lane *> visited;
  std::vector<Vec2> pts;
  for (const Lane * lane = &first; lane != nullptr && !visited.count(lane);) {
    visited.insert(lane);
    for (const Vec2 & p : lane->centerline().points()) {
      if (pts.empty() || distance(pts.back(), p) > 1e-6) {
        pts.push_back(p);
      }
    }
    lane = lane->successors().empty() ? nullptr : scenario.find_lane(lane->successors().front());
  }
  const Vec2 a = pts[pts.size() - 2];
  const Vec2 b = pts.back();
  pts.push_back(b + (kPathExtension / distance(a, b)) * (b - a));
  return Polyline(std::move(pts));
}
}  // namespace

const char * to_string(SimMode mode)
{
  return mode == SimMode::reactive ? "reactive" : "non-reactive";
}

SimMode sim_mode_from_string(const std::string & name)
{
  if (name == "reactive") {
    return SimMode::reactive;
  }
  if (name == "non-reactive" || name == "non_reactive") {
    return SimMode::non_reactive;
  }
  throw std::invalid_argument("unknown simulation mode '" + name + "'");
}

std::optional<double> EpisodeLog::min_predicted_aggregate() const
{
  std::optional<double> best;
  for (const TickRecord & t : ticks) {
    if (t.predicted_aggregate && (!best || *t.predicted_aggregate < *best)) {
      best = t.predicted_aggregate;
    }
  }
  return best;
}

Trajectory EpisodeLog::ego_trajectory() const
{
  Trajectory traj;
  traj.dt = scenario.dt;
  for (const TickRecord & t : ticks) {
    traj.samples.push_back({t.time, t.ego.pose, t.ego.velocity});
  }
  return traj;
}

AgentFrames EpisodeLog::agent_frames() const
{
  AgentFrames frames;
  frames.reserve(ticks.size());
  for (const TickRecord & t : ticks) {
    frames.push_back(t.agents);
  }
  return frames;
}

PlanFunction plan_with(const HybridPlanner & planner)
{
  return [&planner](const WorldView & world, const std::string & session) { return planner.plan_step(world, session); };
}

AgentSimulator::AgentSimulator(const Scenario & scenario, SimMode mode, PlannerParams idm_params)
: scenario_(&scenario), mode_(mode), idm_params_(std::move(idm_params)), agents_(scenario.agents_init)
{
  for (const AgentState & a : agents_) {
    Track track;
    const Lane * lane = a.lane_id ? scenario.find_lane(*a.lane_id) : nullptr;
    if (lane != nullptr) {
      track.path = lane_chain(scenario, *lane);
      track.start_arc = track.path.project(a.pose.position()).arc_length;
    } else {
      const Vec2 dir = heading_vector(a.pose.heading);
      track.path = Polyline({a.pose.position() - dir, a.pose.position() + kPathExtension * dir});
      track.start_arc = 1.0;
    }
    track.arc = track.start_arc;
    track.speed = a.speed;
    track.script = scenario.find_script(a.id);
    track.reactive = mode == SimMode::reactive && lane != nullptr && a.kind == AgentKind::vehicle;
    tracks_.push_back(std::move(track));
  }
}

double AgentSimulator::lead_gap(std::size_t index, const EgoState & ego, double & leader_speed) const
{
  const Track & me = tracks_[index];
  const AgentState & self = agents_[index];
  double best = std::numeric_limits<double>::infinity();
  const auto consider = [&](Vec2 position, double heading, double speed, double length, double width) {
    if (distance(position, self.pose.position()) > kLeaderRange) {
      return;
    }
    const auto proj = me.path.project_within(position, me.arc - 5.0, me.arc + kLeaderRange);
    if (proj.arc_length <= me.arc || std::abs(proj.lateral_offset) > 0.5 * (self.width + width) + kLateralClearance) {
      return;
    }
    const double gap = proj.arc_length - me.arc - 0.5 * (self.length + length);
    if (gap < best) {
      best = gap;
      leader_speed = speed * std::cos(normalize_angle(heading - proj.heading));
    }
  };
  consider(ego.pose.position(), ego.pose.heading, ego.velocity, ego.length, ego.width);
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    if (j != index) {
      const AgentState & o = agents_[j];
      consider(o.pose.position(), o.pose.heading, o.speed, o.length, o.width);
    }
  }
  return best;
}

void AgentSimulator::step(double time, const EgoState & ego)
{
  const double dt = scenario_->dt;
  const double next = time + dt;
  // Decide every reactive acceleration from the current snapshot before moving anyone.
  std::vector<double> accel(agents_.size(), 0.0);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Track & t = tracks_[i];
    if (!t.reactive) {
      continue;
    }
    const double target = t.script != nullptr ? t.script->speed_at(time) : scenario_->agents_init[i].speed;
    if (target < kStopTarget) {
      accel[i] = t.speed > 0.0 ? -idm_params_.decel_max : 0.0;
      continue;
    }
    double leader_speed = 0.0;
    const double gap = lead_gap(i, ego, leader_speed);
    const std::optional<double> gap_opt = std::isfinite(gap) ? std::optional(gap) : std::nullopt;
    accel[i] = idm_acceleration(t.speed, target, gap_opt, t.speed - leader_speed, idm_params_);
  }

  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Track & t = tracks_[i];
    AgentState & a = agents_[i];
    if (t.reactive) {
      const double v_next = std::max(0.0, t.speed + accel[i] * dt);
      t.arc += 0.5 * (t.speed + v_next) * dt;
      t.speed = v_next;
    } else if (t.script != nullptr) {
      t.arc = t.start_arc + t.script->distance_at(next);
      t.speed = t.script->speed_at(next);
    } else {
      t.arc = t.start_arc + a.speed * next;
    }
    if (t.arc != t.start_arc || t.reactive) {
      const Pose2D pose = t.path.pose_at(t.arc);
      a.pose = pose;
    }
    a.speed = t.speed;
  }
}

EpisodeLog run_episode(const Scenario & scenario, const PlanFunction & plan, const EpisodeOptions & options)
{
  scenario.validate();
  EpisodeLog log;
  log.scenario = scenario;
  log.planner = options.planner_name;
  log.mode = options.mode;

  const RoadMap road(log.scenario);
  AgentSimulator agents(log.scenario, options.mode, options.agent_params);
  EgoState ego = scenario.ego_init;
  ego.timestamp = 0.0;
  const std::string session = fmt::format("{}/{}", scenario.id, to_string(options.mode));

  for (int k = 0; k < scenario.duration_steps; ++k) {
    const double time = k * scenario.dt;
    TickRecord rec;
    rec.tick = k;
    rec.time = time;
    rec.ego = ego;
    rec.agents = agents.agents();

    WorldView world{&log.scenario, &road, k, time, ego, rec.agents};
    Trajectory selected;
    try {
      PlanResult result = plan(world, session);
      if (result.trajectory.samples.size() < 2) {
        throw std::runtime_error("planner returned a trajectory with fewer than two samples");
      }
      rec.provenance = result.provenance;
      rec.predicted_aggregate = result.predicted.aggregate;
      rec.base_aggregate = result.base_aggregate;
      rec.queries = result.queries;
      rec.degraded = result.degraded;
      rec.emergency = result.emergency;
      rec.rationale = std::move(result.rationale);
      rec.notes = std::move(result.notes);
      selected = std::move(result.trajectory);
    } catch (const std::exception & e) {
      log.failed = true;
      log.failure = fmt::format("tick {}: {}", k, e.what());
      log.ticks.push_back(std::move(rec));
      break;
    }
    log.ticks.push_back(std::move(rec));

    // Perfect tracking of the first planned step.
    const TrajectorySample & next = selected.samples[1];
    EgoState moved = ego;
    moved.pose = next.pose;
    moved.velocity = next.velocity;
    moved.acceleration = (next.velocity - ego.velocity) / scenario.dt;
    moved.timestamp = time + scenario.dt;
    agents.step(time, ego);
    ego = moved;
  }

  if (log.ticks.size() >= 2) {
    log.report = score_episode(log, options.metrics);
  } else {
    log.report = MetricReport{};
  }
  if (log.failed) {
    log.report.aggregate = 0.0;
    log.report.violations.push_back({"planner", static_cast<int>(log.ticks.size()) - 1, log.failure});
  }
  return log;
}

EpisodeLog run_episode(const Scenario & scenario, const HybridPlanner & planner, const EpisodeOptions & options)
{
  return run_episode(scenario, plan_with(planner), options);
}

MetricReport score_episode(const EpisodeLog & log, const MetricConfig & config)
{
  const RoadMap road(log.scenario);
  const Trajectory traj = log.ego_trajectory();
  const AgentFrames frames = log.agent_frames();
  return evaluate(EpisodeView{traj, log.scenario.ego_init.dims(), frames, road, log.scenario.expert_progress}, config);
}

MetricReport mean_report(const std::vector<MetricReport> & reports)
{
  MetricReport mean;
  if (reports.empty()) {
    return mean;
  }
  const double n = static_cast<double>(reports.size());
  const auto avg = [&](double MetricReport::*field) {
    double sum = 0.0;
    for (const MetricReport & r : reports) {
      sum += r.*field;
    }
    return sum / n;
  };
  mean.aggregate = avg(&MetricReport::aggregate);
  mean.collisions = avg(&MetricReport::collisions);
  mean.ttc = avg(&MetricReport::ttc);
  mean.drivable = avg(&MetricReport::drivable);
  mean.comfort = avg(&MetricReport::comfort);
  mean.progress = avg(&MetricReport::progress);
  mean.speed_limit = avg(&MetricReport::speed_limit);
  mean.direction = avg(&MetricReport::direction);
  mean.making_progress =
    std::all_of(reports.begin(), reports.end(), [](const MetricReport & r) { return r.making_progress; });
  return mean;
}

BenchmarkResult run_benchmark(
  const std::vector<Scenario> & scenarios, const std::vector<PlannerEntry> & planners,
  const BenchmarkOptions & options)
{
  std::vector<std::size_t> order(scenarios.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scenarios[a].id < scenarios[b].id;
  });

  const std::size_t jobs = planners.size() * scenarios.size();
  std::vector<EpisodeLog> logs(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const PlannerEntry & entry = planners[job / scenarios.size()];
      const Scenario & scenario = scenarios[order[job % scenarios.size()]];
      EpisodeOptions episode;
      episode.mode = options.mode;
      episode.planner_name = entry.name;
      episode.metrics = options.metrics;
      try {
        logs[job] = run_episode(scenario, entry.plan, episode);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };

  unsigned count = options.workers > 0 ? static_cast<unsigned>(options.workers) : std::thread::hardware_concurrency();
  count = std::clamp<unsigned>(count, 1, static_cast<unsigned>(std::max<std::size_t>(jobs, 1)));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < count; ++i) {
    pool.emplace_back(worker);
  }
  for (std::thread & t : pool) {
    t.join();
  }
  for (const auto & e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  BenchmarkResult result;
  for (std::size_t p = 0; p < planners.size(); ++p) {
    BenchmarkRow row;
    row.planner = planners[p].name;
    std::vector<MetricReport> reports;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const EpisodeLog & log = logs[p * scenarios.size() + s];
      reports.push_back(log.report);
      row.failed += log.failed ? 1 : 0;
    }
    row.episodes = static_cast<int>(reports.size());
    row.mean = mean_report(reports);
    result.rows.push_back(std::move(row));
  }
  if (options.log_dir) {
    std::filesystem::create_directories(*options.log_dir);
    for (const EpisodeLog & log : logs) {
      write_episode_log(log, *options.log_dir / log_file_name(log.planner, log.scenario.id));
    }
  }
  result.logs = std::move(logs);
  return result;
}

}  // namespace drivesim
