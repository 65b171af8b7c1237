#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drivesim/llm_assist.hpp"
#include "drivesim/metrics.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

enum class SimMode { non_reactive, reactive };
const char * to_string(SimMode mode);
/// Accepts "non-reactive" and "reactive".
SimMode sim_mode_from_string(const std::string & name);

struct TickRecord
{
  int tick{0};
  double time{0.0};
  EgoState ego;
  std::vector<AgentState> agents;
  Provenance provenance{Provenance::base};
  /// Predicted aggregate of the selected candidate; absent when planning failed.
  std::optional<double> predicted_aggregate;
  double base_aggregate{0.0};
  int queries{0};
  bool degraded{false};
  bool emergency{false};
  std::string rationale;
  std::vector<std::string> notes;
};

struct EpisodeLog
{
  Scenario scenario;
  std::string planner;
  SimMode mode{SimMode::non_reactive};
  std::vector<TickRecord> ticks;
  MetricReport report;
  bool failed{false};
  std::string failure;

  /// Minimum per-tick predicted aggregate; absent if no tick was planned.
  std::optional<double> min_predicted_aggregate() const;
  Trajectory ego_trajectory() const;
  AgentFrames agent_frames() const;
};

/// One planning call. Implementations may throw; the episode is then marked failed.
using PlanFunction = std::function<PlanResult(const WorldView & world, const std::string & session_id)>;

PlanFunction plan_with(const HybridPlanner & planner);

struct EpisodeOptions
{
  SimMode mode{SimMode::non_reactive};
  std::string planner_name{"base"};
  MetricConfig metrics;
  /// Parameters of the reactive background vehicles.
  PlannerParams agent_params;
};

/// Closed loop: plan, execute the first step of the selected trajectory,
/// advance the background agents, repeat; then score the driven episode.
EpisodeLog run_episode(const Scenario & scenario, const PlanFunction & plan, const EpisodeOptions & options = {});
EpisodeLog run_episode(const Scenario & scenario, const HybridPlanner & planner, const EpisodeOptions & options = {});

/// Re-evaluates the logged ego motion and agent states.
MetricReport score_episode(const EpisodeLog & log, const MetricConfig & config = {});

/// Background-agent motion model, exposed for tests.
class AgentSimulator
{
public:
  AgentSimulator(const Scenario & scenario, SimMode mode, PlannerParams idm_params = {});
  const std::vector<AgentState> & agents() const { return agents_; }
  /// Advances every agent from `time` to `time + dt` given the ego state at `time`.
  void step(double time, const EgoState & ego);

private:
  struct Track
  {
    Polyline path;
    double start_arc{0.0};
    double arc{0.0};
    double speed{0.0};
    const AgentScript * script{nullptr};
    bool reactive{false};
  };
  double lead_gap(std::size_t index, const EgoState & ego, double & leader_speed) const;

  const Scenario * scenario_;
  SimMode mode_;
  PlannerParams idm_params_;
  std::vector<AgentState> agents_;
  std::vector<Track> tracks_;
};

struct PlannerEntry
{
  std::string name;
  PlanFunction plan;
};

struct BenchmarkOptions
{
  SimMode mode{SimMode::non_reactive};
  /// Zero picks the hardware concurrency.
  int workers{0};
  MetricConfig metrics;
  /// JSONL logs are written here when set, one file per planner and scenario.
  std::optional<std::filesystem::path> log_dir;
};

struct BenchmarkRow
{
  std::string planner;
  /// Per-metric means over the episodes (aggregate included).
  MetricReport mean;
  int episodes{0};
  int failed{0};
};

struct BenchmarkResult
{
  std::vector<BenchmarkRow> rows;
  /// Ordered by planner entry, then scenario id.
  std::vector<EpisodeLog> logs;
};

BenchmarkResult run_benchmark(
  const std::vector<Scenario> & scenarios, const std::vector<PlannerEntry> & planners,
  const BenchmarkOptions & options = {});

/// Mean of each metric over the reports; making_progress is true iff it holds for all.
MetricReport mean_report(const std::vector<MetricReport> & reports);

/// JSONL: a header line with the full scenario, one line per tick, a report line.
void write_episode_log(const EpisodeLog & log, const std::filesystem::path & path);
EpisodeLog read_episode_log(const std::filesystem::path & path);
/// Every *.jsonl log in `dir`, sorted by file name.
std::vector<EpisodeLog> read_episode_logs(const std::filesystem::path & dir);
std::string log_file_name(const std::string & planner, const std::string & scenario_id);

}  // namespace drivesim
