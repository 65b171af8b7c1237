#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drivesim/harness.hpp"
#include "drivesim/idm_planner.hpp"
#include "drivesim/llm_assist.hpp"
#include "drivesim/llm_backend.hpp"

namespace drivesim
{

/// Invalid configuration; reported at startup, never mid-run.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

enum class BackendKind { mock, live, replay };
const char * to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string & name);

struct BackendConfig
{
  BackendKind kind{BackendKind::mock};
  /// Live only; empty values fall back to LLM_ENDPOINT / LLM_MODEL.
  std::string endpoint;
  std::string model;
  /// Name of the environment variable holding the API key (the key itself is never stored).
  std::string api_key_env{"LLM_API_KEY"};
  /// Replay source, or the recording target for a live backend.
  std::optional<std::filesystem::path> transcript;
  int timeout_ms{30000};
  int max_retries{2};

  friend bool operator==(const BackendConfig &, const BackendConfig &) = default;
};

struct RunConfig
{
  PlannerMode planner{PlannerMode::base};
  SimMode mode{SimMode::non_reactive};
  InvocationPolicy policy;
  PlannerParams params;
  BackendConfig backend;
  /// "builtin", "adversarial", a scenario JSON file or a directory of them.
  std::string scenarios{"builtin"};
  std::filesystem::path out{"out"};
  /// Recorded in the run manifest; the mock and replay backends are deterministic regardless.
  std::uint64_t seed{0};
  /// Zero picks the hardware concurrency.
  int workers{0};

  /// Throws ConfigError.
  void validate() const;
  friend bool operator==(const RunConfig &, const RunConfig &) = default;
};

nlohmann::json config_to_json(const RunConfig & config);
/// Overwrites the fields present in `j`; unknown keys and bad values throw ConfigError.
void apply_config_json(RunConfig & config, const nlohmann::json & j);
/// Defaults, then the file (if any), then `overrides`; validated.
RunConfig load_config(const std::optional<std::filesystem::path> & file, const nlohmann::json & overrides = {});

/// Resolves `RunConfig::scenarios`. Throws ConfigError on an unknown selection.
std::vector<Scenario> load_scenarios(const std::string & selection);

HybridPlannerConfig planner_config(const RunConfig & config);
/// Null for the base planner.
std::shared_ptr<LlmBackend> make_backend(const RunConfig & config);

struct FormattedReport
{
  std::string csv;
  std::string table;
};

inline constexpr std::array<std::string_view, 8> kReportColumns{
  "Score", "Collisions", "TTC", "Drivable", "Comfort", "Progress", "Speed Limit", "Direction"};

/// One row per planner, metric means scaled by 100 with two decimals.
FormattedReport format_report(std::span<const BenchmarkRow> rows);

}  // namespace drivesim
