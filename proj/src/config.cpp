#include "drivesim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "drivesim/json_io.hpp"
#include "drivesim/scenarios.hpp"

namespace drivesim
{
using nlohmann::json;

namespace
{
constexpr double kMaxTemperature = 2.0;
constexpr int kMaxWorkers = 256;

void reject_unknown(const json & j, const std::set<std::string> & known, const std::string & where)
{
  if (!j.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (const auto & [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError(fmt::format("unknown key '{}{}'", where.empty() ? "" : where + ".", key));
    }
  }
}

template <typename T>
void read(const json & j, const char * key, T & target, const std::string & where)
{
  if (!j.contains(key)) {
    return;
  }
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(fmt::format("'{}{}' has the wrong type", where.empty() ? "" : where + ".", key));
  }
}

void apply_policy(InvocationPolicy & p, const json & j)
{
  reject_unknown(j, {"score_threshold", "max_queries", "allow_llm_emergency_brake", "temperature", "metric_gates"}, "policy");
  read(j, "score_threshold", p.score_threshold, "policy");
  read(j, "max_queries", p.max_queries, "policy");
  read(j, "allow_llm_emergency_brake", p.allow_llm_emergency_brake, "policy");
  read(j, "temperature", p.temperature, "policy");
  read(j, "metric_gates", p.metric_gates, "policy");
}

void apply_backend(BackendConfig & b, const json & j)
{
  reject_unknown(j, {"kind", "endpoint", "model", "api_key_env", "transcript", "timeout_ms", "max_retries"}, "backend");
  if (j.contains("kind")) {
    std::string kind;
    read(j, "kind", kind, "backend");
    b.kind = backend_kind_from_string(kind);
  }
  read(j, "endpoint", b.endpoint, "backend");
  read(j, "model", b.model, "backend");
  read(j, "api_key_env", b.api_key_env, "backend");
  if (j.contains("transcript")) {
    if (j.at("transcript").is_null()) {
      b.transcript.reset();
    } else {
      std::string path;
      read(j, "transcript", path, "backend");
      b.transcript = path;
    }
  }
  read(j, "timeout_ms", b.timeout_ms, "backend");
  read(j, "max_retries", b.max_retries, "backend");
}

std::vector<Scenario> scenarios_in_directory(const std::filesystem::path & dir)
{
  std::vector<std::filesystem::path> files;
  for (const auto & entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ConfigError("no scenario files in " + dir.string());
  }
  std::vector<Scenario> out;
  for (const auto & f : files) {
    out.push_back(load_scenario(f));
  }
  return out;
}
}  // namespace

const char * to_string(BackendKind kind)
{
  switch (kind) {
    case BackendKind::mock:
      return "mock";
    case BackendKind::live:
      return "live";
    case BackendKind::replay:
      return "replay";
  }
  return "mock";
}

BackendKind backend_kind_from_string(const std::string & name)
{
  for (BackendKind k : {BackendKind::mock, BackendKind::live, BackendKind::replay}) {
    if (name == to_string(k)) {
      return k;
    }
  }
  throw ConfigError("unknown backend '" + name + "' (expected mock, live or replay)");
}

void RunConfig::validate() const
{
  try {
    policy.validate();
    params.validate();
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
  if (policy.temperature > kMaxTemperature) {
    throw ConfigError(fmt::format("temperature must lie in [0, {}]", kMaxTemperature));
  }
  if (workers < 0 || workers > kMaxWorkers) {
    throw ConfigError(fmt::format("workers must lie in [0, {}]", kMaxWorkers));
  }
  if (backend.timeout_ms <= 0) {
    throw ConfigError("backend.timeout_ms must be positive");
  }
  if (backend.max_retries < 0 || backend.max_retries > 10) {
    throw ConfigError("backend.max_retries must lie in [0, 10]");
  }
  if (backend.kind == BackendKind::replay && !backend.transcript) {
    throw ConfigError("the replay backend needs backend.transcript");
  }
  if (scenarios.empty()) {
    throw ConfigError("scenarios must not be empty");
  }
  if (out.empty()) {
    throw ConfigError("out must not be empty");
  }
}

json config_to_json(const RunConfig & c)
{
  json policy{
    {"score_threshold", c.policy.score_threshold},
    {"max_queries", c.policy.max_queries},
    {"allow_llm_emergency_brake", c.policy.allow_llm_emergency_brake},
    {"temperature", c.policy.temperature},
    {"metric_gates", c.policy.metric_gates}};
  json backend{
    {"kind", to_string(c.backend.kind)},
    {"endpoint", c.backend.endpoint},
    {"model", c.backend.model},
    {"api_key_env", c.backend.api_key_env},
    {"transcript", c.backend.transcript ? json(c.backend.transcript->string()) : json(nullptr)},
    {"timeout_ms", c.backend.timeout_ms},
    {"max_retries", c.backend.max_retries}};
  return {
    {"planner", to_string(c.planner)},
    {"mode", to_string(c.mode)},
    {"policy", policy},
    {"params", params_to_json(c.params)},
    {"backend", backend},
    {"scenarios", c.scenarios},
    {"out", c.out.string()},
    {"seed", c.seed},
    {"workers", c.workers}};
}

void apply_config_json(RunConfig & c, const json & j)
{
  if (j.is_null()) {
    return;
  }
  reject_unknown(j, {"planner", "mode", "policy", "params", "backend", "scenarios", "out", "seed", "workers"}, "");
  try {
    if (j.contains("planner")) {
      std::string name;
      read(j, "planner", name, "");
      c.planner = planner_mode_from_string(name);
    }
    if (j.contains("mode")) {
      std::string name;
      read(j, "mode", name, "");
      c.mode = sim_mode_from_string(name);
    }
    if (j.contains("policy")) {
      apply_policy(c.policy, j.at("policy"));
    }
    if (j.contains("params")) {
      c.params = params_from_json(j.at("params"), c.params);
    }
    if (j.contains("backend")) {
      apply_backend(c.backend, j.at("backend"));
    }
    read(j, "scenarios", c.scenarios, "");
    if (j.contains("out")) {
      std::string out;
      read(j, "out", out, "");
      c.out = out;
    }
    read(j, "seed", c.seed, "");
    read(j, "workers", c.workers, "");
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
}

RunConfig load_config(const std::optional<std::filesystem::path> & file, const json & overrides)
{
  RunConfig config;
  if (file) {
    std::ifstream in(*file);
    if (!in) {
      throw ConfigError("cannot open config " + file->string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      const json j = json::parse(text, nullptr, false);
      if (j.is_discarded()) {
        throw ConfigError("config " + file->string() + " is not valid JSON");
      }
      apply_config_json(config, j);
    }
  }
  apply_config_json(config, overrides);
  config.validate();
  return config;
}

std::vector<Scenario> load_scenarios(const std::string & selection)
{
  if (selection == "builtin") {
    return builtin_scenarios();
  }
  if (selection == "adversarial") {
    return adversarial_scenarios();
  }
  for (Scenario & s : builtin_scenarios()) {
    if (s.id == selection) {
      return {std::move(s)};
    }
  }
  const std::filesystem::path path(selection);
  try {
    if (std::filesystem::is_directory(path)) {
      return scenarios_in_directory(path);
    }
    if (std::filesystem::is_regular_file(path)) {
      return {load_scenario(path)};
    }
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown scenario selection '" + selection + "'");
}

HybridPlannerConfig planner_config(const RunConfig & config)
{
  HybridPlannerConfig pc;
  pc.mode = config.planner;
  pc.base_params = config.params;
  pc.policy = config.policy;
  pc.model_name = config.backend.model;
  return pc;
}

std::shared_ptr<LlmBackend> make_backend(const RunConfig & config)
{
  if (config.planner == PlannerMode::base) {
    return nullptr;
  }
  const BackendConfig & b = config.backend;
  std::shared_ptr<LlmBackend> backend;
  switch (b.kind) {
    case BackendKind::mock: {
      OracleOptions options;
      options.base_params = config.params;
      backend = std::make_shared<HeuristicOracleBackend>(options);
      break;
    }
    case BackendKind::live: {
      LiveConfig live = LiveConfig::from_env();
      if (!b.endpoint.empty()) {
        live.endpoint = b.endpoint;
      }
      if (!b.model.empty()) {
        live.model = b.model;
      }
      if (const char * key = std::getenv(b.api_key_env.c_str())) {
        live.api_key = key;
      }
      live.timeout = std::chrono::milliseconds(b.timeout_ms);
      live.max_retries = b.max_retries;
      if (live.endpoint.empty()) {
        throw ConfigError("the live backend needs an endpoint (backend.endpoint or LLM_ENDPOINT)");
      }
      try {
        backend = std::make_shared<LiveBackend>(live);
      } catch (const std::invalid_argument & e) {
        throw ConfigError(e.what());
      }
      break;
    }
    case BackendKind::replay:
      try {
        return std::make_shared<ReplayBackend>(*b.transcript);
      } catch (const std::exception & e) {
        throw ConfigError(e.what());
      }
  }
  if (b.transcript) {
    backend = std::make_shared<TranscriptRecorder>(backend, *b.transcript);
  }
  return backend;
}

FormattedReport format_report(std::span<const BenchmarkRow> rows)
{
  const auto cells = [](const MetricReport & r) {
    const double values[] = {r.aggregate, r.collisions, r.ttc, r.drivable, r.comfort, r.progress, r.speed_limit, r.direction};
    std::vector<std::string> out;
    for (double v : values) {
      const double scaled = 100.0 * v;
      out.push_back(fmt::format("{:.2f}", std::abs(scaled) < 0.005 ? 0.0 : scaled));
    }
    return out;
  };

  FormattedReport report;
  report.csv = "planner";
  for (auto col : kReportColumns) {
    report.csv += fmt::format(",{}", col);
  }
  report.csv += '\n';
  std::vector<std::vector<std::string>> table;
  table.push_back({"Planner"});
  for (auto col : kReportColumns) {
    table.back().emplace_back(col);
  }
  for (const BenchmarkRow & row : rows) {
    const auto values = cells(row.mean);
    report.csv += row.planner;
    for (const auto & v : values) {
      report.csv += "," + v;
    }
    report.csv += '\n';
    table.push_back({row.planner});
    table.back().insert(table.back().end(), values.begin(), values.end());
  }

  std::vector<std::size_t> widths(table.front().size(), 0);
  for (const auto & line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      widths[i] = std::max(widths[i], line[i].size());
    }
  }
  for (const auto & line : table) {
    std::string text;
    for (std::size_t i = 0; i < line.size(); ++i) {
      text += i == 0 ? fmt::format("{:<{}}", line[i], widths[i]) : fmt::format("  {:>{}}", line[i], widths[i]);
    }
    report.table += text + '\n';
  }
  return report;
}

}  // namespace drivesim
