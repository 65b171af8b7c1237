#include <CLI11.hpp>
#include <cstdio>
#include <fmt/format.h>
#include <fstream>
#include <iostream>

#include "drivesim/config.hpp"
#include "drivesim/harness.hpp"
#include "drivesim/json_io.hpp"
#include "drivesim/roc.hpp"
#include "drivesim/scenarios.hpp"

namespace
{
using namespace drivesim;
using nlohmann::json;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunFlags
{
  std::string config_file;
  std::string scenarios;
  std::string planner;
  std::string mode;
  std::optional<int> queries;
  std::optional<double> threshold;
  std::optional<double> temperature;
  std::string backend;
  std::string transcript;
  std::string model;
  std::string endpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool print_config{false};

  json overrides() const
  {
    json j = json::object();
    if (!scenarios.empty()) j["scenarios"] = scenarios;
    if (!planner.empty()) j["planner"] = planner;
    if (!mode.empty()) j["mode"] = mode;
    if (queries) j["policy"]["max_queries"] = *queries;
    if (threshold) j["policy"]["score_threshold"] = *threshold;
    if (temperature) j["policy"]["temperature"] = *temperature;
    if (!backend.empty()) j["backend"]["kind"] = backend;
    if (!transcript.empty()) j["backend"]["transcript"] = transcript;
    if (!model.empty()) j["backend"]["model"] = model;
    if (!endpoint.empty()) j["backend"]["endpoint"] = endpoint;
    if (!out.empty()) j["out"] = out;
    if (seed) j["seed"] = *seed;
    if (workers) j["workers"] = *workers;
    return j;
  }
};

void write_text(const std::filesystem::path & path, const std::string & text)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

int cmd_run(const RunFlags & flags)
{
  RunConfig config;
  std::vector<Scenario> scenarios;
  std::shared_ptr<LlmBackend> backend;
  try {
    config = load_config(
      flags.config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(flags.config_file),
      flags.overrides());
    if (flags.print_config) {
      std::cout << config_to_json(config).dump(2) << '\n';
      return 0;
    }
    scenarios = load_scenarios(config.scenarios);
    backend = make_backend(config);
  } catch (const std::invalid_argument & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const HybridPlanner planner(planner_config(config), backend);
  BenchmarkOptions options;
  options.mode = config.mode;
  options.workers = config.workers;
  options.log_dir = config.out / "logs";
  std::filesystem::create_directories(config.out);
  write_text(config.out / "config.json", config_to_json(config).dump(2) + "\n");

  const BenchmarkResult result =
    run_benchmark(scenarios, {{to_string(config.planner), plan_with(planner)}}, options);
  const FormattedReport report = format_report(result.rows);
  write_text(config.out / "summary.csv", report.csv);
  write_text(config.out / "summary.txt", report.table);
  std::cout << report.table;
  for (const EpisodeLog & log : result.logs) {
    if (log.failed) {
      std::cerr << "episode " << log.scenario.id << " failed: " << log.failure << '\n';
    }
  }
  return 0;
}

int cmd_roc(const std::string & logs_dir, double gt_threshold, const std::string & out)
{
  std::vector<EpisodeLog> logs;
  try {
    logs = read_episode_logs(logs_dir);
  } catch (const std::invalid_argument & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const RocResult roc = roc_analysis(logs, gt_threshold);
  const std::string text = roc_to_json(roc).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
    std::cout << fmt::format("AUC {:.4f} over {} episodes\n", roc.auc, roc.samples.size());
  }
  return 0;
}

int cmd_score(const std::string & path)
{
  EpisodeLog log;
  try {
    log = read_episode_log(path);
  } catch (const std::invalid_argument & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  BenchmarkRow row;
  row.planner = log.planner;
  row.mean = score_episode(log);
  row.episodes = 1;
  json j = row.mean;
  j["scenario"] = log.scenario.id;
  std::cout << j.dump(2) << '\n' << format_report(std::span(&row, 1)).table;
  return 0;
}

int cmd_scenarios(const std::string & export_dir)
{
  const auto all = builtin_scenarios();
  if (!export_dir.empty()) {
    std::filesystem::create_directories(export_dir);
  }
  for (const Scenario & s : all) {
    std::cout << fmt::format("{:<22}{}\n", s.id, s.description);
    if (!export_dir.empty()) {
      save_scenario(s, std::filesystem::path(export_dir) / (s.id + ".json"));
    }
  }
  return 0;
}
}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Closed-loop benchmark for a rule-based driving planner with optional language-model assistance"};
  app.require_subcommand(1);

  RunFlags run;
  auto * run_cmd = app.add_subcommand("run", "Run a benchmark and write CSV, table and JSONL logs");
  run_cmd->add_option("--config", run.config_file, "JSON config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--scenarios", run.scenarios, "builtin, adversarial, a scenario id, file or directory");
  run_cmd->add_option("--planner", run.planner, "base, assist-par, assist-unc or llm-only");
  run_cmd->add_option("--mode", run.mode, "non-reactive or reactive");
  run_cmd->add_option("--queries", run.queries, "Query budget per tick");
  run_cmd->add_option("--threshold", run.threshold, "Predicted score below which the model is consulted");
  run_cmd->add_option("--temperature", run.temperature, "Sampling temperature");
  run_cmd->add_option("--backend", run.backend, "mock, live or replay");
  run_cmd->add_option("--transcript", run.transcript, "Replay source or recording target");
  run_cmd->add_option("--model", run.model, "Model name for the live backend");
  run_cmd->add_option("--endpoint", run.endpoint, "Chat-completion URL for the live backend");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--seed", run.seed, "Run seed (recorded in config.json)");
  run_cmd->add_option("--workers", run.workers, "Worker threads (0 = all cores)");
  run_cmd->add_flag("--print-config", run.print_config, "Print the merged config and exit");

  std::string logs_dir;
  double gt_threshold = 0.5;
  std::string roc_out;
  auto * roc_cmd = app.add_subcommand("roc", "ROC of minimum predicted scores against episode scores");
  roc_cmd->add_option("--logs", logs_dir, "Directory of JSONL logs")->required();
  roc_cmd->add_option("--gt-threshold", gt_threshold, "Episodes scoring below this are positives")
    ->check(CLI::Range(0.0, 1.0));
  roc_cmd->add_option("--out", roc_out, "Write ROC JSON here instead of stdout");

  std::string log_file;
  auto * score_cmd = app.add_subcommand("score", "Re-score a JSONL episode log");
  score_cmd->add_option("--log", log_file, "Episode log")->required();

  std::string export_dir;
  auto * list_cmd = app.add_subcommand("scenarios", "List the built-in scenarios");
  list_cmd->add_option("--export", export_dir, "Write each scenario as JSON into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) {
      return cmd_run(run);
    }
    if (roc_cmd->parsed()) {
      return cmd_roc(logs_dir, gt_threshold, roc_out);
    }
    if (score_cmd->parsed()) {
      return cmd_score(log_file);
    }
    return cmd_scenarios(export_dir);
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
