#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "drivesim/harness.hpp"
#include "drivesim/json_io.hpp"

namespace drivesim
{
using nlohmann::json;

std::string log_file_name(const std::string & planner, const std::string & scenario_id)
{
  return planner + "__" + scenario_id + ".jsonl";
}

void write_episode_log(const EpisodeLog & log, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write log " + path.string());
  }
  const json header{
    {"type", "header"},
    {"scenario", scenario_to_json(log.scenario)},
    {"planner", log.planner},
    {"mode", to_string(log.mode)}};
  out << header.dump() << '\n';
  for (const TickRecord & t : log.ticks) {
    const json line{
      {"type", "tick"},
      {"tick", t.tick},
      {"time", t.time},
      {"provenance", to_string(t.provenance)},
      {"predicted", t.predicted_aggregate ? json(*t.predicted_aggregate) : json(nullptr)},
      {"base_aggregate", t.base_aggregate},
      {"queries", t.queries},
      {"degraded", t.degraded},
      {"emergency", t.emergency},
      {"rationale", t.rationale},
      {"notes", t.notes},
      {"ego", t.ego},
      {"agents", t.agents}};
    out << line.dump() << '\n';
  }
  const json report{{"type", "report"}, {"report", log.report}, {"failed", log.failed}, {"failure", log.failure}};
  out << report.dump() << '\n';
}

EpisodeLog read_episode_log(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open log " + path.string());
  }
  EpisodeLog log;
  bool have_header = false;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) {
      continue;
    }
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": malformed log line");
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        log.scenario = scenario_from_json(j.at("scenario"));
        log.planner = j.at("planner").get<std::string>();
        log.mode = sim_mode_from_string(j.at("mode").get<std::string>());
        have_header = true;
      } else if (type == "tick") {
        TickRecord t;
        t.tick = j.at("tick").get<int>();
        t.time = j.at("time").get<double>();
        t.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        if (!j.at("predicted").is_null()) {
          t.predicted_aggregate = j.at("predicted").get<double>();
        }
        t.base_aggregate = j.at("base_aggregate").get<double>();
        t.queries = j.at("queries").get<int>();
        t.degraded = j.at("degraded").get<bool>();
        t.emergency = j.at("emergency").get<bool>();
        t.rationale = j.at("rationale").get<std::string>();
        t.notes = j.at("notes").get<std::vector<std::string>>();
        t.ego = j.at("ego").get<EgoState>();
        t.agents = j.at("agents").get<std::vector<AgentState>>();
        log.ticks.push_back(std::move(t));
      } else if (type == "report") {
        log.report = j.at("report").get<MetricReport>();
        log.failed = j.at("failed").get<bool>();
        log.failure = j.at("failure").get<std::string>();
      } else {
        throw std::invalid_argument("unknown line type '" + type + "'");
      }
    } catch (const json::exception & e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument & e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) {
    throw std::invalid_argument(path.string() + ": missing header line");
  }
  return log;
}

std::vector<EpisodeLog> read_episode_logs(const std::filesystem::path & dir)
{
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto & entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<EpisodeLog> logs;
  for (const auto & f : files) {
    logs.push_back(read_episode_log(f));
  }
  return logs;
}

}  // namespace drivesim
