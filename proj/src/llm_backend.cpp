#include "drivesim/llm_backend.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fmt/format.h>
#include <json.hpp>

#include "drivesim/internal_sim.hpp"

namespace drivesim
{
namespace
{
using nlohmann::json;

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t & h, std::string_view bytes)
{
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  h ^= 0x1f;
  h *= kFnvPrime;
}

std::string utc_timestamp()
{
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const char * to_string(ResponseFormat f) { return f == ResponseFormat::waypoints ? "waypoints" : "parameters"; }

json request_json(const ChatRequest & r)
{
  return {
    {"system_prompt", r.system_prompt},
    {"user_prompt", r.user_prompt},
    {"temperature", r.temperature},
    {"max_tokens", r.max_tokens},
    {"model", r.model_name},
    {"session_id", r.session_id},
    {"attempt", r.attempt},
    {"format", to_string(r.format)},
    {"hash", fmt::format("{:016x}", request_hash(r))}};
}

std::vector<double> merged(std::vector<double> a, const std::vector<double> & b)
{
  for (double v : b) {
    if (std::find(a.begin(), a.end(), v) == a.end()) {
      a.push_back(v);
    }
  }
  return a;
}

std::string describe_choice(const Proposal & p, double score, double baseline, bool is_default)
{
  if (is_default) {
    return fmt::format("The default proposal grid already scores {:.2f}, so no change is needed.", baseline);
  }
  const double offset = p.source_offset;
  const std::string lateral = offset == 0.0 ? std::string("keep to the lane centre")
                                            : fmt::format("shift {:.1f} m to the {}", std::abs(offset), offset > 0 ? "left" : "right");
  if (score > baseline) {
    return fmt::format(
      "I {} at {:.1f} m/s because it raises the predicted score from {:.2f} to {:.2f}.", lateral,
      p.source_target_speed, baseline, score);
  }
  return fmt::format("I {} at {:.1f} m/s; this keeps the predicted score at {:.2f}.", lateral, p.source_target_speed, score);
}
}  // namespace

void ChatRequest::validate() const
{
  if (system_prompt.empty() || user_prompt.empty()) {
    throw std::invalid_argument("chat request prompts must not be empty");
  }
  if (!(temperature >= 0.0)) {
    throw std::invalid_argument("chat request temperature must be non-negative");
  }
}

std::uint64_t request_hash(const ChatRequest & r)
{
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, r.system_prompt);
  fnv_mix(h, r.user_prompt);
  fnv_mix(h, fmt::format("{:.6g}", r.temperature));
  fnv_mix(h, std::to_string(r.max_tokens));
  fnv_mix(h, r.model_name);
  return h;
}

// --- mock -------------------------------------------------------------------

void MockBackend::set_script(const std::string & session_id, std::vector<std::string> replies)
{
  std::lock_guard lock(mutex_);
  scripts_[session_id] = std::move(replies);
  cursor_[session_id] = 0;
}

void MockBackend::set_reply_for_hash(std::uint64_t hash, std::string reply)
{
  std::lock_guard lock(mutex_);
  by_hash_[hash] = std::move(reply);
}

void MockBackend::set_rule(Rule rule)
{
  std::lock_guard lock(mutex_);
  rule_ = std::move(rule);
}

std::string MockBackend::complete(const ChatRequest & request)
{
  request.validate();
  std::string reply;
  Rule rule;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    ++cursor_[request.session_id + "\x1f#calls"];
    const auto script = scripts_.find(request.session_id);
    std::size_t & cursor = cursor_[request.session_id];
    if (script != scripts_.end() && cursor < script->second.size()) {
      reply = script->second[cursor++];
    } else if (const auto hit = by_hash_.find(request_hash(request)); hit != by_hash_.end()) {
      reply = hit->second;
    } else if (rule_) {
      rule = rule_;
    } else {
      throw BackendError("mock backend has no reply for session " + request.session_id);
    }
  }
  if (rule) {
    reply = rule(request);
  }
  if (reply == kFailure) {
    throw BackendError("mock backend simulated failure");
  }
  return reply;
}

std::size_t MockBackend::calls() const
{
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t MockBackend::calls(const std::string & session_id) const
{
  std::lock_guard lock(mutex_);
  const auto it = cursor_.find(session_id + "\x1f#calls");
  return it == cursor_.end() ? 0 : it->second;
}

// --- heuristic oracle -------------------------------------------------------

OracleResult heuristic_oracle(const WorldView & world, const OracleOptions & options, int attempt)
{
  const PlannerParams & base = options.base_params;
  InternalSimulator sim(world, base, options.metrics, options.rollout);
  auto defaults = sim.propose(base);
  const Selection default_best = select_best(defaults);

  OracleResult result;
  result.default_aggregate = default_best.aggregate;
  result.predicted_aggregate = default_best.aggregate;
  result.response.params = base;
  result.trajectory = defaults[default_best.index].trajectory;
  const Proposal * chosen = &defaults[default_best.index];

  std::vector<Proposal> lattice;
  if (!sim.generator().off_map()) {
    ProposalGrid grid;
    grid.lateral_offsets = merged(options.offsets, base.lateral_offsets);
    grid.speed_limit_fractions = merged(options.fractions, base.speed_limit_fractions);
    grid.fallback_target_velocities = {base.fallback_target_velocity};
    grid.min_gaps = {base.min_gap_to_lead_agent};
    grid.headway_times = {base.headway_time};
    grid.accel_maxes = {base.accel_max};
    grid.decel_maxes = {base.decel_max};
    grid.idm_exponent = base.idm_exponent;
    // Later attempts widen the search to the car-following parameters.
    if (attempt >= 2) {
      grid.decel_maxes = merged(grid.decel_maxes, {5.0});
      grid.min_gaps = merged(grid.min_gaps, {2.5});
    }
    if (attempt >= 3) {
      grid.headway_times = merged(grid.headway_times, {1.0});
      grid.accel_maxes = merged(grid.accel_maxes, {2.5});
    }
    lattice = sim.propose(grid);
    const Selection best = select_best(lattice);
    // A cell that only ties the defaults is still worth reporting unless it is
    // the nominal one (centred, full speed, default car-following).
    const PlannerParams & cell = lattice[best.index].params;
    const bool nominal = cell.lateral_offsets == std::vector<double>{0.0} && cell.speed_limit_fractions ==
                         std::vector<double>{1.0} && cell.min_gap_to_lead_agent == base.min_gap_to_lead_agent &&
                         cell.headway_time == base.headway_time && cell.accel_max == base.accel_max &&
                         cell.decel_max == base.decel_max;
    if (best.aggregate > default_best.aggregate || (best.aggregate == default_best.aggregate && !nominal)) {
      chosen = &lattice[best.index];
      result.predicted_aggregate = best.aggregate;
      result.response.params = chosen->params;
      result.trajectory = chosen->trajectory;
    }
  }
  result.response.rationale =
    describe_choice(*chosen, result.predicted_aggregate, result.default_aggregate, chosen == &defaults[default_best.index]);
  result.response.invoke_emergency_brake = sim.emergency(*chosen);
  if (*result.response.invoke_emergency_brake) {
    result.response.rationale += " A collision is imminent, so I request the emergency brake.";
  }
  return result;
}

std::string HeuristicOracleBackend::complete(const ChatRequest & request)
{
  request.validate();
  if (request.world == nullptr || request.world->road == nullptr) {
    throw BackendError("heuristic oracle needs the in-process world view");
  }
  const OracleResult result = heuristic_oracle(*request.world, options_, request.attempt);
  if (request.format == ResponseFormat::parameters) {
    return format_param_response(result.response);
  }
  LlmTrajectoryResponse reply;
  const Trajectory & traj = result.trajectory;
  const auto stride = static_cast<std::size_t>(std::lround(2.0 / traj.dt));
  for (std::size_t i = 0; i < reply.waypoints.size(); ++i) {
    const std::size_t k = std::min((i + 1) * stride, traj.samples.size() - 1);
    reply.waypoints[i] = traj.samples[k].pose.position();
  }
  reply.invoke_emergency_brake = result.response.invoke_emergency_brake;
  reply.rationale = result.response.rationale;
  return format_trajectory_response(reply);
}

// --- transcripts ------------------------------------------------------------

TranscriptRecorder::TranscriptRecorder(std::shared_ptr<LlmBackend> inner, const std::filesystem::path & path)
: inner_(std::move(inner))
{
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::app);
  if (!out_) {
    throw std::runtime_error("cannot open transcript " + path.string());
  }
}

std::string TranscriptRecorder::complete(const ChatRequest & request)
{
  const auto start = std::chrono::steady_clock::now();
  json record{{"request", request_json(request)}};
  std::string reply;
  std::optional<BackendError> failure;
  try {
    reply = inner_->complete(request);
    record["response"] = reply;
  } catch (const BackendError & e) {
    failure = e;
    record["error"] = e.what();
  }
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
  record["latency_ms"] = std::round(elapsed.count() * 1000.0) / 1000.0;
  record["timestamp"] = utc_timestamp();
  {
    std::lock_guard lock(mutex_);
    out_ << record.dump() << '\n';
    out_.flush();
  }
  if (failure) {
    throw *failure;
  }
  return reply;
}

ReplayBackend::ReplayBackend(const std::filesystem::path & transcript)
{
  std::ifstream in(transcript);
  if (!in) {
    throw std::runtime_error("cannot open transcript " + transcript.string());
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("request")) {
      throw std::runtime_error(fmt::format("{}:{}: malformed transcript record", transcript.string(), line_no));
    }
    const json & r = record["request"];
    ChatRequest req;
    req.system_prompt = r.value("system_prompt", "");
    req.user_prompt = r.value("user_prompt", "");
    req.temperature = r.value("temperature", 0.0);
    req.max_tokens = r.value("max_tokens", 0);
    req.model_name = r.value("model", "");
    const std::string text =
      record.contains("response") ? record["response"].get<std::string>() : std::string(MockBackend::kFailure);
    responses_[request_hash(req)].push_back(text);
  }
}

std::string ReplayBackend::complete(const ChatRequest & request)
{
  std::lock_guard lock(mutex_);
  const std::uint64_t h = request_hash(request);
  const auto it = responses_.find(h);
  if (it == responses_.end()) {
    throw BackendError(fmt::format("no recorded response for request {:016x}", h));
  }
  std::size_t & cursor = cursor_[h];
  const std::string & text = it->second[cursor % it->second.size()];
  ++cursor;
  if (text == MockBackend::kFailure) {
    throw BackendError("recorded backend failure");
  }
  return text;
}

}  // namespace drivesim
