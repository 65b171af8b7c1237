#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "drivesim/idm_planner.hpp"
#include "drivesim/llm_response.hpp"
#include "drivesim/metrics.hpp"
#include "drivesim/types.hpp"

namespace drivesim
{

class BackendError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class ResponseFormat { parameters, waypoints };

struct ChatRequest
{
  std::string system_prompt;
  std::string user_prompt;
  double temperature{1.4};
  int max_tokens{512};
  std::string model_name;
  /// Routing information for scripted backends; not part of the request hash.
  std::string session_id;
  int attempt{1};
  ResponseFormat format{ResponseFormat::parameters};
  /// In-process view of the scene for backends that plan themselves. Never serialized.
  const WorldView * world{nullptr};

  void validate() const;
};

/// FNV-1a over the wire-visible fields (prompts, temperature, token budget, model).
std::uint64_t request_hash(const ChatRequest & request);

class LlmBackend
{
public:
  virtual ~LlmBackend() = default;
  /// Returns the model text or throws BackendError. Must be safe to call concurrently.
  virtual std::string complete(const ChatRequest & request) = 0;
  virtual std::string name() const = 0;
};

/// Scripted backend. Replies come from the per-session script in order, then
/// from exact request-hash matches, then from the rule. Replying with
/// `kFailure` simulates a transport failure.
class MockBackend : public LlmBackend
{
public:
  static constexpr std::string_view kFailure = "<backend-failure>";
  using Rule = std::function<std::string(const ChatRequest &)>;

  void set_script(const std::string & session_id, std::vector<std::string> replies);
  void set_reply_for_hash(std::uint64_t hash, std::string reply);
  void set_rule(Rule rule);

  std::string complete(const ChatRequest & request) override;
  std::string name() const override { return "mock"; }
  std::size_t calls() const;
  std::size_t calls(const std::string & session_id) const;

private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> scripts_;
  std::map<std::string, std::size_t> cursor_;
  std::map<std::uint64_t, std::string> by_hash_;
  Rule rule_;
  std::size_t calls_{0};
};

struct OracleOptions
{
  PlannerParams base_params;
  MetricConfig metrics;
  RolloutOptions rollout;
  std::vector<double> offsets{-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0};
  std::vector<double> fractions{0.2, 0.4, 0.6, 0.8, 1.0};
};

struct OracleResult
{
  LlmParamResponse response;
  /// Best cell's predicted aggregate, and that of the default parameters.
  double predicted_aggregate{0.0};
  double default_aggregate{0.0};
  /// Best cell's trajectory, for waypoint replies.
  Trajectory trajectory;
};

/// Scripted "ideal assistant": grid-searches a parameter lattice with the
/// internal simulator and returns the best cell. The lattice grows with
/// `attempt` and always contains the default grid. Defaults are returned when
/// the best cell is the nominal one (offset 0, full speed, default
/// car-following) and does not strictly improve on them.
OracleResult heuristic_oracle(const WorldView & world, const OracleOptions & options = {}, int attempt = 1);

/// Backend that answers from `heuristic_oracle` on the request's world view.
class HeuristicOracleBackend : public LlmBackend
{
public:
  explicit HeuristicOracleBackend(OracleOptions options = {}) : options_(std::move(options)) {}
  std::string complete(const ChatRequest & request) override;
  std::string name() const override { return "heuristic-oracle"; }

private:
  OracleOptions options_;
};

struct LiveConfig
{
  std::string endpoint;
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int max_retries{2};
  std::chrono::milliseconds backoff{500};

  /// Reads LLM_ENDPOINT, LLM_API_KEY and LLM_MODEL.
  static LiveConfig from_env();
};

/// Chat-completion client over HTTP(S). Transient failures (transport
/// errors, 429, 5xx) are retried with exponential backoff.
class LiveBackend : public LlmBackend
{
public:
  explicit LiveBackend(LiveConfig config);
  std::string complete(const ChatRequest & request) override;
  std::string name() const override { return "live"; }

  /// Request body in the chat-completion wire format.
  static std::string request_body(const ChatRequest & request, const std::string & model);
  /// Extracts choices[0].message.content; throws BackendError on a malformed body.
  static std::string response_text(const std::string & body);

private:
  LiveConfig config_;
};

/// Decorator appending one JSONL record per call:
/// {request, response, latency_ms, timestamp}; failures carry `error` instead of `response`.
class TranscriptRecorder : public LlmBackend
{
public:
  TranscriptRecorder(std::shared_ptr<LlmBackend> inner, const std::filesystem::path & path);
  std::string complete(const ChatRequest & request) override;
  std::string name() const override { return inner_->name(); }

private:
  std::shared_ptr<LlmBackend> inner_;
  std::mutex mutex_;
  std::ofstream out_;
};

/// Serves recorded responses keyed by request hash; repeated requests cycle
/// through their recorded responses in file order.
class ReplayBackend : public LlmBackend
{
public:
  explicit ReplayBackend(const std::filesystem::path & transcript);
  std::string complete(const ChatRequest & request) override;
  std::string name() const override { return "replay"; }
  std::size_t size() const { return responses_.size(); }

private:
  std::mutex mutex_;
  std::map<std::uint64_t, std::vector<std::string>> responses_;
  std::map<std::uint64_t, std::size_t> cursor_;
};

}  // namespace drivesim
