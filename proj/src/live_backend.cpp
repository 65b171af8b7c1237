#include <cstdlib>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "drivesim/llm_backend.hpp"

namespace drivesim
{
namespace
{
using nlohmann::json;

std::string env_or(const char * name, std::string fallback)
{
  const char * v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

struct Endpoint
{
  std::string origin;
  std::string path;
};

Endpoint split_endpoint(const std::string & url)
{
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw BackendError("endpoint must include a scheme: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    return {url, "/v1/chat/completions"};
  }
  return {url.substr(0, slash), url.substr(slash)};
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }
}  // namespace

LiveConfig LiveConfig::from_env()
{
  LiveConfig c;
  c.endpoint = env_or("LLM_ENDPOINT", "https://api.openai.com/v1/chat/completions");
  c.api_key = env_or("LLM_API_KEY", "");
  c.model = env_or("LLM_MODEL", "gpt-4");
  return c;
}

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config))
{
  if (config_.endpoint.empty()) {
    throw std::invalid_argument("live backend needs an endpoint");
  }
  if (config_.max_retries < 0) {
    throw std::invalid_argument("live backend retries must be non-negative");
  }
}

std::string LiveBackend::request_body(const ChatRequest & request, const std::string & model)
{
  const json body{
    {"model", request.model_name.empty() ? model : request.model_name},
    {"messages",
     json::array(
       {{{"role", "system"}, {"content", request.system_prompt}},
        {{"role", "user"}, {"content", request.user_prompt}}})},
    {"temperature", request.temperature},
    {"max_tokens", request.max_tokens}};
  return body.dump();
}

std::string LiveBackend::response_text(const std::string & body)
{
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    throw BackendError("response body is not JSON");
  }
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception & e) {
    throw BackendError(std::string("unexpected response shape: ") + e.what());
  }
}

std::string LiveBackend::complete(const ChatRequest & request)
{
  request.validate();
  const Endpoint ep = split_endpoint(config_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (ep.origin.rfind("https://", 0) == 0) {
    throw BackendError("built without TLS support; cannot reach " + ep.origin);
  }
#endif
  const std::string body = request_body(request, config_.model);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    }
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    const auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      return response_text(res->body);
    }
    last_error = fmt::format("HTTP {}", res->status);
    if (!transient_status(res->status)) {
      break;
    }
  }
  throw BackendError("chat completion failed: " + last_error);
}

}  // namespace drivesim
