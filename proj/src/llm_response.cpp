#include "drivesim/llm_response.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <regex>

#include "drivesim/metrics.hpp"

namespace drivesim
{
namespace
{
using nlohmann::json;

// Spans of balanced {...} outside string literals, outermost first.
std::vector<std::string> brace_spans(std::string_view text)
{
  std::vector<std::string> spans;
  int depth = 0;
  std::size_t start = 0;
  bool in_string = false;
  char quote = '"';
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        in_string = false;
      }
      continue;
    }
    if ((c == '"' || c == '\'') && depth > 0) {
      in_string = true;
      quote = c;
    } else if (c == '{') {
      if (depth++ == 0) {
        start = i;
      }
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) {
        spans.emplace_back(text.substr(start, i - start + 1));
      }
    }
  }
  return spans;
}

std::vector<std::string> fenced_blocks(std::string_view text)
{
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    std::size_t body = text.find('\n', pos + 3);
    if (body == std::string_view::npos) {
      break;
    }
    const std::size_t end = text.find("```", body);
    if (end == std::string_view::npos) {
      blocks.emplace_back(text.substr(body + 1));
      break;
    }
    blocks.emplace_back(text.substr(body + 1, end - body - 1));
    pos = end + 3;
  }
  return blocks;
}

// True when the last significant character opens an object or separates members.
bool expects_key(const std::string & out)
{
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    if (!std::isspace(static_cast<unsigned char>(*it))) {
      return *it == '{' || *it == ',';
    }
  }
  return false;
}

// Rewrites common near-JSON into JSON: comments, trailing commas, Python
// literals, single-quoted strings and bare keys.
std::string repair_json(const std::string & in)
{
  std::string out;
  out.reserve(in.size());
  bool in_string = false;
  char quote = '"';
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (in_string) {
      if (c == '\\' && i + 1 < in.size()) {
        out += c;
        out += in[++i];
        continue;
      }
      if (c == quote) {
        in_string = false;
        out += '"';
        continue;
      }
      if (c == '"' && quote == '\'') {
        out += "\\\"";
      } else {
        out += c;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      in_string = true;
      quote = c;
      out += '"';
    } else if ((std::isalpha(static_cast<unsigned char>(c)) || c == '_') && expects_key(out)) {
      // Bare object key, as in a JavaScript literal.
      std::size_t end = i;
      while (end < in.size() && (std::isalnum(static_cast<unsigned char>(in[end])) || in[end] == '_' || in[end] == '-')) {
        ++end;
      }
      std::size_t colon = end;
      while (colon < in.size() && std::isspace(static_cast<unsigned char>(in[colon]))) ++colon;
      if (colon < in.size() && in[colon] == ':') {
        out += '"' + in.substr(i, end - i) + '"';
        i = end - 1;
      } else {
        out += c;
      }
    } else if (c == '/' && i + 1 < in.size() && in[i + 1] == '/') {
      while (i < in.size() && in[i] != '\n') ++i;
    } else if (c == '#') {
      while (i < in.size() && in[i] != '\n') ++i;
    } else {
      out += c;
    }
  }
  static const std::regex trailing_comma(R"(,\s*([}\]]))");
  static const std::regex py_true(R"(\bTrue\b)");
  static const std::regex py_false(R"(\bFalse\b)");
  static const std::regex py_none(R"(\bNone\b)");
  out = std::regex_replace(out, trailing_comma, "$1");
  out = std::regex_replace(out, py_true, "true");
  out = std::regex_replace(out, py_false, "false");
  out = std::regex_replace(out, py_none, "null");
  return out;
}

std::optional<json> parse_lenient(const std::string & candidate)
{
  json j = json::parse(candidate, nullptr, false);
  if (j.is_discarded()) {
    j = json::parse(repair_json(candidate), nullptr, false);
  }
  if (j.is_discarded()) {
    return std::nullopt;
  }
  return j;
}

std::vector<json> json_documents(std::string_view text)
{
  std::vector<std::string> candidates;
  for (const std::string & block : fenced_blocks(text)) {
    for (std::string & span : brace_spans(block)) {
      candidates.push_back(std::move(span));
    }
  }
  for (std::string & span : brace_spans(text)) {
    candidates.push_back(std::move(span));
  }
  std::vector<json> docs;
  for (const std::string & c : candidates) {
    if (auto j = parse_lenient(c)) {
      docs.push_back(std::move(*j));
    }
  }
  return docs;
}

std::string normalized_key(const std::string & key)
{
  std::string k;
  for (char c : key) {
    k += c == '-' || c == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (k == "speed_limit_fractions") return "speed_limit_fraction";
  if (k == "lateral_offset") return "lateral_offsets";
  return k;
}

int param_field_count(const json & obj)
{
  int count = 0;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key = normalized_key(it.key());
    count += std::find(kParamFieldNames.begin(), kParamFieldNames.end(), key) != kParamFieldNames.end();
  }
  return count;
}

// Depth-first search for the object carrying the most parameter fields.
void best_param_object(const json & j, const json *& best, int & best_count)
{
  if (j.is_object()) {
    const int count = param_field_count(j);
    if (count > best_count) {
      best = &j;
      best_count = count;
    }
    for (const auto & [key, value] : j.items()) {
      best_param_object(value, best, best_count);
    }
  } else if (j.is_array()) {
    for (const auto & value : j) {
      best_param_object(value, best, best_count);
    }
  }
}

double as_number(const json & v, const std::string & field)
{
  if (v.is_number()) {
    return v.get<double>();
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    try {
      const double d = std::stod(s, &used);
      if (used == s.size() && std::isfinite(d)) {
        return d;
      }
    } catch (const std::exception &) {
    }
  }
  if (v.is_array() && v.size() == 1) {
    return as_number(v.front(), field);
  }
  throw ParseError(fmt::format("field {} is not numeric", field));
}

std::vector<double> as_list(const json & v, const std::string & field)
{
  std::vector<double> out;
  if (v.is_array()) {
    for (const json & e : v) {
      out.push_back(as_number(e, field));
    }
  } else {
    out.push_back(as_number(v, field));
  }
  if (out.empty()) {
    throw ParseError(fmt::format("field {} is an empty list", field));
  }
  return out;
}

double clamp_with_warning(double value, double lo, double hi, const std::string & field, std::vector<std::string> & warnings)
{
  const double clamped = std::clamp(value, lo, hi);
  if (clamped != value) {
    warnings.push_back(fmt::format("{} {} clamped to {}", field, value, clamped));
  }
  return clamped;
}

std::optional<bool> as_flag(const json & v)
{
  if (v.is_boolean()) {
    return v.get<bool>();
  }
  if (v.is_number()) {
    return v.get<double>() != 0.0;
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
  }
  return std::nullopt;
}

const json * find_key(const json & obj, std::initializer_list<std::string_view> names)
{
  if (!obj.is_object()) {
    return nullptr;
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key = normalized_key(it.key());
    for (std::string_view n : names) {
      if (key == n) {
        return &it.value();
      }
    }
  }
  return nullptr;
}

std::string rationale_from(const json & obj)
{
  if (const json * r = find_key(obj, {"rationale", "explanation", "reason", "reasoning"})) {
    if (r->is_string()) {
      return r->get<std::string>();
    }
  }
  return {};
}

constexpr std::size_t kMaxListLength = 9;

void dedupe_and_cap(std::vector<double> & list, const std::string & field, std::vector<std::string> & warnings)
{
  std::vector<double> unique;
  for (double v : list) {
    if (std::find(unique.begin(), unique.end(), v) == unique.end()) {
      unique.push_back(v);
    }
  }
  if (unique.size() > kMaxListLength) {
    warnings.push_back(fmt::format("{} truncated to {} entries", field, kMaxListLength));
    unique.resize(kMaxListLength);
  }
  list = std::move(unique);
}
}  // namespace

LlmParamResponse parse_param_response(std::string_view text, const PlannerParams & base, const ParamBounds & b)
{
  const auto docs = json_documents(text);
  if (docs.empty()) {
    throw ParseError("no JSON object found in reply");
  }
  const json * obj = nullptr;
  const json * root = nullptr;
  int best = 0;
  for (const json & doc : docs) {
    const json * candidate = nullptr;
    int count = 0;
    best_param_object(doc, candidate, count);
    if (count > best) {
      best = count;
      obj = candidate;
      root = &doc;
    }
  }
  if (obj == nullptr) {
    throw ParseError("reply contains no planner parameters");
  }
  for (std::string_view name : kParamFieldNames) {
    if (find_key(*obj, {name}) == nullptr) {
      throw ParseError(fmt::format("missing required field {}", name));
    }
  }

  LlmParamResponse out;
  auto & w = out.warnings;
  PlannerParams & p = out.params;
  p.idm_exponent = base.idm_exponent;
  p.lateral_offsets = as_list(*find_key(*obj, {"lateral_offsets"}), "lateral_offsets");
  for (double & o : p.lateral_offsets) {
    o = clamp_with_warning(o, -b.max_abs_offset, b.max_abs_offset, "lateral_offsets", w);
  }
  dedupe_and_cap(p.lateral_offsets, "lateral_offsets", w);
  p.speed_limit_fractions = as_list(*find_key(*obj, {"speed_limit_fraction"}), "speed_limit_fraction");
  for (double & f : p.speed_limit_fractions) {
    f = clamp_with_warning(f, b.min_fraction, b.max_fraction, "speed_limit_fraction", w);
  }
  dedupe_and_cap(p.speed_limit_fractions, "speed_limit_fraction", w);
  const auto scalar = [&](std::string_view name, double lo, double hi) {
    const std::string field(name);
    return clamp_with_warning(as_number(*find_key(*obj, {name}), field), lo, hi, field, w);
  };
  p.fallback_target_velocity = scalar("fallback_target_velocity", b.min_fallback, b.max_fallback);
  p.min_gap_to_lead_agent = scalar("min_gap_to_lead_agent", b.min_gap_lo, b.min_gap_hi);
  p.headway_time = scalar("headway_time", b.headway_lo, b.headway_hi);
  p.accel_max = scalar("accel_max", b.accel_lo, b.accel_hi);
  p.decel_max = scalar("decel_max", b.decel_lo, b.decel_hi);

  for (const json * scope : {obj, root}) {
    if (const json * flag = find_key(*scope, {"invoke_emergency_brake", "emergency_brake"})) {
      out.invoke_emergency_brake = as_flag(*flag);
      break;
    }
  }
  out.rationale = rationale_from(*obj);
  if (out.rationale.empty()) {
    out.rationale = rationale_from(*root);
  }
  return out;
}

namespace
{
std::optional<Vec2> as_point(const json & e)
{
  try {
    if (e.is_array() && e.size() == 2) {
      return Vec2{as_number(e[0], "waypoint"), as_number(e[1], "waypoint")};
    }
    if (e.is_object()) {
      const json * x = find_key(e, {"x"});
      const json * y = find_key(e, {"y"});
      if (x && y) {
        return Vec2{as_number(*x, "x"), as_number(*y, "y")};
      }
    }
  } catch (const ParseError &) {
  }
  return std::nullopt;
}

const json * find_waypoints(const json & j)
{
  if (j.is_object()) {
    if (const json * w = find_key(j, {"waypoints", "trajectory"})) {
      if (w->is_array()) {
        return w;
      }
    }
    for (const auto & [key, value] : j.items()) {
      if (const json * w = find_waypoints(value)) {
        return w;
      }
    }
  }
  return nullptr;
}
}  // namespace

LlmTrajectoryResponse parse_trajectory_response(std::string_view text)
{
  LlmTrajectoryResponse out;
  std::vector<Vec2> points;
  for (const json & doc : json_documents(text)) {
    const json * list = find_waypoints(doc);
    if (list == nullptr) {
      continue;
    }
    for (const json & e : *list) {
      const auto p = as_point(e);
      if (!p) {
        throw ParseError("waypoint is not a numeric (x, y) pair");
      }
      points.push_back(*p);
    }
    out.rationale = rationale_from(doc);
    if (const json * flag = find_key(doc, {"invoke_emergency_brake", "emergency_brake"})) {
      out.invoke_emergency_brake = as_flag(*flag);
    }
    break;
  }
  if (points.empty()) {
    static const std::regex pair(
      R"(\(\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*,\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*\))");
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pair); it != std::sregex_iterator(); ++it) {
      points.push_back({std::stod((*it)[1].str()), std::stod((*it)[2].str())});
    }
    static const std::regex why(R"((?:^|\n)\s*(?:Rationale|Explanation)\s*:\s*([^\n]*))", std::regex::icase);
    std::smatch m;
    if (std::regex_search(s, m, why)) {
      out.rationale = m[1].str();
    }
  }
  if (points.size() != out.waypoints.size()) {
    throw ParseError(fmt::format("expected 4 waypoints, found {}", points.size()));
  }
  for (const Vec2 & p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ParseError("waypoint coordinates must be finite");
    }
  }
  std::copy(points.begin(), points.end(), out.waypoints.begin());
  return out;
}

MonotoneCubic::MonotoneCubic(std::vector<double> knots, std::vector<double> values)
: t_(std::move(knots)), y_(std::move(values))
{
  const std::size_t n = t_.size();
  if (n < 2 || y_.size() != n) {
    throw std::invalid_argument("monotone cubic needs at least two knots and matching values");
  }
  std::vector<double> h(n - 1);
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = t_[i + 1] - t_[i];
    if (!(h[i] > 0.0)) {
      throw std::invalid_argument("monotone cubic knots must increase strictly");
    }
    delta[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  slope_.assign(n, 0.0);
  if (n == 2) {
    slope_[0] = slope_[1] = delta[0];
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] > 0.0) {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      slope_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  const auto end_slope = [](double h0, double h1, double d0, double d1) {
    double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m * d0 <= 0.0) {
      m = 0.0;
    } else if (d0 * d1 < 0.0 && std::abs(m) > 3.0 * std::abs(d0)) {
      m = 3.0 * d0;
    }
    return m;
  };
  slope_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  slope_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

std::size_t MonotoneCubic::interval(double t) const
{
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - t_.begin()) - 1));
  return std::min(i, t_.size() - 2);
}

double MonotoneCubic::value(double t) const
{
  const std::size_t i = interval(t);
  const double h = t_[i + 1] - t_[i];
  const double u = (t - t_[i]) / h;
  const double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
  const double h10 = u * (1.0 - u) * (1.0 - u);
  const double h01 = u * u * (3.0 - 2.0 * u);
  const double h11 = u * u * (u - 1.0);
  return h00 * y_[i] + h10 * h * slope_[i] + h01 * y_[i + 1] + h11 * h * slope_[i + 1];
}

double MonotoneCubic::derivative(double t) const
{
  const std::size_t i = interval(t);
  const double h = t_[i + 1] - t_[i];
  const double u = (t - t_[i]) / h;
  const double d00 = 6.0 * u * u - 6.0 * u;
  const double d10 = 3.0 * u * u - 4.0 * u + 1.0;
  const double d01 = -d00;
  const double d11 = 3.0 * u * u - 2.0 * u;
  return (d00 * y_[i] + d01 * y_[i + 1]) / h + d10 * slope_[i] + d11 * slope_[i + 1];
}

Trajectory densify_waypoints(
  const EgoState & ego, std::span<const Vec2> waypoints, double waypoint_dt, double dt,
  std::optional<double> max_speed)
{
  if (waypoints.empty()) {
    throw ParseError("no waypoints to densify");
  }
  std::vector<double> knots{0.0};
  std::vector<double> xs{ego.pose.x};
  std::vector<double> ys{ego.pose.y};
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    knots.push_back((i + 1) * waypoint_dt);
    xs.push_back(waypoints[i].x);
    ys.push_back(waypoints[i].y);
  }
  const MonotoneCubic fx(knots, xs);
  const MonotoneCubic fy(knots, ys);
  const auto steps = static_cast<std::size_t>(std::lround(knots.back() / dt));

  std::vector<double> px(steps + 1);
  std::vector<double> py(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    px[k] = fx.value(k * dt);
    py[k] = fy.value(k * dt);
  }
  const auto vx = differentiate(px, dt);
  const auto vy = differentiate(py, dt);

  Trajectory traj{dt, {}};
  traj.samples.reserve(steps + 1);
  double heading = ego.pose.heading;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const double dx = fx.derivative(t);
    const double dy = fy.derivative(t);
    if (k > 0 && std::hypot(dx, dy) > 1e-6) {
      heading = std::atan2(dy, dx);
    }
    const double speed = std::hypot(vx[k], vy[k]);
    if (max_speed && speed > *max_speed + 1e-9) {
      throw ParseError(fmt::format("waypoints imply {:.2f} m/s, above the {:.2f} m/s bound", speed, *max_speed));
    }
    const Vec2 p = k == 0 ? ego.pose.position() : Vec2{px[k], py[k]};
    traj.samples.push_back({ego.timestamp + t, {p.x, p.y, heading}, speed});
  }
  return traj;
}

std::string format_param_response(const LlmParamResponse & r)
{
  nlohmann::ordered_json j;
  j["lateral_offsets"] = r.params.lateral_offsets;
  j["speed_limit_fraction"] = r.params.speed_limit_fractions;
  j["fallback_target_velocity"] = r.params.fallback_target_velocity;
  j["min_gap_to_lead_agent"] = r.params.min_gap_to_lead_agent;
  j["headway_time"] = r.params.headway_time;
  j["accel_max"] = r.params.accel_max;
  j["decel_max"] = r.params.decel_max;
  if (r.invoke_emergency_brake) {
    j["invoke_emergency_brake"] = *r.invoke_emergency_brake;
  }
  j["rationale"] = r.rationale;
  return j.dump(2);
}

std::string format_trajectory_response(const LlmTrajectoryResponse & r)
{
  nlohmann::ordered_json j;
  j["waypoints"] = nlohmann::ordered_json::array();
  for (const Vec2 & p : r.waypoints) {
    j["waypoints"].push_back({std::round(p.x * 100.0) / 100.0, std::round(p.y * 100.0) / 100.0});
  }
  if (r.invoke_emergency_brake) {
    j["invoke_emergency_brake"] = *r.invoke_emergency_brake;
  }
  j["rationale"] = r.rationale;
  return j.dump(2);
}

}  // namespace drivesim
