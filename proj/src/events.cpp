#include "hermes/events.hpp"

#include <cmath>
#include <cstdio>

#include "hermes/geo.hpp"
#include "json.hpp"

namespace hermes {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kEventTypes[] = {"vehicle_location", "driving_section",
                                            "abnormal_situation"};
constexpr std::string_view kAbnormalKinds[] = {"high_acceleration", "high_deceleration",
                                               "high_speed", "high_heart_rate"};
constexpr std::string_view kRoadTypes[] = {"urban", "secondary", "highway", "unknown"};

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(const std::string_view (&names)[N], std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  return std::nullopt;
}

// Strict field readers: the wire format is a contract, so missing or
// mistyped fields are parse errors rather than defaults.
const Json& field(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

std::int64_t integer(const Json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) throw ParseError(std::string("field '") + key + "' overflows");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' is not an integer");
  return v.get<std::int64_t>();
}

std::string string(const Json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

const Json& object(const Json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_object()) throw ParseError(std::string("field '") + key + "' is not an object");
  return v;
}

Json to_json(const VehicleLocation& v) {
  return Json{{"timestamp", v.timestamp},   {"latitude", v.latitude}, {"longitude", v.longitude},
              {"accuracy", v.accuracy},     {"speed", v.speed},       {"driving_score", v.driving_score}};
}

Json to_json(const DrivingSection& s) {
  Json samples = Json::array();
  for (const auto& x : s.samples) {
    samples.push_back(Json{{"timestamp", x.timestamp},
                           {"latitude", x.latitude},
                           {"longitude", x.longitude},
                           {"speed", x.speed},
                           {"heart_rate", x.heart_rate}});
  }
  const auto& a = s.aggregates;
  return Json{{"start_timestamp", s.start_timestamp},
              {"end_timestamp", s.end_timestamp},
              {"samples", std::move(samples)},
              {"mean_speed", a.mean_speed},
              {"stddev_speed", a.stddev_speed},
              {"mean_heart_rate", a.mean_heart_rate},
              {"stddev_heart_rate", a.stddev_heart_rate},
              {"speed_variation_stats",
               Json{{"max_delta_speed", a.speed_variation.max_delta_speed},
                    {"count_of_sign_changes", a.speed_variation.sign_changes}}}};
}

Json to_json(const AbnormalSituation& a) {
  return Json{{"timestamp", a.timestamp},
              {"latitude", a.latitude},
              {"longitude", a.longitude},
              {"kind", to_string(a.kind)},
              {"magnitude", a.magnitude}};
}

Json envelope_json(const EventEnvelope& e) {
  Json j;
  j["event_id"] = e.event_id;
  j["source_id"] = e.source_id;
  j["event_type"] = to_string(e.type());
  j["created_at"] = e.created_at;
  if (e.accepted_at) j["accepted_at"] = *e.accepted_at;
  j["body"] = std::visit([](const auto& b) { return to_json(b); }, e.body);
  return j;
}

VehicleLocation location_from(const Json& b) {
  VehicleLocation v;
  v.timestamp = integer(b, "timestamp");
  v.latitude = number(b, "latitude");
  v.longitude = number(b, "longitude");
  v.accuracy = number(b, "accuracy");
  v.speed = number(b, "speed");
  v.driving_score = number(b, "driving_score");
  return v;
}

DrivingSection section_from(const Json& b) {
  DrivingSection s;
  s.start_timestamp = integer(b, "start_timestamp");
  s.end_timestamp = integer(b, "end_timestamp");
  const auto& samples = field(b, "samples");
  if (!samples.is_array()) throw ParseError("field 'samples' is not an array");
  s.samples.reserve(samples.size());
  for (const auto& x : samples) {
    if (!x.is_object()) throw ParseError("sample is not an object");
    s.samples.push_back({integer(x, "timestamp"), number(x, "latitude"), number(x, "longitude"),
                         number(x, "speed"), number(x, "heart_rate")});
  }
  s.aggregates.mean_speed = number(b, "mean_speed");
  s.aggregates.stddev_speed = number(b, "stddev_speed");
  s.aggregates.mean_heart_rate = number(b, "mean_heart_rate");
  s.aggregates.stddev_heart_rate = number(b, "stddev_heart_rate");
  const auto& sv = object(b, "speed_variation_stats");
  s.aggregates.speed_variation.max_delta_speed = number(sv, "max_delta_speed");
  s.aggregates.speed_variation.sign_changes = integer(sv, "count_of_sign_changes");
  return s;
}

AbnormalSituation abnormal_from(const Json& b) {
  AbnormalSituation a;
  a.timestamp = integer(b, "timestamp");
  a.latitude = number(b, "latitude");
  a.longitude = number(b, "longitude");
  auto kind = parse_abnormal_kind(string(b, "kind"));
  if (!kind) throw ParseError("unknown abnormal kind");
  a.kind = *kind;
  a.magnitude = number(b, "magnitude");
  return a;
}

EventEnvelope envelope_from(const Json& j) {
  if (!j.is_object()) throw ParseError("event is not a JSON object");
  EventEnvelope e;
  e.event_id = string(j, "event_id");
  e.source_id = string(j, "source_id");
  e.created_at = integer(j, "created_at");
  if (auto it = j.find("accepted_at"); it != j.end() && !it->is_null()) e.accepted_at = integer(j, "accepted_at");
  auto type = parse_event_type(string(j, "event_type"));
  if (!type) throw ParseError("unknown event_type");
  const auto& body = object(j, "body");
  switch (*type) {
    case EventType::vehicle_location: e.body = location_from(body); break;
    case EventType::driving_section: e.body = section_from(body); break;
    case EventType::abnormal_situation: e.body = abnormal_from(body); break;
  }
  return e;
}

Json parse_json(std::string_view bytes) {
  if (bytes.empty()) throw ParseError("empty input");
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(ex.what());
  }
}

bool close_enough(double stored, double recomputed) {
  const double scale = std::max(std::abs(stored), std::abs(recomputed));
  return std::abs(stored - recomputed) <= 1e-6 * scale + 1e-9;
}

std::optional<ValidationError> fail(ValidationError::Code code, std::string detail) {
  return ValidationError{code, std::move(detail)};
}

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

std::optional<ValidationError> check(const VehicleLocation& v) {
  if (!geo::is_valid({v.latitude, v.longitude})) return fail(ValidationError::Code::bad_coords, "coordinates out of range");
  if (!finite_non_negative(v.accuracy)) return fail(ValidationError::Code::negative_value, "accuracy");
  if (!finite_non_negative(v.speed)) return fail(ValidationError::Code::negative_value, "speed");
  if (!finite_non_negative(v.driving_score) || v.driving_score > 100.0)
    return fail(ValidationError::Code::negative_value, "driving_score outside [0, 100]");
  return std::nullopt;
}

std::optional<ValidationError> check(const DrivingSection& s) {
  using C = ValidationError::Code;
  if (s.samples.size() < 2) return fail(C::malformed_samples, "section needs at least two samples");
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const auto& x = s.samples[i];
    if (!geo::is_valid({x.latitude, x.longitude})) return fail(C::bad_coords, "sample coordinates out of range");
    if (!finite_non_negative(x.speed) || !finite_non_negative(x.heart_rate))
      return fail(C::negative_value, "sample speed or heart rate");
    if (i > 0) {
      const auto gap = x.timestamp - s.samples[i - 1].timestamp;
      if (gap < 500 || gap > 1500) return fail(C::malformed_samples, "sample spacing outside 1 s +- 0.5 s");
    }
  }
  if (s.start_timestamp != s.samples.front().timestamp || s.end_timestamp != s.samples.back().timestamp)
    return fail(C::malformed_samples, "section bounds disagree with samples");
  const auto& a = s.aggregates;
  if (!finite_non_negative(a.mean_speed) || !finite_non_negative(a.stddev_speed) ||
      !finite_non_negative(a.mean_heart_rate) || !finite_non_negative(a.stddev_heart_rate) ||
      !finite_non_negative(a.speed_variation.max_delta_speed) || a.speed_variation.sign_changes < 0)
    return fail(C::negative_value, "section aggregates");
  const auto r = compute_section_aggregates(s.samples);
  if (!close_enough(a.mean_speed, r.mean_speed) || !close_enough(a.stddev_speed, r.stddev_speed) ||
      !close_enough(a.mean_heart_rate, r.mean_heart_rate) ||
      !close_enough(a.stddev_heart_rate, r.stddev_heart_rate) ||
      !close_enough(a.speed_variation.max_delta_speed, r.speed_variation.max_delta_speed) ||
      a.speed_variation.sign_changes != r.speed_variation.sign_changes)
    return fail(C::malformed_samples, "aggregates do not match samples");
  return std::nullopt;
}

std::optional<ValidationError> check(const AbnormalSituation& a, const AbnormalThresholds& t) {
  using C = ValidationError::Code;
  if (!geo::is_valid({a.latitude, a.longitude})) return fail(C::bad_coords, "coordinates out of range");
  if (!std::isfinite(a.magnitude) || a.magnitude < 0.0) return fail(C::negative_value, "magnitude");
  double threshold = 0.0;
  switch (a.kind) {
    case AbnormalKind::high_acceleration: threshold = t.acceleration; break;
    case AbnormalKind::high_deceleration: threshold = t.deceleration; break;
    case AbnormalKind::high_speed: threshold = t.speed; break;
    case AbnormalKind::high_heart_rate: threshold = t.heart_rate; break;
  }
  if (!(a.magnitude > threshold)) return fail(C::bad_type, "magnitude below the threshold for its kind");
  return std::nullopt;
}

}  // namespace

std::string_view to_string(EventType t) { return kEventTypes[static_cast<int>(t)]; }
std::string_view to_string(AbnormalKind k) { return kAbnormalKinds[static_cast<int>(k)]; }
std::string_view to_string(RoadType t) { return kRoadTypes[static_cast<int>(t)]; }
std::optional<EventType> parse_event_type(std::string_view s) { return parse_enum<EventType>(kEventTypes, s); }
std::optional<AbnormalKind> parse_abnormal_kind(std::string_view s) {
  return parse_enum<AbnormalKind>(kAbnormalKinds, s);
}
std::optional<RoadType> parse_road_type(std::string_view s) { return parse_enum<RoadType>(kRoadTypes, s); }

std::string_view to_string(ValidationError::Code c) {
  switch (c) {
    case ValidationError::Code::bad_coords: return "bad_coords";
    case ValidationError::Code::bad_type: return "bad_type";
    case ValidationError::Code::stale_clock: return "stale_clock";
    case ValidationError::Code::negative_value: return "negative_value";
    case ValidationError::Code::malformed_samples: return "malformed_samples";
  }
  return "unknown";
}

SectionAggregates compute_section_aggregates(const std::vector<SectionSample>& samples) {
  SectionAggregates a;
  if (samples.empty()) return a;
  const double n = static_cast<double>(samples.size());
  double sum_v = 0.0, sum_h = 0.0;
  for (const auto& s : samples) {
    sum_v += s.speed;
    sum_h += s.heart_rate;
  }
  a.mean_speed = sum_v / n;
  a.mean_heart_rate = sum_h / n;
  double var_v = 0.0, var_h = 0.0;
  for (const auto& s : samples) {
    var_v += (s.speed - a.mean_speed) * (s.speed - a.mean_speed);
    var_h += (s.heart_rate - a.mean_heart_rate) * (s.heart_rate - a.mean_heart_rate);
  }
  a.stddev_speed = std::sqrt(var_v / n);
  a.stddev_heart_rate = std::sqrt(var_h / n);

  int last_sign = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double dv = samples[i].speed - samples[i - 1].speed;
    const double dt = static_cast<double>(samples[i].timestamp - samples[i - 1].timestamp) / 1000.0;
    if (dt > 0.0) a.speed_variation.max_delta_speed = std::max(a.speed_variation.max_delta_speed, std::abs(dv) / dt);
    const int sign = dv > 0.0 ? 1 : (dv < 0.0 ? -1 : 0);
    if (sign != 0) {
      if (last_sign != 0 && sign != last_sign) ++a.speed_variation.sign_changes;
      last_sign = sign;
    }
  }
  return a;
}

std::optional<ValidationError> validate(const EventEnvelope& e, EpochMs now, const AbnormalThresholds& thresholds) {
  using C = ValidationError::Code;
  if (e.event_id.empty() || e.source_id.empty()) return fail(C::bad_type, "empty event_id or source_id");
  if (e.created_at < now - kStalenessWindowMs || e.created_at > now + kStalenessWindowMs)
    return fail(C::stale_clock, "created_at more than 24 h away from server clock");
  if (e.accepted_at && *e.accepted_at < 0) return fail(C::negative_value, "accepted_at");
  return std::visit(
      [&](const auto& body) -> std::optional<ValidationError> {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, AbnormalSituation>)
          return check(body, thresholds);
        else
          return check(body);
      },
      e.body);
}

std::string encode(const EventEnvelope& e) { return envelope_json(e).dump(); }

EventEnvelope decode(std::string_view bytes) {
  try {
    return envelope_from(parse_json(bytes));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(ex.what());
  }
}

std::vector<EventEnvelope> decode_batch(std::string_view body) {
  std::vector<EventEnvelope> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    auto line = body.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back(decode(line));
    pos = nl + 1;
  }
  if (out.empty()) throw ParseError("no events in body");
  return out;
}

std::string encode_batch(const std::vector<EventEnvelope>& events) {
  std::string out;
  for (const auto& e : events) {
    out += encode(e);
    out += '\n';
  }
  return out;
}

std::string encode_stream_line(std::uint64_t seq, const EventEnvelope& e) {
  Json j;
  j["seq"] = seq;
  auto body = envelope_json(e);
  for (auto& [k, v] : body.items()) j[k] = std::move(v);
  return j.dump();
}

StreamItem decode_stream_line(std::string_view line) {
  try {
    auto j = parse_json(line);
    StreamItem item;
    item.seq = static_cast<std::uint64_t>(integer(j, "seq"));
    item.event = envelope_from(j);
    return item;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(ex.what());
  }
}

std::string make_uuid(std::mt19937_64& rng) {
  std::uint64_t hi = rng(), lo = rng();
  hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
  lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
  char buf[37];
  std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                static_cast<unsigned>((hi >> 16) & 0xFFFF), static_cast<unsigned>(hi & 0xFFFF),
                static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
  return buf;
}

std::string make_uuid() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return make_uuid(rng);
}

}  // namespace hermes
