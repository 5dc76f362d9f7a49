#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hermes/clock.hpp"

namespace hermes {

enum class EventType { vehicle_location, driving_section, abnormal_situation };
enum class AbnormalKind { high_acceleration, high_deceleration, high_speed, high_heart_rate };
enum class RoadType { urban, secondary, highway, unknown };

std::string_view to_string(EventType t);
std::string_view to_string(AbnormalKind k);
std::string_view to_string(RoadType t);
std::optional<EventType> parse_event_type(std::string_view s);
std::optional<AbnormalKind> parse_abnormal_kind(std::string_view s);
std::optional<RoadType> parse_road_type(std::string_view s);

/// Periodic position report (every 10 s per driver). Speed in km/h,
/// accuracy in meters, driving_score in [0, 100].
struct VehicleLocation {
  EpochMs timestamp = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  double accuracy = 0.0;
  double speed = 0.0;
  double driving_score = 0.0;

  bool operator==(const VehicleLocation&) const = default;
};

/// One 1 Hz sample inside a driving section.
struct SectionSample {
  EpochMs timestamp = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  double speed = 0.0;       // km/h
  double heart_rate = 0.0;  // bpm

  bool operator==(const SectionSample&) const = default;
};

struct SpeedVariationStats {
  double max_delta_speed = 0.0;  // km/h per second
  std::int64_t sign_changes = 0;

  bool operator==(const SpeedVariationStats&) const = default;
};

struct SectionAggregates {
  double mean_speed = 0.0;
  double stddev_speed = 0.0;
  double mean_heart_rate = 0.0;
  double stddev_heart_rate = 0.0;
  SpeedVariationStats speed_variation;

  bool operator==(const SectionAggregates&) const = default;
};

/// Detailed record posted after every ~500 m. Standard deviations are
/// population standard deviations over the samples.
struct DrivingSection {
  EpochMs start_timestamp = 0;
  EpochMs end_timestamp = 0;
  std::vector<SectionSample> samples;
  SectionAggregates aggregates;

  bool operator==(const DrivingSection&) const = default;
};

/// Magnitude units: m/s^2 for accelerations, km/h for speed, bpm for heart rate.
struct AbnormalSituation {
  EpochMs timestamp = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  AbnormalKind kind = AbnormalKind::high_speed;
  double magnitude = 0.0;

  bool operator==(const AbnormalSituation&) const = default;
};

using EventBody = std::variant<VehicleLocation, DrivingSection, AbnormalSituation>;

/// Wrapper around every payload that crosses the wire. The event type is
/// the body alternative.
struct EventEnvelope {
  std::string event_id;
  std::string source_id;
  EpochMs created_at = 0;
  std::optional<EpochMs> accepted_at;
  EventBody body;

  EventType type() const { return static_cast<EventType>(body.index()); }
  bool operator==(const EventEnvelope&) const = default;
};

SectionAggregates compute_section_aggregates(const std::vector<SectionSample>& samples);

// ---------------------------------------------------------------------------
// Validation

struct AbnormalThresholds {
  double acceleration = 3.5;  // m/s^2
  double deceleration = 3.5;  // m/s^2
  double speed = 36.0;        // km/h, 1.2 x the lowest speed limit
  double heart_rate = 120.0;  // bpm
};

inline constexpr EpochMs kStalenessWindowMs = 24LL * 3600 * 1000;

struct ValidationError {
  enum class Code { bad_coords, bad_type, stale_clock, negative_value, malformed_samples };
  Code code;
  std::string detail;
};

std::string_view to_string(ValidationError::Code c);

/// Returns nullopt when the envelope satisfies every payload invariant and
/// created_at lies within +-24 h of `now`.
std::optional<ValidationError> validate(const EventEnvelope& e, EpochMs now,
                                        const AbnormalThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Wire format: one JSON object per event, newline-delimited streams.

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode(const EventEnvelope& e);
/// Throws ParseError on any malformed input.
EventEnvelope decode(std::string_view bytes);

/// Splits a newline-delimited body into events. Blank lines are skipped.
std::vector<EventEnvelope> decode_batch(std::string_view body);
std::string encode_batch(const std::vector<EventEnvelope>& events);

/// Stream line as served by subscriptions: the envelope plus its sequence
/// number under the key "seq".
struct StreamItem {
  std::uint64_t seq = 0;
  EventEnvelope event;
};
std::string encode_stream_line(std::uint64_t seq, const EventEnvelope& e);
StreamItem decode_stream_line(std::string_view line);

/// Random (version 4) UUID string.
std::string make_uuid(std::mt19937_64& rng);
std::string make_uuid();

}  // namespace hermes
