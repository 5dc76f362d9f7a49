#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "hermes/events.hpp"

using namespace hermes;

namespace {

constexpr EpochMs kNow = 1'700'000'000'000;

std::vector<SectionSample> random_samples(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> speed(0.0, 90.0), hr(55.0, 110.0), jitter(-1e-4, 1e-4);
  std::vector<SectionSample> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({kNow + static_cast<EpochMs>(i) * 1000, 37.38 + jitter(rng), -5.98 + jitter(rng), speed(rng), hr(rng)});
  return out;
}

EventEnvelope random_envelope(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-179.0, 179.0), u(0.0, 1.0);
  EventEnvelope e;
  e.event_id = make_uuid(rng);
  e.source_id = "driver-" + std::to_string(rng() % 1000);
  e.created_at = kNow - static_cast<EpochMs>(rng() % 100'000);
  if (rng() % 2) e.accepted_at = e.created_at + static_cast<EpochMs>(rng() % 500);
  switch (rng() % 3) {
    case 0:
      e.body = VehicleLocation{e.created_at, lat(rng), lon(rng), 3.0 + 12.0 * u(rng), 120.0 * u(rng), 100.0 * u(rng)};
      break;
    case 1: {
      DrivingSection s;
      s.samples = random_samples(rng, 2 + rng() % 60);
      s.start_timestamp = s.samples.front().timestamp;
      s.end_timestamp = s.samples.back().timestamp;
      s.aggregates = compute_section_aggregates(s.samples);
      e.body = std::move(s);
      break;
    }
    default: {
      const auto kind = static_cast<AbnormalKind>(rng() % 4);
      e.body = AbnormalSituation{e.created_at, lat(rng), lon(rng), kind, 130.0 + 10.0 * u(rng)};
    }
  }
  return e;
}

// Independent recomputation: long double accumulation, sign changes counted
// over the sequence of non-zero deltas.
SectionAggregates oracle_aggregates(const std::vector<SectionSample>& s) {
  long double sv = 0, sh = 0, sv2 = 0, sh2 = 0;
  for (const auto& x : s) {
    sv += x.speed;
    sh += x.heart_rate;
    sv2 += static_cast<long double>(x.speed) * x.speed;
    sh2 += static_cast<long double>(x.heart_rate) * x.heart_rate;
  }
  const long double n = s.size();
  SectionAggregates a;
  a.mean_speed = static_cast<double>(sv / n);
  a.mean_heart_rate = static_cast<double>(sh / n);
  a.stddev_speed = static_cast<double>(std::sqrt(std::max<long double>(0, sv2 / n - (sv / n) * (sv / n))));
  a.stddev_heart_rate = static_cast<double>(std::sqrt(std::max<long double>(0, sh2 / n - (sh / n) * (sh / n))));
  std::vector<double> deltas;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double dv = s[i].speed - s[i - 1].speed;
    a.speed_variation.max_delta_speed =
        std::max(a.speed_variation.max_delta_speed, std::abs(dv) * 1000.0 / (s[i].timestamp - s[i - 1].timestamp));
    if (dv != 0.0) deltas.push_back(dv);
  }
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if ((deltas[i] > 0) != (deltas[i - 1] > 0)) ++a.speed_variation.sign_changes;
  return a;
}

void expect_relative(double expected, double actual) {
  EXPECT_NEAR(actual, expected, 1e-6 * std::max(1.0, std::abs(expected)));
}

}  // namespace

TEST(Events, RoundTripPreservesEveryGeneratedEnvelope) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10'000; ++i) {
    const auto e = random_envelope(rng);
    ASSERT_EQ(decode(encode(e)), e) << encode(e);
  }
}

TEST(Events, BatchAndStreamLinesRoundTrip) {
  std::mt19937_64 rng(12);
  std::vector<EventEnvelope> batch;
  for (int i = 0; i < 50; ++i) batch.push_back(random_envelope(rng));
  EXPECT_EQ(decode_batch(encode_batch(batch)), batch);
  EXPECT_EQ(decode_batch("\n" + encode(batch[0]) + "\r\n\n"), std::vector<EventEnvelope>{batch[0]});

  const auto item = decode_stream_line(encode_stream_line(42, batch[3]));
  EXPECT_EQ(item.seq, 42u);
  EXPECT_EQ(item.event, batch[3]);
}

TEST(Events, MalformedInputThrowsParseError) {
  EXPECT_THROW(decode("{"), ParseError);
  EXPECT_THROW(decode("[]"), ParseError);
  EXPECT_THROW(decode(R"({"event_id":"a","source_id":"b","created_at":1,"event_type":"nope","body":{}})"), ParseError);
  EXPECT_THROW(decode_batch("\n \n"), ParseError);
}

TEST(Events, AggregatesMatchIndependentRecomputation) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const auto samples = random_samples(rng, 2 + rng() % 120);
    const auto got = compute_section_aggregates(samples);
    const auto want = oracle_aggregates(samples);
    expect_relative(want.mean_speed, got.mean_speed);
    expect_relative(want.stddev_speed, got.stddev_speed);
    expect_relative(want.mean_heart_rate, got.mean_heart_rate);
    expect_relative(want.stddev_heart_rate, got.stddev_heart_rate);
    expect_relative(want.speed_variation.max_delta_speed, got.speed_variation.max_delta_speed);
    EXPECT_EQ(want.speed_variation.sign_changes, got.speed_variation.sign_changes);
  }
}

TEST(Events, ValidateAcceptsWellFormedEnvelopes) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 2'000; ++i) {
    const auto e = random_envelope(rng);
    const auto err = validate(e, kNow);
    ASSERT_FALSE(err) << to_string(err->code) << ": " << err->detail;
  }
}

TEST(Events, ValidateReportsTheFailingRule) {
  EventEnvelope e{"id", "driver", kNow, std::nullopt, VehicleLocation{kNow, 37.0, -5.0, 5.0, 40.0, 80.0}};
  EXPECT_FALSE(validate(e, kNow));

  auto bad = e;
  std::get<VehicleLocation>(bad.body).latitude = 91.0;
  EXPECT_EQ(validate(bad, kNow)->code, ValidationError::Code::bad_coords);

  bad = e;
  std::get<VehicleLocation>(bad.body).speed = -1.0;
  EXPECT_EQ(validate(bad, kNow)->code, ValidationError::Code::negative_value);

  bad = e;
  std::get<VehicleLocation>(bad.body).driving_score = 101.0;
  EXPECT_EQ(validate(bad, kNow)->code, ValidationError::Code::negative_value);

  bad = e;
  bad.created_at = kNow - kStalenessWindowMs - 1;
  EXPECT_EQ(validate(bad, kNow)->code, ValidationError::Code::stale_clock);
  bad.created_at = kNow + kStalenessWindowMs + 1;
  EXPECT_EQ(validate(bad, kNow)->code, ValidationError::Code::stale_clock);
  bad.created_at = kNow + kStalenessWindowMs;
  EXPECT_FALSE(validate(bad, kNow));

  EventEnvelope abnormal{"id", "driver", kNow, std::nullopt,
                         AbnormalSituation{kNow, 37.0, -5.0, AbnormalKind::high_acceleration, 3.0}};
  EXPECT_EQ(validate(abnormal, kNow)->code, ValidationError::Code::bad_type);
  std::get<AbnormalSituation>(abnormal.body).magnitude = 3.6;
  EXPECT_FALSE(validate(abnormal, kNow));
}

TEST(Events, ValidateChecksSectionShape) {
  std::mt19937_64 rng(15);
  DrivingSection s;
  s.samples = random_samples(rng, 10);
  s.start_timestamp = s.samples.front().timestamp;
  s.end_timestamp = s.samples.back().timestamp;
  s.aggregates = compute_section_aggregates(s.samples);
  EventEnvelope e{"id", "driver", kNow, std::nullopt, s};
  EXPECT_FALSE(validate(e, kNow));

  auto tampered = s;
  tampered.aggregates.mean_speed *= 1.01;
  e.body = tampered;
  EXPECT_EQ(validate(e, kNow)->code, ValidationError::Code::malformed_samples);

  tampered = s;
  tampered.samples[4].timestamp += 700;
  tampered.aggregates = compute_section_aggregates(tampered.samples);
  e.body = tampered;
  EXPECT_EQ(validate(e, kNow)->code, ValidationError::Code::malformed_samples);

  tampered = s;
  tampered.samples.resize(1);
  tampered.end_timestamp = tampered.start_timestamp;
  tampered.aggregates = compute_section_aggregates(tampered.samples);
  e.body = tampered;
  EXPECT_EQ(validate(e, kNow)->code, ValidationError::Code::malformed_samples);
}

TEST(Events, UuidsAreVersionFourAndDistinct) {
  std::mt19937_64 rng(16);
  std::set<std::string> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto id = make_uuid(rng);
    ASSERT_EQ(id.size(), 36u);
    EXPECT_EQ(id[14], '4');
    EXPECT_TRUE(std::string("89ab").find(id[19]) != std::string::npos);
    EXPECT_TRUE(seen.insert(id).second);
  }
}
