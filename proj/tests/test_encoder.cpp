#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "temcodec/encoder.hpp"

using namespace temcodec;

namespace {

const double pi = std::numbers::pi;
const TimeWindow kWindow{0.0, 10.0};

BandlimitedSignal zero_signal() { return {pi, kWindow, {}, {}}; }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("temcodec_enc_" + name);
}

// Modular distance on a circle of circumference 2 delta.
double circular_gap(double a, double b, double delta) {
  const double p = 2.0 * delta;
  double d = std::fmod(std::abs(a - b), p);
  return std::min(d, p - d);
}

}  // namespace

TEST(Encode, ZeroInputSpikesEveryTwoSeconds) {
  const auto t = encode(zero_signal(), {1.0, 1.0, 1.0}, -1.0);
  ASSERT_EQ(t.times.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(t.times[k], 2.0 * (k + 1), 1e-12);
  EXPECT_TRUE(t.warnings.empty());
}

TEST(Encode, ConstantInputSpacing) {
  const ConstantSignal one(1.0, kWindow);
  const auto t = encode(one, {1.0, 1.0, 2.0}, -1.0);
  ASSERT_GE(t.times.size(), 10u);
  for (std::size_t k = 0; k + 1 < t.times.size(); ++k) EXPECT_NEAR(t.times[k + 1] - t.times[k], 2.0 / 3.0, 1e-12);
}

TEST(Encode, RandomSignalsRespectGapBound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_random_signal((1.0 + seed % 3) * pi / 2.0, kWindow, seed);
    const double c = signal_bound(s);
    const auto t = encode(s, {1.0, 1.0, c + 1.0}, -1.0, {c});
    for (std::size_t k = 0; k + 1 < t.times.size(); ++k) EXPECT_LE(t.times[k + 1] - t.times[k], 2.0 + 1e-12);
  }
}

TEST(Encode, FirstCrossingUsesInitialState) {
  // From y0 = 0 the first spike needs delta - y0 = 1, i.e. t = kappa / b.
  const auto t = encode(zero_signal(), {1.0, 1.0, 1.0}, 0.0);
  ASSERT_FALSE(t.times.empty());
  EXPECT_NEAR(t.times[0], 1.0, 1e-12);
  EXPECT_NEAR(t.times[1], 3.0, 1e-12);
}

TEST(Encode, IntervalIntegralsMatchPrimitive) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_random_signal(0.9 * pi, kWindow, 40 + seed);
    const double c = signal_bound(s);
    const auto t = encode(s, {1.0, 1.0, c + 1.0}, -1.0, {c});
    const auto q = interval_integrals(t);
    for (std::size_t k = 0; k < q.size(); ++k)
      EXPECT_NEAR(q[k], s.primitive(t.times[k + 1]) - s.primitive(t.times[k]), 1e-8);
  }
}

TEST(Encode, DeterministicBits) {
  const auto s = generate_random_signal(pi, kWindow, 3);
  const auto a = encode(s, {1.0, 1.0, 2.5}, -1.0);
  const auto b = encode(s, {1.0, 1.0, 2.5}, -1.0);
  EXPECT_EQ(a.times, b.times);
}

TEST(Encode, DiscreteCrossCheckAgrees) {
  const auto s = generate_random_signal(pi, kWindow, 8);
  const double c = signal_bound(s);
  const TemParams p{1.0, 1.0, c + 1.0};
  const auto exact = encode(s, p, -1.0, {c});
  const auto disc = encode_discrete(s, p, -1.0);
  ASSERT_EQ(exact.times.size(), disc.times.size());
  for (std::size_t k = 0; k < exact.times.size(); ++k) EXPECT_NEAR(exact.times[k], disc.times[k], 1e-6);
}

TEST(Encode, WeakBiasWarnsAndStillEncodes) {
  const BandlimitedSignal s(pi, kWindow, {5.0}, {2.0});  // peak 2
  const auto t = encode(s, {1.0, 1.0, 0.5}, -1.0);
  ASSERT_FALSE(t.warnings.empty());
  EXPECT_NE(t.warnings[0].find("best-effort"), std::string::npos);
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    const double from = k == 0 ? kWindow.t_start : t.times[k - 1];
    // y0 = -delta, so every crossing needs 2 delta.
    EXPECT_NEAR(s.primitive(t.times[k]) - s.primitive(from) + 0.5 * (t.times[k] - from), 2.0, 1e-9);
  }
}

TEST(Encode, RejectsBadInputs) {
  EXPECT_THROW(encode(zero_signal(), {0.0, 1.0, 1.0}, -1.0), DataError);
  EXPECT_THROW(encode(zero_signal(), {1.0, 1.0, 1.0}, 1.0), DataError);
}

TEST(EncodeMulti, SingleChannelEqualsEncode) {
  const auto s = generate_random_signal(pi, kWindow, 2);
  const double c = signal_bound(s);
  const TemParams p{1.0, 1.0, c + 1.0};
  const auto single = encode(s, p, -1.0, {c});
  const auto multi = encode_multi(s, MultiChannelConfig::equal(p, 1), {c});
  EXPECT_EQ(multi.merged_times(), single.times);
}

TEST(EncodeMulti, TwoChannelsInterleavedWithShift) {
  const auto s = generate_random_signal(pi / 2.0, kWindow, 14);
  const double c = signal_bound(s);
  const TemParams p{1.0, 2.0, c + 1.0};
  const auto cfg = MultiChannelConfig::from_shifts(p, {0.75, 4.0 - 0.75});
  const auto t = encode_multi(s, cfg, {c});
  EXPECT_TRUE(is_interleaved(t.events, 2));
  const auto c0 = t.channel_times(0);
  const auto c1 = t.channel_times(1);
  // Between consecutive channel-1 spikes lies exactly one channel-0 spike.
  for (std::size_t k = 0; k + 1 < c1.size(); ++k) {
    std::size_t n = 0;
    for (double v : c0) n += v > c1[k] && v < c1[k + 1];
    EXPECT_EQ(n, 1u);
  }
}

TEST(EncodeMulti, ThreeEqualShiftsOnZeroInputAreOffsetTrains) {
  const TemParams p{1.0, 1.0, 1.0};
  const auto t = encode_multi(zero_signal(), MultiChannelConfig::equal(p, 3));
  ASSERT_GE(t.events.size(), 12u);
  const auto m = t.merged_times();
  for (std::size_t k = 0; k + 1 < m.size(); ++k) EXPECT_NEAR(m[k + 1] - m[k], 2.0 / 3.0, 1e-12);
  EXPECT_TRUE(is_interleaved(t.events, 3));
}

TEST(EncodeMulti, ShiftRelationHoldsOnIntegratorTraces) {
  const auto s = generate_random_signal(pi, kWindow, 5);
  const double c = signal_bound(s);
  const TemParams p{1.0, 1.0, c + 1.0};
  const auto cfg = MultiChannelConfig::from_shifts(p, {0.3, 1.1, 0.6});
  const auto t = encode_multi(s, cfg, {c});
  for (std::size_t ch = 0; ch + 1 < 3; ++ch) {
    const auto a = t.channel(ch);
    const auto b = t.channel(ch + 1);
    for (int i = 0; i <= 400; ++i) {
      const double tt = 0.025 * i;
      const double ya = integrator_state(s, a, tt);
      const double yb = integrator_state(s, b, tt);
      EXPECT_LT(circular_gap(yb, ya + cfg.shifts[ch], 1.0), 1e-9) << "t = " << tt;
    }
  }
}

TEST(MultiChannelConfig, InitialValuesRealizeShifts) {
  const TemParams p{1.0, 2.0, 1.0};
  const auto cfg = MultiChannelConfig::from_shifts(p, {0.75, 3.25});
  ASSERT_EQ(cfg.initial_values.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.initial_values[0], -2.0);
  EXPECT_DOUBLE_EQ(cfg.initial_values[1], -1.25);
  const auto wrapped = MultiChannelConfig::from_shifts(p, {3.5, 0.5}, 1.0);
  EXPECT_DOUBLE_EQ(wrapped.initial_values[1], 0.5);
}

TEST(MultiChannelConfig, RejectsZeroShiftAndBadSum) {
  const TemParams p{1.0, 1.0, 1.0};
  try {
    MultiChannelConfig::from_shifts(p, {0.0, 2.0});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "zero shift: channels degenerate");
  }
  EXPECT_THROW(MultiChannelConfig::from_shifts(p, {0.5, 0.5}), DataError);
  EXPECT_NO_THROW(MultiChannelConfig::from_shifts(p, {1e-8, 2.0 - 1e-8}));
  EXPECT_NO_THROW(MultiChannelConfig::from_shifts(p, {2.0}));
}

TEST(IntervalIntegrals, ZeroInputAndDirectSubstitution) {
  const auto t = encode(zero_signal(), {1.0, 1.0, 1.0}, -1.0);
  for (double q : interval_integrals(t)) EXPECT_NEAR(q, 0.0, 1e-12);
  const auto q = interval_integrals(std::vector<double>{0.0, 1.0}, {1.0, 1.0, 1.0});
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0], 1.0);
  EXPECT_THROW(interval_integrals(std::vector<double>{0.5}, {1.0, 1.0, 1.0}), DataError);
}

TEST(IntervalIntegrals, MergedStrideMatchesPrimitive) {
  const auto s = generate_random_signal(1.3 * pi, kWindow, 77);
  const double c = signal_bound(s);
  const auto t = encode_multi(s, MultiChannelConfig::equal({1.0, 1.0, c + 1.0}, 3), {c});
  const auto m = t.merged_times();
  const auto q = interval_integrals(t);
  ASSERT_EQ(q.size(), m.size() - 3);
  for (std::size_t k = 0; k < q.size(); ++k) EXPECT_NEAR(q[k], s.primitive(m[k + 3]) - s.primitive(m[k]), 1e-8);
}

TEST(Diagnostics, ZeroInputRates) {
  const TemParams p{1.0, 1.0, 1.0};
  const auto one = encode_multi(zero_signal(), MultiChannelConfig::equal(p, 1));
  const auto r1 = diagnostics(one, 0.0);
  EXPECT_NEAR(r1.combined_rate, 0.5, 1e-12);
  EXPECT_NEAR(r1.required_rate, 0.5, 1e-15);
  EXPECT_TRUE(r1.rate_ok);
  const auto two = encode_multi(zero_signal(), MultiChannelConfig::equal(p, 2));
  const auto r2 = diagnostics(two, 0.0);
  EXPECT_NEAR(r2.combined_rate, 2.0 * r1.combined_rate, 1e-12);
  EXPECT_TRUE(r2.interleaved);
}

TEST(Diagnostics, SeparationBoundHoldsExhaustively) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_random_signal(0.8 * pi, kWindow, seed);
    const double c = signal_bound(s);
    const TemParams p{1.0, 1.0, c + 1.0};
    const auto t = encode_multi(s, MultiChannelConfig::from_shifts(p, {0.4, 1.6}), {c});
    const auto r = diagnostics(t, c);
    const auto m = t.merged_times();
    for (std::size_t k = 0; k + 1 < m.size(); ++k) EXPECT_GE(m[k + 1] - m[k], 0.4 / (p.bias + c));
    EXPECT_TRUE(r.separation_ok);
    EXPECT_TRUE(r.gap_ok);
    EXPECT_TRUE(r.rate_ok);
  }
}

TEST(Diagnostics, SeparationBoundIsTightOnZeroInput) {
  // Two channels one delta apart on x = 0 spike every kappa*alpha/b = 1 s.
  const TemParams p{1.0, 1.0, 1.0};
  const auto t = encode_multi(zero_signal(), MultiChannelConfig::from_shifts(p, {1.0, 1.0}));
  const auto r = diagnostics(t, 0.0);
  EXPECT_NEAR(r.min_separation, 1.0, 1e-12);
  EXPECT_NEAR(r.separation_bound, 1.0, 1e-15);
  EXPECT_TRUE(r.separation_ok);
}

TEST(Jitter, InfiniteSnrIsIdentity) {
  const auto t = encode_multi(zero_signal(), MultiChannelConfig::equal({1.0, 1.0, 1.0}, 2));
  const auto j = add_time_jitter(t, std::numeric_limits<double>::infinity(), 3);
  EXPECT_EQ(j.merged_times(), t.merged_times());
  ASSERT_TRUE(j.jitter);
  EXPECT_EQ(j.jitter->sigma, 0.0);
}

TEST(Jitter, SigmaFollowsRmsSpacing) {
  const auto t = encode(zero_signal(), {1.0, 1.0, 1.0}, -1.0);
  const auto j = add_time_jitter(t, 80.0, 9);
  ASSERT_TRUE(j.jitter);
  EXPECT_NEAR(j.jitter->sigma, 2e-4, 1e-15);
  const auto z = add_time_jitter(t, 0.0, 9);
  EXPECT_NEAR(z.jitter->sigma, 2.0, 1e-12);
  // Only the spike at the window end can leave the window.
  ASSERT_EQ(j.times.size() + j.jitter->dropped, t.times.size());
  for (std::size_t k = 0; k < j.times.size(); ++k) EXPECT_NEAR(j.times[k], t.times[k], 10 * 2e-4);
}

TEST(Jitter, DeterministicAndReordersReported) {
  const auto s = generate_random_signal(pi, kWindow, 4);
  const double c = signal_bound(s);
  const auto t = encode_multi(s, MultiChannelConfig::equal({1.0, 1.0, c + 1.0}, 2), {c});
  const auto a = add_time_jitter(t, 0.0, 17);
  const auto b = add_time_jitter(t, 0.0, 17);
  EXPECT_EQ(a.merged_times(), b.merged_times());
  const auto m = a.merged_times();
  for (std::size_t k = 0; k + 1 < m.size(); ++k) EXPECT_LE(m[k], m[k + 1]);
  ASSERT_TRUE(a.jitter);
  EXPECT_GT(a.jitter->inversions, 0u);
  EXPECT_THROW(add_time_jitter(t, std::nan(""), 1), DataError);
}

TEST(SpikeFiles, CsvAndMetadataRoundTrip) {
  const auto s = generate_random_signal(pi, kWindow, 6);
  const double c = signal_bound(s);
  const auto t = encode_multi(s, MultiChannelConfig::equal({1.0, 1.0, c + 1.0}, 2), {c});
  auto meta = metadata_of(t);
  meta.signal_bound = c;
  meta.omega = s.omega();
  meta.seed = 6;
  const auto csv = temp_file("spikes.csv");
  const auto js = temp_file("spikes.json");
  write_spikes(t, meta, csv.string(), js.string());
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "channel,time");
  SpikeMetadata back;
  const auto r = read_spikes(csv.string(), js.string(), &back);
  ASSERT_EQ(r.events.size(), t.events.size());
  for (std::size_t k = 0; k < r.events.size(); ++k) {
    EXPECT_EQ(r.events[k].channel, t.events[k].channel);
    EXPECT_NEAR(r.events[k].time, t.events[k].time, 1e-13);
  }
  EXPECT_EQ(back.params.bias, t.config.params.bias);
  EXPECT_EQ(back.shifts, t.config.shifts);
  EXPECT_EQ(*back.omega, s.omega());
  EXPECT_EQ(*back.seed, 6u);
  std::filesystem::remove(csv);
  std::filesystem::remove(js);
}

TEST(SpikeFiles, MalformedCsvIsRejected) {
  std::istringstream bad_header("time,channel\n0,1.0\n");
  EXPECT_THROW(spikes_from_csv(bad_header), DataError);
  std::istringstream bad_row("channel,time\n0,abc\n");
  EXPECT_THROW(spikes_from_csv(bad_row), DataError);
  std::istringstream unsorted("channel,time\n0,2.0\n1,1.0\n");
  EXPECT_THROW(spikes_from_csv(unsorted), DataError);
  std::istringstream ok("channel,time\r\n0,1.5\r\n1,2.5\r\n");
  EXPECT_EQ(spikes_from_csv(ok).size(), 2u);
  EXPECT_THROW(read_spikes(temp_file("nope.csv").string(), temp_file("nope.json").string()), DataError);
}
