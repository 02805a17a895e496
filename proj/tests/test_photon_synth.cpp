#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nfc/errors.hpp"
#include "nfc/photon_synth.hpp"

using namespace nfc;

namespace {

CalibrationConstants reference_calibration() {
  return make_calibration({0.496, 0.021}, {0.235, 0.013}, {0.148, 0.003});
}

double total(const CountTrace& t) { return std::accumulate(t.counts.begin(), t.counts.end(), 0.0); }

}  // namespace

// Published known-answer vectors for Philox4x32 with 10 rounds.
TEST(Philox, KnownAnswers) {
  using P = Philox4x32;
  EXPECT_EQ(P::block({0, 0, 0, 0}, {0, 0}), (P::Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(P::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (P::Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(P::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (P::Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, FirstWordsAreBlockZero) {
  Philox4x32 g(0, 0);
  const auto b = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(g.next_u32(), b[static_cast<std::size_t>(i)]);
  const auto b1 = Philox4x32::block({1, 0, 0, 0}, {0, 0});
  EXPECT_EQ(g.next_u32(), b1[0]);
}

TEST(Philox, StreamsAndSeedsDiffer) {
  Philox4x32 a(1, 0), b(1, 1), c(2, 0), a2(1, 0);
  const auto x = a.next_u32();
  EXPECT_NE(x, b.next_u32());
  EXPECT_NE(x, c.next_u32());
  EXPECT_EQ(x, a2.next_u32());
}

TEST(Philox, UniformOpenInterval) {
  Philox4x32 g(3, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n) * 1.5);
}

TEST(Philox, PoissonMeanAndVariance) {
  for (double mean : {0.3, 4.0, 9.9, 10.0, 57.0, 4430.0}) {
    Philox4x32 g(17, 5);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(g.poisson(mean));
      s += k;
      s2 += k * k;
    }
    const double m = s / n, var = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 4.0 * std::sqrt(mean / n)) << mean;
    // Var of the sample variance ~ (2 mean^2 + mean) / n.
    EXPECT_NEAR(var, mean, 4.0 * std::sqrt((2 * mean * mean + mean) / n)) << mean;
  }
}

TEST(Philox, ExponentialMean) {
  Philox4x32 g(4, 2);
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += g.exponential(2.5);
  EXPECT_NEAR(s / n, 0.4, 4.0 * 0.4 / std::sqrt(n));
}

TEST(EmitterModel, Validation) {
  EmitterModel m;
  EXPECT_NO_THROW(m.validate());
  m.detection_efficiency[1] = 1.5;
  EXPECT_THROW(m.validate(), DomainError);
  m.detection_efficiency[1] = 1.0;
  m.off_rate = -1.0;
  EXPECT_THROW(m.validate(), DomainError);
}

TEST(EmitterStream, BackgroundOnlyWithoutExcitation) {
  EmitterModel m;
  m.background_rate = {2000.0, 0.0};
  const auto s = simulate_emitter_stream(m, 5.0, {9});
  EXPECT_NEAR(static_cast<double>(s.times.size()), 10000.0, 3.0 * 100.0);
  m.background_rate = {0.0, 0.0};
  EXPECT_TRUE(simulate_emitter_stream(m, 5.0, {9}).times.empty());
}

TEST(EmitterStream, RenewalRateWithoutBlinking) {
  EmitterModel m;
  m.excitation_rate = 5e5;
  m.decay_lifetime = 1e-6;
  m.detection_efficiency = {0.4, 1.0};
  const double duration = 2.0;
  const auto s = simulate_emitter_stream(m, duration, {21});
  const double expected = m.on_emission_rate() * duration * 0.4;
  EXPECT_NEAR(static_cast<double>(s.times.size()), expected, 3.0 * std::sqrt(expected));
  for (std::size_t i = 1; i < s.times.size(); ++i) ASSERT_GT(s.times[i], s.times[i - 1]);
}

TEST(EmitterStream, RenewalRateWithBlinking) {
  EmitterModel m;
  m.excitation_rate = 1e5;
  m.decay_lifetime = 10e-9;
  m.on_rate = 200.0;
  m.off_rate = 300.0;
  const double duration = 20.0;
  const auto s = simulate_emitter_stream(m, duration, {5});
  const double rate = m.on_emission_rate();
  const double p = m.duty_cycle();
  const double expected = rate * p * duration;
  // Telegraph contribution: Var(T_on) ~ 2 p (1 - p) T / (k_on + k_off).
  const double var_on = 2.0 * p * (1.0 - p) * duration / (m.on_rate + m.off_rate);
  EXPECT_NEAR(static_cast<double>(s.times.size()), expected, 3.0 * std::sqrt(expected + rate * rate * var_on));
}

TEST(EmitterStream, Reproducible) {
  EmitterModel m;
  m.excitation_rate = 1e6;
  m.decay_lifetime = 5e-9;
  m.on_rate = 3.0;
  m.off_rate = 2.0;
  m.background_rate = {500.0, 0.0};
  const auto a = simulate_emitter_stream(m, 1.0, {77});
  const auto b = simulate_emitter_stream(m, 1.0, {77});
  const auto c = simulate_emitter_stream(m, 1.0, {78});
  EXPECT_EQ(a.times, b.times);
  EXPECT_NE(a.times, c.times);
}

TEST(EmitterStream, AntibunchedAfterSplit) {
  EmitterModel m;
  m.excitation_rate = 1e7;
  m.decay_lifetime = 20e-9;
  const auto s = simulate_emitter_stream(m, 0.2, {13});
  const auto [a, b] = split_stream(s, 0.5, {13});
  const auto g2 = g2_histogram(a, b, 100e-9, 1e-9);
  EXPECT_LT(g2.dip, 0.1);
  EXPECT_TRUE(g2.single_emitter);
}

TEST(SplitStream, PartitionAndEdgeRatios) {
  EmitterModel m;
  m.background_rate = {1e4, 0.0};
  const auto s = simulate_emitter_stream(m, 3.0, {2});
  const auto [none, all] = split_stream(s, 0.0, {1});
  EXPECT_TRUE(none.times.empty());
  EXPECT_EQ(all.times, s.times);

  const auto [a, b] = split_stream(s, 0.5, {1});
  const double n = static_cast<double>(s.times.size());
  EXPECT_LT(std::abs(static_cast<double>(a.times.size()) - static_cast<double>(b.times.size())), 3.0 * std::sqrt(n));
  std::vector<double> merged(a.times);
  merged.insert(merged.end(), b.times.begin(), b.times.end());
  std::sort(merged.begin(), merged.end());
  EXPECT_EQ(merged, s.times);
  EXPECT_THROW(split_stream(s, 1.5, {1}), DomainError);
}

TEST(DualChannel, ObservedRatioFollowsCalibration) {
  EmitterModel m;
  m.excitation_rate = 1.0 / (1.0 / 1.374e6 - 20e-9);
  m.decay_lifetime = 20e-9;
  m.detection_efficiency = {0.65, 0.65};
  const auto cal = reference_calibration();
  const auto t = simulate_dual_channel(0.2, cal, m, 60.0, 0.1, {3});
  // n_r/n_g = ((1 - eta)/eta) / C with C = kappa_g / (2 kappa_r eta_r).
  EXPECT_NEAR(t.radiation_on_rate / t.guided_on_rate, 4.0 / cal.C.value, 1e-12);
  EXPECT_NEAR(4.0 / cal.C.value, 0.561, 1e-3);
  EXPECT_NEAR(t.guided_on_rate, 44.3e3, 100.0);
  EXPECT_NEAR(total(t.radiation) / total(t.guided), 4.0 / cal.C.value, 0.01);
  EXPECT_EQ(t.guided.size(), 600u);
}

TEST(DualChannel, AllGuidedLeavesBackgroundOnly) {
  EmitterModel m;
  m.excitation_rate = 1e6;
  m.background_rate = {100.0, 300.0};
  const auto t = simulate_dual_channel(1.0, reference_calibration(), m, 100.0, 0.1, {8});
  EXPECT_EQ(t.radiation_on_rate, 0.0);
  EXPECT_NEAR(total(t.radiation), 300.0 * 100.0, 3.0 * std::sqrt(3e4));
}

TEST(DualChannel, SymmetricPathsGiveEqualRates) {
  EmitterModel m;
  m.excitation_rate = 1e6;
  const auto cal = make_calibration({0.6, 0.0}, {0.5, 0.0}, {0.6, 0.0});
  const auto t = simulate_dual_channel(0.5, cal, m, 100.0, 0.1, {8});
  EXPECT_NEAR(t.guided_on_rate, t.radiation_on_rate, 1e-9 * t.guided_on_rate);
  const double g = total(t.guided), r = total(t.radiation);
  EXPECT_NEAR(g, r, 4.0 * std::sqrt(g + r));
}

TEST(DualChannel, ReproducibleAndValidated) {
  EmitterModel m;
  m.excitation_rate = 1e6;
  m.on_rate = 0.2;
  m.off_rate = 0.3;
  m.brightness_jitter = 0.1;
  const auto cal = reference_calibration();
  const auto a = simulate_dual_channel(0.3, cal, m, 50.0, 0.1, {99});
  const auto b = simulate_dual_channel(0.3, cal, m, 50.0, 0.1, {99});
  EXPECT_EQ(a.guided.counts, b.guided.counts);
  EXPECT_EQ(a.radiation.counts, b.radiation.counts);
  EXPECT_THROW(simulate_dual_channel(1.2, cal, m, 50.0, 0.1, {1}), DomainError);
  EXPECT_THROW(simulate_dual_channel(0.2, cal, m, 50.0, 0.0, {1}), DomainError);
}
