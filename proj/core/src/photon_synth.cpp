#include "nfc/photon_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfc/errors.hpp"

namespace nfc {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

// Independent sub-streams of one seed.
enum Stream : std::uint64_t {
  kTelegraph = 1,
  kEmission = 2,
  kDetection = 3,
  kBackground = 4,
  kJitter = 5,
  kGuidedCounts = 6,
  kRadiationCounts = 7,
  kSplit = 8,
};

// Alternating on/off intervals over [0, duration); returns the on ones.
std::vector<std::pair<double, double>> on_intervals(const EmitterModel& m, double duration,
                                                    Philox4x32& rng) {
  std::vector<std::pair<double, double>> on;
  if (m.off_rate == 0.0) {
    on.emplace_back(0.0, duration);
    return on;
  }
  if (m.on_rate == 0.0) return on;
  bool state = rng.uniform() < m.duty_cycle();
  double t = 0.0;
  while (t < duration) {
    const double dwell = rng.exponential(state ? m.off_rate : m.on_rate);
    const double end = std::min(duration, t + dwell);
    if (state) on.emplace_back(t, end);
    t = end;
    state = !state;
  }
  return on;
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

Philox4x32::Block Philox4x32::block(Block ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint32_t Philox4x32::next_u32() {
  if (used_ == 4) {
    buffer_ = block(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
  }
  return buffer_[used_++];
}

double Philox4x32::uniform() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  const std::uint64_t bits = ((hi << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Philox4x32::exponential(double rate) {
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(rate)) return 0.0;
  return -std::log(uniform()) / rate;
}

double Philox4x32::normal() {
  // Box-Muller, one variate per call.
  const double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Philox4x32::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 10.0) {
    double p = std::exp(-mean);
    double cdf = p;
    const double u = uniform();
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  // Hormann's PTRS.
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

void EmitterModel::validate() const {
  if (excitation_rate < 0.0 || decay_lifetime < 0.0 || on_rate < 0.0 || off_rate < 0.0 ||
      brightness_jitter < 0.0) {
    throw DomainError("emitter model: rates, lifetime and jitter must be non-negative");
  }
  for (int c = 0; c < 2; ++c) {
    if (!(detection_efficiency[c] >= 0.0 && detection_efficiency[c] <= 1.0)) {
      throw DomainError("emitter model: detection efficiency outside [0, 1]");
    }
    if (background_rate[c] < 0.0) throw DomainError("emitter model: negative background");
  }
}

double EmitterModel::on_emission_rate() const {
  if (excitation_rate <= 0.0) return 0.0;
  return 1.0 / (1.0 / excitation_rate + decay_lifetime);
}

double EmitterModel::duty_cycle() const {
  if (off_rate == 0.0) return 1.0;
  return on_rate / (on_rate + off_rate);
}

TimestampStream simulate_emitter_stream(const EmitterModel& model, double duration,
                                        const SimulationSeed& seed) {
  model.validate();
  if (!(duration > 0.0)) throw DomainError("simulation duration must be positive");
  Philox4x32 telegraph(seed.value, kTelegraph);
  Philox4x32 emission(seed.value, kEmission);
  Philox4x32 detection(seed.value, kDetection);
  Philox4x32 background(seed.value, kBackground);

  std::vector<double> photons;
  if (model.excitation_rate > 0.0) {
    const double decay_rate = model.decay_lifetime > 0.0
                                  ? 1.0 / model.decay_lifetime
                                  : std::numeric_limits<double>::infinity();
    for (const auto& [start, end] : on_intervals(model, duration, telegraph)) {
      // Each on period starts from the ground state.
      double t = start;
      while (true) {
        t += emission.exponential(model.excitation_rate) + emission.exponential(decay_rate);
        if (t >= end) break;
        if (detection.uniform() < model.detection_efficiency[0]) photons.push_back(t);
      }
    }
  }
  std::vector<double> noise;
  if (model.background_rate[0] > 0.0) {
    for (double t = background.exponential(model.background_rate[0]); t < duration;
         t += background.exponential(model.background_rate[0])) {
      noise.push_back(t);
    }
  }
  TimestampStream out;
  out.channel = 1;
  out.times.resize(photons.size() + noise.size());
  std::merge(photons.begin(), photons.end(), noise.begin(), noise.end(), out.times.begin());
  out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());
  return out;
}

std::pair<TimestampStream, TimestampStream> split_stream(const TimestampStream& stream,
                                                         double ratio, const SimulationSeed& seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw DomainError("split ratio must lie in [0, 1]");
  Philox4x32 rng(seed.value, kSplit);
  std::pair<TimestampStream, TimestampStream> out;
  out.first.channel = 1;
  out.second.channel = 2;
  for (double t : stream.times) {
    (rng.uniform() < ratio ? out.first : out.second).times.push_back(t);
  }
  return out;
}

DualChannelTraces simulate_dual_channel(double eta_c_true, const CalibrationConstants& calib,
                                        const EmitterModel& model, double duration,
                                        double bin_width, const SimulationSeed& seed) {
  model.validate();
  if (!(eta_c_true >= 0.0 && eta_c_true <= 1.0)) throw DomainError("eta_c must lie in [0, 1]");
  if (!(duration > 0.0) || !(bin_width > 0.0) || bin_width > duration) {
    throw DomainError("need 0 < bin_width <= duration");
  }
  Philox4x32 telegraph(seed.value, kTelegraph);
  Philox4x32 jitter(seed.value, kJitter);
  Philox4x32 guided_rng(seed.value, kGuidedCounts);
  Philox4x32 radiation_rng(seed.value, kRadiationCounts);

  const double emission = model.on_emission_rate();
  DualChannelTraces out;
  out.guided_on_rate =
      0.5 * model.detection_efficiency[0] * calib.kappa_g.value * eta_c_true * emission;
  out.radiation_on_rate = model.detection_efficiency[1] * calib.kappa_r.value *
                          calib.eta_r.value * (1.0 - eta_c_true) * emission;

  const auto nbins = static_cast<std::size_t>(std::llround(duration / bin_width));
  std::vector<double> on_fraction(nbins, 0.0);
  for (const auto& [start, end] : on_intervals(model, duration, telegraph)) {
    auto first = static_cast<std::size_t>(start / bin_width);
    for (std::size_t k = first; k < nbins; ++k) {
      const double lo = std::max(start, bin_width * static_cast<double>(k));
      const double hi = std::min(end, bin_width * static_cast<double>(k + 1));
      if (hi <= lo) {
        if (bin_width * static_cast<double>(k) >= end) break;
        continue;
      }
      on_fraction[k] += (hi - lo) / bin_width;
    }
  }

  for (CountTrace* t : {&out.guided, &out.radiation}) {
    t->axis = TraceAxis::time;
    t->bin_width = bin_width;
    t->start = 0.0;
    t->counts.resize(nbins);
  }
  for (std::size_t k = 0; k < nbins; ++k) {
    double bright = 1.0;
    if (model.brightness_jitter > 0.0) {
      bright = std::max(0.0, 1.0 + model.brightness_jitter * jitter.normal());
    }
    const double f = std::min(1.0, on_fraction[k]) * bright;
    out.guided.counts[k] = static_cast<double>(
        guided_rng.poisson(bin_width * (f * out.guided_on_rate + model.background_rate[0])));
    out.radiation.counts[k] = static_cast<double>(
        radiation_rng.poisson(bin_width * (f * out.radiation_on_rate + model.background_rate[1])));
  }
  return out;
}

}  // namespace nfc
