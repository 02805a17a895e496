#pragma once

// Seeded Monte-Carlo photon streams and count traces with known ground
// truth: telegraph blinking, antibunched two-level emission and the
// two-path detection model used by the calibration.

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "nfc/calibration.hpp"
#include "nfc/trace_analysis.hpp"

namespace nfc {

/// Philox4x32-10 counter-based generator (Salmon et al. constants).
/// A (key, counter) pair fully determines the output block, so streams are
/// reproducible across platforms and independent of thread scheduling.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr const char* kName = "philox4x32-10";

  /// Stream `stream` of `seed`: key = seed, counter high words = stream.
  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static Block block(Block counter, Key key);

  std::uint32_t next_u32();
  /// Uniform on (0, 1), 53-bit resolution, never 0 or 1.
  double uniform();
  double exponential(double rate);
  double normal();
  /// Poisson variate: inversion below mean 10, PTRS transformed rejection above.
  std::uint64_t poisson(double mean);

 private:
  Key key_;
  Block counter_;
  Block buffer_{};
  int used_ = 4;
};

struct SimulationSeed {
  std::uint64_t value = 0;
  std::string generator = Philox4x32::kName;
};

struct EmitterModel {
  double excitation_rate = 0.0;  // 1/s, ground -> excited
  double decay_lifetime = 0.0;   // s
  double on_rate = 0.0;          // 1/s, off -> on; with off_rate = 0 the emitter never blinks
  double off_rate = 0.0;         // 1/s, on -> off
  std::array<double, 2> detection_efficiency{1.0, 1.0};  // per channel
  std::array<double, 2> background_rate{0.0, 0.0};       // counts/s per channel
  double brightness_jitter = 0.0;  // relative rms of the per-bin on-state brightness

  /// Throws DomainError on negative rates or efficiencies outside [0, 1].
  void validate() const;
  /// Photons per second while on: 1 / (1/excitation_rate + decay_lifetime).
  double on_emission_rate() const;
  /// Long-run fraction of time spent on.
  double duty_cycle() const;
};

/// Detected photons (channel 0 parameters) of a blinking two-level emitter plus
/// background. Strictly increasing.
TimestampStream simulate_emitter_stream(const EmitterModel& model, double duration,
                                        const SimulationSeed& seed);

/// Route each event to the first output with probability `ratio`.
std::pair<TimestampStream, TimestampStream> split_stream(const TimestampStream& stream,
                                                         double ratio, const SimulationSeed& seed);

struct DualChannelTraces {
  CountTrace guided;
  CountTrace radiation;
  double guided_on_rate = 0.0;     // expected on-state counts/s without background
  double radiation_on_rate = 0.0;
};

/// Binned traces of the two detection paths sharing one blinking history.
/// On-state rates: guided = 1/2 eff0 kappa_g eta_c R, radiation =
/// eff1 kappa_r eta_r (1 - eta_c) R, with R = model.on_emission_rate().
DualChannelTraces simulate_dual_channel(double eta_c_true, const CalibrationConstants& calib,
                                        const EmitterModel& model, double duration,
                                        double bin_width, const SimulationSeed& seed);

}  // namespace nfc
