#pragma once

// Photon-count trace reduction: blinking levels, histogram Gaussian fits,
// channeling efficiency from observed rates, g2 cross-correlation and
// peak finding on position scans.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfc/calibration.hpp"
#include "nfc/measured_value.hpp"

namespace nfc {

enum class TraceAxis { time, position };

/// Uniformly binned counts. For time traces bin_width is in seconds; for
/// position scans it is the sample step in micrometres.
struct CountTrace {
  TraceAxis axis = TraceAxis::time;
  double bin_width = 0.1;
  double start = 0.0;
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  double coordinate(std::size_t i) const { return start + bin_width * static_cast<double>(i); }
  /// counts / bin_width / 1000 (kcps); time traces only.
  std::vector<double> rates_kcps() const;
};

// CSV: optional header "time_s,counts" or "position_um,counts", '#' comments.
// save_trace also writes "# bin_width = ..." so a reload is exact.
CountTrace read_trace(std::istream& in);
CountTrace load_trace(const std::string& path);
void write_trace(std::ostream& out, const CountTrace& trace);
void save_trace(const std::string& path, const CountTrace& trace);

struct Segment {
  std::size_t start_bin = 0;
  std::size_t end_bin = 0;  // exclusive
  std::size_t level = 0;
};

struct BlinkSegmentation {
  std::vector<double> level_values;  // kcps, ascending
  std::vector<Segment> segments;     // partition of the trace
  bool has_background = true;  // the lowest level is background
  int emitter_count = 0;        // levels above background
};

struct LevelOptions {
  double histogram_bin = 1.0;   // kcps
  double min_separation = 3.0;  // kcps between histogram modes
  std::size_t min_dwell = 3;    // bins
  std::size_t min_bins = 20;
  double min_peak_fraction = 0.03;  // of the tallest smoothed histogram peak
  // When set, the lowest level counts as background only if it lies within
  // min_separation of this rate.
  std::optional<double> background_hint;
};

/// Throws InsufficientDataError below opts.min_bins bins.
BlinkSegmentation detect_levels(const CountTrace& trace, const LevelOptions& opts = {});

struct GaussianFit {
  double amplitude = 0.0;  // peak height, histogram counts per bin
  double mean = 0.0;       // kcps
  double sigma = 0.0;      // width, kcps
  double mean_error = 0.0; // sigma / sqrt(samples)
  double fit_residual = 0.0;  // rms residual / peak height
  std::size_t samples = 0;
};

struct FitOptions {
  double histogram_bin = 1.0;  // kcps
  bool mixture = true;         // false: fit each level on its own segments only
  double max_residual = 0.5;
  LevelOptions levels;
};

/// One fit per detected level, ascending in mean. Throws FitError when a
/// histogram is degenerate or the fit does not meet max_residual.
std::vector<GaussianFit> fit_count_histogram(const CountTrace& trace, const FitOptions& opts = {});

struct EfficiencyResult {
  MeasuredValue n_g_obs;
  MeasuredValue n_r_obs;
  MeasuredValue C;
  MeasuredValue ratio_nr_over_ng;
  MeasuredValue eta_c;
};

/// ratio = (n_r_obs / n_g_obs) C and eta_c = 1 / (1 + ratio), with
/// sigma_eta = sigma_ratio / (1 + ratio)^2.
EfficiencyResult channeling_from_counts(const MeasuredValue& n_g_obs, const MeasuredValue& n_r_obs,
                                        const MeasuredValue& C,
                                        Propagation mode = Propagation::linear);

struct ChannelAnalysis {
  BlinkSegmentation segmentation;
  std::vector<GaussianFit> fits;
  MeasuredValue on_state;  // kcps
};

struct AnalysisOptions {
  FitOptions fit;
  bool count_sigma = false;          // sigma of n_obs: fit width (false) or error of the mean
  bool subtract_background = false;  // subtract the background level from the on-state
  Propagation propagation = Propagation::linear;
};

struct AnalysisResult {
  ChannelAnalysis guided;
  ChannelAnalysis radiation;
  EfficiencyResult efficiency;
};

/// Segment and fit both traces, take the first level above background as
/// the on-state, and reduce with the calibration constant.
AnalysisResult analyze_traces(const CountTrace& guided, const CountTrace& radiation,
                              const MeasuredValue& C, const AnalysisOptions& opts = {});

struct TimestampStream {
  std::vector<double> times;  // s, strictly increasing
  int channel = 0;
};

/// Throws SchemaError if times are not strictly increasing.
void validate_stream(const TimestampStream& s);

// One decimal time per line; '#' comments allowed. The channel is taken
// from a "_ch1"/"_ch2" suffix of the file stem (0 when absent).
TimestampStream read_timestamps(std::istream& in, int channel = 0);
TimestampStream load_timestamps(const std::string& path);
void write_timestamps(std::ostream& out, const TimestampStream& s);
void save_timestamps(const std::string& path, const TimestampStream& s);

struct G2Options {
  // Restrict to these (start, end) windows, e.g. on-state periods. Empty =
  // whole streams. Rates and duration then refer to the windows only.
  std::vector<std::pair<double, double>> windows;
  double single_emitter_threshold = 0.5;
};

struct G2Result {
  std::vector<double> tau;          // bin centres, s
  std::vector<double> g2;
  std::vector<std::uint64_t> coincidences;
  double dip = 0.0;                 // g2 of the bin centred on zero delay
  double rate_a = 0.0, rate_b = 0.0;  // 1/s
  double duration = 0.0;            // s
  bool single_emitter = false;      // dip < threshold
};

/// Cross-correlation histogram of b relative to a, bins of width tau_bin
/// centred on k tau_bin for |k tau_bin| <= max_tau, normalized by
/// rate_a rate_b duration tau_bin.
G2Result g2_histogram(const TimestampStream& a, const TimestampStream& b, double max_tau,
                      double tau_bin, const G2Options& opts = {});

struct Peak {
  double position = 0.0;  // axis units
  double height = 0.0;    // above the local background
  double fwhm = 0.0;
  double sigma = 0.0;
  double background = 0.0;
};

struct PeakOptions {
  double prominence = 0.0;  // minimum height above background; 0 = 5 x robust noise
  double window_fwhm = 4.0; // fit window half-width in units of the seed FWHM
};

/// Peaks of a position scan, each refined by a Gaussian-plus-constant fit.
std::vector<Peak> find_peaks(const CountTrace& scan, const PeakOptions& opts = {});

}  // namespace nfc
