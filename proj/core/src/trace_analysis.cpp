#include "nfc/trace_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nfc/errors.hpp"
#include "nfc/numerics.hpp"

namespace nfc {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;
constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<double> counts;

  double edge(std::size_t j) const { return lo + width * static_cast<double>(j); }
  double centre(std::size_t j) const { return lo + width * (static_cast<double>(j) + 0.5); }
};

// Bins aligned to multiples of `width`, padded with `pad` empty bins per side.
Histogram make_histogram(const std::vector<double>& values, double width, int pad) {
  Histogram h;
  h.width = width;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  h.lo = (std::floor(*mn / width) - pad) * width;
  const auto n = static_cast<std::size_t>(std::floor((*mx - h.lo) / width)) + 1 + pad;
  h.counts.assign(n, 0.0);
  for (double v : values) {
    auto j = static_cast<std::size_t>(std::floor((v - h.lo) / width));
    h.counts[std::min(j, n - 1)] += 1.0;
  }
  return h;
}

std::vector<double> smooth3(const std::vector<double>& v) {
  std::vector<double> s(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double l = j > 0 ? v[j - 1] : 0.0;
    const double r = j + 1 < v.size() ? v[j + 1] : 0.0;
    s[j] = (l + v[j] + r) / 3.0;
  }
  return s;
}

// Histogram modes: local maxima at least min_separation apart, tall enough,
// and separated from taller modes by a clear valley.
std::vector<double> histogram_modes(const Histogram& h, const LevelOptions& opts) {
  const std::vector<double> s = smooth3(h.counts);
  std::vector<std::size_t> cand;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double l = j > 0 ? s[j - 1] : 0.0;
    const double r = j + 1 < s.size() ? s[j + 1] : 0.0;
    if (s[j] > l && s[j] >= r) cand.push_back(j);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  std::vector<std::size_t> kept;
  const double tallest = cand.empty() ? 0.0 : s[cand.front()];
  for (std::size_t j : cand) {
    if (s[j] < opts.min_peak_fraction * tallest || s[j] < 1.0) continue;
    bool ok = true;
    for (std::size_t k : kept) {
      if (std::abs(h.centre(j) - h.centre(k)) < opts.min_separation) {
        ok = false;
        break;
      }
      const auto [lo, hi] = std::minmax(j, k);
      const double valley = *std::min_element(s.begin() + lo, s.begin() + hi + 1);
      if (valley > 0.6 * s[j]) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(j);
  }
  std::vector<double> modes;
  for (std::size_t j : kept) modes.push_back(h.centre(j));
  std::sort(modes.begin(), modes.end());
  return modes;
}

std::size_t nearest(const std::vector<double>& levels, double v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (std::abs(v - levels[k]) < std::abs(v - levels[best])) best = k;
  }
  return best;
}

struct Run {
  std::size_t start, end, level;
};

std::vector<Run> runs_of(const std::vector<std::size_t>& labels) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (runs.empty() || runs.back().level != labels[i]) {
      runs.push_back({i, i + 1, labels[i]});
    } else {
      runs.back().end = i + 1;
    }
  }
  return runs;
}

// Absorb runs shorter than min_dwell into the neighbour whose level is
// closer to the run's mean rate, shortest runs first.
void apply_min_dwell(std::vector<std::size_t>& labels, const std::vector<double>& rates,
                     const std::vector<double>& levels, std::size_t min_dwell) {
  while (true) {
    std::vector<Run> runs = runs_of(labels);
    if (runs.size() <= 1) return;
    std::size_t pick = runs.size();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::size_t len = runs[i].end - runs[i].start;
      if (len < min_dwell && (pick == runs.size() || len < runs[pick].end - runs[pick].start)) {
        pick = i;
      }
    }
    if (pick == runs.size()) return;
    const Run& r = runs[pick];
    double mean = 0.0;
    for (std::size_t i = r.start; i < r.end; ++i) mean += rates[i];
    mean /= static_cast<double>(r.end - r.start);
    std::size_t target;
    if (pick == 0) {
      target = runs[1].level;
    } else if (pick + 1 == runs.size()) {
      target = runs[pick - 1].level;
    } else {
      const std::size_t a = runs[pick - 1].level, b = runs[pick + 1].level;
      target = std::abs(mean - levels[a]) <= std::abs(mean - levels[b]) ? a : b;
    }
    for (std::size_t i = r.start; i < r.end; ++i) labels[i] = target;
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / kSqrt2Pi; }

struct Moments {
  double mean = 0.0, sd = 0.0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return m;
}

// Moments after iterative 4-sigma clipping, started from median and MAD.
// Bins straddling a level switch sit far out in the tail and are dropped.
Moments clipped_moments(const std::vector<double>& v) {
  if (v.size() < 4) return moments(v);
  std::vector<double> tmp(v);
  auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
  std::nth_element(tmp.begin(), mid, tmp.end());
  double centre = *mid;
  for (double& x : tmp) x = std::abs(x - centre);
  std::nth_element(tmp.begin(), mid, tmp.end());
  double spread = 1.4826 * *mid;
  Moments m = moments(v);
  if (!(spread > 0.0)) return m;
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<double> kept;
    for (double x : v) {
      if (std::abs(x - centre) <= 4.0 * spread) kept.push_back(x);
    }
    const Moments next = moments(kept);
    const bool done = next.n == m.n && iter > 0;
    m = next;
    if (done || m.n < 2) break;
    centre = m.mean;
    spread = m.sd;
  }
  m.n = v.size();
  return m;
}

// Least-squares fit of a sum of bin-integrated Gaussians to a histogram.
// params per component: (height, mean, sigma).
std::vector<GaussianFit> fit_components(const Histogram& h, const std::vector<Moments>& seeds) {
  const std::size_t nc = seeds.size();
  const double g = kSqrt2Pi / h.width;
  std::vector<double> p;
  for (const Moments& s : seeds) {
    const double sigma = std::max(s.sd, 0.3 * h.width);
    p.push_back(static_cast<double>(s.n) / (g * sigma));
    p.push_back(s.mean);
    p.push_back(sigma);
  }
  const std::size_t nb = h.counts.size();
  auto fn = [&](std::span<const double> q, std::span<double> r, std::span<double> jac) {
    for (std::size_t j = 0; j < nb; ++j) r[j] = -h.counts[j];
    if (!jac.empty()) std::fill(jac.begin(), jac.end(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      const double amp = q[3 * c], mu = q[3 * c + 1], s_raw = q[3 * c + 2];
      const double sig = std::max(std::abs(s_raw), 1e-12);
      const double sgn = s_raw < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < nb; ++j) {
        const double a = (h.edge(j) - mu) / sig, b = (h.edge(j + 1) - mu) / sig;
        const double dphi = normal_cdf(b) - normal_cdf(a);
        const double pa = normal_pdf(a), pb = normal_pdf(b);
        r[j] += amp * g * sig * dphi;
        if (!jac.empty()) {
          double* row = &jac[j * 3 * nc + 3 * c];
          row[0] = g * sig * dphi;
          row[1] = amp * g * (pa - pb);
          row[2] = sgn * amp * g * (dphi - b * pb + a * pa);
        }
      }
    }
  };
  const numerics::LeastSquaresResult res = numerics::levenberg_marquardt(fn, p, nb);
  const double peak = *std::max_element(h.counts.begin(), h.counts.end());
  const double rms = std::sqrt(res.sum_squares / static_cast<double>(nb));
  std::vector<GaussianFit> out;
  for (std::size_t c = 0; c < nc; ++c) {
    GaussianFit f;
    f.amplitude = res.params[3 * c];
    f.mean = res.params[3 * c + 1];
    f.sigma = std::abs(res.params[3 * c + 2]);
    f.samples = seeds[c].n;
    // A component narrower than a quarter bin is not resolved by the
    // histogram; fall back to the (clipped) sample moments of its level.
    const double resolve = 0.25 * h.width;
    if (f.sigma < resolve || seeds[c].sd < resolve || !std::isfinite(f.mean) || !(f.amplitude > 0.0)) {
      f.mean = seeds[c].mean;
      f.sigma = seeds[c].sd;
    }
    f.mean_error = f.samples > 0 ? f.sigma / std::sqrt(static_cast<double>(f.samples)) : 0.0;
    f.fit_residual = peak > 0.0 ? rms / peak : 0.0;
    out.push_back(f);
  }
  return out;
}

}  // namespace

BlinkSegmentation detect_levels(const CountTrace& trace, const LevelOptions& opts) {
  if (trace.size() < opts.min_bins) {
    throw InsufficientDataError("level detection needs at least " +
                                std::to_string(opts.min_bins) + " bins");
  }
  const std::vector<double> rates = trace.rates_kcps();
  const Histogram h = make_histogram(rates, opts.histogram_bin, 1);
  std::vector<double> levels = histogram_modes(h, opts);
  if (levels.empty()) levels.push_back(moments(rates).mean);

  std::vector<std::size_t> labels(rates.size());
  for (int iter = 0; iter < 50; ++iter) {
    for (std::size_t i = 0; i < rates.size(); ++i) labels[i] = nearest(levels, rates[i]);
    std::vector<double> sum(levels.size(), 0.0), n(levels.size(), 0.0);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      sum[labels[i]] += rates[i];
      n[labels[i]] += 1.0;
    }
    std::vector<double> next;
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (n[k] > 0.0) next.push_back(sum[k] / n[k]);
    }
    if (next == levels) break;
    levels = next;
  }
  for (std::size_t i = 0; i < rates.size(); ++i) labels[i] = nearest(levels, rates[i]);
  apply_min_dwell(labels, rates, levels, opts.min_dwell);

  // Final level values from the filtered assignment; drop levels left empty.
  std::vector<double> sum(levels.size(), 0.0), n(levels.size(), 0.0);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    sum[labels[i]] += rates[i];
    n[labels[i]] += 1.0;
  }
  std::vector<std::size_t> remap(levels.size(), 0);
  BlinkSegmentation seg;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (n[k] > 0.0) {
      remap[k] = seg.level_values.size();
      seg.level_values.push_back(sum[k] / n[k]);
    }
  }
  for (const Run& r : runs_of(labels)) seg.segments.push_back({r.start, r.end, remap[r.level]});

  const auto levels_n = static_cast<int>(seg.level_values.size());
  seg.has_background = true;
  if (opts.background_hint &&
      seg.level_values.front() - *opts.background_hint > opts.min_separation) {
    seg.has_background = false;
  }
  seg.emitter_count = seg.has_background ? levels_n - 1 : levels_n;
  return seg;
}

std::vector<GaussianFit> fit_count_histogram(const CountTrace& trace, const FitOptions& opts) {
  if (trace.size() == 0) throw InsufficientDataError("empty trace");
  const std::vector<double> rates = trace.rates_kcps();
  LevelOptions lo = opts.levels;
  lo.histogram_bin = opts.histogram_bin;
  const BlinkSegmentation seg = detect_levels(trace, lo);

  std::vector<std::vector<double>> members(seg.level_values.size());
  for (const Segment& s : seg.segments) {
    for (std::size_t i = s.start_bin; i < s.end_bin; ++i) members[s.level].push_back(rates[i]);
  }

  const Histogram all = make_histogram(rates, opts.histogram_bin, 3);
  const auto occupied = std::count_if(all.counts.begin(), all.counts.end(),
                                      [](double c) { return c > 0.0; });
  if (occupied < 2) throw FitError("degenerate histogram: a single occupied bin");

  std::vector<GaussianFit> fits;
  if (opts.mixture) {
    std::vector<Moments> seeds;
    for (const auto& m : members) seeds.push_back(clipped_moments(m));
    fits = fit_components(all, seeds);
    // A joint fit can trade one component off against another; any that
    // wandered from its level is refit on its own bins.
    for (std::size_t c = 0; c < fits.size(); ++c) {
      const double slack = std::max(3.0 * seeds[c].sd, opts.histogram_bin);
      if (fits[c].amplitude > 0.0 && std::abs(fits[c].mean - seeds[c].mean) <= slack) continue;
      const Histogram h = make_histogram(members[c], opts.histogram_bin, 3);
      fits[c] = fit_components(h, {seeds[c]}).front();
    }
  } else {
    for (const auto& m : members) {
      const Histogram h = make_histogram(m, opts.histogram_bin, 3);
      fits.push_back(fit_components(h, {clipped_moments(m)}).front());
    }
  }
  for (const GaussianFit& f : fits) {
    if (!(f.fit_residual <= opts.max_residual) || !(f.sigma > 0.0)) {
      throw FitError("histogram fit did not converge to an acceptable residual");
    }
  }
  return fits;
}

EfficiencyResult channeling_from_counts(const MeasuredValue& n_g_obs, const MeasuredValue& n_r_obs,
                                        const MeasuredValue& C, Propagation mode) {
  if (!(n_g_obs.value > 0.0)) throw DomainError("guided count rate must be positive");
  if (n_r_obs.value < 0.0 || C.value < 0.0) throw DomainError("negative rate or calibration");
  EfficiencyResult r;
  r.n_g_obs = n_g_obs;
  r.n_r_obs = n_r_obs;
  r.C = C;
  r.ratio_nr_over_ng = monomial(1.0, {{n_r_obs, 1.0}, {n_g_obs, -1.0}, {C, 1.0}}, mode);
  r.ratio_nr_over_ng.label = "n_r/n_g";
  const double ratio = r.ratio_nr_over_ng.value;
  const double eta = 1.0 / (1.0 + ratio);
  r.eta_c = MeasuredValue(eta, r.ratio_nr_over_ng.sigma * eta * eta, "eta_c");
  return r;
}

AnalysisResult analyze_traces(const CountTrace& guided, const CountTrace& radiation,
                              const MeasuredValue& C, const AnalysisOptions& opts) {
  auto channel = [&](const CountTrace& t, const char* name) {
    ChannelAnalysis a;
    LevelOptions lo = opts.fit.levels;
    lo.histogram_bin = opts.fit.histogram_bin;
    a.segmentation = detect_levels(t, lo);
    if (a.segmentation.emitter_count < 1) {
      throw InsufficientDataError(std::string(name) + " trace shows no level above background");
    }
    a.fits = fit_count_histogram(t, opts.fit);
    const std::size_t on = a.segmentation.has_background ? 1 : 0;
    const GaussianFit& f = a.fits[on];
    double value = f.mean;
    if (opts.subtract_background && a.segmentation.has_background) value -= a.fits[0].mean;
    a.on_state = MeasuredValue(value, opts.count_sigma ? f.mean_error : f.sigma, name);
    return a;
  };
  AnalysisResult r;
  r.guided = channel(guided, "n_g_obs");
  r.radiation = channel(radiation, "n_r_obs");
  r.efficiency =
      channeling_from_counts(r.guided.on_state, r.radiation.on_state, C, opts.propagation);
  return r;
}

G2Result g2_histogram(const TimestampStream& a, const TimestampStream& b, double max_tau,
                      double tau_bin, const G2Options& opts) {
  if (a.times.empty() || b.times.empty()) throw DomainError("g2: empty timestamp stream");
  if (!(tau_bin > 0.0) || !(max_tau >= tau_bin)) {
    throw DomainError("g2: need tau_bin > 0 and max_tau >= tau_bin");
  }
  validate_stream(a);
  validate_stream(b);

  // Window index per event, -1 when outside every window.
  auto window_of = [&](double t) -> int {
    for (std::size_t w = 0; w < opts.windows.size(); ++w) {
      if (t >= opts.windows[w].first && t < opts.windows[w].second) return static_cast<int>(w);
    }
    return -1;
  };
  std::vector<double> ta, tb;
  std::vector<int> wa, wb;
  for (double t : a.times) {
    const int w = opts.windows.empty() ? 0 : window_of(t);
    if (w >= 0) {
      ta.push_back(t);
      wa.push_back(w);
    }
  }
  for (double t : b.times) {
    const int w = opts.windows.empty() ? 0 : window_of(t);
    if (w >= 0) {
      tb.push_back(t);
      wb.push_back(w);
    }
  }
  if (ta.empty() || tb.empty()) throw DomainError("g2: no events inside the windows");

  double duration = 0.0;
  if (opts.windows.empty()) {
    duration = std::max(ta.back(), tb.back()) - std::min(ta.front(), tb.front());
  } else {
    for (const auto& [s, e] : opts.windows) duration += std::max(0.0, e - s);
  }
  if (!(duration > 0.0)) throw DomainError("g2: zero duration");

  const auto k_max = static_cast<long>(std::floor(max_tau / tau_bin + 1e-9));
  const std::size_t nbins = static_cast<std::size_t>(2 * k_max + 1);
  G2Result r;
  r.coincidences.assign(nbins, 0);
  const double reach = (static_cast<double>(k_max) + 0.5) * tau_bin;
  std::size_t j0 = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    while (j0 < tb.size() && tb[j0] < ta[i] - reach) ++j0;
    for (std::size_t j = j0; j < tb.size() && tb[j] < ta[i] + reach; ++j) {
      if (wa[i] != wb[j]) continue;
      const auto k = static_cast<long>(std::floor((tb[j] - ta[i]) / tau_bin + 0.5));
      if (k >= -k_max && k <= k_max) ++r.coincidences[static_cast<std::size_t>(k + k_max)];
    }
  }
  r.duration = duration;
  r.rate_a = static_cast<double>(ta.size()) / duration;
  r.rate_b = static_cast<double>(tb.size()) / duration;
  const double expected = r.rate_a * r.rate_b * duration * tau_bin;
  for (std::size_t k = 0; k < nbins; ++k) {
    r.tau.push_back((static_cast<double>(k) - static_cast<double>(k_max)) * tau_bin);
    r.g2.push_back(static_cast<double>(r.coincidences[k]) / expected);
  }
  r.dip = r.g2[static_cast<std::size_t>(k_max)];
  r.single_emitter = r.dip < opts.single_emitter_threshold;
  return r;
}

std::vector<Peak> find_peaks(const CountTrace& scan, const PeakOptions& opts) {
  std::vector<Peak> peaks;
  const std::size_t n = scan.size();
  if (n < 5) return peaks;
  const std::vector<double>& y = scan.counts;

  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    return v[mid];
  };
  const double bg = median(y);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(y[i] - bg);
  double noise = 1.4826 * median(dev);
  if (!(noise > 0.0)) noise = 1e-12 * (std::abs(bg) + 1.0);
  const double threshold = opts.prominence > 0.0 ? opts.prominence : 5.0 * noise;

  const std::vector<double> s = smooth3(y);
  std::size_t i = 0;
  while (i < n) {
    if (s[i] - bg <= 0.5 * threshold) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < n && s[end] - bg > 0.5 * threshold) ++end;
    const auto top = static_cast<std::size_t>(
        std::max_element(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(end)) -
        s.begin());
    const std::size_t region_end = end;
    i = end;
    if (s[top] - bg < threshold) continue;

    // Seed width from the half-maximum crossings of the smoothed data.
    const double half = 0.5 * (s[top] - bg);
    std::size_t l = top, r = top;
    while (l > 0 && s[l] - bg > half) --l;
    while (r + 1 < n && s[r] - bg > half) ++r;
    const double fwhm0 = std::max(static_cast<double>(r - l), 2.0) * scan.bin_width;
    const double reach = std::max(opts.window_fwhm * fwhm0, 5.0 * scan.bin_width);
    const double x_top = scan.coordinate(top);
    const auto lo = static_cast<std::size_t>(
        std::max(0.0, std::floor(static_cast<double>(top) - reach / scan.bin_width)));
    const std::size_t hi =
        std::min(n, static_cast<std::size_t>(static_cast<double>(top) + reach / scan.bin_width) + 1);
    const std::size_t m = hi - lo;
    if (m < 5) continue;

    auto fn = [&](std::span<const double> q, std::span<double> res, std::span<double> jac) {
      const double amp = q[0], mu = q[1], sig = q[2], base = q[3];
      for (std::size_t k = 0; k < m; ++k) {
        const double x = scan.coordinate(lo + k);
        const double z = (x - mu) / sig;
        const double e = std::exp(-0.5 * z * z);
        res[k] = base + amp * e - y[lo + k];
        if (!jac.empty()) {
          jac[4 * k] = e;
          jac[4 * k + 1] = amp * e * z / sig;
          jac[4 * k + 2] = amp * e * z * z / sig;
          jac[4 * k + 3] = 1.0;
        }
      }
    };
    const numerics::LeastSquaresResult fit =
        numerics::levenberg_marquardt(fn, {s[top] - bg, x_top, fwhm0 / kFwhmPerSigma, bg}, m);
    Peak p;
    p.height = fit.params[0];
    p.position = fit.params[1];
    p.sigma = std::abs(fit.params[2]);
    p.background = fit.params[3];
    p.fwhm = kFwhmPerSigma * p.sigma;
    const bool inside = p.position >= scan.coordinate(lo) && p.position <= scan.coordinate(hi - 1);
    if (inside && p.height >= 0.5 * threshold && p.sigma > 0.25 * scan.bin_width &&
        std::isfinite(p.fwhm)) {
      peaks.push_back(p);
    }
    i = std::max(region_end, i);
  }
  return peaks;
}

}  // namespace nfc
