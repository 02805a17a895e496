#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "nfc/calibration.hpp"
#include "nfc/dipole_emission.hpp"
#include "nfc/errors.hpp"
#include "nfc/fiber_modes.hpp"
#include "nfc/photon_synth.hpp"
#include "nfc/trace_analysis.hpp"

namespace nfc::cli {

namespace {

using json = nlohmann::ordered_json;

std::string csv(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json to_json(const MeasuredValue& m) { return {{"value", m.value}, {"sigma", m.sigma}}; }

// Writes to `path`, or to `fallback` when path is empty.
void emit(const std::string& path, std::ostream& fallback,
          const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path + "'");
  body(f);
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string default_config() {
  const char* env = std::getenv(kConfigEnv);
  return env ? env : "";
}

std::string require_config(const std::string& flag) {
  const std::string path = flag.empty() ? default_config() : flag;
  if (path.empty()) {
    throw IoError(std::string("no calibration file: pass --calibration or set ") + kConfigEnv);
  }
  if (!std::filesystem::exists(path)) throw IoError("calibration file '" + path + "' not found");
  return path;
}

json calibration_json(const CalibrationConstants& c) {
  json j;
  j["kappa_g"] = to_json(c.kappa_g);
  j["kappa_r"] = to_json(c.kappa_r);
  j["eta_r"] = to_json(c.eta_r);
  j["detector_ratio"] = to_json(c.detector_ratio);
  j["C"] = to_json(c.C);
  j["propagation"] = to_string(c.propagation);
  if (c.kappa_g_chain) j["kappa_g_chain"] = to_json(*c.kappa_g_chain);
  if (c.kappa_r_chain) j["kappa_r_chain"] = to_json(*c.kappa_r_chain);
  return j;
}

MeasuredValue json_measured(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_object()) {
    throw SchemaError(std::string("calibration JSON lacks object '") + key + "'");
  }
  const json& o = j[key];
  if (!o.contains("value") || !o["value"].is_number()) {
    throw SchemaError(std::string("calibration JSON: ") + key + ".value missing");
  }
  const double sigma = o.contains("sigma") ? o["sigma"].get<double>() : 0.0;
  return MeasuredValue(o["value"].get<double>(), sigma, key);
}

// Key-value calibration file or the JSON written by `calibrate`.
CalibrationConstants read_calibration(const std::string& path, Propagation mode) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("calibration JSON: ") + e.what());
    }
    const MeasuredValue ratio =
        j.contains("detector_ratio") ? json_measured(j, "detector_ratio") : MeasuredValue(1.0, 0.0);
    // Recompute C so --propagation applies; a JSON without inputs keeps its C.
    if (j.contains("kappa_g") && j.contains("kappa_r") && j.contains("eta_r")) {
      return make_calibration(json_measured(j, "kappa_g"), json_measured(j, "kappa_r"),
                              json_measured(j, "eta_r"), ratio, mode);
    }
    CalibrationConstants c;
    c.C = json_measured(j, "C");
    c.propagation = mode;
    return c;
  }
  std::istringstream kv(text);
  return parse_calibration(kv, mode);
}

RadiationQuadratureSpec quad_flags(CLI::App* sub, RadiationQuadratureSpec& q) {
  sub->add_option("--m-max", q.m_max, "Fixed azimuthal truncation (>= 5); 0 = adaptive")
      ->capture_default_str();
  sub->add_option("--nodes", q.nodes, "Initial polar quadrature nodes")->capture_default_str();
  sub->add_option("--max-nodes", q.max_nodes, "Node doubling ceiling")->capture_default_str();
  sub->add_option("--rel-tol", q.rel_tol, "Relative tolerance of node doubling")
      ->capture_default_str();
  return q;
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw DomainError("need at least one grid point");
  if (n == 1) return {lo};
  if (!(hi > lo)) throw DomainError("grid maximum must exceed its minimum");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

json segmentation_json(const BlinkSegmentation& s) {
  json segs = json::array();
  for (const Segment& g : s.segments) segs.push_back({g.start_bin, g.end_bin, g.level});
  return {{"level_values_kcps", s.level_values},
          {"has_background", s.has_background},
          {"emitter_count", s.emitter_count},
          {"segments", segs}};
}

json fit_json(const GaussianFit& f) {
  return {{"amplitude", f.amplitude}, {"mean_kcps", f.mean},         {"sigma_kcps", f.sigma},
          {"mean_error_kcps", f.mean_error}, {"fit_residual", f.fit_residual},
          {"samples", f.samples}};
}

json channel_json(const ChannelAnalysis& a) {
  json fits = json::array();
  for (const auto& f : a.fits) fits.push_back(fit_json(f));
  return {{"segmentation", segmentation_json(a.segmentation)},
          {"fits", fits},
          {"on_state_kcps", to_json(a.on_state)}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channeling efficiency of emitters on optical nanofibers", "nfc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::string propagation = "linear";
  app.add_option("--propagation", propagation, "Uncertainty propagation: linear or quadrature")
      ->check(CLI::IsMember({"linear", "quadrature"}))
      ->capture_default_str();
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads for grid sweeps (0 = all cores)")
      ->capture_default_str();

  // curve
  auto* curve = app.add_subcommand("curve", "Channeling efficiency versus size parameter k0 a");
  CurveOptions curve_opts;
  double x_min = 0.5, x_max = 3.0;
  int x_steps = 50;
  std::string orientation = "isotropic", denominator = "all", curve_out;
  curve->add_option("--n1", curve_opts.core_index, "Core index")->capture_default_str();
  curve->add_option("--n2", curve_opts.clad_index, "Surrounding index")->capture_default_str();
  curve->add_option("--x-min", x_min, "Smallest size parameter")->capture_default_str();
  curve->add_option("--x-max", x_max, "Largest size parameter")->capture_default_str();
  curve->add_option("--steps", x_steps, "Number of grid points")->capture_default_str();
  curve->add_option("--orientation", orientation, "radial, azimuthal, axial or isotropic")
      ->check(CLI::IsMember({"radial", "azimuthal", "axial", "isotropic"}))
      ->capture_default_str();
  curve->add_option("--denominator", denominator, "Guided rate in eta_c: all or he11")
      ->check(CLI::IsMember({"all", "he11"}))
      ->capture_default_str();
  curve->add_option("-o,--output", curve_out, "CSV path (default standard output)");
  quad_flags(curve, curve_opts.quad);

  // modes
  auto* modes = app.add_subcommand("modes", "Guided mode table for one geometry");
  FiberGeometry mode_geom;
  double mode_diameter = 350.0, mode_lambda = 780.0;
  std::string modes_out;
  modes->add_option("--n1", mode_geom.core_index, "Core index")->capture_default_str();
  modes->add_option("--n2", mode_geom.clad_index, "Surrounding index")->capture_default_str();
  modes->add_option("--diameter", mode_diameter, "Fiber diameter, nm")->capture_default_str();
  modes->add_option("--lambda", mode_lambda, "Vacuum wavelength, nm")->capture_default_str();
  modes->add_option("-o,--output", modes_out, "CSV path (default standard output)");

  // enhancement
  auto* enh = app.add_subcommand("enhancement", "Lens enhancement over a diameter sweep");
  EnhancementOptions enh_opts;
  double na = 0.6, enh_lambda = 780.0, d_min = 300.0, d_max = 800.0;
  int d_steps = 11;
  std::string enh_out;
  enh->add_option("--na", na, "Objective numerical aperture")->capture_default_str();
  enh->add_option("--lambda", enh_lambda, "Vacuum wavelength, nm")->capture_default_str();
  enh->add_option("--n1", enh_opts.core_index, "Core index")->capture_default_str();
  enh->add_option("--n2", enh_opts.clad_index, "Surrounding index")->capture_default_str();
  enh->add_option("--d-min", d_min, "Smallest diameter, nm")->capture_default_str();
  enh->add_option("--d-max", d_max, "Largest diameter, nm")->capture_default_str();
  enh->add_option("--steps", d_steps, "Number of diameters")->capture_default_str();
  enh->add_option("--n-phi0", enh_opts.n_phi0, "Emitter azimuths averaged over [0, pi]")
      ->capture_default_str();
  enh->add_option("-o,--output", enh_out, "CSV path (default standard output)");
  quad_flags(enh, enh_opts.quad);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Calibration file to CalibrationConstants JSON");
  std::string cal_in, cal_out;
  cal->add_option("input", cal_in, std::string("Key-value calibration file (default $") +
                                       kConfigEnv + ")")
      ->check(CLI::ExistingFile);
  cal->add_option("-o,--output", cal_out, "JSON path (default standard output)");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Guided and radiation traces to eta_c JSON");
  std::string guided_path, radiation_path, ana_cal, ana_out, fit_mode = "mixture";
  AnalysisOptions ana_opts;
  ana->add_option("--guided", guided_path, "Guided-path trace CSV")
      ->required()
      ->check(CLI::ExistingFile);
  ana->add_option("--radiation", radiation_path, "Radiation-path trace CSV")
      ->required()
      ->check(CLI::ExistingFile);
  ana->add_option("--calibration", ana_cal,
                  std::string("Calibration key-value file or calibrate JSON (default $") +
                      kConfigEnv + ")")
      ->check(CLI::ExistingFile);
  ana->add_option("--fit-mode", fit_mode,
                  "mixture: fit all levels jointly; exclude: each level on its own bins")
      ->check(CLI::IsMember({"mixture", "exclude"}))
      ->capture_default_str();
  ana->add_option("--histogram-bin", ana_opts.fit.histogram_bin, "Histogram bin, kcps")
      ->capture_default_str();
  ana->add_option("--max-residual", ana_opts.fit.max_residual, "Largest accepted fit residual")
      ->capture_default_str();
  ana->add_flag("--count-sigma", ana_opts.count_sigma,
                "Use the standard error of the on-state mean instead of the fitted width");
  ana->add_flag("--subtract-background", ana_opts.subtract_background,
                "Subtract the background level from the on-state rate");
  ana->add_option("-o,--output", ana_out, "JSON path (default standard output)");

  // g2
  auto* g2 = app.add_subcommand("g2", "Cross-correlation of two timestamp files");
  std::string g2_a, g2_b, g2_out;
  double max_tau = 100e-9, tau_bin = 1e-9, g2_threshold = 0.5;
  g2->add_option("a", g2_a, "First channel timestamps")->required()->check(CLI::ExistingFile);
  g2->add_option("b", g2_b, "Second channel timestamps")->required()->check(CLI::ExistingFile);
  g2->add_option("--max-tau", max_tau, "Largest |delay|, s")->capture_default_str();
  g2->add_option("--tau-bin", tau_bin, "Delay bin width, s")->capture_default_str();
  g2->add_option("--threshold", g2_threshold, "Single-emitter dip threshold")
      ->capture_default_str();
  g2->add_option("-o,--output", g2_out, "CSV path (default standard output)");

  // peaks
  auto* peaks = app.add_subcommand("peaks", "Gaussian peaks of a position scan");
  std::string scan_path, peaks_out;
  PeakOptions peak_opts;
  peaks->add_option("scan", scan_path, "Scan CSV (position_um,counts)")
      ->required()
      ->check(CLI::ExistingFile);
  peaks->add_option("--prominence", peak_opts.prominence,
                    "Minimum height above background; 0 = five times the robust noise")
      ->capture_default_str();
  peaks->add_option("--window", peak_opts.window_fwhm, "Fit half-window in seed FWHMs")
      ->capture_default_str();
  peaks->add_option("-o,--output", peaks_out, "CSV path (default standard output)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Synthetic traces or timestamps with known truth");
  std::uint64_t seed = 1;
  EmitterModel model;
  // Defaults give about 44 kcps guided on-state at eta_c = 0.2.
  model.decay_lifetime = 20e-9;
  model.excitation_rate = 1.0 / (1.0 / 1.374e6 - model.decay_lifetime);
  model.on_rate = 0.1;
  model.off_rate = 0.1;
  model.detection_efficiency = {0.65, 0.65};
  model.background_rate = {1000.0, 800.0};
  double duration = 300.0, bin_width = 0.1, eta_true = 0.2, split = 0.5;
  std::string sim_cal, sim_dir = ".", sim_kind = "traces";
  sim->add_option("--seed", seed, "64-bit seed")->capture_default_str();
  sim->add_option("--kind", sim_kind,
                  "traces: guided.csv and radiation.csv; timestamps: stream_ch1/2.txt")
      ->check(CLI::IsMember({"traces", "timestamps"}))
      ->capture_default_str();
  sim->add_option("--duration", duration, "Seconds")->capture_default_str();
  sim->add_option("--bin-width", bin_width, "Trace bin, s")->capture_default_str();
  sim->add_option("--eta-c", eta_true, "True channeling efficiency")->capture_default_str();
  sim->add_option("--excitation-rate", model.excitation_rate, "1/s")->capture_default_str();
  sim->add_option("--lifetime", model.decay_lifetime, "Excited-state lifetime, s")
      ->capture_default_str();
  sim->add_option("--on-rate", model.on_rate, "Off to on switching, 1/s")->capture_default_str();
  sim->add_option("--off-rate", model.off_rate, "On to off switching, 1/s (0 = no blinking)")
      ->capture_default_str();
  sim->add_option("--efficiency-1", model.detection_efficiency[0], "Detector 1 efficiency")
      ->capture_default_str();
  sim->add_option("--efficiency-2", model.detection_efficiency[1], "Detector 2 efficiency")
      ->capture_default_str();
  sim->add_option("--background-1", model.background_rate[0], "Detector 1 background, 1/s")
      ->capture_default_str();
  sim->add_option("--background-2", model.background_rate[1], "Detector 2 background, 1/s")
      ->capture_default_str();
  sim->add_option("--jitter", model.brightness_jitter, "Relative rms of per-bin brightness")
      ->capture_default_str();
  sim->add_option("--split", split, "Fraction routed to channel 1 (timestamps)")
      ->capture_default_str();
  sim->add_option("--calibration", sim_cal,
                  std::string("Calibration file (default $") + kConfigEnv +
                      ", else the built-in reference values)")
      ->check(CLI::ExistingFile);
  sim->add_option("--out-dir", sim_dir, "Output directory")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "nfc: " << e.what() << "\n";
    return kInputFailure;
  }

  try {
    const Propagation mode = parse_propagation(propagation);
    if (*curve) {
      curve_opts.orientation = parse_orientation(orientation);
      curve_opts.denominator = parse_denominator(denominator);
      curve_opts.threads = threads;
      const auto points = efficiency_curve(linspace(x_min, x_max, x_steps), curve_opts);
      emit(curve_out, out, [&](std::ostream& o) {
        o << "x,eta_c,gamma_he11,gamma_guided,gamma_radiation\n";
        for (const auto& p : points) {
          o << csv(p.x) << "," << csv(p.rates.eta_c) << "," << csv(p.rates.gamma_he11) << ","
            << csv(p.rates.gamma_guided) << "," << csv(p.rates.gamma_radiation) << "\n";
        }
      });
    } else if (*modes) {
      mode_geom.radius = 0.5 * mode_diameter * 1e-9;
      const double lambda = mode_lambda * 1e-9;
      const auto list = solve_guided_modes(mode_geom, lambda);
      emit(modes_out, out, [&](std::ostream& o) {
        o << "# x = " << csv(mode_geom.radius * 2.0 * std::numbers::pi / lambda)
          << ", V = " << csv(v_number(mode_geom, lambda)) << "\n";
        o << "mode,l,m,n_eff,u,w,polarizations,dispersion_residual,boundary_mismatch\n";
        for (const auto& m : list) {
          o << m.family.name() << "," << m.family.l << "," << m.family.m << ","
            << csv(m.effective_index()) << "," << csv(m.u) << "," << csv(m.w) << ","
            << m.polarization_count() << "," << csv(dispersion_residual(m, mode_geom)) << ","
            << csv(boundary_mismatch(m, mode_geom)) << "\n";
        }
      });
    } else if (*enh) {
      enh_opts.threads = threads;
      std::vector<double> d = linspace(d_min, d_max, d_steps);
      for (double& v : d) v *= 1e-9;
      const auto sweep = average_enhancement(d, enh_lambda * 1e-9, na, enh_opts);
      emit(enh_out, out, [&](std::ostream& o) {
        o << "# NA fraction = " << csv(na_collection_fraction(na)) << "\n";
        o << "# average = " << csv(sweep.average.value) << " +- " << csv(sweep.average.sigma)
          << " (max deviation)\n";
        o << "diameter_nm,enhancement\n";
        for (std::size_t i = 0; i < sweep.diameters.size(); ++i) {
          o << csv(sweep.diameters[i] * 1e9) << "," << csv(sweep.mean_factor[i]) << "\n";
        }
      });
    } else if (*cal) {
      const auto c = load_calibration(require_config(cal_in), app.get_option("--propagation")->count() > 0 ? std::optional<Propagation>(mode) : std::nullopt);
      emit(cal_out, out, [&](std::ostream& o) { o << calibration_json(c).dump(2) << "\n"; });
    } else if (*ana) {
      ana_opts.fit.mixture = fit_mode == "mixture";
      ana_opts.propagation = mode;
      const auto c = read_calibration(require_config(ana_cal), mode);
      const auto result =
          analyze_traces(load_trace(guided_path), load_trace(radiation_path), c.C, ana_opts);
      const auto& e = result.efficiency;
      json j;
      j["options"] = {{"fit_mode", fit_mode},
                      {"histogram_bin_kcps", ana_opts.fit.histogram_bin},
                      {"count_sigma", ana_opts.count_sigma ? "mean_error" : "fit_width"},
                      {"subtract_background", ana_opts.subtract_background},
                      {"propagation", to_string(mode)}};
      j["guided"] = channel_json(result.guided);
      j["radiation"] = channel_json(result.radiation);
      j["efficiency"] = {{"n_g_obs", to_json(e.n_g_obs)},
                         {"n_r_obs", to_json(e.n_r_obs)},
                         {"C", to_json(e.C)},
                         {"ratio_nr_over_ng", to_json(e.ratio_nr_over_ng)},
                         {"eta_c", to_json(e.eta_c)}};
      emit(ana_out, out, [&](std::ostream& o) { o << j.dump(2) << "\n"; });
    } else if (*g2) {
      G2Options opts;
      opts.single_emitter_threshold = g2_threshold;
      const auto r = g2_histogram(load_timestamps(g2_a), load_timestamps(g2_b), max_tau, tau_bin,
                                  opts);
      emit(g2_out, out, [&](std::ostream& o) {
        o << "# normalization = rate_a rate_b duration tau_bin, full streams\n";
        o << "# rate_a = " << csv(r.rate_a) << ", rate_b = " << csv(r.rate_b)
          << ", duration = " << csv(r.duration) << "\n";
        o << "# dip = " << csv(r.dip) << "\n";
        o << "# single_emitter = " << (r.single_emitter ? "true" : "false") << "\n";
        o << "tau_s,g2,coincidences\n";
        for (std::size_t i = 0; i < r.tau.size(); ++i) {
          o << csv(r.tau[i]) << "," << csv(r.g2[i]) << "," << r.coincidences[i] << "\n";
        }
      });
      if (!g2_out.empty()) {
        out << "dip = " << csv(r.dip) << (r.single_emitter ? " (single emitter)" : "") << "\n";
      }
    } else if (*peaks) {
      const auto list = find_peaks(load_trace(scan_path), peak_opts);
      emit(peaks_out, out, [&](std::ostream& o) {
        o << "position_um,height,fwhm_um,sigma_um,background\n";
        for (const auto& p : list) {
          o << csv(p.position) << "," << csv(p.height) << "," << csv(p.fwhm) << ","
            << csv(p.sigma) << "," << csv(p.background) << "\n";
        }
      });
    } else if (*sim) {
      const SimulationSeed s{seed};
      std::filesystem::create_directories(sim_dir);
      const std::filesystem::path dir(sim_dir);
      if (sim_kind == "traces") {
        const std::string cal_path = sim_cal.empty() ? default_config() : sim_cal;
        const CalibrationConstants c =
            cal_path.empty()
                ? make_calibration({0.496, 0.021}, {0.235, 0.013}, {0.148, 0.003}, {1.0, 0.0}, mode)
                : read_calibration(cal_path, mode);
        const auto t = simulate_dual_channel(eta_true, c, model, duration, bin_width, s);
        save_trace((dir / "guided.csv").string(), t.guided);
        save_trace((dir / "radiation.csv").string(), t.radiation);
        out << "guided on-state " << csv(t.guided_on_rate / 1e3) << " kcps, radiation on-state "
            << csv(t.radiation_on_rate / 1e3) << " kcps, seed " << seed << " ("
            << s.generator << ")\n";
      } else {
        const auto stream = simulate_emitter_stream(model, duration, s);
        const auto [a, b] = split_stream(stream, split, s);
        save_timestamps((dir / "stream_ch1.txt").string(), a);
        save_timestamps((dir / "stream_ch2.txt").string(), b);
        out << a.times.size() << " + " << b.times.size() << " events, seed " << seed << " ("
            << s.generator << ")\n";
      }
    }
  } catch (const ConvergenceError& e) {
    err << "nfc: convergence failure: " << e.what() << "\n";
    return kConvergenceFailure;
  } catch (const IoError& e) {
    err << "nfc: " << e.what() << "\n";
    return kInputFailure;
  } catch (const ParseError& e) {
    err << "nfc: parse error: " << e.what() << "\n";
    return kInputFailure;
  } catch (const SchemaError& e) {
    err << "nfc: schema error: " << e.what() << "\n";
    return kInputFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "nfc: " << e.what() << "\n";
    return kInputFailure;
  } catch (const std::exception& e) {
    // DomainError, InsufficientDataError, FitError and anything unexpected.
    err << "nfc: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kOk;
}

}  // namespace nfc::cli
