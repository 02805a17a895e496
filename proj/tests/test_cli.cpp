#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "nfc/dipole_emission.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = NFC_TEST_DATA;

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = nfc::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

std::vector<double> split_numbers(const std::string& row) {
  std::vector<double> v;
  std::istringstream in(row);
  for (std::string cell; std::getline(in, cell, ',');) v.push_back(std::stod(cell));
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("nfc_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

class ConfigEnv {
 public:
  explicit ConfigEnv(const std::string& value) { ::setenv(nfc::cli::kConfigEnv, value.c_str(), 1); }
  ConfigEnv() { ::unsetenv(nfc::cli::kConfigEnv); }
  ~ConfigEnv() { ::unsetenv(nfc::cli::kConfigEnv); }
  ConfigEnv(const ConfigEnv&) = delete;
  ConfigEnv& operator=(const ConfigEnv&) = delete;
};

}  // namespace

TEST(Cli, CurveMatchesLibrary) {
  const auto o = run({"curve", "--x-min", "1.0", "--x-max", "2.0", "--steps", "3"});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  const auto rows = data_lines(o.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "x,eta_c,gamma_he11,gamma_guided,gamma_radiation");
  const auto lib = nfc::efficiency_curve({1.0, 1.5, 2.0});
  for (std::size_t i = 0; i < 3; ++i) {
    const auto v = split_numbers(rows[i + 1]);
    ASSERT_EQ(v.size(), 5u);
    EXPECT_NEAR(v[0], lib[i].x, 1e-6);
    // CSV carries six significant digits.
    EXPECT_NEAR(v[1], lib[i].rates.eta_c, 1e-5 * lib[i].rates.eta_c);
    EXPECT_NEAR(v[4], lib[i].rates.gamma_radiation, 1e-5 * lib[i].rates.gamma_radiation);
  }
}

TEST(Cli, CurveWritesFile) {
  const auto dir = scratch_dir("curve");
  const auto path = (dir / "c.csv").string();
  ASSERT_EQ(run({"curve", "--steps", "2", "--orientation", "radial", "-o", path}).code, nfc::cli::kOk);
  EXPECT_EQ(data_lines(slurp(path)).size(), 3u);
}

TEST(Cli, ModesTable) {
  const auto o = run({"modes", "--diameter", "350", "--lambda", "780"});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  const auto rows = data_lines(o.out);
  ASSERT_EQ(rows.size(), 2u);  // single-mode at V ~ 1.48
  EXPECT_EQ(rows[1].rfind("HE11,", 0), 0u);
  EXPECT_NE(o.out.find("# x = 1.40969"), std::string::npos);
}

TEST(Cli, CalibrateReferenceFile) {
  const auto o = run({"calibrate", kData + "/reference_calibration.txt"});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  const auto j = json::parse(o.out);
  EXPECT_NEAR(j["C"]["value"].get<double>(), 7.1305, 1e-4);
  EXPECT_NEAR(j["C"]["sigma"].get<double>(), 0.8409, 1e-4);
  EXPECT_EQ(j["propagation"], "linear");

  const auto q = run({"--propagation", "quadrature", "calibrate", kData + "/reference_calibration.txt"});
  ASSERT_EQ(q.code, nfc::cli::kOk);
  EXPECT_EQ(json::parse(q.out)["propagation"], "quadrature");
}

TEST(Cli, CalibrateFromEnvironment) {
  {
    ConfigEnv env(kData + "/reference_calibration.txt");
    const auto o = run({"calibrate"});
    ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
    EXPECT_NEAR(json::parse(o.out)["C"]["value"].get<double>(), 7.1305, 1e-4);
  }
  ConfigEnv unset;
  EXPECT_EQ(run({"calibrate"}).code, nfc::cli::kInputFailure);
}

TEST(Cli, AnalyzeReferenceTraces) {
  const auto o = run({"analyze", "--guided", kData + "/reference_guided.csv", "--radiation",
                      kData + "/reference_radiation.csv", "--calibration",
                      kData + "/reference_calibration.txt"});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  const auto j = json::parse(o.out);
  EXPECT_NEAR(j["efficiency"]["eta_c"]["value"].get<double>(), 0.200, 1e-3);
  EXPECT_NEAR(j["efficiency"]["eta_c"]["sigma"].get<double>(), 0.062, 2e-3);
  EXPECT_EQ(j["guided"]["segmentation"]["emitter_count"], 1);
}

TEST(Cli, AnalyzeAcceptsCalibrateJson) {
  const auto dir = scratch_dir("analyze");
  const auto cal = (dir / "cal.json").string();
  ASSERT_EQ(run({"calibrate", kData + "/reference_calibration.txt", "-o", cal}).code, nfc::cli::kOk);
  const auto o = run({"analyze", "--guided", kData + "/reference_guided.csv", "--radiation",
                      kData + "/reference_radiation.csv", "--calibration", cal});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  EXPECT_NEAR(json::parse(o.out)["efficiency"]["eta_c"]["value"].get<double>(), 0.200, 1e-3);
}

TEST(Cli, SimulateIsReproducible) {
  const auto a = scratch_dir("sim_a"), b = scratch_dir("sim_b"), c = scratch_dir("sim_c");
  const std::vector<std::string> base{"simulate", "--duration", "20"};
  auto with = [&](const std::string& seed, const fs::path& dir) {
    auto args = base;
    args.insert(args.end(), {"--seed", seed, "--out-dir", dir.string()});
    return run(args).code;
  };
  ASSERT_EQ(with("7", a), nfc::cli::kOk);
  ASSERT_EQ(with("7", b), nfc::cli::kOk);
  ASSERT_EQ(with("8", c), nfc::cli::kOk);
  for (const char* f : {"guided.csv", "radiation.csv"}) {
    const auto sa = slurp(a / f);
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, slurp(b / f)) << f;
    EXPECT_NE(sa, slurp(c / f)) << f;
  }
}

TEST(Cli, SimulatedTracesRoundTripThroughAnalyze) {
  const auto dir = scratch_dir("round_trip");
  ASSERT_EQ(run({"simulate", "--seed", "11", "--eta-c", "0.3", "--calibration",
                 kData + "/reference_calibration.txt", "--out-dir", dir.string()})
                .code,
            nfc::cli::kOk);
  const auto o = run({"analyze", "--guided", (dir / "guided.csv").string(), "--radiation",
                      (dir / "radiation.csv").string(), "--calibration",
                      kData + "/reference_calibration.txt"});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  const auto eta = json::parse(o.out)["efficiency"]["eta_c"];
  EXPECT_NEAR(eta["value"].get<double>(), 0.3, 2.0 * eta["sigma"].get<double>());
}

TEST(Cli, G2OfSplitStreamIsAntibunched) {
  const auto dir = scratch_dir("g2");
  ASSERT_EQ(run({"simulate", "--kind", "timestamps", "--duration", "0.05", "--excitation-rate", "1e7",
                 "--off-rate", "0", "--background-1", "0", "--background-2", "0", "--out-dir",
                 dir.string()})
                .code,
            nfc::cli::kOk);
  const auto o = run({"g2", (dir / "stream_ch1.txt").string(), (dir / "stream_ch2.txt").string()});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  EXPECT_NE(o.out.find("# single_emitter = true"), std::string::npos);
  const auto rows = data_lines(o.out);
  ASSERT_EQ(rows.size(), 202u);  // header + 201 delay bins over +-100 ns
  EXPECT_EQ(rows[0], "tau_s,g2,coincidences");
}

TEST(Cli, PeaksOnSyntheticScan) {
  const auto dir = scratch_dir("peaks");
  const auto path = (dir / "scan.csv").string();
  {
    std::ofstream f(path);
    f << "position_um,counts\n";
    const double sigma = 1.5 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    for (int i = 0; i <= 2000; ++i) {
      const double x = 0.05 * i;
      double y = 10.0;
      for (double c : {20.0, 60.0}) y += 100.0 * std::exp(-0.5 * (x - c) * (x - c) / (sigma * sigma));
      f << x << ',' << y << '\n';
    }
  }
  const auto o = run({"peaks", path});
  ASSERT_EQ(o.code, nfc::cli::kOk) << o.err;
  const auto rows = data_lines(o.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "position_um,height,fwhm_um,sigma_um,background");
  EXPECT_NEAR(split_numbers(rows[1])[0], 20.0, 0.01);
  EXPECT_NEAR(split_numbers(rows[2])[2], 1.5, 0.01);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, nfc::cli::kInputFailure);
  EXPECT_EQ(run({"bogus"}).code, nfc::cli::kInputFailure);
  EXPECT_EQ(run({"curve", "--no-such-flag"}).code, nfc::cli::kInputFailure);
  EXPECT_EQ(run({"curve", "--steps", "abc"}).code, nfc::cli::kInputFailure);
  EXPECT_EQ(run({"calibrate", "/nonexistent/cal.txt"}).code, nfc::cli::kInputFailure);
  EXPECT_EQ(run({"analyze", "--guided", kData + "/reference_guided.csv"}).code, nfc::cli::kInputFailure);
  EXPECT_EQ(run({"curve", "--n1", "0.9"}).code, nfc::cli::kDomainFailure);
  EXPECT_EQ(run({"simulate", "--eta-c", "1.5", "--out-dir", scratch_dir("bad_eta").string()}).code,
            nfc::cli::kDomainFailure);
  EXPECT_EQ(run({"curve", "--steps", "1", "--nodes", "2", "--max-nodes", "4", "--rel-tol", "1e-10"}).code,
            nfc::cli::kConvergenceFailure);

  const auto dir = scratch_dir("bad_cal");
  const auto bad = (dir / "cal.txt").string();
  std::ofstream(bad) << "kappa_g.value = 0.5\nkappa_g.value = 0.6\n";
  const auto o = run({"calibrate", bad});
  EXPECT_EQ(o.code, nfc::cli::kInputFailure);
  EXPECT_NE(o.err.find("(line 2)"), std::string::npos) << o.err;
}

TEST(Cli, HelpListsEveryFlag) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected{
      {"curve", {"--n1", "--n2", "--x-min", "--x-max", "--steps", "--orientation", "--denominator",
                 "--output", "--m-max", "--nodes", "--max-nodes", "--rel-tol"}},
      {"modes", {"--n1", "--n2", "--diameter", "--lambda", "--output"}},
      {"enhancement", {"--na", "--lambda", "--n1", "--n2", "--d-min", "--d-max", "--steps", "--n-phi0",
                       "--output"}},
      {"calibrate", {"input", "--output", "NFC_CONFIG"}},
      {"analyze", {"--guided", "--radiation", "--calibration", "--fit-mode", "--histogram-bin",
                   "--max-residual", "--count-sigma", "--subtract-background", "--output"}},
      {"g2", {"--max-tau", "--tau-bin", "--threshold", "--output"}},
      {"peaks", {"scan", "--prominence", "--window", "--output"}},
      {"simulate", {"--seed", "--kind", "--duration", "--bin-width", "--eta-c", "--excitation-rate",
                    "--lifetime", "--on-rate", "--off-rate", "--efficiency-1", "--efficiency-2",
                    "--background-1", "--background-2", "--jitter", "--split", "--calibration",
                    "--out-dir"}},
  };
  for (const auto& [sub, flags] : expected) {
    const auto o = run({sub, "--help"});
    EXPECT_EQ(o.code, nfc::cli::kOk) << sub;
    for (const auto& f : flags) EXPECT_NE(o.out.find(f), std::string::npos) << sub << ' ' << f;
  }
  const auto top = run({"--help"});
  EXPECT_EQ(top.code, nfc::cli::kOk);
  for (const char* f : {"--propagation", "--threads", "curve", "simulate"}) {
    EXPECT_NE(top.out.find(f), std::string::npos) << f;
  }
}
