#include "nfc/calibration.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "nfc/dipole_emission.hpp"
#include "nfc/errors.hpp"

namespace nfc {

MeasuredValue chain_transmission(const TransmissionChain& chain, Propagation mode) {
  if (chain.factors.empty()) throw DomainError("transmission chain is empty");
  std::vector<Factor> terms;
  terms.reserve(chain.factors.size());
  for (const MeasuredValue& f : chain.factors) {
    if (!(f.value > 0.0 && f.value <= 1.0)) {
      throw DomainError("transmission factor '" + f.label + "' outside (0, 1]");
    }
    terms.push_back({f, 1.0});
  }
  MeasuredValue out = monomial(1.0, terms, mode);
  out.label = "chain";
  return out;
}

MeasuredValue effective_collection(const MeasuredValue& na_fraction,
                                   const MeasuredValue& enhancement, Propagation mode) {
  if (!(na_fraction.value > 0.0 && enhancement.value > 0.0)) {
    throw DomainError("effective collection needs positive inputs");
  }
  MeasuredValue out = monomial(1.0, {{na_fraction, 1.0}, {enhancement, 1.0}}, mode);
  out.label = "eta_r";
  return out;
}

MeasuredValue compute_C(const MeasuredValue& kappa_g, const MeasuredValue& kappa_r,
                        const MeasuredValue& eta_r, const MeasuredValue& detector_ratio,
                        Propagation mode) {
  if (!(kappa_r.value > 0.0) || !(eta_r.value > 0.0)) {
    throw DomainError("calibration constant: kappa_r and eta_r must be positive");
  }
  MeasuredValue out = monomial(
      0.5, {{kappa_g, 1.0}, {detector_ratio, 1.0}, {kappa_r, -1.0}, {eta_r, -1.0}}, mode);
  out.label = "C";
  return out;
}

CalibrationConstants make_calibration(const MeasuredValue& kappa_g, const MeasuredValue& kappa_r,
                                      const MeasuredValue& eta_r,
                                      const MeasuredValue& detector_ratio, Propagation mode) {
  CalibrationConstants c;
  c.kappa_g = kappa_g;
  c.kappa_r = kappa_r;
  c.eta_r = eta_r;
  c.detector_ratio = detector_ratio;
  c.propagation = mode;
  c.C = compute_C(kappa_g, kappa_r, eta_r, detector_ratio, mode);
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& text, int line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ParseError("not a number: '" + t + "'", line);
  }
  return v;
}

struct Entry {
  std::string text;
  int line;
};

// "0.81" or "0.81+-0.02"
MeasuredValue parse_factor(const std::string& item, int line, const std::string& label) {
  const auto pm = item.find("+-");
  if (pm == std::string::npos) return MeasuredValue(to_number(item, line), 0.0, label);
  return MeasuredValue(to_number(item.substr(0, pm), line), to_number(item.substr(pm + 2), line),
                       label);
}

}  // namespace

CalibrationConstants parse_calibration(std::istream& in, std::optional<Propagation> mode_override) {
  std::map<std::string, Entry> kv;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line);
    if (kv.count(key)) throw ParseError("duplicate key '" + key + "'", line);
    kv[key] = {trim(body.substr(eq + 1)), line};
  }

  static const char* kKnown[] = {"kappa_g.value", "kappa_g.sigma", "kappa_g.factors",
                                 "kappa_r.value", "kappa_r.sigma", "kappa_r.factors",
                                 "eta_r.value",   "eta_r.sigma",   "na",
                                 "enhancement.value", "enhancement.sigma",
                                 "detector_ratio.value", "detector_ratio.sigma", "propagation"};
  for (const auto& [key, entry] : kv) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw SchemaError("unknown calibration key '" + key + "' (line " +
                                  std::to_string(entry.line) + ")");
  }

  Propagation mode = Propagation::linear;
  if (kv.count("propagation")) mode = parse_propagation(kv["propagation"].text);
  if (mode_override) mode = *mode_override;

  auto measured = [&](const std::string& name, bool required) -> std::optional<MeasuredValue> {
    const auto v = kv.find(name + ".value");
    if (v == kv.end()) {
      if (required) throw SchemaError("missing key '" + name + ".value'");
      return std::nullopt;
    }
    double sigma = 0.0;
    if (const auto s = kv.find(name + ".sigma"); s != kv.end()) {
      sigma = to_number(s->second.text, s->second.line);
      if (sigma < 0.0) throw SchemaError("negative sigma for '" + name + "'");
    }
    return MeasuredValue(to_number(v->second.text, v->second.line), sigma, name);
  };

  auto chain = [&](const std::string& name) -> std::optional<MeasuredValue> {
    const auto f = kv.find(name + ".factors");
    if (f == kv.end()) return std::nullopt;
    TransmissionChain c;
    std::stringstream ss(f->second.text);
    std::string item;
    int index = 0;
    while (std::getline(ss, item, ',')) {
      c.factors.push_back(
          parse_factor(item, f->second.line, name + "[" + std::to_string(index++) + "]"));
    }
    MeasuredValue out = chain_transmission(c, mode);
    out.label = name + " chain";
    return out;
  };

  CalibrationConstants cal;
  auto kappa = [&](const std::string& name, std::optional<MeasuredValue>& chain_out) {
    chain_out = chain(name);
    std::optional<MeasuredValue> m = measured(name, false);
    if (m) return *m;
    if (chain_out) {
      MeasuredValue v = *chain_out;
      v.label = name;
      return v;
    }
    throw SchemaError("missing '" + name + ".value' or '" + name + ".factors'");
  };
  const MeasuredValue kg = kappa("kappa_g", cal.kappa_g_chain);
  const MeasuredValue kr = kappa("kappa_r", cal.kappa_r_chain);

  MeasuredValue er;
  if (std::optional<MeasuredValue> m = measured("eta_r", false)) {
    er = *m;
  } else if (kv.count("na")) {
    const MeasuredValue frac(
        na_collection_fraction(to_number(kv["na"].text, kv["na"].line)), 0.0, "na_fraction");
    const MeasuredValue enh = measured("enhancement", false).value_or(MeasuredValue(1.0));
    er = effective_collection(frac, enh, mode);
  } else {
    throw SchemaError("missing 'eta_r.value' (or 'na' with 'enhancement.value')");
  }
  er.label = "eta_r";
  const MeasuredValue ratio =
      measured("detector_ratio", false).value_or(MeasuredValue(1.0, 0.0, "detector_ratio"));

  const auto g_chain = cal.kappa_g_chain;
  const auto r_chain = cal.kappa_r_chain;
  cal = make_calibration(kg, kr, er, ratio, mode);
  cal.kappa_g_chain = g_chain;
  cal.kappa_r_chain = r_chain;
  return cal;
}

CalibrationConstants load_calibration(const std::string& path,
                                      std::optional<Propagation> mode_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration file '" + path + "'");
  return parse_calibration(in, mode_override);
}

}  // namespace nfc
