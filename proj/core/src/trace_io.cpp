#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "nfc/errors.hpp"
#include "nfc/trace_analysis.hpp"

namespace nfc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ParseError("not a number: '" + t + "'", line);
  }
  return v;
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> CountTrace::rates_kcps() const {
  std::vector<double> r(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) r[i] = counts[i] / bin_width / 1000.0;
  return r;
}

CountTrace read_trace(std::istream& in) {
  CountTrace t;
  std::vector<double> coords;
  std::optional<double> declared_width;
  bool header_seen = false;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = trim(raw);
    if (body.empty()) continue;
    if (body[0] == '#') {
      const std::string c = trim(body.substr(1));
      if (c.rfind("bin_width", 0) == 0) {
        const auto eq = c.find('=');
        if (eq == std::string::npos) throw ParseError("malformed bin_width comment", line);
        declared_width = parse_double(c.substr(eq + 1), line);
      }
      continue;
    }
    if (!header_seen && coords.empty() && std::isalpha(static_cast<unsigned char>(body[0]))) {
      std::string h;
      for (char ch : body) {
        if (ch != ' ' && ch != '\t') h += ch;
      }
      if (h == "time_s,counts") {
        t.axis = TraceAxis::time;
      } else if (h == "position_um,counts") {
        t.axis = TraceAxis::position;
      } else {
        throw SchemaError("unknown trace header '" + body + "'");
      }
      header_seen = true;
      continue;
    }
    const auto comma = body.find(',');
    if (comma == std::string::npos || body.find(',', comma + 1) != std::string::npos) {
      throw ParseError("expected two comma-separated fields", line);
    }
    const double x = parse_double(body.substr(0, comma), line);
    const double c = parse_double(body.substr(comma + 1), line);
    if (c < 0.0) throw SchemaError("negative count at line " + std::to_string(line));
    if (!coords.empty() && !(x > coords.back())) {
      throw SchemaError("coordinate not increasing at line " + std::to_string(line));
    }
    coords.push_back(x);
    t.counts.push_back(c);
  }
  if (coords.empty()) throw SchemaError("trace has no data rows");

  t.start = coords.front();
  if (declared_width) {
    t.bin_width = *declared_width;
  } else if (coords.size() >= 2) {
    t.bin_width = (coords.back() - coords.front()) / static_cast<double>(coords.size() - 1);
  } else {
    t.bin_width = t.axis == TraceAxis::time ? 0.1 : 1.0;
  }
  if (!(t.bin_width > 0.0)) throw SchemaError("bin width must be positive");
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double expect = t.coordinate(i);
    if (std::abs(coords[i] - expect) > 1e-6 * t.bin_width + 1e-12 * std::abs(expect)) {
      throw SchemaError("non-uniform bin spacing at data row " + std::to_string(i + 1));
    }
  }
  return t;
}

CountTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path + "'");
  return read_trace(in);
}

void write_trace(std::ostream& out, const CountTrace& trace) {
  out << (trace.axis == TraceAxis::time ? "time_s,counts\n" : "position_um,counts\n");
  out << "# bin_width = " << format(trace.bin_width) << "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << format(trace.coordinate(i)) << "," << format(trace.counts[i]) << "\n";
  }
}

void save_trace(const std::string& path, const CountTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace '" + path + "'");
  write_trace(out, trace);
  if (!out) throw IoError("write failed for '" + path + "'");
}

void validate_stream(const TimestampStream& s) {
  for (std::size_t i = 1; i < s.times.size(); ++i) {
    if (!(s.times[i] > s.times[i - 1])) {
      throw SchemaError("timestamps not strictly increasing at entry " + std::to_string(i + 1));
    }
  }
}

TimestampStream read_timestamps(std::istream& in, int channel) {
  TimestampStream s;
  s.channel = channel;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = trim(raw);
    if (body.empty() || body[0] == '#') continue;
    const double t = parse_double(body, line);
    if (!s.times.empty() && !(t > s.times.back())) {
      throw SchemaError("timestamps not strictly increasing at line " + std::to_string(line));
    }
    s.times.push_back(t);
  }
  return s;
}

TimestampStream load_timestamps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open timestamp file '" + path + "'");
  const std::string stem = std::filesystem::path(path).stem().string();
  int channel = 0;
  auto ends_with = [&](const std::string& suffix) {
    return stem.size() >= suffix.size() &&
           stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("_ch1")) channel = 1;
  if (ends_with("_ch2")) channel = 2;
  return read_timestamps(in, channel);
}

void write_timestamps(std::ostream& out, const TimestampStream& s) {
  for (double t : s.times) out << format(t) << "\n";
}

void save_timestamps(const std::string& path, const TimestampStream& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write timestamps '" + path + "'");
  write_timestamps(out, s);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace nfc
