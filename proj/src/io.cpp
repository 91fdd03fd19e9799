#include "nvspin/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "nvspin/errors.hpp"

namespace nvspin::io {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, int line_no, const char* what) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("line " + std::to_string(line_no) + ": bad " + what + " '" + text + "'");
  }
  return v;
}

bool skip(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

// Returns the first non-skipped line, which must equal `header`.
int expect_header(std::istream& in, const std::string& header) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip(line)) continue;
    if (trim(line) != header) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected header '" + header + "', got '" + trim(line) +
                        "'");
    }
    return line_no;
  }
  throw ConfigError("empty file: expected header '" + header + "'");
}

double number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("JSON key '") + key + "' must be a number");
  return j.at(key).get<double>();
}

double required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("JSON is missing '") + key + "'");
  return number_or(j, key, 0.0);
}

}  // namespace

std::string format_khz(double v) {
  if (!std::isfinite(v)) return v != v ? "nan" : (v > 0 ? "inf" : "-inf");
  int decimals = 6;
  if (v != 0.0) decimals = std::clamp(11 - static_cast<int>(std::floor(std::log10(std::abs(v)))), 6, 40);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_sig(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<MeasurementSet> read_measurements(std::istream& in, Isotope iso) {
  int line_no = expect_header(in, kMeasurementHeader);
  std::map<double, MeasurementSet> groups;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 4 columns, got " +
                        std::to_string(cells.size()));
    }
    const double t = parse_number(cells[0], line_no, "temperature");
    TransitionLabel label;
    try {
      label = parse_transition(cells[1]);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (label.kind == TransitionLabel::Kind::DoubleQuantum || !valid_for(label, iso)) {
      throw ConfigError("line " + std::to_string(line_no) + ": transition '" + cells[1] + "' not usable for " +
                        to_string(iso));
    }
    Measurement m{label, parse_number(cells[2], line_no, "frequency"), parse_number(cells[3], line_no, "sigma")};
    if (!(m.sigma_khz > 0.0)) throw ConfigError("line " + std::to_string(line_no) + ": sigma must be positive");
    MeasurementSet& set = groups[t];
    set.temperature = t;
    set.isotope = iso;
    set.entries.push_back(m);
  }
  std::vector<MeasurementSet> out;
  for (auto& [t, set] : groups) out.push_back(std::move(set));
  return out;
}

void write_measurements(std::ostream& out, const std::vector<MeasurementSet>& sets) {
  out << kMeasurementHeader << '\n';
  for (const MeasurementSet& set : sets) {
    for (const Measurement& m : set.entries) {
      out << format_sig(set.temperature) << ',' << to_string(m.label) << ',' << format_khz(m.freq_khz) << ','
          << format_khz(m.sigma_khz) << '\n';
    }
  }
}

RamseyTrace read_ramsey(std::istream& in) {
  int line_no = expect_header(in, kRamseyHeader);
  RamseyTrace tr;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 2 columns, got " +
                        std::to_string(cells.size()));
    }
    tr.times.push_back(parse_number(cells[0], line_no, "tau"));
    tr.signal.push_back(parse_number(cells[1], line_no, "signal"));
  }
  tr.validate();
  return tr;
}

void write_ramsey(std::ostream& out, const RamseyTrace& trace) {
  out << kRamseyHeader << '\n';
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    out << format_sig(trace.times[i]) << ',' << format_sig(trace.signal[i]) << '\n';
  }
}

nlohmann::json params_to_json(const CouplingParams& p, Isotope iso) {
  nlohmann::json j;
  j["isotope"] = to_string(iso);
  j["D"] = p.D;
  if (iso == Isotope::N14) j["Q"] = p.Q;
  j["A_par"] = p.A_par;
  j["A_perp"] = p.A_perp;
  j["gamma_e"] = p.gamma_e;
  j["gamma_n"] = p.gamma_n;
  return j;
}

CouplingParams params_from_json(const nlohmann::json& j, Isotope iso) {
  if (!j.is_object()) throw ConfigError("parameter JSON must be an object");
  if (j.contains("isotope")) {
    if (!j.at("isotope").is_string() || parse_isotope(j.at("isotope").get<std::string>()) != iso) {
      throw ConfigError("parameter JSON is for a different isotope than " + to_string(iso));
    }
  }
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"isotope", "D", "Q", "A_par", "A_perp", "gamma_e", "gamma_n"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in parameter JSON");
    }
  }
  CouplingParams p;
  p.D = required(j, "D");
  p.Q = iso == Isotope::N14 ? required(j, "Q") : number_or(j, "Q", 0.0);
  p.A_par = required(j, "A_par");
  p.A_perp = required(j, "A_perp");
  p.gamma_e = number_or(j, "gamma_e", constants::kGammaE);
  p.gamma_n = number_or(j, "gamma_n", IsotopeSpec::of(iso).gamma_n);
  p.validate(IsotopeSpec::of(iso));
  return p;
}

nlohmann::json model_to_json(const PolynomialModel& m) {
  return {{"t0", m.t0}, {"coefficients", m.coefficients}, {"rms", m.rms}};
}

PolynomialModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("coefficients") || !j.at("coefficients").is_array()) {
    throw ConfigError("polynomial model JSON needs a 'coefficients' array");
  }
  PolynomialModel m;
  m.t0 = number_or(j, "t0", 297.0);
  m.rms = number_or(j, "rms", 0.0);
  for (const auto& c : j.at("coefficients")) {
    if (!c.is_number()) throw ConfigError("polynomial coefficients must be numbers");
    m.coefficients.push_back(c.get<double>());
  }
  if (m.coefficients.empty()) throw ConfigError("polynomial model has no coefficients");
  return m;
}

nlohmann::json model_set_to_json(const ThermalModelSet& set) {
  nlohmann::json j;
  j["isotope"] = to_string(set.isotope);
  j["t0"] = set.t0;
  j["t_min"] = set.t_min;
  j["t_max"] = set.t_max;
  j["gamma_e"] = set.gamma_e;
  j["gamma_n"] = set.gamma_n;
  j["a_perp_tracks_a_par"] = set.a_perp_tracks_a_par;
  for (const auto& [k, m] : set.models) j["models"][k] = model_to_json(m);
  return j;
}

ThermalModelSet model_set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("isotope") || !j.contains("models")) {
    throw ConfigError("model set JSON needs 'isotope' and 'models'");
  }
  ThermalModelSet set;
  set.isotope = parse_isotope(j.at("isotope").get<std::string>());
  set.t0 = number_or(j, "t0", 297.0);
  set.t_min = number_or(j, "t_min", 77.0);
  set.t_max = number_or(j, "t_max", 400.0);
  set.gamma_e = number_or(j, "gamma_e", constants::kGammaE);
  set.gamma_n = number_or(j, "gamma_n", IsotopeSpec::of(set.isotope).gamma_n);
  set.a_perp_tracks_a_par = j.value("a_perp_tracks_a_par", false);
  for (const auto& [k, m] : j.at("models").items()) set.models[k] = model_from_json(m);
  return set;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

}  // namespace nvspin::io
