#pragma once

// File formats: measurement CSV, Ramsey trace CSV, parameter and model JSON.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "nvspin/extraction.hpp"
#include "nvspin/ramsey.hpp"
#include "nvspin/thermal.hpp"

namespace nvspin::io {

/// Fixed-point with at least 6 decimals and at least 12 significant digits.
std::string format_khz(double v);
/// 12 significant digits, shortest of fixed and scientific.
std::string format_sig(double v);

inline constexpr const char* kMeasurementHeader = "temperature_K,transition,freq_khz,sigma_khz";
inline constexpr const char* kRamseyHeader = "tau_s,signal";

/// Groups rows by temperature (ascending). Blank lines and lines starting
/// with '#' are skipped. Throws ConfigError with the line number on bad input.
std::vector<MeasurementSet> read_measurements(std::istream& in, Isotope iso);
void write_measurements(std::ostream& out, const std::vector<MeasurementSet>& sets);

RamseyTrace read_ramsey(std::istream& in);
void write_ramsey(std::ostream& out, const RamseyTrace& trace);

nlohmann::json params_to_json(const CouplingParams& p, Isotope iso);
/// Keys D, Q, A_par, A_perp in kHz; optional gamma_e, gamma_n, isotope.
CouplingParams params_from_json(const nlohmann::json& j, Isotope iso);

nlohmann::json model_to_json(const PolynomialModel& m);
PolynomialModel model_from_json(const nlohmann::json& j);
nlohmann::json model_set_to_json(const ThermalModelSet& set);
ThermalModelSet model_set_from_json(const nlohmann::json& j);

std::string read_file(const std::string& path);
/// Writes atomically enough for CLI use; throws ConfigError on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace nvspin::io
