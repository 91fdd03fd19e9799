#pragma once

// Temperature-dependent coupling parameters and the frequency/derivative
// table they imply.

#include <map>
#include <string>
#include <vector>

#include "nvspin/optimize.hpp"
#include "nvspin/spin_core.hpp"

namespace nvspin {

struct ThermalModelSet {
  Isotope isotope = Isotope::N14;
  double t0 = 297.0;
  double t_min = 77.0;
  double t_max = 400.0;
  double gamma_e = constants::kGammaE;
  double gamma_n = constants::kGammaN14;
  /// Keys "D", "Q" (14N only), "A_par", "A_perp". Values in kHz.
  std::map<std::string, PolynomialModel> models;
  /// When set, A_perp(T) = A_perp(T0)·A_par(T)/A_par(T0).
  bool a_perp_tracks_a_par = false;

  /// Throws ConfigError when T is outside [t_min, t_max] or a model is missing.
  CouplingParams params_at(double t) const;
};

/// Value (kHz), first derivative (kHz/K) and second derivative (kHz/K²) at T0.
struct TaylorEntry {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Quadratic Taylor polynomial, c = (value, d1, d2 / 2).
PolynomialModel taylor_model(const TaylorEntry& e, double t0);

std::vector<std::string> preset_names();
/// Room-temperature parameter set with first and second temperature
/// derivatives for both isotopes. Throws ConfigError for an unknown name.
ThermalModelSet preset_thermal(Isotope iso, const std::string& name = "table1_297K");
CouplingParams preset_params(Isotope iso, const std::string& name = "table1_297K");

struct TransitionTableRow {
  std::string name;  // transition label or "f1-f2" style combination
  double freq_khz = 0.0;
  double dfdt_hz_per_k = 0.0;
};

struct TransitionTable {
  Isotope isotope = Isotope::N14;
  double temperature = 0.0;
  double bz = 0.0;
  std::vector<TransitionTableRow> rows;

  const TransitionTableRow& row(const std::string& name) const;
};

/// Exact-diagonalization frequencies at T and central-difference
/// derivatives from T ± 1 K. 14N tables also carry f1-f2, f5-f4 and f3-f6.
TransitionTable transition_table(const ThermalModelSet& models, double t, double bz);

}  // namespace nvspin
