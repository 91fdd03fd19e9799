#pragma once

// Inverse problem: measured transition frequencies -> coupling parameters.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nvspin/optimize.hpp"
#include "nvspin/spin_core.hpp"
#include "nvspin/thermal.hpp"
#include "nvspin/transitions.hpp"

namespace nvspin {

struct Measurement {
  TransitionLabel label;
  double freq_khz = 0.0;
  double sigma_khz = 0.0;
};

struct MeasurementSet {
  double temperature = 297.0;  // K
  Isotope isotope = Isotope::N14;
  std::vector<Measurement> entries;
  std::string sample;
  double nominal_bz = 0.0;  // G, 0 when unknown

  /// Throws ConfigError for sigma <= 0, non-finite values or labels the isotope lacks.
  void validate() const;
};

/// Fit coordinates. 14N: (D, γeBz, Q, A_par, A_perp, γeBx, γe/γn);
/// 15N drops Q. Energies in kHz.
struct ParamVector {
  Isotope isotope = Isotope::N14;
  double D = 0.0;
  double gamma_e_bz = 0.0;
  double Q = 0.0;
  double A_par = 0.0;
  double A_perp = 0.0;
  double gamma_e_bx = 0.0;
  double gamma_ratio = 0.0;

  static std::vector<std::string> names(Isotope iso);
  std::vector<double> to_vector() const;
  static ParamVector from_vector(Isotope iso, const std::vector<double>& v);
  static ParamVector from(const CouplingParams& p, const FieldConfig& field, Isotope iso);

  /// Value by name; throws ConfigError for unknown names.
  double get(const std::string& name) const;
  void set(const std::string& name, double value);

  CouplingParams params(double gamma_e = constants::kGammaE) const;
  FieldConfig field(double gamma_e = constants::kGammaE) const;
};

struct FitOptions {
  double gamma_e = constants::kGammaE;
  /// Names from ParamVector::names held at the guess value.
  std::vector<std::string> fixed;
  HamiltonianOptions hamiltonian{};
  OptimOptions optim = default_optim();

  static OptimOptions default_optim();
  /// 15N has five usual lines for six parameters: A_perp and γeBx are fixed.
  static FitOptions defaults_for(Isotope iso);
};

struct FitResult {
  ParamVector params;
  double objective = 0.0;
  /// model - measured, kHz, in the order of the measurement set.
  std::vector<std::pair<TransitionLabel, double>> residuals;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
};

/// Model frequencies for the labels of `ms`, in entry order.
std::vector<double> model_frequencies(const ParamVector& a, const MeasurementSet& ms, const FitOptions& opts);

/// Minimizes Σ((f_i(a) - f_i)/σ_i)² by Nelder-Mead over the free parameters.
/// Throws ConfigError if the set has fewer entries than free parameters,
/// ConvergenceError if the simplex does not contract within the iteration
/// budget, and AmbiguousLabeling naming the trial point where labels failed.
FitResult extract_params(const MeasurementSet& ms, const ParamVector& guess, const FitOptions& opts = {});

/// One fit per set; independent sets run on worker threads, results keep input order.
std::vector<FitResult> fit_series(const std::vector<MeasurementSet>& sets, const std::vector<ParamVector>& guesses,
                                  const FitOptions& opts, unsigned max_threads = 0);

/// Degree-4 polynomial per fitted parameter about T0 = 297 K.
/// Needs at least five distinct temperatures spanning at least 100 K.
std::map<std::string, PolynomialModel> thermal_models(const std::vector<std::pair<double, FitResult>>& series,
                                                      double t0 = 297.0);

/// Builds a model set from fitted polynomials. γn comes from γe/γn at T0.
ThermalModelSet to_model_set(const std::map<std::string, PolynomialModel>& models, Isotope iso,
                             double gamma_e = constants::kGammaE);

struct AnisotropyResult {
  double fermi_f = 0.0;    // MHz, signed
  double dipolar_d = 0.0;  // MHz, signed
  double eta = 0.0;
  double cs2 = 0.0;
  double cp2 = 0.0;
  double hybridization_ratio = 0.0;  // cp2 / cs2
};

inline constexpr double kFermiScaleMHz = 1811.0;
inline constexpr double kDipolarScaleMHz = 55.52;

/// f = A_par + 2A_perp, d = A_par - A_perp (inputs in kHz), then
/// |cs|²η = |f|/1811 MHz, |cp|²η = |d|/55.52 MHz with |cs|² + |cp|² = 1.
AnisotropyResult anisotropy(double a_par_khz, double a_perp_khz);

}  // namespace nvspin
