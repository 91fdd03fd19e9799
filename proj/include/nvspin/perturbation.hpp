#pragma once

// Closed-form perturbative nuclear-spin transition frequencies.
//
// The unperturbed Hamiltonian keeps every term that commutes with Sz and Iz;
// the perturbation is the transverse hyperfine term plus the transverse
// electron Zeeman term. The transverse nuclear Zeeman term is not part of
// this model, so exact cross-checks should build the Hamiltonian with
// HamiltonianOptions{.transverse_nuclear_zeeman = false}.

#include <map>

#include "nvspin/spin_core.hpp"
#include "nvspin/transitions.hpp"

namespace nvspin {

/// Required distance from the ms = 0 / ms = -1 anti-crossing, in units of
/// the larger of |A_perp| and γe·Bx.
inline constexpr double kValidityMargin = 50.0;

class PerturbationContext {
 public:
  /// Throws ValidityMarginError when |D - γe·Bz| <= 50·max(|A_perp|, γe·Bx).
  PerturbationContext(const CouplingParams& params, double bz, double bx = 0.0);

  const CouplingParams& params() const { return params_; }
  double bz() const { return bz_; }
  double bx() const { return bx_; }
  /// D + γe·Bz
  double f_plus() const { return params_.D + params_.gamma_e * bz_; }
  /// D - γe·Bz
  double f_minus() const { return params_.D - params_.gamma_e * bz_; }

 private:
  CouplingParams params_;
  double bz_;
  double bx_;
};

/// Lowest-order nuclear frequencies (f1..f6 or f7..f9). Requires Bx = 0.
TransitionSet nuclear_freqs_2nd(const PerturbationContext& ctx, Isotope iso);

/// Second-order shifts plus the fourth-order terms of the same order in
/// 1/F±, including the γe²Bx²/2 transverse-field brackets. For 14N also fills fDQ.
TransitionSet nuclear_freqs_full(const PerturbationContext& ctx, Isotope iso);

enum class AngularTransition { DoubleQuantum, F7 };

std::string to_string(AngularTransition t);

/// Quadratic misalignment response Δf = ½·β·θ²·baseline.
struct AngularResponse {
  double beta = 0.0;
  double baseline = 0.0;  // kHz: 2·γn14·Bz for fDQ, |γn15|·Bz for f7
  AngularTransition transition = AngularTransition::DoubleQuantum;

  double shift(double theta_rad) const { return 0.5 * beta * theta_rad * theta_rad * baseline; }
};

AngularResponse beta_coefficient(const CouplingParams& p, double bz, AngularTransition which);

struct FieldModel {
  double frequency = 0.0;              // kHz
  double fractional_correction = 0.0;  // bracket minus one
};

/// fDQ ≈ 2γn·Bz·(1 - |γe/γn|·A⊥²/(D² - γe²Bz²)) and
/// f7 ≈ |γn|·Bz·(1 + |γe/γn|·A⊥²/(D² - γe²Bz²)).
FieldModel fdq_f7_field_model(const CouplingParams& p, double bz, AngularTransition which);

struct PerturbGrid {
  double bz_min = 300.0;  // G
  double bz_max = 600.0;
  int bz_steps = 31;
  double bx_min = 0.0;
  double bx_max = 1.0;
  int bx_steps = 11;
};

struct PerturbResidual {
  double max_abs_hz = 0.0;  // max |exact - perturbative|
  double bz = 0.0;          // where the maximum occurs
  double bx = 0.0;
};

struct PerturbCheck {
  std::map<TransitionLabel, PerturbResidual> residuals;  // nuclear lines of the isotope
  double worst_hz = 0.0;
};

/// Compares nuclear_freqs_full with exact diagonalization over the grid.
/// Throws ConfigError for an empty or inverted grid and ValidityMarginError
/// when the Bz range reaches the anti-crossing or any point fails the margin.
PerturbCheck perturbation_check(const CouplingParams& p, Isotope iso, const PerturbGrid& grid,
                                const HamiltonianOptions& exact_opts = {.transverse_nuclear_zeeman = false});

}  // namespace nvspin
