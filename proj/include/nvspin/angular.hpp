#pragma once

// Exact-diagonalization response of fDQ (14N) and f7 (15N) to a small field
// misalignment θ at fixed axial field: Bx = Bz·tan θ.

#include <vector>

#include "nvspin/perturbation.hpp"
#include "nvspin/spin_core.hpp"

namespace nvspin {

struct AngularPoint {
  double theta_rad = 0.0;
  double freq_khz = 0.0;
  double shift_khz = 0.0;  // relative to θ = 0
};

struct AngularScan {
  AngularTransition transition = AngularTransition::DoubleQuantum;
  double bz = 0.0;
  double baseline = 0.0;  // kHz, as in AngularResponse
  double freq0 = 0.0;     // kHz at θ = 0
  std::vector<AngularPoint> points;
};

/// fDQ requires 14N and f7 requires 15N; anything else is a ConfigError.
/// The -γn·Bx·Ix term is off by default, as in the perturbative β.
AngularScan angular_scan(const CouplingParams& p, Isotope iso, double bz, const std::vector<double>& thetas_rad,
                         AngularTransition which,
                         const HamiltonianOptions& opts = {.transverse_nuclear_zeeman = false});

/// Small-angle β in shift = ½·β·θ²·baseline, from a least-squares fit of
/// shift = c2·θ² + c4·θ⁴ over the scan (θ² alone for a single angle).
double fit_beta(const AngularScan& scan);

}  // namespace nvspin
