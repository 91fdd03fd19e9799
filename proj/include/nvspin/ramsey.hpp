#pragma once

// Ramsey fringe synthesis and fitting.
//
// s(τ) = offset + amp·exp(-τ/T2*)·cos(2π·δ·τ + phase), δ in kHz, τ in seconds.

#include <cstdint>
#include <optional>
#include <vector>

#include "nvspin/optimize.hpp"

namespace nvspin {

struct RamseyTrace {
  std::vector<double> times;   // s, strictly increasing
  std::vector<double> signal;  // contrast
  double noise_sigma = 0.0;

  /// Throws ConfigError unless times are strictly increasing and all values finite.
  void validate() const;
};

struct FringeParams {
  double delta_khz = 0.0;
  double t2_star_s = 0.0;  // may be +infinity
  double amplitude = 0.0;
  double phase = 0.0;  // rad
  double offset = 0.0;

  double at(double tau) const;
};

struct RamseyFit {
  FringeParams params;
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Evenly spaced τ = 0, span/n, ..., span·(n-1)/n.
std::vector<double> uniform_times(double span_s, int n);

/// Seeded Gaussian noise on top of the model. Throws ConfigError for T2* <= 0.
RamseyTrace synthesize(const FringeParams& p, const std::vector<double>& times, double noise_sigma,
                       std::uint64_t seed);

/// Coarse δ estimate (kHz): peak of the mean-removed DFT power evaluated on a
/// frequency grid up to the Nyquist rate of the median sample spacing.
double periodogram_peak(const RamseyTrace& trace);

struct RamseyFitOptions {
  OptimOptions optim = default_optim();
  static OptimOptions default_optim();
};

/// Nelder-Mead fit over (δ, T2*, amp, phase, offset). Starts from `guess`
/// when given, otherwise from the periodogram peak and a linear solve for the
/// amplitude, phase and offset. Reported δ and amp are non-negative.
/// Errors: ConfigError when the trace holds fewer than 3 periods or fewer
/// than 4 samples per period at the starting δ; NonIdentifiable for a trace
/// without oscillation; ConvergenceError at the iteration cap.
RamseyFit fit_fringes(const RamseyTrace& trace, const std::optional<FringeParams>& guess = std::nullopt,
                      const RamseyFitOptions& opts = {});

/// f = f_rf - sign·δ, sign = ±1.
double frequency_from_detuning(double f_rf_khz, double delta_khz, int sign);

/// Sign for frequency_from_detuning from two fits at different drive
/// frequencies: δ moves with f_rf for +1 and against it for -1.
int detuning_sign(double f_rf_a, double delta_a, double f_rf_b, double delta_b);

}  // namespace nvspin
