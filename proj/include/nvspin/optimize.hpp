#pragma once

#include <functional>
#include <span>
#include <vector>

namespace nvspin {

struct OptimOptions {
  /// Initial simplex edge along coordinate i: simplex_scale·|x0_i|, or
  /// zero_step when x0_i == 0. Ignored when `steps` is non-empty.
  double simplex_scale = 1e-3;
  double zero_step = 1e-3;
  std::vector<double> steps;

  double tol_f = 1e-12;  // relative spread of vertex values
  /// Relative spread of vertex coordinates; the scale of coordinate i is
  /// max(|x_i|, initial edge i) so that coordinates near zero can converge.
  double tol_x = 1e-10;
  int max_iter = 20000;
  /// Rebuild the simplex around the best point this many times at most;
  /// stops early once a restart no longer improves the minimum.
  int restarts = 0;
  bool record_history = false;
};

struct OptimResult {
  std::vector<double> x_min;
  double f_min = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> history;  // best value after each iteration
  /// Final simplex, best vertex first, with the matching values.
  std::vector<std::vector<double>> simplex;
  std::vector<double> simplex_values;
};

using Objective = std::function<double(std::span<const double>)>;

/// Nelder-Mead downhill simplex with reflection 1, expansion 2, contraction
/// 0.5 and shrink 0.5. Stops on f-spread <= tol_f, x-spread <= tol_x or
/// max_iter. Throws NonFiniteObjective naming the offending point.
OptimResult nelder_mead(const Objective& objective, std::vector<double> x0, const OptimOptions& opts = {});

/// Σ ((model - measured) / sigma)². Throws ConfigError on length mismatch or sigma <= 0.
double weighted_objective(std::span<const double> model, std::span<const double> measured,
                          std::span<const double> sigmas);

/// Polynomial in (T - T0): P(T) = Σ c_k (T - T0)^k.
struct PolynomialModel {
  std::vector<double> coefficients;
  double t0 = 297.0;
  double rms = 0.0;  // unweighted rms residual of the fit

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
  double value(double t) const;
  /// order-th derivative with respect to T.
  double derivative(double t, int order = 1) const;
  /// (dP/dT) / P in ppm/K.
  double fractional_derivative_ppm(double t) const;
};

/// Weighted linear least squares on the basis (x - T0)^k, k = 0..degree,
/// through column-scaled normal equations. Throws ConfigError with fewer than
/// degree + 1 distinct abscissae or non-positive sigma.
PolynomialModel polyfit_weighted(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> sigma, int degree, double t0);

}  // namespace nvspin
