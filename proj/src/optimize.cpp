#include "nvspin/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "nvspin/errors.hpp"

namespace nvspin {
namespace {

using Point = std::vector<double>;

class Evaluator {
 public:
  explicit Evaluator(const Objective& f) : f_(f) {}

  double operator()(const Point& x) {
    ++count_;
    const double v = f_(std::span<const double>(x));
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "objective is not finite at (";
      for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
      os << ')';
      throw NonFiniteObjective(os.str());
    }
    return v;
  }

  int count() const { return count_; }

 private:
  const Objective& f_;
  int count_ = 0;
};

Point affine(const Point& base, const Point& toward, double t) {
  Point out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + t * (toward[i] - base[i]);
  return out;
}

struct RunState {
  std::vector<Point> simplex;
  std::vector<double> values;
  std::vector<double> step;  // |initial edge| per coordinate, floor for the x-spread scale
  int iterations = 0;
  bool converged = false;
};

void sort_simplex(RunState& s) {
  std::vector<std::size_t> idx(s.simplex.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
  std::vector<Point> simplex;
  std::vector<double> values;
  for (std::size_t i : idx) {
    simplex.push_back(std::move(s.simplex[i]));
    values.push_back(s.values[i]);
  }
  s.simplex = std::move(simplex);
  s.values = std::move(values);
}

bool spread_small(const RunState& s, const OptimOptions& opts) {
  const double f_best = s.values.front();
  const double f_spread = s.values.back() - f_best;
  if (f_spread <= opts.tol_f * std::abs(f_best)) return true;
  const Point& best = s.simplex.front();
  for (std::size_t v = 1; v < s.simplex.size(); ++v) {
    for (std::size_t j = 0; j < best.size(); ++j) {
      const double scale = std::max(std::abs(best[j]), s.step[j]);
      if (std::abs(s.simplex[v][j] - best[j]) > opts.tol_x * scale) return false;
    }
  }
  return true;
}

RunState initial_simplex(const Point& x0, const OptimOptions& opts, Evaluator& eval) {
  const std::size_t n = x0.size();
  if (!opts.steps.empty() && opts.steps.size() != n) {
    throw ConfigError("nelder_mead: steps must have one entry per coordinate");
  }
  RunState s;
  s.simplex.push_back(x0);
  s.values.push_back(eval(x0));
  for (std::size_t i = 0; i < n; ++i) {
    Point x = x0;
    const double h = !opts.steps.empty() ? opts.steps[i] : (x0[i] != 0.0 ? opts.simplex_scale * x0[i] : opts.zero_step);
    if (h == 0.0 || !std::isfinite(h)) throw ConfigError("nelder_mead: initial simplex step must be finite and nonzero");
    x[i] += h;
    s.step.push_back(std::abs(h));
    s.values.push_back(eval(x));
    s.simplex.push_back(std::move(x));
  }
  sort_simplex(s);
  return s;
}

void run(RunState& s, const OptimOptions& opts, int budget, Evaluator& eval, std::vector<double>* history) {
  const std::size_t n = s.simplex.front().size();
  if (n == 0) {
    s.converged = true;
    return;
  }
  constexpr double kReflect = 1.0;
  constexpr double kExpand = 2.0;
  constexpr double kContract = 0.5;
  constexpr double kShrink = 0.5;

  while (true) {
    if (spread_small(s, opts)) {
      s.converged = true;
      return;
    }
    if (s.iterations >= budget) return;
    ++s.iterations;

    Point centroid(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += s.simplex[v][j];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    const Point& worst = s.simplex[n];
    const double f_worst = s.values[n];
    const double f_second = s.values[n - 1];
    const double f_best = s.values[0];

    Point reflected = affine(centroid, worst, -kReflect);
    const double f_reflected = eval(reflected);

    bool shrink = false;
    if (f_reflected < f_best) {
      Point expanded = affine(centroid, worst, -kReflect * kExpand);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        s.simplex[n] = std::move(expanded);
        s.values[n] = f_expanded;
      } else {
        s.simplex[n] = std::move(reflected);
        s.values[n] = f_reflected;
      }
    } else if (f_reflected < f_second) {
      s.simplex[n] = std::move(reflected);
      s.values[n] = f_reflected;
    } else if (f_reflected < f_worst) {
      Point outside = affine(centroid, reflected, kContract);
      const double f_outside = eval(outside);
      if (f_outside <= f_reflected) {
        s.simplex[n] = std::move(outside);
        s.values[n] = f_outside;
      } else {
        shrink = true;
      }
    } else {
      Point inside = affine(centroid, worst, kContract);
      const double f_inside = eval(inside);
      if (f_inside < f_worst) {
        s.simplex[n] = std::move(inside);
        s.values[n] = f_inside;
      } else {
        shrink = true;
      }
    }

    if (shrink) {
      for (std::size_t v = 1; v <= n; ++v) {
        s.simplex[v] = affine(s.simplex[0], s.simplex[v], kShrink);
        s.values[v] = eval(s.simplex[v]);
      }
    }
    sort_simplex(s);
    if (history) history->push_back(s.values.front());
  }
}

}  // namespace

OptimResult nelder_mead(const Objective& objective, std::vector<double> x0, const OptimOptions& opts) {
  if (!(opts.tol_f > 0.0) || !(opts.tol_x > 0.0)) throw ConfigError("nelder_mead: tolerances must be positive");
  if (opts.max_iter < 0 || opts.restarts < 0) throw ConfigError("nelder_mead: negative iteration budget");

  Evaluator eval(objective);
  OptimResult result;
  std::vector<double>* history = opts.record_history ? &result.history : nullptr;

  RunState state = initial_simplex(x0, opts, eval);
  run(state, opts, opts.max_iter, eval, history);
  int total_iterations = state.iterations;

  for (int r = 0; r < opts.restarts && total_iterations < opts.max_iter; ++r) {
    const double before = state.values.front();
    RunState next = initial_simplex(state.simplex.front(), opts, eval);
    run(next, opts, opts.max_iter - total_iterations, eval, history);
    total_iterations += next.iterations;
    const double after = next.values.front();
    const bool improved = before - after > opts.tol_f * std::abs(before);
    if (after <= before) state = std::move(next);
    if (!improved) break;
  }

  result.x_min = state.simplex.front();
  result.f_min = state.values.front();
  result.iterations = total_iterations;
  result.evaluations = eval.count();
  result.converged = state.converged;
  result.simplex = std::move(state.simplex);
  result.simplex_values = std::move(state.values);
  return result;
}

double weighted_objective(std::span<const double> model, std::span<const double> measured,
                          std::span<const double> sigmas) {
  if (model.size() != measured.size() || model.size() != sigmas.size()) {
    throw ConfigError("weighted_objective: vectors differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!(sigmas[i] > 0.0)) throw ConfigError("weighted_objective: sigma must be positive");
    const double r = (model[i] - measured[i]) / sigmas[i];
    sum += r * r;
  }
  return sum;
}

double PolynomialModel::value(double t) const { return derivative(t, 0); }

double PolynomialModel::derivative(double t, int order) const {
  const double u = t - t0;
  double sum = 0.0;
  // Horner on the order-th derivative: Σ_k c_k · k!/(k-order)! · u^(k-order).
  for (int k = degree(); k >= order; --k) {
    double falling = 1.0;
    for (int j = 0; j < order; ++j) falling *= static_cast<double>(k - j);
    sum = sum * u + falling * coefficients[static_cast<std::size_t>(k)];
  }
  return sum;
}

double PolynomialModel::fractional_derivative_ppm(double t) const {
  const double v = value(t);
  if (v == 0.0) throw ConfigError("fractional derivative undefined where the polynomial vanishes");
  return derivative(t, 1) / v * 1e6;
}

PolynomialModel polyfit_weighted(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> sigma, int degree, double t0) {
  if (degree < 0) throw ConfigError("polyfit: negative degree");
  if (x.size() != y.size() || x.size() != sigma.size()) throw ConfigError("polyfit: vectors differ in length");
  const std::set<double> distinct(x.begin(), x.end());
  if (static_cast<int>(distinct.size()) < degree + 1) {
    throw ConfigError("polyfit: rank deficient, need " + std::to_string(degree + 1) + " distinct abscissae, got " +
                      std::to_string(distinct.size()));
  }
  const auto m = static_cast<Eigen::Index>(x.size());
  const Eigen::Index cols = degree + 1;

  Eigen::MatrixXd a(m, cols);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (!(sigma[si] > 0.0)) throw ConfigError("polyfit: sigma must be positive");
    const double w = 1.0 / sigma[si];
    double p = 1.0;
    for (Eigen::Index k = 0; k < cols; ++k) {
      a(i, k) = w * p;
      p *= x[si] - t0;
    }
    b(i) = w * y[si];
  }
  Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (Eigen::Index k = 0; k < cols; ++k) {
    if (scale(k) == 0.0) scale(k) = 1.0;
    a.col(k) /= scale(k);
  }
  const Eigen::MatrixXd normal = a.transpose() * a;
  const Eigen::VectorXd rhs = a.transpose() * b;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw ConfigError("polyfit: normal equations are singular");
  const Eigen::VectorXd scaled = ldlt.solve(rhs);

  PolynomialModel model;
  model.t0 = t0;
  model.coefficients.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index k = 0; k < cols; ++k) model.coefficients[static_cast<std::size_t>(k)] = scaled(k) / scale(k);

  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = model.value(x[i]) - y[i];
    ss += r * r;
  }
  model.rms = std::sqrt(ss / static_cast<double>(x.size()));
  return model;
}

}  // namespace nvspin
