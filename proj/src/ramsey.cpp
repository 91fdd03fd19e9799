#include "nvspin/ramsey.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "nvspin/errors.hpp"

namespace nvspin {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double median_spacing(const std::vector<double>& t) {
  std::vector<double> dt;
  for (std::size_t i = 1; i < t.size(); ++i) dt.push_back(t[i] - t[i - 1]);
  std::nth_element(dt.begin(), dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2), dt.end());
  return dt[dt.size() / 2];
}

// Model evaluated with a decay rate (1/s) in place of T2*, so that an
// undamped trace sits at rate 0 instead of at infinity.
double model(double delta_khz, double rate, double amp, double phase, double offset, double tau) {
  return offset + amp * std::exp(-std::abs(rate) * tau) * std::cos(kTwoPi * delta_khz * 1e3 * tau + phase);
}

struct LinearStart {
  double amp = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  double ss = 0.0;
};

// offset + a·e^{-rate τ}cos(ωτ) + b·e^{-rate τ}sin(ωτ), solved for (offset, a, b).
LinearStart linear_start(const RamseyTrace& tr, double delta_khz, double rate) {
  const auto n = static_cast<Eigen::Index>(tr.times.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double tau = tr.times[static_cast<std::size_t>(i)];
    const double env = std::exp(-rate * tau);
    const double w = kTwoPi * delta_khz * 1e3 * tau;
    a(i, 0) = 1.0;
    a(i, 1) = env * std::cos(w);
    a(i, 2) = env * std::sin(w);
    y(i) = tr.signal[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
  LinearStart s;
  s.offset = c(0);
  s.amp = std::hypot(c(1), c(2));
  s.phase = std::atan2(-c(2), c(1));
  s.ss = (a * c - y).squaredNorm();
  return s;
}

double wrap_phase(double phi) {
  phi = std::remainder(phi, kTwoPi);
  if (phi <= -std::numbers::pi) phi += kTwoPi;
  return phi;
}

}  // namespace

void RamseyTrace::validate() const {
  if (times.size() != signal.size()) throw ConfigError("Ramsey trace: times and signal differ in length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(signal[i])) throw ConfigError("Ramsey trace: non-finite sample");
    if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError("Ramsey trace: times must be strictly increasing");
  }
}

double FringeParams::at(double tau) const {
  const double envelope = std::isinf(t2_star_s) ? 1.0 : std::exp(-tau / t2_star_s);
  return offset + amplitude * envelope * std::cos(kTwoPi * delta_khz * 1e3 * tau + phase);
}

std::vector<double> uniform_times(double span_s, int n) {
  if (!(span_s > 0.0) || n < 2) throw ConfigError("uniform_times: need span > 0 and at least 2 samples");
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = span_s * i / n;
  return t;
}

RamseyTrace synthesize(const FringeParams& p, const std::vector<double>& times, double noise_sigma,
                       std::uint64_t seed) {
  if (!(p.t2_star_s > 0.0)) throw ConfigError("synthesize: T2* must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthesize: noise sigma must be non-negative");
  for (double t : times) {
    if (!(t >= 0.0)) throw ConfigError("synthesize: times must be non-negative");
  }
  RamseyTrace tr;
  tr.times = times;
  tr.noise_sigma = noise_sigma;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  tr.signal.reserve(times.size());
  for (double t : times) {
    double s = p.at(t);
    if (noise_sigma > 0.0) s += noise_sigma * noise(rng);
    tr.signal.push_back(s);
  }
  tr.validate();
  return tr;
}

double periodogram_peak(const RamseyTrace& trace) {
  trace.validate();
  if (trace.times.size() < 4) throw ConfigError("periodogram: need at least 4 samples");
  const std::vector<double>& t = trace.times;
  double mean = 0.0;
  for (double s : trace.signal) mean += s;
  mean /= static_cast<double>(trace.signal.size());

  const double span = t.back() - t.front();
  const double nyquist = 0.5 / median_spacing(t);  // Hz
  const double df = 0.125 / span;
  std::vector<double> freqs;
  std::vector<double> power;
  for (double f = df; f <= nyquist; f += df) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double y = trace.signal[i] - mean;
      re += y * std::cos(kTwoPi * f * t[i]);
      im -= y * std::sin(kTwoPi * f * t[i]);
    }
    freqs.push_back(f);
    power.push_back(re * re + im * im);
  }
  if (power.empty()) throw ConfigError("periodogram: trace too short for its sampling rate");
  const auto k = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  double f_peak = freqs[k];
  if (k > 0 && k + 1 < power.size()) {
    const double a = power[k - 1];
    const double b = power[k];
    const double c = power[k + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) f_peak += 0.5 * (a - c) / denom * df;
  }
  return f_peak * 1e-3;
}

OptimOptions RamseyFitOptions::default_optim() {
  OptimOptions o;
  o.restarts = 2;
  return o;
}

RamseyFit fit_fringes(const RamseyTrace& trace, const std::optional<FringeParams>& guess,
                      const RamseyFitOptions& opts) {
  trace.validate();
  if (trace.times.size() < 8) throw ConfigError("Ramsey fit needs at least 8 samples");
  const double span = trace.times.back() - trace.times.front();
  const double dt = median_spacing(trace.times);

  double lo = trace.signal.front();
  double hi = lo;
  for (double s : trace.signal) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
    throw NonIdentifiable("Ramsey trace is constant: no oscillation to fit");
  }

  const double delta0 = guess ? std::abs(guess->delta_khz) : periodogram_peak(trace);
  if (!(delta0 > 0.0)) throw NonIdentifiable("Ramsey fit: starting detuning is zero");
  const double period = 1.0 / (delta0 * 1e3);
  if (period / dt < 4.0) {
    std::ostringstream os;
    os << "Ramsey trace undersampled: " << period / dt << " samples per period at δ = " << delta0 << " kHz (need 4)";
    throw ConfigError(os.str());
  }
  if (span / period < 3.0) {
    std::ostringstream os;
    os << "Ramsey trace covers " << span / period << " periods at δ = " << delta0 << " kHz (need 3)";
    throw ConfigError(os.str());
  }

  std::vector<double> x0;
  if (guess) {
    const double rate = std::isinf(guess->t2_star_s) ? 0.0 : 1.0 / guess->t2_star_s;
    x0 = {delta0, rate, guess->amplitude, guess->phase, guess->offset};
  } else {
    LinearStart best;
    double best_rate = 0.0;
    bool first = true;
    for (double k : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
      const double rate = k / span;
      const LinearStart s = linear_start(trace, delta0, rate);
      if (first || s.ss < best.ss) {
        best = s;
        best_rate = rate;
        first = false;
      }
    }
    x0 = {delta0, best_rate, best.amp, best.phase, best.offset};
  }
  const double amp_scale = std::max(std::abs(x0[2]), 1e-6 * (hi - lo));
  if (amp_scale <= 1e-9 * std::max(1.0, std::abs(x0[4]))) {
    throw NonIdentifiable("Ramsey fit: no oscillation amplitude at the starting detuning");
  }

  const Objective objective = [&](std::span<const double> x) {
    double ss = 0.0;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
      const double r = model(x[0], x[1], x[2], x[3], x[4], trace.times[i]) - trace.signal[i];
      ss += r * r;
    }
    return ss;
  };
  OptimOptions optim = opts.optim;
  if (optim.steps.empty()) {
    optim.steps = {0.05 / (span * 1e3), 0.1 / span, 0.05 * amp_scale, 0.05, 0.05 * amp_scale};
  }
  const OptimResult r = nelder_mead(objective, x0, optim);
  if (!r.converged) {
    std::ostringstream os;
    os << "Ramsey fit did not converge in " << r.iterations << " iterations";
    throw ConvergenceError(os.str());
  }

  RamseyFit fit;
  double delta = r.x_min[0];
  double amp = r.x_min[2];
  double phase = r.x_min[3];
  if (delta < 0.0) {
    delta = -delta;
    phase = -phase;
  }
  if (amp < 0.0) {
    amp = -amp;
    phase += std::numbers::pi;
  }
  if (amp <= 1e-9 * std::max(1.0, std::abs(r.x_min[4]))) {
    throw NonIdentifiable("Ramsey fit: fitted amplitude is zero, detuning undefined");
  }
  const double rate = std::abs(r.x_min[1]);
  fit.params.delta_khz = delta;
  fit.params.t2_star_s = rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
  fit.params.amplitude = amp;
  fit.params.phase = wrap_phase(phase);
  fit.params.offset = r.x_min[4];
  fit.rms = std::sqrt(r.f_min / static_cast<double>(trace.times.size()));
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  return fit;
}

double frequency_from_detuning(double f_rf_khz, double delta_khz, int sign) {
  if (sign != 1 && sign != -1) throw ConfigError("detuning sign must be +1 or -1");
  return f_rf_khz - sign * delta_khz;
}

int detuning_sign(double f_rf_a, double delta_a, double f_rf_b, double delta_b) {
  const double step = f_rf_b - f_rf_a;
  const double change = delta_b - delta_a;
  if (step == 0.0 || change == 0.0) throw NonIdentifiable("detuning sign: drive step or detuning change is zero");
  return (change > 0.0) == (step > 0.0) ? 1 : -1;
}

}  // namespace nvspin
