#include "nvspin/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "nvspin/errors.hpp"

namespace nvspin {
namespace {

std::string describe(const ParamVector& a) {
  std::ostringstream os;
  os.precision(12);
  const auto names = ParamVector::names(a.isotope);
  const auto values = a.to_vector();
  os << '(';
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? ", " : "") << names[i] << " = " << values[i];
  os << ')';
  return os.str();
}

// Canonical entry order so the objective does not depend on file order.
std::vector<std::size_t> canonical_order(const MeasurementSet& ms) {
  std::vector<std::size_t> idx(ms.entries.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const Measurement& x = ms.entries[a];
    const Measurement& y = ms.entries[b];
    if (x.label != y.label) return x.label < y.label;
    if (x.freq_khz != y.freq_khz) return x.freq_khz < y.freq_khz;
    return x.sigma_khz < y.sigma_khz;
  });
  return idx;
}

}  // namespace

void MeasurementSet::validate() const {
  for (const Measurement& m : entries) {
    if (!valid_for(m.label, isotope)) {
      throw ConfigError("transition " + to_string(m.label) + " does not exist for " + to_string(isotope));
    }
    if (!std::isfinite(m.freq_khz)) throw ConfigError("non-finite frequency for " + to_string(m.label));
    if (!(m.sigma_khz > 0.0) || !std::isfinite(m.sigma_khz)) {
      throw ConfigError("sigma must be positive for " + to_string(m.label));
    }
  }
}

std::vector<std::string> ParamVector::names(Isotope iso) {
  if (iso == Isotope::N14) return {"D", "gamma_e_bz", "Q", "A_par", "A_perp", "gamma_e_bx", "gamma_ratio"};
  return {"D", "gamma_e_bz", "A_par", "A_perp", "gamma_e_bx", "gamma_ratio"};
}

std::vector<double> ParamVector::to_vector() const {
  std::vector<double> v;
  for (const std::string& n : names(isotope)) v.push_back(get(n));
  return v;
}

ParamVector ParamVector::from_vector(Isotope iso, const std::vector<double>& v) {
  const auto n = names(iso);
  if (v.size() != n.size()) throw ConfigError("parameter vector has the wrong length for " + to_string(iso));
  ParamVector a;
  a.isotope = iso;
  for (std::size_t i = 0; i < n.size(); ++i) a.set(n[i], v[i]);
  return a;
}

ParamVector ParamVector::from(const CouplingParams& p, const FieldConfig& field, Isotope iso) {
  if (p.gamma_n == 0.0) throw ConfigError("gamma_n must be nonzero");
  ParamVector a;
  a.isotope = iso;
  a.D = p.D;
  a.gamma_e_bz = p.gamma_e * field.bz();
  a.Q = iso == Isotope::N14 ? p.Q : 0.0;
  a.A_par = p.A_par;
  a.A_perp = p.A_perp;
  a.gamma_e_bx = p.gamma_e * field.bx();
  a.gamma_ratio = p.gamma_e / p.gamma_n;
  return a;
}

double ParamVector::get(const std::string& name) const {
  if (name == "D") return D;
  if (name == "gamma_e_bz") return gamma_e_bz;
  if (name == "Q" && isotope == Isotope::N14) return Q;
  if (name == "A_par") return A_par;
  if (name == "A_perp") return A_perp;
  if (name == "gamma_e_bx") return gamma_e_bx;
  if (name == "gamma_ratio") return gamma_ratio;
  throw ConfigError("unknown fit parameter '" + name + "' for " + to_string(isotope));
}

void ParamVector::set(const std::string& name, double value) {
  if (name == "D") D = value;
  else if (name == "gamma_e_bz") gamma_e_bz = value;
  else if (name == "Q" && isotope == Isotope::N14) Q = value;
  else if (name == "A_par") A_par = value;
  else if (name == "A_perp") A_perp = value;
  else if (name == "gamma_e_bx") gamma_e_bx = value;
  else if (name == "gamma_ratio") gamma_ratio = value;
  else throw ConfigError("unknown fit parameter '" + name + "' for " + to_string(isotope));
}

CouplingParams ParamVector::params(double gamma_e) const {
  if (gamma_ratio == 0.0) throw ConfigError("gamma_ratio must be nonzero");
  CouplingParams p;
  p.D = D;
  p.Q = isotope == Isotope::N14 ? Q : 0.0;
  p.A_par = A_par;
  p.A_perp = A_perp;
  p.gamma_e = gamma_e;
  p.gamma_n = gamma_e / gamma_ratio;
  return p;
}

FieldConfig ParamVector::field(double gamma_e) const { return {gamma_e_bz / gamma_e, gamma_e_bx / gamma_e}; }

OptimOptions FitOptions::default_optim() {
  OptimOptions o;
  o.restarts = 3;
  return o;
}

FitOptions FitOptions::defaults_for(Isotope iso) {
  FitOptions o;
  if (iso == Isotope::N15) o.fixed = {"A_perp", "gamma_e_bx"};
  return o;
}

std::vector<double> model_frequencies(const ParamVector& a, const MeasurementSet& ms, const FitOptions& opts) {
  const IsotopeSpec iso = IsotopeSpec::of(ms.isotope);
  const CouplingParams p = a.params(opts.gamma_e);
  TransitionSet ts;
  try {
    ts = transition_set(p, a.field(opts.gamma_e), iso, opts.hamiltonian);
  } catch (const AmbiguousLabeling& e) {
    throw AmbiguousLabeling(std::string(e.what()) + "; trial point " + describe(a));
  }
  std::vector<double> out;
  out.reserve(ms.entries.size());
  for (const Measurement& m : ms.entries) out.push_back(ts.at(m.label));
  return out;
}

FitResult extract_params(const MeasurementSet& ms, const ParamVector& guess, const FitOptions& opts) {
  ms.validate();
  if (guess.isotope != ms.isotope) throw ConfigError("guess isotope differs from measurement isotope");

  const std::vector<std::string> names = ParamVector::names(ms.isotope);
  const std::set<std::string> fixed(opts.fixed.begin(), opts.fixed.end());
  for (const std::string& f : fixed) {
    if (std::find(names.begin(), names.end(), f) == names.end()) {
      throw ConfigError("cannot fix unknown parameter '" + f + "'");
    }
  }
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!fixed.count(names[i])) free.push_back(i);
  }
  if (ms.entries.size() < free.size()) {
    std::ostringstream os;
    os << "T = " << ms.temperature << " K: " << ms.entries.size() << " measurements for " << free.size()
       << " free parameters";
    throw ConfigError(os.str());
  }

  MeasurementSet sorted = ms;
  const std::vector<std::size_t> order = canonical_order(ms);
  for (std::size_t i = 0; i < order.size(); ++i) sorted.entries[i] = ms.entries[order[i]];
  std::vector<double> measured;
  std::vector<double> sigmas;
  for (const Measurement& m : sorted.entries) {
    measured.push_back(m.freq_khz);
    sigmas.push_back(m.sigma_khz);
  }

  const std::vector<double> base = guess.to_vector();
  auto expand = [&](std::span<const double> x) {
    std::vector<double> full = base;
    for (std::size_t k = 0; k < free.size(); ++k) full[free[k]] = x[k];
    return ParamVector::from_vector(ms.isotope, full);
  };
  const Objective objective = [&](std::span<const double> x) {
    return weighted_objective(model_frequencies(expand(x), sorted, opts), measured, sigmas);
  };

  std::vector<double> x0;
  for (std::size_t i : free) x0.push_back(base[i]);
  OptimOptions optim = opts.optim;
  if (!optim.steps.empty()) {
    if (optim.steps.size() != names.size()) throw ConfigError("fit steps need one entry per parameter");
    std::vector<double> steps;
    for (std::size_t i : free) steps.push_back(optim.steps[i]);
    optim.steps = std::move(steps);
  }
  const OptimResult r = nelder_mead(objective, x0, optim);

  FitResult out;
  out.params = expand(r.x_min);
  out.params.gamma_e_bx = std::abs(out.params.gamma_e_bx);  // the model is even in Bx
  out.objective = r.f_min;
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.evaluations = r.evaluations;
  const std::vector<double> model = model_frequencies(out.params, ms, opts);
  for (std::size_t i = 0; i < ms.entries.size(); ++i) {
    out.residuals.emplace_back(ms.entries[i].label, model[i] - ms.entries[i].freq_khz);
  }
  if (!r.converged) {
    std::ostringstream os;
    os << "fit at T = " << ms.temperature << " K did not converge in " << r.iterations
       << " iterations (objective " << r.f_min << ")";
    throw ConvergenceError(os.str());
  }
  return out;
}

std::vector<FitResult> fit_series(const std::vector<MeasurementSet>& sets, const std::vector<ParamVector>& guesses,
                                  const FitOptions& opts, unsigned max_threads) {
  if (sets.size() != guesses.size()) throw ConfigError("fit_series: one guess per measurement set");
  unsigned workers = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(sets.size(), 1)));

  std::vector<FitResult> results(sets.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < sets.size(); ++i) results[i] = extract_params(sets[i], guesses[i], opts);
    return results;
  }
  // Static round-robin partition; the first failure in input order is rethrown.
  std::vector<std::future<void>> jobs;
  std::vector<std::exception_ptr> errors(sets.size());
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < sets.size(); i += workers) {
        try {
          results[i] = extract_params(sets[i], guesses[i], opts);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }));
  }
  for (auto& j : jobs) j.get();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::map<std::string, PolynomialModel> thermal_models(const std::vector<std::pair<double, FitResult>>& series,
                                                      double t0) {
  if (series.empty()) throw ConfigError("thermal_models: empty series");
  std::set<double> temps;
  for (const auto& [t, fit] : series) temps.insert(t);
  if (temps.size() < 5 || *temps.rbegin() - *temps.begin() < 100.0) {
    std::ostringstream os;
    os << "thermal_models needs >= 5 temperatures spanning >= 100 K, got " << temps.size() << " spanning "
       << (*temps.rbegin() - *temps.begin()) << " K";
    throw ConfigError(os.str());
  }
  const Isotope iso = series.front().second.params.isotope;
  std::vector<std::pair<double, FitResult>> sorted = series;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<double> x;
  for (const auto& [t, fit] : sorted) {
    if (fit.params.isotope != iso) throw ConfigError("thermal_models: mixed isotopes in series");
    x.push_back(t);
  }
  const std::vector<double> sigma(x.size(), 1.0);
  std::map<std::string, PolynomialModel> out;
  for (const std::string& name : ParamVector::names(iso)) {
    std::vector<double> y;
    for (const auto& [t, fit] : sorted) y.push_back(fit.params.get(name));
    out[name] = polyfit_weighted(x, y, sigma, 4, t0);
  }
  return out;
}

ThermalModelSet to_model_set(const std::map<std::string, PolynomialModel>& models, Isotope iso, double gamma_e) {
  ThermalModelSet set;
  set.isotope = iso;
  set.gamma_e = gamma_e;
  const std::vector<std::string> keys =
      iso == Isotope::N14 ? std::vector<std::string>{"D", "Q", "A_par", "A_perp"}
                          : std::vector<std::string>{"D", "A_par", "A_perp"};
  for (const std::string& k : keys) {
    auto it = models.find(k);
    if (it == models.end()) throw ConfigError("model set needs a '" + k + "' polynomial");
    set.models[k] = it->second;
    set.t0 = it->second.t0;
  }
  auto ratio = models.find("gamma_ratio");
  if (ratio != models.end()) {
    const double r = ratio->second.value(set.t0);
    if (r == 0.0) throw ConfigError("gamma_ratio polynomial vanishes at T0");
    set.gamma_n = gamma_e / r;
  } else {
    set.gamma_n = IsotopeSpec::of(iso).gamma_n;
  }
  return set;
}

AnisotropyResult anisotropy(double a_par_khz, double a_perp_khz) {
  if (!std::isfinite(a_par_khz) || !std::isfinite(a_perp_khz)) throw ConfigError("anisotropy: non-finite input");
  if (a_par_khz == 0.0 && a_perp_khz == 0.0) throw ConfigError("anisotropy: hyperfine couplings are zero");
  AnisotropyResult r;
  r.fermi_f = (a_par_khz + 2.0 * a_perp_khz) * 1e-3;
  r.dipolar_d = (a_par_khz - a_perp_khz) * 1e-3;
  if (r.fermi_f == 0.0) throw ConfigError("anisotropy: Fermi contact term is zero, s-character undefined");
  const double cs2_eta = std::abs(r.fermi_f) / kFermiScaleMHz;
  const double cp2_eta = std::abs(r.dipolar_d) / kDipolarScaleMHz;
  r.eta = cs2_eta + cp2_eta;
  r.cs2 = cs2_eta / r.eta;
  r.cp2 = cp2_eta / r.eta;
  r.hybridization_ratio = r.cp2 / r.cs2;
  return r;
}

}  // namespace nvspin
