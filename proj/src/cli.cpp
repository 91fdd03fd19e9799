#include "nvspin/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nvspin/angular.hpp"
#include "nvspin/errors.hpp"
#include "nvspin/extraction.hpp"
#include "nvspin/io.hpp"
#include "nvspin/perturbation.hpp"
#include "nvspin/ramsey.hpp"
#include "nvspin/thermal.hpp"
#include "nvspin/transitions.hpp"

namespace nvspin::cli {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

// Tripwire failures are reported through the exit code, not an exception type
// of the library.
struct TripwireFailure {
  std::string message;
};

// ---------------------------------------------------------------------------
// Shared options

struct ModelOptions {
  std::string isotope = "n14";
  std::string preset;
  std::string params_file;
  std::vector<std::string> sets;
  double temp = 297.0;
  CLI::Option* temp_opt = nullptr;
};

struct FieldOptions {
  double bz = 0.0;
  double bx = 0.0;
  double b = 0.0;
  double theta_deg = 0.0;
  CLI::Option* bz_opt = nullptr;
  CLI::Option* bx_opt = nullptr;
  CLI::Option* b_opt = nullptr;
  CLI::Option* theta_opt = nullptr;
};

struct OutputOptions {
  std::string format = "csv";
  std::string out;
};

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--isotope", m.isotope, "n14 or n15")->capture_default_str();
  auto* preset = app->add_option("--preset", m.preset, "named parameter preset (default table1_297K)");
  auto* params = app->add_option("--params", m.params_file, "parameter JSON file");
  preset->excludes(params);
  app->add_option("--set", m.sets, "override a parameter, KEY=VALUE (D, Q, A_par, A_perp, gamma_e, gamma_n)");
  m.temp_opt = app->add_option("--temp", m.temp, "temperature in K for preset models")->capture_default_str();
}

void add_field_options(CLI::App* app, FieldOptions& f, bool with_polar = true) {
  f.bz_opt = app->add_option("--bz", f.bz, "axial field, G");
  f.bx_opt = app->add_option("--bx", f.bx, "transverse field, G");
  if (with_polar) {
    f.b_opt = app->add_option("--b", f.b, "field magnitude, G (with --theta-deg)");
    f.theta_opt = app->add_option("--theta-deg", f.theta_deg, "misalignment from the NV axis, degrees");
    f.b_opt->excludes(f.bz_opt)->excludes(f.bx_opt);
    f.theta_opt->excludes(f.bx_opt);
  }
}

void add_output_options(CLI::App* app, OutputOptions& o, const std::string& default_format) {
  o.format = default_format;
  app->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app->add_option("--out", o.out, "output file (default stdout)");
}

Isotope isotope_of(const ModelOptions& m) { return parse_isotope(m.isotope); }

void apply_sets(CouplingParams& p, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
      throw ConfigError("--set " + key + ": bad number '" + text + "'");
    }
    if (key == "D") p.D = v;
    else if (key == "Q") p.Q = v;
    else if (key == "A_par") p.A_par = v;
    else if (key == "A_perp") p.A_perp = v;
    else if (key == "gamma_e") p.gamma_e = v;
    else if (key == "gamma_n") p.gamma_n = v;
    else throw ConfigError("--set: unknown parameter '" + key + "'");
  }
}

bool uses_preset(const ModelOptions& m) { return m.params_file.empty(); }

std::string preset_name(const ModelOptions& m) { return m.preset.empty() ? "table1_297K" : m.preset; }

/// Parameters at the requested temperature from exactly one source, then --set overrides.
CouplingParams resolve_params(const ModelOptions& m, Isotope iso) {
  CouplingParams p;
  if (uses_preset(m)) {
    p = preset_thermal(iso, preset_name(m)).params_at(m.temp);
  } else {
    if (m.temp_opt->count() > 0) throw ConfigError("--temp needs a preset; a --params file is a single parameter set");
    p = io::params_from_json(json::parse(io::read_file(m.params_file)), iso);
  }
  apply_sets(p, m.sets);
  p.validate(IsotopeSpec::of(iso));
  return p;
}

FieldConfig resolve_field(const FieldOptions& f, std::optional<double> default_bz) {
  if (f.b_opt && f.b_opt->count() > 0) {
    const double theta = f.theta_opt->count() > 0 ? f.theta_deg * kDeg : 0.0;
    return FieldConfig::polar(f.b, theta);
  }
  if (f.bz_opt->count() == 0 && !default_bz) throw ConfigError("--bz (or --b with --theta-deg) is required");
  const double bz = f.bz_opt->count() > 0 ? f.bz : *default_bz;
  if (f.theta_opt && f.theta_opt->count() > 0) return FieldConfig(bz, bz * std::tan(f.theta_deg * kDeg));
  return FieldConfig(bz, f.bx);
}

json model_config(const ModelOptions& m, Isotope iso, const CouplingParams& p) {
  json j;
  j["isotope"] = to_string(iso);
  if (uses_preset(m)) {
    j["preset"] = preset_name(m);
    j["temperature_K"] = m.temp;
  } else {
    j["params_file"] = m.params_file;
  }
  j["set"] = m.sets;
  j["params"] = io::params_to_json(p, iso);
  return j;
}

void emit(const OutputOptions& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
  } else {
    io::write_file(o.out, text);
  }
}

std::string mi_text(int twice) {
  if (twice == 0) return "0";
  std::string s = twice > 0 ? "+" : "-";
  const int a = std::abs(twice);
  return s + (a % 2 == 0 ? std::to_string(a / 2) : std::to_string(a) + "/2");
}

std::string ms_text(int ms) { return ms > 0 ? "+" + std::to_string(ms) : std::to_string(ms); }

// ---------------------------------------------------------------------------
// transitions

struct TransitionsCmd {
  ModelOptions model;
  FieldOptions field;
  OutputOptions output;
  bool derivatives = false;
  std::string models_file;
  bool no_nuclear_transverse = false;
};

ThermalModelSet resolve_models(const ModelOptions& m, const std::string& models_file, Isotope iso) {
  if (!models_file.empty()) {
    ThermalModelSet set = io::model_set_from_json(json::parse(io::read_file(models_file)));
    if (set.isotope != iso) throw ConfigError("model file is for " + to_string(set.isotope));
    return set;
  }
  if (!uses_preset(m)) throw ConfigError("temperature derivatives need a preset or --models file");
  if (!m.sets.empty()) throw ConfigError("--set cannot be combined with temperature models");
  return preset_thermal(iso, preset_name(m));
}

int cmd_transitions(const TransitionsCmd& c, std::ostream& out) {
  const Isotope iso = isotope_of(c.model);
  const CouplingParams p = resolve_params(c.model, iso);
  const FieldConfig field = resolve_field(c.field, std::nullopt);
  HamiltonianOptions hopts;
  hopts.transverse_nuclear_zeeman = !c.no_nuclear_transverse;

  json doc;
  doc["config"] = model_config(c.model, iso, p);
  doc["config"]["bz_G"] = field.bz();
  doc["config"]["bx_G"] = field.bx();
  doc["config"]["transverse_nuclear_zeeman"] = hopts.transverse_nuclear_zeeman;

  std::ostringstream csv;
  if (c.derivatives || !c.models_file.empty()) {
    if (field.bx() != 0.0) throw ConfigError("temperature derivatives are tabulated at Bx = 0");
    const ThermalModelSet models = resolve_models(c.model, c.models_file, iso);
    const TransitionTable table = transition_table(models, c.model.temp, field.bz());
    csv << "transition,freq_khz,dfdt_hz_per_k\n";
    for (const auto& r : table.rows) {
      csv << r.name << ',' << io::format_khz(r.freq_khz) << ',' << io::format_khz(r.dfdt_hz_per_k) << '\n';
      doc["transitions"].push_back({{"transition", r.name}, {"freq_khz", r.freq_khz}, {"dfdt_hz_per_k", r.dfdt_hz_per_k}});
    }
  } else {
    const TransitionSet ts = transition_set(p, field, IsotopeSpec::of(iso), hopts);
    csv << "transition,freq_khz,upper_ms,upper_mI,lower_ms,lower_mI\n";
    for (const TransitionLabel& label : transitions_of(iso)) {
      const Transition& t = ts.entries.at(label);
      csv << to_string(label) << ',' << io::format_khz(t.frequency) << ',' << ms_text(t.upper.ms) << ','
          << mi_text(t.upper.twice_mI) << ',' << ms_text(t.lower.ms) << ',' << mi_text(t.lower.twice_mI) << '\n';
      doc["transitions"].push_back({{"transition", to_string(label)},
                                    {"freq_khz", t.frequency},
                                    {"upper", {{"ms", t.upper.ms}, {"mI", t.upper.mI()}}},
                                    {"lower", {{"ms", t.lower.ms}, {"mI", t.lower.mI()}}}});
    }
  }
  emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitCmd {
  ModelOptions model;
  OutputOptions output;
  std::string measurements;
  double bz = 0.0;
  CLI::Option* bz_opt = nullptr;
  std::vector<std::string> fix;
  std::vector<std::string> free;
  bool thermal = false;
  unsigned threads = 0;
  bool no_nuclear_transverse = false;
};

double estimate_bz(const MeasurementSet& set) {
  auto find = [&](int index) -> std::optional<double> {
    for (const Measurement& m : set.entries) {
      if (m.label == TransitionLabel::nuclear(index)) return m.freq_khz;
    }
    return std::nullopt;
  };
  if (set.isotope == Isotope::N14) {
    const auto f3 = find(3);
    const auto f6 = find(6);
    if (f3 && f6) return (*f3 - *f6) / (2.0 * constants::kGammaN14);
  } else {
    const auto f8 = find(8);
    const auto f9 = find(9);
    if (f8 && f9) return (*f9 - *f8) / (2.0 * std::abs(constants::kGammaN15));
  }
  std::ostringstream os;
  os << "T = " << set.temperature << " K: cannot estimate Bz from the lines present, pass --bz";
  throw ConfigError(os.str());
}

json thermal_json(const std::map<std::string, PolynomialModel>& models) {
  json j;
  for (const auto& [name, m] : models) {
    json e = io::model_to_json(m);
    e["value_at_t0"] = m.value(m.t0);
    e["d1_per_K"] = m.derivative(m.t0, 1);
    e["d2_per_K2"] = m.derivative(m.t0, 2);
    const double v = m.value(m.t0);
    e["fractional_ppm_per_K"] = v != 0.0 ? json(m.fractional_derivative_ppm(m.t0)) : json(nullptr);
    j[name] = e;
  }
  return j;
}

int cmd_fit(const FitCmd& c, std::ostream& out) {
  const Isotope iso = isotope_of(c.model);
  std::ifstream in(c.measurements);
  if (!in) throw ConfigError("cannot open measurement file '" + c.measurements + "'");
  const std::vector<MeasurementSet> sets = io::read_measurements(in, iso);
  if (sets.empty()) throw ConfigError("measurement file has no rows");

  FitOptions opts = FitOptions::defaults_for(iso);
  opts.hamiltonian.transverse_nuclear_zeeman = !c.no_nuclear_transverse;
  for (const std::string& f : c.fix) opts.fixed.push_back(f);
  std::erase_if(opts.fixed, [&](const std::string& f) { return std::find(c.free.begin(), c.free.end(), f) != c.free.end(); });

  std::optional<ThermalModelSet> preset;
  CouplingParams fixed_params;
  if (uses_preset(c.model)) {
    preset = preset_thermal(iso, preset_name(c.model));
  } else {
    fixed_params = resolve_params(c.model, iso);
  }
  std::vector<ParamVector> guesses;
  for (const MeasurementSet& set : sets) {
    CouplingParams p;
    if (preset) {
      const double t = std::clamp(set.temperature, preset->t_min, preset->t_max);
      p = preset->params_at(t);
      apply_sets(p, c.model.sets);
    } else {
      p = fixed_params;
    }
    const double bz = c.bz_opt->count() > 0 ? c.bz : estimate_bz(set);
    guesses.push_back(ParamVector::from(p, FieldConfig::axial(bz), iso));
  }

  const std::vector<FitResult> fits = fit_series(sets, guesses, opts, c.threads);

  json doc;
  doc["config"]["isotope"] = to_string(iso);
  doc["config"]["measurements"] = c.measurements;
  if (preset) doc["config"]["preset"] = preset_name(c.model);
  else doc["config"]["params_file"] = c.model.params_file;
  doc["config"]["set"] = c.model.sets;
  doc["config"]["fixed"] = opts.fixed;
  doc["config"]["transverse_nuclear_zeeman"] = opts.hamiltonian.transverse_nuclear_zeeman;
  if (c.bz_opt->count() > 0) doc["config"]["bz_guess_G"] = c.bz;
  doc["config"]["thermal"] = c.thermal;

  const std::vector<std::string> names = ParamVector::names(iso);
  std::ostringstream csv;
  csv << "temperature_K";
  for (const auto& n : names) csv << ',' << n;
  csv << ",bz_G,bx_G,gamma_n,objective,iterations\n";

  std::vector<std::pair<double, FitResult>> series;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const FitResult& r = fits[i];
    const FieldConfig field = r.params.field(opts.gamma_e);
    const CouplingParams p = r.params.params(opts.gamma_e);
    json f;
    f["temperature_K"] = sets[i].temperature;
    for (const auto& n : names) f["params"][n] = r.params.get(n);
    f["bz_G"] = field.bz();
    f["bx_G"] = field.bx();
    f["gamma_n"] = p.gamma_n;
    f["objective"] = r.objective;
    f["converged"] = r.converged;
    f["iterations"] = r.iterations;
    for (const auto& [label, res] : r.residuals) f["residuals_khz"][to_string(label)] = res;
    doc["fits"].push_back(f);

    csv << io::format_sig(sets[i].temperature);
    for (const auto& n : names) csv << ',' << io::format_khz(r.params.get(n));
    csv << ',' << io::format_khz(field.bz()) << ',' << io::format_khz(field.bx()) << ','
        << io::format_sig(p.gamma_n) << ',' << io::format_sig(r.objective) << ',' << r.iterations << '\n';
    series.emplace_back(sets[i].temperature, r);
  }

  if (c.thermal) {
    const auto models = thermal_models(series);
    doc["thermal"] = thermal_json(models);
    doc["model_set"] = io::model_set_to_json(to_model_set(models, iso, opts.gamma_e));
    csv << "# parameter,value_at_297K,d1_per_K,d2_per_K2,fractional_ppm_per_K\n";
    for (const auto& [name, m] : models) {
      const double v = m.value(m.t0);
      csv << "# " << name << ',' << io::format_khz(v) << ',' << io::format_sig(m.derivative(m.t0, 1)) << ','
          << io::format_sig(m.derivative(m.t0, 2)) << ','
          << (v != 0.0 ? io::format_sig(m.fractional_derivative_ppm(m.t0)) : std::string("nan")) << '\n';
    }
  }
  emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// thermal

struct ThermalCmd {
  ModelOptions model;
  OutputOptions output;
  std::string models_file;
  double bz = 0.0;
  CLI::Option* bz_opt = nullptr;
};

int cmd_thermal(const ThermalCmd& c, std::ostream& out) {
  const Isotope iso = isotope_of(c.model);
  const ThermalModelSet models = resolve_models(c.model, c.models_file, iso);
  const double t = c.model.temp;
  const CouplingParams p = models.params_at(t);

  json doc;
  doc["config"]["isotope"] = to_string(iso);
  if (!c.models_file.empty()) doc["config"]["models_file"] = c.models_file;
  else doc["config"]["preset"] = preset_name(c.model);
  doc["config"]["temperature_K"] = t;
  doc["models"] = io::model_set_to_json(models);

  std::ostringstream csv;
  csv << "parameter,value_khz,d1_hz_per_k,d2_hz_per_k2,fractional_ppm_per_k\n";
  std::vector<std::string> keys = {"D", "Q", "A_par", "A_perp"};
  if (iso == Isotope::N15) keys.erase(keys.begin() + 1);
  for (const std::string& k : keys) {
    const PolynomialModel& m = models.models.at(k);
    double scale = 1.0;
    double at = t;
    const PolynomialModel* src = &m;
    if (k == "A_perp" && models.a_perp_tracks_a_par) {
      const PolynomialModel& a_par = models.models.at("A_par");
      scale = m.value(models.t0) / a_par.value(models.t0);
      src = &a_par;
    }
    const double v = scale * src->value(at);
    const double d1 = scale * src->derivative(at, 1) * 1e3;
    const double d2 = scale * src->derivative(at, 2) * 1e3;
    const double frac = v != 0.0 ? d1 * 1e-3 / v * 1e6 : std::nan("");
    csv << k << ',' << io::format_khz(v) << ',' << io::format_sig(d1) << ',' << io::format_sig(d2) << ','
        << io::format_sig(frac) << '\n';
    doc["parameters"].push_back({{"parameter", k}, {"value_khz", v}, {"d1_hz_per_k", d1}, {"d2_hz_per_k2", d2},
                                 {"fractional_ppm_per_k", frac}});
  }
  const AnisotropyResult an = anisotropy(p.A_par, p.A_perp);
  doc["anisotropy"] = {{"fermi_f_mhz", an.fermi_f}, {"dipolar_d_mhz", an.dipolar_d}, {"eta", an.eta},
                       {"cs2", an.cs2},           {"cp2", an.cp2},                {"hybridization_ratio", an.hybridization_ratio}};
  csv << "# anisotropy fermi_f_mhz=" << io::format_sig(an.fermi_f) << " dipolar_d_mhz=" << io::format_sig(an.dipolar_d)
      << " eta=" << io::format_sig(an.eta) << " cs2=" << io::format_sig(an.cs2) << " cp2=" << io::format_sig(an.cp2)
      << " ratio=" << io::format_sig(an.hybridization_ratio) << '\n';

  if (c.bz_opt->count() > 0) {
    doc["config"]["bz_G"] = c.bz;
    const TransitionTable table = transition_table(models, t, c.bz);
    csv << "transition,freq_khz,dfdt_hz_per_k\n";
    for (const auto& r : table.rows) {
      csv << r.name << ',' << io::format_khz(r.freq_khz) << ',' << io::format_khz(r.dfdt_hz_per_k) << '\n';
      doc["transitions"].push_back({{"transition", r.name}, {"freq_khz", r.freq_khz}, {"dfdt_hz_per_k", r.dfdt_hz_per_k}});
    }
  }
  emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// angular-scan

struct AngularCmd {
  ModelOptions model;
  OutputOptions output;
  double bz = 480.0;
  double theta_max_deg = 0.1;
  int steps = 10;
  std::string transition;
  bool nuclear_transverse = false;
};

int cmd_angular(const AngularCmd& c, std::ostream& out) {
  const Isotope iso = isotope_of(c.model);
  const CouplingParams p = resolve_params(c.model, iso);
  if (!(c.theta_max_deg > 0.0) || c.theta_max_deg > 2.0) throw ConfigError("--theta-max-deg must be in (0, 2]");
  if (c.steps < 1 || c.steps > 100000) throw ConfigError("--steps must be between 1 and 100000");
  AngularTransition which = iso == Isotope::N14 ? AngularTransition::DoubleQuantum : AngularTransition::F7;
  if (!c.transition.empty()) {
    if (c.transition == "fDQ" || c.transition == "fdq") which = AngularTransition::DoubleQuantum;
    else if (c.transition == "f7") which = AngularTransition::F7;
    else throw ConfigError("--transition must be fDQ or f7");
  }
  HamiltonianOptions hopts;
  hopts.transverse_nuclear_zeeman = c.nuclear_transverse;

  std::vector<double> thetas;
  for (int i = 0; i <= c.steps; ++i) thetas.push_back(c.theta_max_deg * i / c.steps * kDeg);
  const AngularScan scan = angular_scan(p, iso, c.bz, thetas, which, hopts);
  const AngularResponse beta = beta_coefficient(p, c.bz, which);
  const double beta_fit = fit_beta(scan);

  json doc;
  doc["config"] = model_config(c.model, iso, p);
  doc["config"]["bz_G"] = c.bz;
  doc["config"]["theta_max_deg"] = c.theta_max_deg;
  doc["config"]["steps"] = c.steps;
  doc["config"]["transition"] = to_string(which);
  doc["config"]["transverse_nuclear_zeeman"] = c.nuclear_transverse;
  doc["beta_perturbative"] = beta.beta;
  doc["beta_exact_fit"] = beta_fit;
  doc["baseline_khz"] = scan.baseline;

  std::ostringstream csv;
  csv << "# transition " << to_string(which) << " at Bz = " << io::format_sig(c.bz) << " G\n";
  csv << "# beta " << io::format_sig(beta.beta) << " (perturbative), " << io::format_sig(beta_fit)
      << " (exact, quadratic fit)\n";
  csv << "theta_deg,f_khz,fractional_shift\n";
  for (const AngularPoint& pt : scan.points) {
    const double frac = pt.shift_khz / scan.freq0;
    csv << io::format_sig(pt.theta_rad / kDeg) << ',' << io::format_khz(pt.freq_khz) << ',' << io::format_sig(frac)
        << '\n';
    doc["points"].push_back({{"theta_deg", pt.theta_rad / kDeg}, {"f_khz", pt.freq_khz}, {"fractional_shift", frac}});
  }
  emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// perturb-check

struct PerturbCmd {
  ModelOptions model;
  OutputOptions output;
  PerturbGrid grid;
  double tolerance_hz = 20.0;
  bool nuclear_transverse = false;
};

int cmd_perturb(const PerturbCmd& c, std::ostream& out) {
  std::vector<Isotope> isotopes;
  if (c.model.isotope == "both") {
    isotopes = {Isotope::N14, Isotope::N15};
  } else {
    isotopes = {isotope_of(c.model)};
  }
  if (!(c.tolerance_hz > 0.0)) throw ConfigError("--tolerance-hz must be positive");
  HamiltonianOptions hopts;
  hopts.transverse_nuclear_zeeman = c.nuclear_transverse;

  json doc;
  doc["config"]["isotope"] = c.model.isotope;
  doc["config"]["grid"] = {{"bz_min", c.grid.bz_min}, {"bz_max", c.grid.bz_max}, {"bz_steps", c.grid.bz_steps},
                           {"bx_min", c.grid.bx_min}, {"bx_max", c.grid.bx_max}, {"bx_steps", c.grid.bx_steps}};
  doc["config"]["tolerance_hz"] = c.tolerance_hz;
  doc["config"]["transverse_nuclear_zeeman"] = c.nuclear_transverse;

  std::ostringstream csv;
  csv << "isotope,transition,max_abs_hz,bz_G,bx_G\n";
  bool pass = true;
  for (Isotope iso : isotopes) {
    const CouplingParams p = resolve_params(c.model, iso);
    doc["config"]["params"][to_string(iso)] = io::params_to_json(p, iso);
    const PerturbCheck check = perturbation_check(p, iso, c.grid, hopts);
    for (const auto& [label, r] : check.residuals) {
      csv << to_string(iso) << ',' << to_string(label) << ',' << io::format_sig(r.max_abs_hz) << ','
          << io::format_sig(r.bz) << ',' << io::format_sig(r.bx) << '\n';
      doc["residuals"].push_back({{"isotope", to_string(iso)}, {"transition", to_string(label)},
                                  {"max_abs_hz", r.max_abs_hz}, {"bz_G", r.bz}, {"bx_G", r.bx}});
      if (r.max_abs_hz > c.tolerance_hz) pass = false;
    }
  }
  doc["pass"] = pass;
  csv << (pass ? "# PASS" : "# FAIL") << " tolerance " << io::format_sig(c.tolerance_hz) << " Hz\n";
  emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
  if (!pass) throw TripwireFailure{"perturbative frequencies exceed the " + io::format_sig(c.tolerance_hz) + " Hz tolerance"};
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthCmd {
  ModelOptions model;
  std::string models_file;
  std::string out;
  double bz = 470.0;
  double bx = 0.0;
  std::vector<double> temps;
  double t_min = 0.0;
  double t_max = 0.0;
  int count = 0;
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::vector<std::string> transitions;
  bool no_nuclear_transverse = false;
};

double default_sigma(const TransitionLabel& l) {
  if (l.kind != TransitionLabel::Kind::Nuclear) return 1.0;
  switch (l.index) {
    case 1:
    case 2: return 0.01;
    case 7: return 0.03;
    case 8:
    case 9: return 0.1;
    default: return 0.08;
  }
}

std::vector<TransitionLabel> default_lines(Isotope iso) {
  std::vector<TransitionLabel> out;
  for (const TransitionLabel& l : transitions_of(iso)) {
    if (l.kind == TransitionLabel::Kind::Nuclear) out.push_back(l);
  }
  const int top = IsotopeSpec::of(iso).twice_nuclear_spin;
  out.push_back(TransitionLabel::plus(top));
  out.push_back(TransitionLabel::minus(top));
  return out;
}

int cmd_synth(const SynthCmd& c, std::ostream& out) {
  const Isotope iso = isotope_of(c.model);
  const ThermalModelSet models = resolve_models(c.model, c.models_file, iso);
  if (!(c.noise >= 0.0)) throw ConfigError("--noise must be non-negative");

  std::vector<double> temps = c.temps;
  if (c.count > 0) {
    if (!temps.empty()) throw ConfigError("use either --temps or --t-min/--t-max/--count");
    if (c.count == 1) {
      temps.push_back(c.t_min);
    } else {
      for (int i = 0; i < c.count; ++i) temps.push_back(c.t_min + (c.t_max - c.t_min) * i / (c.count - 1));
    }
  }
  if (temps.empty()) temps.push_back(c.model.temp);

  std::vector<TransitionLabel> lines;
  for (const std::string& s : c.transitions) lines.push_back(parse_transition(s));
  if (lines.empty()) lines = default_lines(iso);
  for (const TransitionLabel& l : lines) {
    if (l.kind == TransitionLabel::Kind::DoubleQuantum || !valid_for(l, iso)) {
      throw ConfigError("transition " + to_string(l) + " cannot be synthesized for " + to_string(iso));
    }
  }

  HamiltonianOptions hopts;
  hopts.transverse_nuclear_zeeman = !c.no_nuclear_transverse;
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<MeasurementSet> sets;
  for (double t : temps) {
    const TransitionSet ts = transition_set(models.params_at(t), FieldConfig(c.bz, c.bx), IsotopeSpec::of(iso), hopts);
    MeasurementSet set;
    set.temperature = t;
    set.isotope = iso;
    for (const TransitionLabel& l : lines) {
      const double sigma = default_sigma(l);
      double f = ts.at(l);
      if (c.noise > 0.0) f += c.noise * sigma * gauss(rng);
      set.entries.push_back({l, f, sigma});
    }
    sets.push_back(std::move(set));
  }
  std::ostringstream csv;
  io::write_measurements(csv, sets);
  if (c.out.empty()) {
    out << csv.str();
  } else {
    io::write_file(c.out, csv.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ramsey

struct RamseyCmd {
  ModelOptions model;
  OutputOptions output;
  double bz = 470.0;
  std::string transition;
  double detuning_khz = 4.0;
  double t2star_ms = 1.0;
  int samples = 200;
  double span_ms = 2.0;
  double amplitude = 0.1;
  double offset = 1.0;
  double phase = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::string trace_file;
  std::string write_trace;
  double f_rf = 0.0;
  CLI::Option* f_rf_opt = nullptr;
  int sign = 1;
};

json fit_json(const RamseyFit& f) {
  json j;
  j["delta_khz"] = f.params.delta_khz;
  j["t2_star_s"] = std::isinf(f.params.t2_star_s) ? json("inf") : json(f.params.t2_star_s);
  j["amplitude"] = f.params.amplitude;
  j["phase"] = f.params.phase;
  j["offset"] = f.params.offset;
  j["rms"] = f.rms;
  j["iterations"] = f.iterations;
  return j;
}

int cmd_ramsey(const RamseyCmd& c, std::ostream& out) {
  json doc;
  std::ostringstream csv;
  if (!c.trace_file.empty()) {
    if (c.f_rf_opt->count() == 0) throw ConfigError("--trace needs --f-rf");
    std::ifstream in(c.trace_file);
    if (!in) throw ConfigError("cannot open trace '" + c.trace_file + "'");
    const RamseyTrace trace = io::read_ramsey(in);
    const RamseyFit fit = fit_fringes(trace);
    const double f = frequency_from_detuning(c.f_rf, fit.params.delta_khz, c.sign);
    doc["config"] = {{"trace", c.trace_file}, {"f_rf_khz", c.f_rf}, {"sign", c.sign}};
    doc["fit"] = fit_json(fit);
    doc["f_khz"] = f;
    csv << "f_rf_khz,delta_khz,sign,f_khz,t2_star_s,rms\n"
        << io::format_khz(c.f_rf) << ',' << io::format_khz(fit.params.delta_khz) << ',' << c.sign << ','
        << io::format_khz(f) << ',' << io::format_sig(fit.params.t2_star_s) << ',' << io::format_sig(fit.rms) << '\n';
    emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
    return kExitOk;
  }

  const Isotope iso = isotope_of(c.model);
  const CouplingParams p = resolve_params(c.model, iso);
  const TransitionLabel label =
      c.transition.empty() ? TransitionLabel::nuclear(iso == Isotope::N14 ? 1 : 7) : parse_transition(c.transition);
  if (!valid_for(label, iso)) throw ConfigError("transition " + to_string(label) + " is not a line of " + to_string(iso));
  if (!(c.t2star_ms > 0.0) || !(c.span_ms > 0.0) || c.samples < 8) {
    throw ConfigError("need --t2star-ms > 0, --span-ms > 0 and --samples >= 8");
  }
  const double f_model = transition_set(p, FieldConfig::axial(c.bz), IsotopeSpec::of(iso)).at(label);
  const double f_rf = f_model + c.detuning_khz;
  const std::vector<double> times = uniform_times(c.span_ms * 1e-3, c.samples);

  // Second trace 1 kHz higher in drive frequency resolves the sign of δ.
  auto trace_at = [&](double rf, std::uint64_t seed) {
    FringeParams fp;
    fp.delta_khz = rf - f_model;
    fp.t2_star_s = c.t2star_ms * 1e-3;
    fp.amplitude = c.amplitude;
    fp.phase = c.phase;
    fp.offset = c.offset;
    return synthesize(fp, times, c.noise, seed);
  };
  const RamseyTrace trace_a = trace_at(f_rf, c.seed);
  const RamseyTrace trace_b = trace_at(f_rf + 1.0, c.seed + 1);
  const RamseyFit fit_a = fit_fringes(trace_a);
  const RamseyFit fit_b = fit_fringes(trace_b);
  const int sign = detuning_sign(f_rf, fit_a.params.delta_khz, f_rf + 1.0, fit_b.params.delta_khz);
  const double f_rec = frequency_from_detuning(f_rf, fit_a.params.delta_khz, sign);

  if (!c.write_trace.empty()) {
    std::ostringstream ts;
    io::write_ramsey(ts, trace_a);
    io::write_file(c.write_trace, ts.str());
  }
  doc["config"] = model_config(c.model, iso, p);
  doc["config"]["bz_G"] = c.bz;
  doc["config"]["transition"] = to_string(label);
  doc["config"]["detuning_khz"] = c.detuning_khz;
  doc["config"]["t2star_ms"] = c.t2star_ms;
  doc["config"]["samples"] = c.samples;
  doc["config"]["span_ms"] = c.span_ms;
  doc["config"]["amplitude"] = c.amplitude;
  doc["config"]["offset"] = c.offset;
  doc["config"]["phase"] = c.phase;
  doc["config"]["noise"] = c.noise;
  doc["config"]["seed"] = c.seed;
  doc["f_model_khz"] = f_model;
  doc["f_rf_khz"] = f_rf;
  doc["fit"] = fit_json(fit_a);
  doc["sign"] = sign;
  doc["f_recovered_khz"] = f_rec;
  doc["error_hz"] = (f_rec - f_model) * 1e3;
  csv << "transition,f_model_khz,f_rf_khz,delta_fit_khz,sign,f_recovered_khz,error_hz\n"
      << to_string(label) << ',' << io::format_khz(f_model) << ',' << io::format_khz(f_rf) << ','
      << io::format_khz(fit_a.params.delta_khz) << ',' << sign << ',' << io::format_khz(f_rec) << ','
      << io::format_sig((f_rec - f_model) * 1e3) << '\n';
  emit(c.output, out, c.output.format == "json" ? doc.dump(2) + "\n" : csv.str());
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NV-center ground-state spin toolkit"};
  app.name("nvspin");
  app.require_subcommand(1);

  TransitionsCmd tr;
  auto* s_tr = app.add_subcommand("transitions", "exact-diagonalization transition frequencies");
  add_model_options(s_tr, tr.model);
  add_field_options(s_tr, tr.field);
  add_output_options(s_tr, tr.output, "csv");
  s_tr->add_flag("--derivatives", tr.derivatives, "add dT derivatives from the preset temperature models");
  s_tr->add_option("--models", tr.models_file, "temperature model JSON (from fit --thermal)");
  s_tr->add_flag("--no-nuclear-transverse", tr.no_nuclear_transverse, "drop the -γn·Bx·Ix term");

  FitCmd fit;
  auto* s_fit = app.add_subcommand("fit", "extract coupling parameters from measured frequencies");
  add_model_options(s_fit, fit.model);
  add_output_options(s_fit, fit.output, "json");
  s_fit->add_option("measurements,--measurements", fit.measurements, "measurement CSV")->required();
  fit.bz_opt = s_fit->add_option("--bz", fit.bz, "axial field guess, G (default: from the nuclear lines)");
  s_fit->add_option("--fix", fit.fix, "hold a parameter at its guess value");
  s_fit->add_option("--free", fit.free, "release a parameter the isotope default holds fixed");
  s_fit->add_flag("--thermal", fit.thermal, "fit degree-4 temperature models to the results");
  s_fit->add_option("--threads", fit.threads, "worker threads (0 = hardware)");
  s_fit->add_flag("--no-nuclear-transverse", fit.no_nuclear_transverse, "drop the -γn·Bx·Ix term");

  ThermalCmd th;
  auto* s_th = app.add_subcommand("thermal", "temperature models, derivatives and anisotropy");
  add_model_options(s_th, th.model);
  add_output_options(s_th, th.output, "csv");
  s_th->add_option("--models", th.models_file, "temperature model JSON (from fit --thermal)");
  th.bz_opt = s_th->add_option("--bz", th.bz, "also tabulate transitions and dT derivatives at this field, G");

  AngularCmd an;
  auto* s_an = app.add_subcommand("angular-scan", "line shift versus field misalignment");
  add_model_options(s_an, an.model);
  add_output_options(s_an, an.output, "csv");
  s_an->add_option("--bz", an.bz, "axial field, G")->capture_default_str();
  s_an->add_option("--theta-max-deg", an.theta_max_deg, "largest misalignment, degrees (<= 2)")->capture_default_str();
  s_an->add_option("--steps", an.steps, "number of angle steps")->capture_default_str();
  s_an->add_option("--transition", an.transition, "fDQ (14N) or f7 (15N)");
  s_an->add_flag("--nuclear-transverse", an.nuclear_transverse, "include the -γn·Bx·Ix term");

  PerturbCmd pc;
  pc.model.isotope = "both";
  auto* s_pc = app.add_subcommand("perturb-check", "perturbative versus exact nuclear frequencies");
  add_model_options(s_pc, pc.model);
  add_output_options(s_pc, pc.output, "csv");
  s_pc->add_option("--bz-min", pc.grid.bz_min, "G")->capture_default_str();
  s_pc->add_option("--bz-max", pc.grid.bz_max, "G")->capture_default_str();
  s_pc->add_option("--bz-steps", pc.grid.bz_steps)->capture_default_str();
  s_pc->add_option("--bx-min", pc.grid.bx_min, "G")->capture_default_str();
  s_pc->add_option("--bx-max", pc.grid.bx_max, "G")->capture_default_str();
  s_pc->add_option("--bx-steps", pc.grid.bx_steps)->capture_default_str();
  s_pc->add_option("--tolerance-hz", pc.tolerance_hz)->capture_default_str();
  s_pc->add_flag("--nuclear-transverse", pc.nuclear_transverse, "include the -γn·Bx·Ix term in the exact model");

  SynthCmd sy;
  auto* s_sy = app.add_subcommand("synth", "synthetic measurement CSV from temperature models");
  add_model_options(s_sy, sy.model);
  s_sy->add_option("--models", sy.models_file, "temperature model JSON instead of a preset");
  s_sy->add_option("--out", sy.out, "output file (default stdout)");
  s_sy->add_option("--bz", sy.bz, "G")->capture_default_str();
  s_sy->add_option("--bx", sy.bx, "G")->capture_default_str();
  s_sy->add_option("--temps", sy.temps, "temperatures, K")->delimiter(',');
  s_sy->add_option("--t-min", sy.t_min, "K");
  s_sy->add_option("--t-max", sy.t_max, "K");
  s_sy->add_option("--count", sy.count, "evenly spaced temperatures from --t-min to --t-max");
  s_sy->add_option("--noise", sy.noise, "Gaussian noise in units of each line's sigma")->capture_default_str();
  s_sy->add_option("--seed", sy.seed)->capture_default_str();
  s_sy->add_option("--transitions", sy.transitions, "labels to emit")->delimiter(',');
  s_sy->add_flag("--no-nuclear-transverse", sy.no_nuclear_transverse, "drop the -γn·Bx·Ix term");

  RamseyCmd ra;
  auto* s_ra = app.add_subcommand("ramsey", "synthesize and fit Ramsey fringes");
  add_model_options(s_ra, ra.model);
  add_output_options(s_ra, ra.output, "csv");
  s_ra->add_option("--bz", ra.bz, "G")->capture_default_str();
  s_ra->add_option("--transition", ra.transition, "line to probe (default f1 or f7)");
  s_ra->add_option("--detuning-khz", ra.detuning_khz, "f_rf - f")->capture_default_str();
  s_ra->add_option("--t2star-ms", ra.t2star_ms)->capture_default_str();
  s_ra->add_option("--samples", ra.samples)->capture_default_str();
  s_ra->add_option("--span-ms", ra.span_ms)->capture_default_str();
  s_ra->add_option("--amplitude", ra.amplitude)->capture_default_str();
  s_ra->add_option("--offset", ra.offset)->capture_default_str();
  s_ra->add_option("--phase", ra.phase, "rad")->capture_default_str();
  s_ra->add_option("--noise", ra.noise, "Gaussian noise sigma, contrast units")->capture_default_str();
  s_ra->add_option("--seed", ra.seed)->capture_default_str();
  s_ra->add_option("--trace", ra.trace_file, "fit this trace CSV instead of synthesizing");
  s_ra->add_option("--write-trace", ra.write_trace, "write the synthesized trace CSV");
  ra.f_rf_opt = s_ra->add_option("--f-rf", ra.f_rf, "drive frequency of --trace, kHz");
  s_ra->add_option("--sign", ra.sign, "detuning sign for --trace")->check(CLI::IsMember({-1, 1}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*s_tr) return cmd_transitions(tr, out);
    if (*s_fit) return cmd_fit(fit, out);
    if (*s_th) return cmd_thermal(th, out);
    if (*s_an) return cmd_angular(an, out);
    if (*s_pc) return cmd_perturb(pc, out);
    if (*s_sy) return cmd_synth(sy, out);
    if (*s_ra) return cmd_ramsey(ra, out);
  } catch (const TripwireFailure& e) {
    err << "nvspin: " << e.message << '\n';
    return kExitTripwire;
  } catch (const AmbiguousLabeling& e) {
    err << "nvspin: state labelling failed: " << e.what() << '\n';
    return kExitAmbiguous;
  } catch (const ConvergenceError& e) {
    err << "nvspin: no convergence: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const NonFiniteObjective& e) {
    err << "nvspin: no convergence: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const Error& e) {
    err << "nvspin: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "nvspin: bad JSON: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"nvspin"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace nvspin::cli
