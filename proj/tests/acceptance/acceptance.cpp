// One PASS/FAIL line per acceptance criterion, INFO lines with the numbers
// behind each verdict. Exit status is the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fixtures/reference_lines.hpp"
#include "nvspin/angular.hpp"
#include "nvspin/extraction.hpp"
#include "nvspin/optimize.hpp"
#include "nvspin/perturbation.hpp"
#include "nvspin/ramsey.hpp"
#include "nvspin/thermal.hpp"
#include "nvspin/transitions.hpp"

using namespace nvspin;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  if (!ok) ++failures;
}

template <typename... Args>
void info(const char* fmt, Args... args) {
  std::printf("INFO     ");
  std::printf(fmt, args...);
  std::printf("\n");
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

TransitionSet exact(Isotope iso, double bz, double bx = 0.0) {
  return transition_set(preset_params(iso), FieldConfig(bz, bx), IsotopeSpec::of(iso));
}

double sigma_for(const TransitionLabel& l) {
  if (l.kind != TransitionLabel::Kind::Nuclear) return 1.0;
  switch (l.index) {
    case 1:
    case 2:
      return 0.01;
    case 7:
      return 0.03;
    case 8:
    case 9:
      return 0.1;
    default:
      return 0.08;
  }
}

std::vector<TransitionLabel> fit_lines(Isotope iso) {
  std::vector<TransitionLabel> out;
  if (iso == Isotope::N14) {
    for (int i = 1; i <= 6; ++i) out.push_back(TransitionLabel::nuclear(i));
    out.push_back(TransitionLabel::plus(2));
    out.push_back(TransitionLabel::minus(2));
  } else {
    for (int i = 7; i <= 9; ++i) out.push_back(TransitionLabel::nuclear(i));
    out.push_back(TransitionLabel::plus(1));
    out.push_back(TransitionLabel::minus(1));
  }
  return out;
}

MeasurementSet synthetic(Isotope iso, const CouplingParams& p, double bz, double t = 297.0) {
  const TransitionSet ts = transition_set(p, FieldConfig::axial(bz), IsotopeSpec::of(iso));
  MeasurementSet ms;
  ms.isotope = iso;
  ms.temperature = t;
  for (const TransitionLabel& l : fit_lines(iso)) ms.entries.push_back({l, ts.at(l), sigma_for(l)});
  return ms;
}

ParamVector offset_guess(Isotope iso, const CouplingParams& p, double bz) {
  ParamVector g = ParamVector::from(p, FieldConfig::axial(bz), iso);
  g.D += 300.0;
  g.gamma_e_bz *= 1.0 + 2e-4;
  if (iso == Isotope::N14) {
    g.Q += 0.5;
    g.gamma_e_bx = 50.0;
    g.A_perp *= 1.01;
  }
  g.A_par -= 0.7;
  g.gamma_ratio *= 1.0 + 1e-4;
  return g;
}

FitOptions fit_options(Isotope iso) { return FitOptions::defaults_for(iso); }

// 1
void reference_n14() {
  const TransitionSet ts = exact(Isotope::N14, fixtures::kBz);
  double worst = 0.0;
  for (const auto& line : fixtures::kN14) {
    const double f = ts.at(parse_transition(std::string(line.name)));
    info("%-6s %.4f kHz  ref %.2f  diff %+.4f", std::string(line.name).c_str(), f, line.freq_khz, f - line.freq_khz);
    worst = std::max(worst, std::abs(f - line.freq_khz));
  }
  const double dq = ts["f1"] - ts["f2"], d36 = ts["f3"] - ts["f6"];
  const double e_dq = dq - fixtures::kN14Combos[0].freq_khz, e_36 = d36 - fixtures::kN14Combos[2].freq_khz;
  info("f1-f2  %.4f kHz  diff %+.4f;  f3-f6  %.4f kHz  diff %+.4f", dq, e_dq, d36, e_36);
  const bool ok = worst < 0.1 && std::abs(e_dq) < 0.06 && std::abs(e_36) < 0.06;
  char buf[160];
  std::snprintf(buf, sizeof buf, "14N reference lines at 470 G: worst %.4f kHz (< 0.1), combinations %.4f / %.4f (< 0.06)", worst,
                std::abs(e_dq), std::abs(e_36));
  verdict(1, ok, buf);
}

// 2
void reference_n15() {
  const TransitionSet ts = exact(Isotope::N15, fixtures::kBz);
  double worst = 0.0;
  for (const auto& line : fixtures::kN15) {
    const double f = ts.at(parse_transition(std::string(line.name)));
    info("%-6s %.4f kHz  ref %.2f  diff %+.4f", std::string(line.name).c_str(), f, line.freq_khz, f - line.freq_khz);
    worst = std::max(worst, std::abs(f - line.freq_khz));
  }
  // one shared field offset for the three lines
  const CouplingParams p = preset_params(Isotope::N15);
  auto cost = [&](std::span<const double> x) {
    const TransitionSet t = transition_set(p, FieldConfig::axial(fixtures::kBz + x[0]), IsotopeSpec::n15());
    double s = 0.0;
    for (const auto& line : fixtures::kN15) {
      const double r = t.at(parse_transition(std::string(line.name))) - line.freq_khz;
      s += r * r;
    }
    return s;
  };
  OptimOptions o;
  o.steps = {1.0};
  const OptimResult r = nelder_mead(cost, {0.0}, o);
  const TransitionSet refit = transition_set(p, FieldConfig::axial(fixtures::kBz + r.x_min[0]), IsotopeSpec::n15());
  double worst_refit = 0.0;
  for (const auto& line : fixtures::kN15) {
    const double d = refit.at(parse_transition(std::string(line.name))) - line.freq_khz;
    info("%-6s after refit diff %+.4f kHz", std::string(line.name).c_str(), d);
    worst_refit = std::max(worst_refit, std::abs(d));
  }
  info("shared Bz offset %+.4f G", r.x_min[0]);
  char buf[160];
  std::snprintf(buf, sizeof buf, "15N reference lines at 470 G: worst %.4f kHz (< 0.5); after Bz offset %+.3f G worst %.4f (< 0.05)",
                worst, r.x_min[0], worst_refit);
  verdict(2, worst < 0.5 && worst_refit < 0.05, buf);
}

// 3
void reference_derivatives() {
  bool ok = true;
  std::string bad;
  auto check = [&](const TransitionTable& tab, const fixtures::Line& line, double tol) {
    const std::string name(line.name);
    const double d = tab.row(name).dfdt_hz_per_k;
    const bool pass = std::abs(d - line.dfdt_hz_per_k) <= tol;
    info("d%-6s/dT %+9.4f Hz/K  ref %+8.3f  tol %.3f%s", name.c_str(), d, line.dfdt_hz_per_k, tol, pass ? "" : "  <--");
    if (!pass) {
      ok = false;
      bad += " " + name;
    }
  };
  const TransitionTable t14 = transition_table(preset_thermal(Isotope::N14), 297.0, fixtures::kBz);
  for (const auto& line : fixtures::kN14) check(t14, line, 2.0 * line.dfdt_sigma);
  check(t14, fixtures::kN14Combos[0], 2.0 * fixtures::kN14Combos[0].dfdt_sigma);
  check(t14, fixtures::kN14Combos[1], 2.0 * fixtures::kN14Combos[1].dfdt_sigma);
  check(t14, fixtures::kN14Combos[2], 0.01);
  const TransitionTable t15 = transition_table(preset_thermal(Isotope::N15), 297.0, fixtures::kBz);
  for (const auto& line : fixtures::kN15) check(t15, line, 2.0 * line.dfdt_sigma);
  verdict(3, ok, "temperature derivatives at 297 K within 2 sigma, f3-f6 within 0.01 Hz/K" + (ok ? "" : ":" + bad));
}

// 4
void angular() {
  std::vector<double> thetas;
  for (int i = 1; i <= 10; ++i) thetas.push_back(deg(0.01 * i));
  struct Case {
    AngularTransition which;
    Isotope iso;
    double bz, beta;
  };
  const Case cases[] = {{AngularTransition::DoubleQuantum, Isotope::N14, 480.0, -9.9},
                        {AngularTransition::DoubleQuantum, Isotope::N14, 10.0, -0.003},
                        {AngularTransition::F7, Isotope::N15, 480.0, 460.0},
                        {AngularTransition::F7, Isotope::N15, 10.0, 280.0}};
  bool ok = true;
  std::string bad;
  for (const Case& c : cases) {
    const CouplingParams p = preset_params(c.iso);
    const double b = fit_beta(angular_scan(p, c.iso, c.bz, thetas, c.which));
    const double pert = beta_coefficient(p, c.bz, c.which).beta;
    const double rel = b / c.beta - 1.0;
    const bool pass = std::abs(rel) < 0.05;
    info("beta %-3s %5.0f G  exact fit %+.6g  perturbative %+.6g  target %+g  off %+.2f%%", to_string(c.which).c_str(), c.bz,
         b, pert, c.beta, 100.0 * rel);
    HamiltonianOptions with_ix;
    with_ix.transverse_nuclear_zeeman = true;
    info("         with the -gamma_n*Bx*Ix term: %+.6g", fit_beta(angular_scan(p, c.iso, c.bz, thetas, c.which, with_ix)));
    if (!pass) {
      ok = false;
      char buf[64];
      std::snprintf(buf, sizeof buf, " beta(%s,%g G)=%.4g", to_string(c.which).c_str(), c.bz, b);
      bad += buf;
    }
  }
  const double th = deg(0.1);
  const AngularScan dq = angular_scan(preset_params(Isotope::N14), Isotope::N14, 480.0, {th}, AngularTransition::DoubleQuantum);
  const AngularScan f7 = angular_scan(preset_params(Isotope::N15), Isotope::N15, 480.0, {th}, AngularTransition::F7);
  const double s_dq = dq.points[0].shift_khz * 1e3, s_f7 = f7.points[0].shift_khz * 1e3;
  info("shift at 0.1 deg, 480 G: fDQ %+.3f Hz (target -5.0 +- 1.0), f7 %+.2f Hz (target +130 +- 15%%)", s_dq, s_f7);
  if (std::abs(s_dq + 5.0) > 1.0) {
    ok = false;
    bad += " fDQ-shift";
  }
  if (std::abs(s_f7 / 130.0 - 1.0) > 0.15) {
    ok = false;
    bad += " f7-shift";
  }
  verdict(4, ok, "angular coefficients within 5% and 0.1 deg shifts" + (ok ? "" : ":" + bad));
}

// 5
void tripwire() {
  bool ok = true;
  std::string bad;
  for (Isotope iso : {Isotope::N14, Isotope::N15}) {
    const PerturbCheck pc = perturbation_check(preset_params(iso), iso, PerturbGrid{});
    info("%s full formulas vs exact, Bz 300-600 G, Bx 0-1 G: worst %.3f Hz", to_string(iso).c_str(), pc.worst_hz);
    if (!(pc.worst_hz < 20.0)) {
      ok = false;
      bad += " full-" + to_string(iso);
    }
    double worst2 = 0.0, where = 0.0;
    for (int i = 0; i <= 30; ++i) {
      const double bz = 300.0 + 10.0 * i;
      const CouplingParams p = preset_params(iso);
      const TransitionSet ex = transition_set(p, FieldConfig::axial(bz), IsotopeSpec::of(iso));
      const TransitionSet pt = nuclear_freqs_2nd(PerturbationContext(p, bz), iso);
      for (const auto& [label, t] : pt.entries) {
        if (label.kind != TransitionLabel::Kind::Nuclear) continue;
        const double d = std::abs(t.frequency - ex.at(label));
        if (d > worst2) {
          worst2 = d;
          where = bz;
        }
      }
    }
    info("%s second-order lines vs exact at Bx = 0: worst %.4f kHz at %.0f G", to_string(iso).c_str(), worst2, where);
    if (!(worst2 < 0.01)) {
      ok = false;
      char buf[64];
      std::snprintf(buf, sizeof buf, " 2nd-order-%s=%.4f kHz", to_string(iso).c_str(), worst2);
      bad += buf;
    }
  }
  verdict(5, ok, "perturbative vs exact: full < 20 Hz, second order < 0.01 kHz" + (ok ? "" : ":" + bad));
}

// 6
void roundtrip() {
  bool ok = true;
  std::string bad;
  for (Isotope iso : {Isotope::N14, Isotope::N15}) {
    const CouplingParams truth = preset_params(iso);
    const FitResult r = extract_params(synthetic(iso, truth, 470.0), offset_guess(iso, truth, 470.0), fit_options(iso));
    const double eq = iso == Isotope::N14 ? std::abs(r.params.Q - truth.Q) : 0.0;
    const double ea = std::abs(r.params.A_par - truth.A_par), ep = std::abs(r.params.A_perp - truth.A_perp),
                 ed = std::abs(r.params.D - truth.D);
    info("%s noiseless: |dQ| %.2e  |dA_par| %.2e  |dA_perp| %.2e  |dD| %.2e kHz%s", to_string(iso).c_str(), eq, ea, ep, ed,
         iso == Isotope::N15 ? " (A_perp held)" : "");
    if (!(r.converged && eq < 0.01 && ea < 0.01 && ep < 0.5 && ed < 1.0)) {
      ok = false;
      bad += " noiseless-" + to_string(iso);
    }
  }

  // pull = (estimate - truth) / spread of the estimates over the trials
  const int trials = 100;
  for (Isotope iso : {Isotope::N14, Isotope::N15}) {
    const CouplingParams truth = preset_params(iso);
    const MeasurementSet clean = synthetic(iso, truth, 470.0);
    const ParamVector tv = ParamVector::from(truth, FieldConfig::axial(470.0), iso);
    const FitOptions opts = fit_options(iso);
    std::vector<std::string> names;
    for (const std::string& n : ParamVector::names(iso)) {
      if (n == "gamma_e_bx") continue;  // sits on its zero boundary
      if (std::find(opts.fixed.begin(), opts.fixed.end(), n) != opts.fixed.end()) continue;
      names.push_back(n);
    }
    std::vector<std::vector<double>> est(names.size());
    std::mt19937_64 rng(2024 + static_cast<int>(iso));
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < trials; ++k) {
      MeasurementSet ms = clean;
      for (Measurement& m : ms.entries) m.freq_khz += m.sigma_khz * g(rng);
      const FitResult r = extract_params(ms, offset_guess(iso, truth, 470.0), opts);
      for (std::size_t i = 0; i < names.size(); ++i) est[i].push_back(r.params.get(names[i]));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      double mean = 0.0, sd = 0.0;
      for (double v : est[i]) mean += v / trials;
      for (double v : est[i]) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / (trials - 1));
      const double t = tv.get(names[i]);
      const double pull = sd > 0.0 ? (mean - t) / sd : 0.0;
      info("%s %-11s mean pull %+.3f  (spread %.4g)", to_string(iso).c_str(), names[i].c_str(), pull, sd);
      if (!(std::abs(pull) < 0.3)) {
        ok = false;
        bad += " pull-" + to_string(iso) + "-" + names[i];
      }
    }
  }
  // diagnostic only: the same 14N trials with the transverse field held at zero
  {
    const CouplingParams truth = preset_params(Isotope::N14);
    const MeasurementSet clean = synthetic(Isotope::N14, truth, 470.0);
    const ParamVector tv = ParamVector::from(truth, FieldConfig::axial(470.0), Isotope::N14);
    FitOptions opts = fit_options(Isotope::N14);
    opts.fixed.push_back("gamma_e_bx");
    ParamVector guess = offset_guess(Isotope::N14, truth, 470.0);
    guess.gamma_e_bx = 0.0;
    const std::vector<std::string> names{"D", "gamma_e_bz", "Q", "A_par", "A_perp", "gamma_ratio"};
    std::vector<std::vector<double>> est(names.size());
    std::mt19937_64 rng(2024 + static_cast<int>(Isotope::N14));
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < trials; ++k) {
      MeasurementSet ms = clean;
      for (Measurement& m : ms.entries) m.freq_khz += m.sigma_khz * g(rng);
      const FitResult r = extract_params(ms, guess, opts);
      for (std::size_t i = 0; i < names.size(); ++i) est[i].push_back(r.params.get(names[i]));
    }
    std::string line;
    for (std::size_t i = 0; i < names.size(); ++i) {
      double mean = 0.0, sd = 0.0;
      for (double v : est[i]) mean += v / trials;
      for (double v : est[i]) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / (trials - 1));
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s %+.3f", names[i].c_str(), sd > 0.0 ? (mean - tv.get(names[i])) / sd : 0.0);
      line += buf;
    }
    info("n14 with gamma_e_bx held at 0 (not the criterion):%s", line.c_str());
  }
  verdict(6, ok, "inverse fit: noiseless roundtrip and unbiased pulls over 100 noisy trials" + (ok ? "" : ":" + bad));
}

// 7
void ratios() {
  const TransitionSet ts = exact(Isotope::N14, fixtures::kBz);
  const RatioEstimates e = ratio_estimators(ts);
  const double rel = e.gamma_ratio / fixtures::kGammaRatio14 - 1.0;
  const CouplingParams p14 = preset_params(Isotope::N14), p15 = preset_params(Isotope::N15);
  const double rg = std::abs(p15.gamma_n / p14.gamma_n), ra = std::abs(p15.A_par / p14.A_par);
  const double eg = rg / fixtures::kGammaN15Over14 - 1.0, ea = ra / fixtures::kAPar15Over14 - 1.0;
  info("gamma_e/gamma_n14 from the nuclear and MW lines %.3f (%+.4f%%)", e.gamma_ratio, 100.0 * rel);
  info("|gamma_n15/gamma_n14| %.6f (%+.5f%%), |A_par15/A_par14| %.6f (%+.5f%%)", rg, 100.0 * eg, ra, 100.0 * ea);
  verdict(7, std::abs(rel) < 2e-3 && std::abs(eg) < 1e-4 && std::abs(ea) < 1e-4,
          "ratio estimators: gamma_e/gamma_n within 0.2%, isotope ratios within 0.01%");
}

// 8
void isotopic_shift() {
  const TransitionSet a = exact(Isotope::N14, 475.0);
  const TransitionSet b = exact(Isotope::N15, 475.0);
  const double s = isotopic_d_shift(a["fplus_+1"], a["fminus_+1"], b["fplus_+1/2"], b["fminus_+1/2"]) / 1e3;
  const double dd = (preset_params(Isotope::N15).D - preset_params(Isotope::N14).D) / 1e3;
  info("line-centre shift at 475 G %.6f MHz; D15 - D14 in the presets %.6f MHz", s, dd);
  char buf[128];
  std::snprintf(buf, sizeof buf, "isotopic D shift from MW line centres %.4f MHz (0.10 to 0.12)", s);
  verdict(8, s >= 0.10 && s <= 0.12, buf);
}

// 9
void ramsey() {
  FringeParams p;
  p.delta_khz = 3.0;
  p.t2_star_s = 1e-3;
  p.amplitude = 0.1;
  p.phase = 0.3;
  p.offset = 1.0;
  const auto t = uniform_times(2e-3, 200);
  const double e0 = std::abs(fit_fringes(synthesize(p, t, 0.0, 1)).params.delta_khz - p.delta_khz) * 1e3;
  std::vector<double> d;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    d.push_back(fit_fringes(synthesize(p, t, 0.05 * p.amplitude, seed)).params.delta_khz);
  }
  double mean = 0.0, sd = 0.0;
  for (double v : d) mean += v / 100.0;
  for (double v : d) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / 99.0) * 1e3;
  info("noiseless |error| %.3e Hz; 5%% noise: std %.3f Hz, bias %+.3f Hz", e0, sd, (mean - p.delta_khz) * 1e3);
  char buf[128];
  std::snprintf(buf, sizeof buf, "Ramsey detuning: noiseless %.2e Hz (< 1), 100-seed std %.2f Hz (< 5)", e0, sd);
  verdict(9, e0 < 1.0 && sd < 5.0, buf);
}

// 10
void thermal() {
  bool ok = true;
  std::string bad;
  for (Isotope iso : {Isotope::N14, Isotope::N15}) {
    const ThermalModelSet truth = preset_thermal(iso);
    std::vector<MeasurementSet> sets;
    std::vector<ParamVector> guesses;
    for (int i = 0; i < 12; ++i) {
      const double t = 77.0 + i * (400.0 - 77.0) / 11.0;
      const CouplingParams p = truth.params_at(t);
      sets.push_back(synthetic(iso, p, 470.0, t));
      guesses.push_back(offset_guess(iso, p, 470.0));
    }
    const std::vector<FitResult> fits = fit_series(sets, guesses, fit_options(iso));
    std::vector<std::pair<double, FitResult>> series;
    for (std::size_t i = 0; i < fits.size(); ++i) series.emplace_back(sets[i].temperature, fits[i]);
    const auto models = thermal_models(series);
    for (const auto& fr : fixtures::kFractional) {
      if (fr.n15 != (iso == Isotope::N15)) continue;
      const std::string param(fr.param);
      const double ppm = models.at(param).fractional_derivative_ppm(297.0);
      const double rel = ppm / fr.ppm_per_k - 1.0;
      info("%s %-6s %+.3f ppm/K  ref %+g  off %+.2f%%", to_string(iso).c_str(), param.c_str(), ppm, fr.ppm_per_k, 100.0 * rel);
      if (!(std::abs(rel) < 0.02)) {
        ok = false;
        bad += " " + to_string(iso) + "-" + param;
      }
    }
  }
  verdict(10, ok, "fractional derivatives from 12-point synthetic series within 2%" + (ok ? "" : ":" + bad));
}

}  // namespace

int main() {
  reference_n14();
  reference_n15();
  reference_derivatives();
  angular();
  tripwire();
  roundtrip();
  ratios();
  isotopic_shift();
  ramsey();
  thermal();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
