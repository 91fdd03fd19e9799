#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nvspin/errors.hpp"
#include "nvspin/extraction.hpp"

using namespace nvspin;

namespace {

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

std::vector<TransitionLabel> standard_lines(Isotope iso) {
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
  for (const TransitionLabel& l : standard_lines(iso)) ms.entries.push_back({l, ts.at(l), sigma_for(l)});
  return ms;
}

ParamVector perturbed_guess(Isotope iso, const CouplingParams& p, double bz) {
  ParamVector g = ParamVector::from(p, FieldConfig::axial(bz), iso);
  g.D += 300.0;
  g.gamma_e_bz *= 1.0 + 2e-4;
  if (iso == Isotope::N14) g.Q += 0.5;
  g.A_par -= 0.7;
  g.A_perp *= 1.01;
  g.gamma_e_bx = 50.0;
  g.gamma_ratio *= 1.0 + 1e-4;
  if (iso == Isotope::N15) g.gamma_e_bx = 0.0;
  return g;
}

}  // namespace

TEST_CASE("parameter vector mapping") {
  const CouplingParams p = preset_params(Isotope::N14);
  const FieldConfig f(470.0, 0.25);
  const ParamVector v = ParamVector::from(p, f, Isotope::N14);
  CHECK(ParamVector::names(Isotope::N14).size() == 7);
  CHECK(ParamVector::names(Isotope::N15).size() == 6);
  CHECK(v.gamma_e_bz == doctest::Approx(p.gamma_e * 470.0));
  CHECK(v.gamma_ratio == doctest::Approx(p.gamma_e / p.gamma_n));
  const ParamVector back = ParamVector::from_vector(Isotope::N14, v.to_vector());
  CHECK(back.to_vector() == v.to_vector());
  const CouplingParams q = v.params(p.gamma_e);
  CHECK(q.gamma_n == doctest::Approx(p.gamma_n).epsilon(1e-15));
  CHECK(v.field(p.gamma_e).bx() == doctest::Approx(0.25));
  CHECK(v.get("A_perp") == p.A_perp);
  ParamVector w = v;
  w.set("Q", 1.0);
  CHECK(w.Q == 1.0);
  CHECK_THROWS_AS(v.get("B"), ConfigError);
  ParamVector n15 = ParamVector::from(preset_params(Isotope::N15), f, Isotope::N15);
  CHECK_THROWS_AS(n15.set("Q", 1.0), ConfigError);
  CHECK_THROWS_AS(ParamVector::from_vector(Isotope::N15, v.to_vector()), ConfigError);
}

TEST_CASE("measurement set validation") {
  MeasurementSet ms = synthetic(Isotope::N14, preset_params(Isotope::N14), 470.0);
  CHECK_NOTHROW(ms.validate());
  ms.entries[0].sigma_khz = 0.0;
  CHECK_THROWS_AS(ms.validate(), ConfigError);
  ms = synthetic(Isotope::N14, preset_params(Isotope::N14), 470.0);
  ms.entries.push_back({TransitionLabel::nuclear(7), 200.0, 0.1});
  CHECK_THROWS_AS(ms.validate(), ConfigError);
}

TEST_CASE("14N noiseless roundtrip") {
  const CouplingParams truth = preset_params(Isotope::N14);
  const MeasurementSet ms = synthetic(Isotope::N14, truth, 470.0);
  const ParamVector guess = perturbed_guess(Isotope::N14, truth, 470.0);
  const FitResult r = extract_params(ms, guess);
  CHECK(r.converged);
  CHECK(std::abs(r.params.Q - truth.Q) < 0.01);
  CHECK(std::abs(r.params.A_par - truth.A_par) < 0.01);
  CHECK(std::abs(r.params.A_perp - truth.A_perp) < 0.5);
  CHECK(std::abs(r.params.D - truth.D) < 1.0);
  CHECK(r.params.gamma_e_bx >= 0.0);

  // objective bookkeeping
  const std::vector<double> model = model_frequencies(r.params, ms, {});
  std::vector<double> meas, sig;
  for (const auto& m : ms.entries) {
    meas.push_back(m.freq_khz);
    sig.push_back(m.sigma_khz);
  }
  CHECK(r.objective == doctest::Approx(weighted_objective(model, meas, sig)).epsilon(1e-6).scale(1e-12));
  CHECK(r.objective <= weighted_objective(model_frequencies(guess, ms, {}), meas, sig));
  REQUIRE(r.residuals.size() == ms.entries.size());
  for (std::size_t i = 0; i < ms.entries.size(); ++i) {
    CHECK(r.residuals[i].first == ms.entries[i].label);
    CHECK(std::abs(r.residuals[i].second) < 3.0 * ms.entries[i].sigma_khz);
  }
}

TEST_CASE("15N noiseless roundtrip with the default fixed mask") {
  const CouplingParams truth = preset_params(Isotope::N15);
  const MeasurementSet ms = synthetic(Isotope::N15, truth, 470.0);
  ParamVector guess = perturbed_guess(Isotope::N15, truth, 470.0);
  guess.A_perp = truth.A_perp;  // held fixed
  const FitResult r = extract_params(ms, guess, FitOptions::defaults_for(Isotope::N15));
  CHECK(std::abs(r.params.A_par - truth.A_par) < 0.01);
  CHECK(std::abs(r.params.D - truth.D) < 1.0);
  CHECK(std::abs(r.params.gamma_ratio - truth.gamma_e / truth.gamma_n) < 0.1);
  CHECK(r.params.A_perp == truth.A_perp);
  CHECK(r.params.gamma_e_bx == 0.0);
  // without the mask the set is underdetermined
  CHECK_THROWS_AS(extract_params(ms, guess), ConfigError);
}

TEST_CASE("fit does not depend on entry order") {
  const CouplingParams truth = preset_params(Isotope::N14);
  const MeasurementSet ms = synthetic(Isotope::N14, truth, 470.0);
  MeasurementSet rev = ms;
  std::reverse(rev.entries.begin(), rev.entries.end());
  std::rotate(rev.entries.begin(), rev.entries.begin() + 3, rev.entries.end());
  const ParamVector guess = perturbed_guess(Isotope::N14, truth, 470.0);
  const FitResult a = extract_params(ms, guess);
  const FitResult b = extract_params(rev, guess);
  CHECK(a.params.to_vector() == b.params.to_vector());
  CHECK(a.objective == b.objective);
  CHECK(b.residuals.front().first == rev.entries.front().label);
}

TEST_CASE("fit errors") {
  const CouplingParams truth = preset_params(Isotope::N14);
  MeasurementSet ms = synthetic(Isotope::N14, truth, 470.0);
  const ParamVector guess = perturbed_guess(Isotope::N14, truth, 470.0);

  MeasurementSet one = ms;
  one.entries.resize(1);
  CHECK_THROWS_AS(extract_params(one, guess), ConfigError);

  FitOptions capped;
  capped.optim.max_iter = 10;
  CHECK_THROWS_AS(extract_params(ms, guess, capped), ConvergenceError);

  FitOptions unknown;
  unknown.fixed = {"B"};
  CHECK_THROWS_AS(extract_params(ms, guess, unknown), ConfigError);

  ParamVector near = guess;
  near.gamma_e_bz = truth.gamma_e * 1023.0;
  try {
    extract_params(ms, near);
    FAIL("expected AmbiguousLabeling");
  } catch (const AmbiguousLabeling& e) {
    CHECK(std::string(e.what()).find("trial point") != std::string::npos);
  }
}

TEST_CASE("fit series keeps order and matches single fits") {
  const ThermalModelSet models = preset_thermal(Isotope::N14);
  std::vector<MeasurementSet> sets;
  std::vector<ParamVector> guesses;
  for (double t : {350.0, 150.0, 297.0, 220.0}) {
    sets.push_back(synthetic(Isotope::N14, models.params_at(t), 470.0, t));
    guesses.push_back(perturbed_guess(Isotope::N14, models.params_at(297.0), 470.0));
  }
  const auto serial = fit_series(sets, guesses, {}, 1);
  const auto parallel = fit_series(sets, guesses, {}, 3);
  REQUIRE(serial.size() == 4);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    CHECK(serial[i].params.to_vector() == parallel[i].params.to_vector());
    CHECK(std::abs(serial[i].params.Q - models.params_at(sets[i].temperature).Q) < 0.01);
  }
  CHECK_THROWS_AS(fit_series(sets, {}, {}, 1), ConfigError);
  sets[2].entries.resize(2);
  CHECK_THROWS_AS(fit_series(sets, guesses, {}, 2), ConfigError);
}

namespace {

std::vector<std::pair<double, FitResult>> parameter_series(Isotope iso, int count) {
  const ThermalModelSet models = preset_thermal(iso);
  std::vector<std::pair<double, FitResult>> out;
  for (int i = 0; i < count; ++i) {
    const double t = 77.0 + i * (400.0 - 77.0) / (count - 1);
    FitResult r;
    r.params = ParamVector::from(models.params_at(t), FieldConfig::axial(470.0), iso);
    out.emplace_back(t, r);
  }
  return out;
}

}  // namespace

TEST_CASE("thermal models from 12-point series") {
  const auto m14 = thermal_models(parameter_series(Isotope::N14, 12));
  CHECK(std::abs(m14.at("Q").fractional_derivative_ppm(297.0) / -7.17 - 1.0) < 0.02);
  CHECK(m14.at("Q").degree() == 4);
  const auto m15 = thermal_models(parameter_series(Isotope::N15, 12));
  CHECK(std::abs(m15.at("A_par").fractional_derivative_ppm(297.0) / -89.0 - 1.0) < 0.02);
  CHECK_FALSE(m15.count("Q"));
  // D has the same fractional slope for both isotopes within the quoted errors
  const double d14 = m14.at("D").fractional_derivative_ppm(297.0);
  const double d15 = m15.at("D").fractional_derivative_ppm(297.0);
  CHECK(std::abs(d14 - d15) < std::hypot(0.2, 0.3));
}

TEST_CASE("constant series has zero slope") {
  auto series = parameter_series(Isotope::N14, 6);
  for (auto& [t, r] : series) r.params = series.front().second.params;
  const auto m = thermal_models(series);
  for (const auto& [name, poly] : m) {
    INFO(name);
    CHECK(std::abs(poly.derivative(297.0)) < 1e-9 * std::max(1.0, std::abs(poly.value(297.0))));
    CHECK(std::abs(poly.derivative(297.0, 2)) < 1e-9 * std::max(1.0, std::abs(poly.value(297.0))));
  }
}

TEST_CASE("thermal model preconditions") {
  auto series = parameter_series(Isotope::N14, 12);
  CHECK_THROWS_AS(thermal_models({series.begin(), series.begin() + 4}), ConfigError);
  std::vector<std::pair<double, FitResult>> narrow;
  for (int i = 0; i < 6; ++i) narrow.emplace_back(250.0 + 10 * i, series[0].second);
  CHECK_THROWS_AS(thermal_models(narrow), ConfigError);
  CHECK_THROWS_AS(thermal_models({}), ConfigError);
}

TEST_CASE("model set from fitted polynomials") {
  const auto m = thermal_models(parameter_series(Isotope::N14, 12));
  const ThermalModelSet set = to_model_set(m, Isotope::N14);
  const CouplingParams p = set.params_at(297.0);
  const CouplingParams want = preset_params(Isotope::N14);
  CHECK(p.Q == doctest::Approx(want.Q).epsilon(1e-9));
  CHECK(p.gamma_n == doctest::Approx(want.gamma_n).epsilon(1e-9));
  auto partial = m;
  partial.erase("A_perp");
  CHECK_THROWS_AS(to_model_set(partial, Isotope::N14), ConfigError);
}

TEST_CASE("hyperfine anisotropy") {
  const AnisotropyResult r = anisotropy(-2165.19, -2635.0);
  CHECK(r.fermi_f * 1e3 == doctest::Approx(-7435.19));
  CHECK(r.dipolar_d * 1e3 == doctest::Approx(469.81));
  // two-equation solve done by hand
  const double cs_eta = 7.43519 / 1811.0, cp_eta = 0.46981 / 55.52;
  CHECK(r.eta == doctest::Approx(cs_eta + cp_eta).epsilon(1e-12));
  CHECK(r.hybridization_ratio == doctest::Approx(cp_eta / cs_eta).epsilon(1e-12));
  CHECK(r.cs2 + r.cp2 == doctest::Approx(1.0));
  CHECK(std::abs(r.eta - 1.26e-2) < 0.005e-2);
  CHECK(std::abs(r.hybridization_ratio - 2.06) < 0.005);

  const AnisotropyResult s = anisotropy(3000.0, 3000.0);
  CHECK(s.dipolar_d == 0.0);
  CHECK(s.cp2 == 0.0);
  CHECK(s.cs2 == 1.0);
  CHECK_THROWS_AS(anisotropy(2.0, -1.0), ConfigError);
  CHECK_THROWS_AS(anisotropy(0.0, 0.0), ConfigError);
}
