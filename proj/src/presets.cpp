#include <cmath>

#include "nvspin/errors.hpp"
#include "nvspin/thermal.hpp"

namespace nvspin {
namespace {

constexpr double kHz = 1e-3;  // Hz -> kHz

ThermalModelSet table1(Isotope iso) {
  ThermalModelSet set;
  set.isotope = iso;
  set.t0 = 297.0;
  if (iso == Isotope::N14) {
    set.gamma_n = constants::kGammaN14;
    set.models["D"] = taylor_model({2870.28e3, -72.5e3 * kHz, -0.39e3 * kHz}, set.t0);
    set.models["Q"] = taylor_model({-4945.88, 35.5 * kHz, 0.22 * kHz}, set.t0);
    set.models["A_par"] = taylor_model({-2165.19, 197.0 * kHz, 0.73 * kHz}, set.t0);
    set.models["A_perp"] = taylor_model({-2635.0, 154.0 * kHz, 0.53 * kHz}, set.t0);
  } else {
    set.gamma_n = constants::kGammaN15;
    set.models["D"] = taylor_model({2870.38e3, -72.0e3 * kHz, -0.40e3 * kHz}, set.t0);
    set.models["A_par"] = taylor_model({3033.3, -269.0 * kHz, -0.98 * kHz}, set.t0);
    // No measured temperature dependence; follows A_par fractionally.
    set.models["A_perp"] = taylor_model({3680.0, 0.0, 0.0}, set.t0);
    set.a_perp_tracks_a_par = true;
  }
  return set;
}

}  // namespace

PolynomialModel taylor_model(const TaylorEntry& e, double t0) {
  PolynomialModel m;
  m.t0 = t0;
  m.coefficients = {e.value, e.d1, 0.5 * e.d2};
  return m;
}

std::vector<std::string> preset_names() { return {"table1_297K"}; }

ThermalModelSet preset_thermal(Isotope iso, const std::string& name) {
  if (name == "table1_297K") return table1(iso);
  throw ConfigError("unknown preset '" + name + "' (available: table1_297K)");
}

CouplingParams preset_params(Isotope iso, const std::string& name) {
  const ThermalModelSet set = preset_thermal(iso, name);
  return set.params_at(set.t0);
}

}  // namespace nvspin
