#include "nvspin/thermal.hpp"

#include <sstream>

#include "nvspin/errors.hpp"
#include "nvspin/transitions.hpp"

namespace nvspin {
namespace {

const PolynomialModel& need(const ThermalModelSet& set, const std::string& key) {
  auto it = set.models.find(key);
  if (it == set.models.end()) throw ConfigError("thermal model set has no '" + key + "' entry");
  return it->second;
}

}  // namespace

CouplingParams ThermalModelSet::params_at(double t) const {
  if (!(t >= t_min && t <= t_max)) {
    std::ostringstream os;
    os << "temperature " << t << " K outside model range [" << t_min << ", " << t_max << "] K";
    throw ConfigError(os.str());
  }
  CouplingParams p;
  p.gamma_e = gamma_e;
  p.gamma_n = gamma_n;
  p.D = need(*this, "D").value(t);
  p.Q = isotope == Isotope::N14 ? need(*this, "Q").value(t) : 0.0;
  const PolynomialModel& a_par = need(*this, "A_par");
  p.A_par = a_par.value(t);
  const double a_perp = need(*this, "A_perp").value(a_perp_tracks_a_par ? t0 : t);
  if (a_perp_tracks_a_par) {
    const double ref = a_par.value(t0);
    if (ref == 0.0) throw ConfigError("A_perp tracking needs A_par(T0) != 0");
    p.A_perp = a_perp * p.A_par / ref;
  } else {
    p.A_perp = a_perp;
  }
  return p;
}

const TransitionTableRow& TransitionTable::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ConfigError("transition table has no row '" + name + "'");
}

TransitionTable transition_table(const ThermalModelSet& models, double t, double bz) {
  constexpr double kStep = 1.0;  // K
  const IsotopeSpec iso = IsotopeSpec::of(models.isotope);
  const FieldConfig field = FieldConfig::axial(bz);
  // Range check on all three temperatures before any diagonalization.
  models.params_at(t - kStep);
  models.params_at(t + kStep);
  const TransitionSet mid = transition_set(models.params_at(t), field, iso);
  const TransitionSet lo = transition_set(models.params_at(t - kStep), field, iso);
  const TransitionSet hi = transition_set(models.params_at(t + kStep), field, iso);

  TransitionTable table;
  table.isotope = models.isotope;
  table.temperature = t;
  table.bz = bz;
  auto slope = [&](const TransitionLabel& label) { return (hi.at(label) - lo.at(label)) / (2.0 * kStep) * 1e3; };
  for (const TransitionLabel& label : transitions_of(models.isotope)) {
    if (label.kind == TransitionLabel::Kind::DoubleQuantum) continue;
    table.rows.push_back({to_string(label), mid.at(label), slope(label)});
  }
  if (models.isotope == Isotope::N14) {
    auto combo = [&](const char* name, int a, int b) {
      const TransitionLabel la = TransitionLabel::nuclear(a);
      const TransitionLabel lb = TransitionLabel::nuclear(b);
      table.rows.push_back({name, mid.at(la) - mid.at(lb), slope(la) - slope(lb)});
    };
    combo("f1-f2", 1, 2);
    combo("f5-f4", 5, 4);
    combo("f3-f6", 3, 6);
  }
  return table;
}

}  // namespace nvspin
