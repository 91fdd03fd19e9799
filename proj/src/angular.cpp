#include "nvspin/angular.hpp"

#include <cmath>
#include <set>

#include "nvspin/errors.hpp"
#include "nvspin/transitions.hpp"

namespace nvspin {
namespace {

double line(const CouplingParams& p, const IsotopeSpec& iso, double bz, double theta, AngularTransition which,
            const HamiltonianOptions& opts) {
  const TransitionSet ts = transition_set(p, FieldConfig(bz, bz * std::tan(theta)), iso, opts);
  return which == AngularTransition::DoubleQuantum ? ts.at(TransitionLabel::dq()) : ts.at(TransitionLabel::nuclear(7));
}

}  // namespace

AngularScan angular_scan(const CouplingParams& p, Isotope iso, double bz, const std::vector<double>& thetas_rad,
                         AngularTransition which, const HamiltonianOptions& opts) {
  const bool ok = (which == AngularTransition::DoubleQuantum) == (iso == Isotope::N14);
  if (!ok) throw ConfigError(to_string(which) + " is not a transition of " + to_string(iso));
  for (double t : thetas_rad) {
    if (!std::isfinite(t) || std::abs(t) >= 0.5 * 3.141592653589793) {
      throw ConfigError("misalignment angle must be finite and below 90 degrees");
    }
  }
  const IsotopeSpec spec = IsotopeSpec::of(iso);
  AngularScan scan;
  scan.transition = which;
  scan.bz = bz;
  scan.baseline = which == AngularTransition::DoubleQuantum ? 2.0 * p.gamma_n * bz : std::abs(p.gamma_n) * bz;
  scan.freq0 = line(p, spec, bz, 0.0, which, opts);
  for (double t : thetas_rad) {
    const double f = line(p, spec, bz, t, which, opts);
    scan.points.push_back({t, f, f - scan.freq0});
  }
  return scan;
}

double fit_beta(const AngularScan& scan) {
  // shift = c2·θ² + c4·θ⁴; the θ⁴ column absorbs the leading curvature so
  // that c2 stays the small-angle coefficient over wider scans.
  double s22 = 0.0, s24 = 0.0, s44 = 0.0, b2 = 0.0, b4 = 0.0;
  std::set<double> angles;
  for (const AngularPoint& pt : scan.points) {
    const double u = pt.theta_rad * pt.theta_rad;
    if (u == 0.0) continue;
    angles.insert(u);
    s22 += u * u;
    s24 += u * u * u;
    s44 += u * u * u * u;
    b2 += u * pt.shift_khz;
    b4 += u * u * pt.shift_khz;
  }
  if (angles.empty() || scan.baseline == 0.0) throw ConfigError("fit_beta needs a nonzero angle and baseline");
  double c2 = b2 / s22;
  if (angles.size() >= 2) {
    const double det = s22 * s44 - s24 * s24;
    c2 = (b2 * s44 - b4 * s24) / det;
  }
  return 2.0 * c2 / scan.baseline;
}

}  // namespace nvspin
