#include "nvspin/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nvspin/errors.hpp"

namespace nvspin {
namespace {

void check_margin(const CouplingParams& p, double bz, double bx) {
  const double f_minus = p.D - p.gamma_e * bz;
  const double scale = std::max(std::abs(p.A_perp), p.gamma_e * std::abs(bx));
  if (!(std::abs(f_minus) > kValidityMargin * scale) || f_minus == 0.0) {
    std::ostringstream os;
    os << "perturbation theory invalid at Bz = " << bz << " G: |D - γe·Bz| = " << std::abs(f_minus)
       << " kHz is within " << kValidityMargin << "x of the transverse coupling " << scale << " kHz";
    throw ValidityMarginError(os.str());
  }
}

TransitionSet make_set(Isotope iso, double bz, double bx) {
  TransitionSet ts;
  ts.isotope = iso;
  ts.bz = bz;
  ts.bx = bx;
  return ts;
}

void put(TransitionSet& ts, const TransitionLabel& label, double f) {
  const auto [a, b] = level_pair(label);
  ts.entries[label] = Transition{std::abs(f), a, b};
}

void put_dq(TransitionSet& ts) {
  const double f = ts.at(TransitionLabel::nuclear(1)) - ts.at(TransitionLabel::nuclear(2));
  const auto [a, b] = level_pair(TransitionLabel::dq());
  ts.entries[TransitionLabel::dq()] = Transition{f, a, b};
}

}  // namespace

PerturbationContext::PerturbationContext(const CouplingParams& params, double bz, double bx)
    : params_(params), bz_(bz), bx_(std::abs(bx)) {
  check_margin(params_, bz_, bx_);
}

TransitionSet nuclear_freqs_2nd(const PerturbationContext& ctx, Isotope iso) {
  if (ctx.bx() != 0.0) throw ConfigError("nuclear_freqs_2nd needs Bx = 0; use nuclear_freqs_full");
  const CouplingParams& p = ctx.params();
  const double bz = ctx.bz();
  const double a2 = p.A_perp * p.A_perp;
  const double fp = ctx.f_plus();
  const double fm = ctx.f_minus();
  TransitionSet ts = make_set(iso, bz, 0.0);

  if (iso == Isotope::N14) {
    const double q = std::abs(p.Q);
    const double a = std::abs(p.A_par);
    const double z = p.gamma_n * bz;
    put(ts, TransitionLabel::nuclear(1), q + z - a2 / fm);
    put(ts, TransitionLabel::nuclear(2), q - z - a2 / fp);
    put(ts, TransitionLabel::nuclear(3), q - a + z);
    put(ts, TransitionLabel::nuclear(4), q + a - z + a2 / fm);
    put(ts, TransitionLabel::nuclear(5), q + a + z + a2 / fp);
    put(ts, TransitionLabel::nuclear(6), q - a - z);
    put_dq(ts);
  } else {
    const double z = std::abs(p.gamma_n) * bz;
    put(ts, TransitionLabel::nuclear(7), z + 0.5 * a2 * (1.0 / fm - 1.0 / fp));
    put(ts, TransitionLabel::nuclear(8), p.A_par - z - 0.5 * a2 / fm);
    put(ts, TransitionLabel::nuclear(9), p.A_par + z - 0.5 * a2 / fp);
  }
  return ts;
}

TransitionSet nuclear_freqs_full(const PerturbationContext& ctx, Isotope iso) {
  const CouplingParams& p = ctx.params();
  const double bz = ctx.bz();
  const double bx = ctx.bx();
  const double a2 = p.A_perp * p.A_perp;
  const double fp = ctx.f_plus();
  const double fm = ctx.f_minus();
  const double fp2 = fp * fp;
  const double fm2 = fm * fm;
  const double gx = 0.5 * (p.gamma_e * bx) * (p.gamma_e * bx);
  const double sum_inv = 1.0 / fp + 1.0 / fm;
  const double diff_inv2 = 1.0 / fm2 - 1.0 / fp2;
  TransitionSet ts = make_set(iso, bz, bx);

  if (iso == Isotope::N14) {
    // The Bx² brackets divide by the quadrupole and hyperfine magnitudes.
    const double q = std::abs(p.Q);
    const double a = std::abs(p.A_par);
    const double tiny = 1e-9 * (q + a + 1.0);
    if (bx != 0.0 && (q < tiny || std::abs(q - a) < tiny)) {
      throw ConfigError("nuclear_freqs_full: Q or |Q| - |A_par| too close to zero for the Bx terms");
    }
    const double z = p.gamma_n * bz;
    const double mix_a = bx != 0.0 ? 2.0 / (q - a) + 1.0 / (q + a) : 0.0;
    const double mix_b = bx != 0.0 ? 1.0 / (q - a) + 2.0 / (q + a) : 0.0;
    const double quad = bx != 0.0 ? a2 * 3.0 / q * sum_inv * sum_inv : 0.0;

    put(ts, TransitionLabel::nuclear(1),
        q + z - a2 / fm - a2 * ((q - a) / fm2 + (2.0 * q - a) / fp2) + gx * (quad - a * diff_inv2));
    put(ts, TransitionLabel::nuclear(2),
        q - z - a2 / fp - a2 * ((2.0 * q - a) / fm2 + (q - a) / fp2) + gx * (quad + a * diff_inv2));
    put(ts, TransitionLabel::nuclear(3),
        q - a + z - a2 * (2.0 * q - a) / fm2 + gx * (a2 * mix_a / fm2 + a / fm2));
    put(ts, TransitionLabel::nuclear(4),
        q + a - z + a2 / fm - a2 * q / fm2 + gx * (a2 * mix_b / fm2 - a / fm2));
    put(ts, TransitionLabel::nuclear(5),
        q + a + z + a2 / fp - a2 * q / fp2 + gx * (a2 * mix_b / fp2 - a / fp2));
    put(ts, TransitionLabel::nuclear(6),
        q - a - z - a2 * (2.0 * q - a) / fp2 + gx * (a2 * mix_a / fp2 + a / fp2));
    put_dq(ts);
  } else {
    const double a = p.A_par;
    const double z = std::abs(p.gamma_n) * bz;
    if (bx != 0.0 && (a == 0.0 || z == 0.0)) {
      throw ConfigError("nuclear_freqs_full: 15N Bx terms need A_par != 0 and Bz != 0");
    }
    const double f7_quartic = bx != 0.0 ? a2 / z * sum_inv * sum_inv : 0.0;
    const double side = bx != 0.0 ? a2 / a - a : 0.0;
    put(ts, TransitionLabel::nuclear(7),
        z + 0.5 * a2 * (1.0 / fm - 1.0 / fp) + 0.25 * a2 * (a / fm2 - a / fp2) +
            gx * (f7_quartic - a * diff_inv2));
    put(ts, TransitionLabel::nuclear(8), a - z - 0.5 * a2 / fm - 0.25 * a2 * a / fm2 + gx * side / fm2);
    put(ts, TransitionLabel::nuclear(9), a + z - 0.5 * a2 / fp - 0.25 * a2 * a / fp2 + gx * side / fp2);
  }
  return ts;
}

std::string to_string(AngularTransition t) { return t == AngularTransition::DoubleQuantum ? "fDQ" : "f7"; }

AngularResponse beta_coefficient(const CouplingParams& p, double bz, AngularTransition which) {
  check_margin(p, bz, 0.0);
  const double ge_bz = p.gamma_e * bz;
  const double denom = p.D * p.D - ge_bz * ge_bz;
  AngularResponse r;
  r.transition = which;
  if (which == AngularTransition::DoubleQuantum) {
    r.beta = -(p.gamma_e / p.gamma_n) * 4.0 * std::abs(p.A_par) * p.D * ge_bz * ge_bz / (denom * denom);
    r.baseline = 2.0 * p.gamma_n * bz;
  } else {
    const double ratio = p.gamma_e / p.gamma_n;
    r.beta = ratio * ratio * 4.0 * p.A_perp * p.A_perp * p.D * p.D / (denom * denom);
    r.baseline = std::abs(p.gamma_n) * bz;
  }
  return r;
}

FieldModel fdq_f7_field_model(const CouplingParams& p, double bz, AngularTransition which) {
  check_margin(p, bz, 0.0);
  const double ge_bz = p.gamma_e * bz;
  const double x = std::abs(p.gamma_e / p.gamma_n) * p.A_perp * p.A_perp / (p.D * p.D - ge_bz * ge_bz);
  FieldModel m;
  if (which == AngularTransition::DoubleQuantum) {
    m.fractional_correction = -x;
    m.frequency = 2.0 * p.gamma_n * bz * (1.0 - x);
  } else {
    m.fractional_correction = x;
    m.frequency = std::abs(p.gamma_n) * bz * (1.0 + x);
  }
  return m;
}

PerturbCheck perturbation_check(const CouplingParams& p, Isotope iso, const PerturbGrid& grid,
                                const HamiltonianOptions& exact_opts) {
  if (grid.bz_steps < 1 || grid.bx_steps < 1 || grid.bz_max < grid.bz_min || grid.bx_max < grid.bx_min ||
      grid.bx_min < 0.0) {
    throw ConfigError("perturbation check: empty or inverted field grid");
  }
  const double crossing = p.D / p.gamma_e;
  if (crossing >= grid.bz_min && crossing <= grid.bz_max) {
    std::ostringstream os;
    os << "perturbation check: Bz range [" << grid.bz_min << ", " << grid.bz_max
       << "] G contains the anti-crossing at " << crossing << " G";
    throw ValidityMarginError(os.str());
  }
  const IsotopeSpec spec = IsotopeSpec::of(iso);
  auto at = [](double lo, double hi, int n, int i) { return n == 1 ? lo : lo + (hi - lo) * i / (n - 1); };

  PerturbCheck out;
  for (int i = 0; i < grid.bz_steps; ++i) {
    const double bz = at(grid.bz_min, grid.bz_max, grid.bz_steps, i);
    for (int k = 0; k < grid.bx_steps; ++k) {
      const double bx = at(grid.bx_min, grid.bx_max, grid.bx_steps, k);
      const TransitionSet approx = nuclear_freqs_full(PerturbationContext(p, bz, bx), iso);
      const TransitionSet exact = transition_set(p, FieldConfig(bz, bx), spec, exact_opts);
      for (const auto& [label, t] : approx.entries) {
        if (label.kind != TransitionLabel::Kind::Nuclear) continue;
        const double r = std::abs(exact.at(label) - t.frequency) * 1e3;
        PerturbResidual& slot = out.residuals[label];
        if (r > slot.max_abs_hz || (i == 0 && k == 0)) slot = {r, bz, bx};
        out.worst_hz = std::max(out.worst_hz, r);
      }
    }
  }
  return out;
}

}  // namespace nvspin
