#include "nvspin/spin_core.hpp"

#include <cmath>
#include <sstream>

#include "nvspin/errors.hpp"

namespace nvspin {

std::string to_string(Isotope iso) { return iso == Isotope::N14 ? "n14" : "n15"; }

Isotope parse_isotope(const std::string& text) {
  if (text == "n14" || text == "N14" || text == "14") return Isotope::N14;
  if (text == "n15" || text == "N15" || text == "15") return Isotope::N15;
  throw ConfigError("unknown isotope '" + text + "' (expected n14 or n15)");
}

IsotopeSpec IsotopeSpec::n14() { return {Isotope::N14, 2, constants::kGammaN14}; }
IsotopeSpec IsotopeSpec::n15() { return {Isotope::N15, 1, constants::kGammaN15}; }
IsotopeSpec IsotopeSpec::of(Isotope iso) { return iso == Isotope::N14 ? n14() : n15(); }

void CouplingParams::validate(const IsotopeSpec& iso) const {
  for (double v : {D, Q, A_par, A_perp, gamma_e, gamma_n}) {
    if (!std::isfinite(v)) throw ConfigError("coupling parameters must be finite");
  }
  if (!(gamma_e > 0.0)) throw ConfigError("gamma_e must be positive");
  if (iso.id == Isotope::N15 && Q != 0.0) {
    throw ConfigError("15N has no quadrupole term: Q must be 0 for a spin-1/2 nucleus");
  }
}

FieldConfig::FieldConfig(double bz, double bx) : bz_(bz), bx_(std::abs(bx)) {
  if (!std::isfinite(bz) || !std::isfinite(bx)) throw ConfigError("field components must be finite");
}

FieldConfig FieldConfig::polar(double magnitude, double theta_rad) {
  return {magnitude * std::cos(theta_rad), magnitude * std::sin(theta_rad)};
}

std::string to_string(const StateLabel& label) {
  std::ostringstream os;
  os << '(' << (label.ms > 0 ? "+" : "") << label.ms << ',';
  if (label.twice_mI > 0) os << '+';
  if (label.twice_mI % 2 == 0) {
    os << label.twice_mI / 2;
  } else {
    os << label.twice_mI << "/2";
  }
  os << ')';
  return os.str();
}

SpinOperators spin_matrices(double s) {
  const double twice = 2.0 * s;
  if (!(s >= 0.0) || std::abs(twice - std::round(twice)) > 1e-12) {
    throw ConfigError("spin quantum number must be a nonnegative half-integer");
  }
  const int n = static_cast<int>(std::lround(twice)) + 1;
  SpinOperators ops;
  ops.Sz = Eigen::MatrixXd::Zero(n, n);
  ops.S_plus = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = s - i;
    ops.Sz(i, i) = m;
    // <m+1|S+|m> sits one row above the column of |m>.
    if (i > 0) ops.S_plus(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  ops.S_minus = ops.S_plus.transpose();
  ops.Sx = 0.5 * (ops.S_plus + ops.S_minus);
  return ops;
}

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace

std::vector<StateLabel> product_basis(const IsotopeSpec& iso) {
  std::vector<StateLabel> basis;
  basis.reserve(iso.hilbert_dim());
  for (int ms : {1, 0, -1}) {
    for (int two_mi = iso.twice_nuclear_spin; two_mi >= -iso.twice_nuclear_spin; two_mi -= 2) {
      basis.push_back({ms, two_mi});
    }
  }
  return basis;
}

HamiltonianMatrix build_hamiltonian(const CouplingParams& p, const FieldConfig& field,
                                    const IsotopeSpec& iso, const HamiltonianOptions& opts) {
  p.validate(iso);
  const SpinOperators s = spin_matrices(1.0);
  const SpinOperators n = spin_matrices(iso.nuclear_spin());
  const Eigen::MatrixXd one_s = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd one_n = Eigen::MatrixXd::Identity(iso.nuclear_dim(), iso.nuclear_dim());

  const double bz = field.bz();
  const double bx = field.bx();

  Eigen::MatrixXd h = p.D * kron(s.Sz * s.Sz, one_n);
  h += p.Q * kron(one_s, n.Sz * n.Sz);
  h += p.A_par * kron(s.Sz, n.Sz);
  h += p.gamma_e * bz * kron(s.Sz, one_n);
  h -= p.gamma_n * bz * kron(one_s, n.Sz);
  h += 0.5 * p.A_perp * (kron(s.S_plus, n.S_minus) + kron(s.S_minus, n.S_plus));
  h += p.gamma_e * bx * kron(s.Sx, one_n);
  if (opts.transverse_nuclear_zeeman) h -= p.gamma_n * bx * kron(one_s, n.Sx);

  return {std::move(h), product_basis(iso), iso.id};
}

double unperturbed_energy(const CouplingParams& p, double bz, const StateLabel& s) {
  const double ms = s.ms;
  const double mi = s.mI();
  return ms * ms * p.D + mi * mi * p.Q + ms * mi * p.A_par + ms * p.gamma_e * bz - mi * p.gamma_n * bz;
}

}  // namespace nvspin
