#pragma once

// Ground-state spin Hamiltonian of the NV center, electron spin S = 1 coupled
// to the nitrogen nuclear spin (I = 1 for 14N, I = 1/2 for 15N).
//
// Units: kHz for energies, Gauss for fields, radians for angles.

#include <compare>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nvspin {

enum class Isotope { N14, N15 };

std::string to_string(Isotope iso);
Isotope parse_isotope(const std::string& text);

namespace constants {
/// Electron gyromagnetic ratio, kHz/G.
inline constexpr double kGammaE = 2803.3;
/// 14N nuclear gyromagnetic ratio, kHz/G.
inline constexpr double kGammaN14 = 0.30759;
/// 15N nuclear gyromagnetic ratio, kHz/G (negative).
inline constexpr double kGammaN15 = -0.43150;
}  // namespace constants

struct IsotopeSpec {
  Isotope id;
  int twice_nuclear_spin;  // 2I
  double gamma_n;          // kHz/G, signed

  static IsotopeSpec n14();
  static IsotopeSpec n15();
  static IsotopeSpec of(Isotope iso);

  double nuclear_spin() const { return 0.5 * twice_nuclear_spin; }
  int nuclear_dim() const { return twice_nuclear_spin + 1; }
  int hilbert_dim() const { return 3 * nuclear_dim(); }
};

/// Signed coupling constants, kHz (gyromagnetic ratios in kHz/G).
struct CouplingParams {
  double D = 0.0;
  double Q = 0.0;
  double A_par = 0.0;
  double A_perp = 0.0;
  double gamma_e = constants::kGammaE;
  double gamma_n = 0.0;

  /// Throws ConfigError if the parameters are not usable with `iso`.
  void validate(const IsotopeSpec& iso) const;
};

/// Magnetic field in the NV frame. The transverse component always points
/// along +x, so Bx is stored as a magnitude.
class FieldConfig {
 public:
  FieldConfig() = default;
  FieldConfig(double bz, double bx);

  static FieldConfig axial(double bz) { return {bz, 0.0}; }
  static FieldConfig polar(double magnitude, double theta_rad);

  double bz() const { return bz_; }
  double bx() const { return bx_; }

 private:
  double bz_ = 0.0;
  double bx_ = 0.0;
};

/// (ms, mI) pair; mI is stored doubled so that half-integers stay exact.
struct StateLabel {
  int ms = 0;
  int twice_mI = 0;

  double mI() const { return 0.5 * twice_mI; }
  auto operator<=>(const StateLabel&) const = default;
};

std::string to_string(const StateLabel& label);

struct SpinOperators {
  Eigen::MatrixXd Sz;
  Eigen::MatrixXd Sx;
  Eigen::MatrixXd S_plus;
  Eigen::MatrixXd S_minus;
};

/// Spin matrices in the |s, m> basis ordered m = s, s-1, ..., -s.
SpinOperators spin_matrices(double s);

struct HamiltonianOptions {
  /// Include -γn·Bx·Ix. The perturbative expressions leave it out.
  bool transverse_nuclear_zeeman = true;
};

struct HamiltonianMatrix {
  Eigen::MatrixXd entries;
  std::vector<StateLabel> basis;  // ms in {+1, 0, -1}, mI descending
  Isotope isotope = Isotope::N14;
};

/// Basis of the product space, ms-major, each block with mI descending.
std::vector<StateLabel> product_basis(const IsotopeSpec& iso);

HamiltonianMatrix build_hamiltonian(const CouplingParams& p, const FieldConfig& field,
                                    const IsotopeSpec& iso, const HamiltonianOptions& opts = {});

/// Diagonal energy of |ms, mI> with every transverse term dropped.
double unperturbed_energy(const CouplingParams& p, double bz, const StateLabel& s);

}  // namespace nvspin
