#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvspin/eigensolve.hpp"
#include "nvspin/spin_core.hpp"

namespace nvspin {

/// Name of a ground-state transition: nuclear lines f1..f9, electron lines
/// f+^(mI) / f-^(mI), and the 14N double-quantum line fDQ = f1 - f2.
struct TransitionLabel {
  enum class Kind { Nuclear, Plus, Minus, DoubleQuantum };

  Kind kind = Kind::Nuclear;
  int index = 0;     // 1..9, nuclear lines only
  int twice_mI = 0;  // electron lines only

  static TransitionLabel nuclear(int index) { return {Kind::Nuclear, index, 0}; }
  static TransitionLabel plus(int twice_mI) { return {Kind::Plus, 0, twice_mI}; }
  static TransitionLabel minus(int twice_mI) { return {Kind::Minus, 0, twice_mI}; }
  static TransitionLabel dq() { return {Kind::DoubleQuantum, 0, 0}; }

  auto operator<=>(const TransitionLabel&) const = default;
};

/// "f1".."f9", "fplus_+1", "fminus_+1/2", "fDQ".
std::string to_string(const TransitionLabel& label);
/// Inverse of to_string; also accepts unsigned mI ("fplus_1"). Throws ConfigError.
TransitionLabel parse_transition(const std::string& text);

/// True if the label names a transition that exists for `iso`.
bool valid_for(const TransitionLabel& label, Isotope iso);

/// The two levels a transition connects. fDQ maps to (0,-1) <-> (0,+1).
std::pair<StateLabel, StateLabel> level_pair(const TransitionLabel& label);

/// Labels in canonical order: nuclear lines, then f+/f- for every mI, then fDQ.
std::vector<TransitionLabel> transitions_of(Isotope iso);

struct Transition {
  double frequency = 0.0;  // kHz, magnitude
  StateLabel upper;
  StateLabel lower;
};

struct TransitionSet {
  Isotope isotope = Isotope::N14;
  double bz = 0.0;
  double bx = 0.0;
  std::map<TransitionLabel, Transition> entries;

  bool contains(const TransitionLabel& label) const { return entries.count(label) != 0; }
  /// Frequency in kHz; throws ConfigError when the label is absent.
  double at(const TransitionLabel& label) const;
  double operator[](const char* name) const { return at(parse_transition(name)); }
};

struct LabeledLevel {
  StateLabel label;
  double energy = 0.0;   // kHz
  double overlap = 0.0;  // squared amplitude on the labelling basis state
};

/// Squared-overlap threshold below which a state counts as unlabelable.
inline constexpr double kLabelThreshold = 0.6;

/// Assigns each eigenvector the basis label of its largest squared component.
/// Output follows eigenvalue order. Throws AmbiguousLabeling when a dominant
/// weight is below kLabelThreshold or two eigenvectors claim the same label.
std::vector<LabeledLevel> label_states(const EigenSystem& es, std::span<const StateLabel> basis);

/// Labelled energies keyed by (ms, mI).
std::map<StateLabel, double> level_energies(const CouplingParams& p, const FieldConfig& field,
                                            const IsotopeSpec& iso,
                                            const HamiltonianOptions& opts = {});

/// Exact-diagonalization transition frequencies for every label of the isotope.
TransitionSet transition_set(const CouplingParams& p, const FieldConfig& field, const IsotopeSpec& iso,
                             const HamiltonianOptions& opts = {});

/// Fills a TransitionSet from a labelled level map (upper = higher energy).
TransitionSet transitions_from_levels(const std::map<StateLabel, double>& levels, Isotope iso,
                                      const FieldConfig& field);

/// Difference of the ODMR line centres (f+ + f-)/2 between the isotopes, 15N minus 14N.
double isotopic_d_shift(double f_plus_14, double f_minus_14, double f_plus_15, double f_minus_15);

struct RatioEstimates {
  double gamma_ratio = 0.0;  // γe / γn
  double gamma_n_bz = 0.0;   // kHz
  double q_abs = 0.0;        // kHz
  double a_par_abs = 0.0;    // kHz
};

/// Linear-combination estimates from the six 14N nuclear lines and the
/// mI = +1 electron lines. Throws ConfigError if f3 == f6.
RatioEstimates ratio_estimators(const TransitionSet& nuclear, double f_plus, double f_minus);
/// Same, taking fplus_+1 / fminus_+1 from the set itself.
RatioEstimates ratio_estimators(const TransitionSet& ts);

}  // namespace nvspin
