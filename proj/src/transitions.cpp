#include "nvspin/transitions.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "nvspin/errors.hpp"

namespace nvspin {
namespace {

std::string twice_to_text(int twice) {
  std::string sign = twice > 0 ? "+" : "";
  if (twice % 2 == 0) return sign + std::to_string(twice / 2);
  return sign + std::to_string(twice) + "/2";
}

int parse_twice(const std::string& text, const std::string& full) {
  if (text.empty()) throw ConfigError("malformed transition label '" + full + "'");
  std::size_t slash = text.find('/');
  try {
    std::size_t used = 0;
    const int num = std::stoi(text.substr(0, slash), &used);
    if (used != text.substr(0, slash).size()) throw ConfigError("bad");
    if (slash == std::string::npos) return 2 * num;
    if (text.substr(slash + 1) != "2" || num % 2 == 0) throw ConfigError("bad");
    return num;
  } catch (const std::exception&) {
    throw ConfigError("malformed transition label '" + full + "'");
  }
}

}  // namespace

std::string to_string(const TransitionLabel& label) {
  switch (label.kind) {
    case TransitionLabel::Kind::Nuclear:
      return "f" + std::to_string(label.index);
    case TransitionLabel::Kind::Plus:
      return "fplus_" + twice_to_text(label.twice_mI);
    case TransitionLabel::Kind::Minus:
      return "fminus_" + twice_to_text(label.twice_mI);
    case TransitionLabel::Kind::DoubleQuantum:
      return "fDQ";
  }
  return "?";
}

TransitionLabel parse_transition(const std::string& text) {
  if (text == "fDQ" || text == "fdq") return TransitionLabel::dq();
  if (text.rfind("fplus_", 0) == 0) return TransitionLabel::plus(parse_twice(text.substr(6), text));
  if (text.rfind("fminus_", 0) == 0) return TransitionLabel::minus(parse_twice(text.substr(7), text));
  if (text.size() == 2 && text[0] == 'f' && text[1] >= '1' && text[1] <= '9') {
    return TransitionLabel::nuclear(text[1] - '0');
  }
  throw ConfigError("unknown transition label '" + text + "'");
}

bool valid_for(const TransitionLabel& label, Isotope iso) {
  const int two_i = IsotopeSpec::of(iso).twice_nuclear_spin;
  switch (label.kind) {
    case TransitionLabel::Kind::Nuclear:
      return iso == Isotope::N14 ? (label.index >= 1 && label.index <= 6)
                                 : (label.index >= 7 && label.index <= 9);
    case TransitionLabel::Kind::Plus:
    case TransitionLabel::Kind::Minus:
      return std::abs(label.twice_mI) <= two_i && (label.twice_mI - two_i) % 2 == 0;
    case TransitionLabel::Kind::DoubleQuantum:
      return iso == Isotope::N14;
  }
  return false;
}

std::pair<StateLabel, StateLabel> level_pair(const TransitionLabel& label) {
  using K = TransitionLabel::Kind;
  switch (label.kind) {
    case K::Plus:
      return {{0, label.twice_mI}, {1, label.twice_mI}};
    case K::Minus:
      return {{0, label.twice_mI}, {-1, label.twice_mI}};
    case K::DoubleQuantum:
      return {{0, -2}, {0, 2}};
    case K::Nuclear:
      break;
  }
  switch (label.index) {
    case 1: return {{0, 0}, {0, 2}};
    case 2: return {{0, 0}, {0, -2}};
    case 3: return {{-1, 0}, {-1, 2}};
    case 4: return {{-1, 0}, {-1, -2}};
    case 5: return {{1, 0}, {1, 2}};
    case 6: return {{1, 0}, {1, -2}};
    case 7: return {{0, -1}, {0, 1}};
    case 8: return {{-1, 1}, {-1, -1}};
    case 9: return {{1, 1}, {1, -1}};
    default: break;
  }
  throw ConfigError("no level pair for " + to_string(label));
}

std::vector<TransitionLabel> transitions_of(Isotope iso) {
  std::vector<TransitionLabel> out;
  const int first = iso == Isotope::N14 ? 1 : 7;
  const int last = iso == Isotope::N14 ? 6 : 9;
  for (int i = first; i <= last; ++i) out.push_back(TransitionLabel::nuclear(i));
  const int two_i = IsotopeSpec::of(iso).twice_nuclear_spin;
  for (int m = two_i; m >= -two_i; m -= 2) {
    out.push_back(TransitionLabel::plus(m));
    out.push_back(TransitionLabel::minus(m));
  }
  if (iso == Isotope::N14) out.push_back(TransitionLabel::dq());
  return out;
}

double TransitionSet::at(const TransitionLabel& label) const {
  auto it = entries.find(label);
  if (it == entries.end()) throw ConfigError("transition " + to_string(label) + " not in set");
  return it->second.frequency;
}

std::vector<LabeledLevel> label_states(const EigenSystem& es, std::span<const StateLabel> basis) {
  const Eigen::Index n = es.values.size();
  if (static_cast<std::size_t>(n) != basis.size() || es.vectors.rows() != n) {
    throw ConfigError("label_states: basis size does not match eigen system");
  }
  std::vector<LabeledLevel> out;
  out.reserve(basis.size());
  std::set<StateLabel> taken;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index best = 0;
    double weight = -1.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double w = es.vectors(r, k) * es.vectors(r, k);
      if (w > weight) {
        weight = w;
        best = r;
      }
    }
    const StateLabel& label = basis[static_cast<std::size_t>(best)];
    if (weight < kLabelThreshold) {
      std::ostringstream os;
      os << "eigenstate " << k << " (E = " << es.values(k) << " kHz) has dominant weight " << weight
         << " on " << to_string(label) << ", below " << kLabelThreshold;
      throw AmbiguousLabeling(os.str());
    }
    if (!taken.insert(label).second) {
      throw AmbiguousLabeling("two eigenstates claim label " + to_string(label));
    }
    out.push_back({label, es.values(k), weight});
  }
  return out;
}

std::map<StateLabel, double> level_energies(const CouplingParams& p, const FieldConfig& field,
                                            const IsotopeSpec& iso, const HamiltonianOptions& opts) {
  const HamiltonianMatrix h = build_hamiltonian(p, field, iso, opts);
  const EigenSystem es = eigh(h.entries);
  std::map<StateLabel, double> out;
  try {
    for (const LabeledLevel& lv : label_states(es, h.basis)) out.emplace(lv.label, lv.energy);
  } catch (const AmbiguousLabeling& e) {
    std::ostringstream os;
    os << e.what() << " at Bz = " << field.bz() << " G, Bx = " << field.bx() << " G";
    throw AmbiguousLabeling(os.str());
  }
  return out;
}

TransitionSet transitions_from_levels(const std::map<StateLabel, double>& levels, Isotope iso,
                                      const FieldConfig& field) {
  TransitionSet ts;
  ts.isotope = iso;
  ts.bz = field.bz();
  ts.bx = field.bx();
  for (const TransitionLabel& label : transitions_of(iso)) {
    if (label.kind == TransitionLabel::Kind::DoubleQuantum) continue;
    const auto [a, b] = level_pair(label);
    const double ea = levels.at(a);
    const double eb = levels.at(b);
    Transition t{std::abs(ea - eb), ea >= eb ? a : b, ea >= eb ? b : a};
    ts.entries.emplace(label, t);
  }
  if (iso == Isotope::N14) {
    const auto [a, b] = level_pair(TransitionLabel::dq());
    const double f_dq = ts.at(TransitionLabel::nuclear(1)) - ts.at(TransitionLabel::nuclear(2));
    const bool a_up = levels.at(a) >= levels.at(b);
    ts.entries.emplace(TransitionLabel::dq(), Transition{f_dq, a_up ? a : b, a_up ? b : a});
  }
  return ts;
}

TransitionSet transition_set(const CouplingParams& p, const FieldConfig& field, const IsotopeSpec& iso,
                             const HamiltonianOptions& opts) {
  return transitions_from_levels(level_energies(p, field, iso, opts), iso.id, field);
}

double isotopic_d_shift(double f_plus_14, double f_minus_14, double f_plus_15, double f_minus_15) {
  for (double f : {f_plus_14, f_minus_14, f_plus_15, f_minus_15}) {
    if (!std::isfinite(f)) throw ConfigError("isotopic_d_shift: line centres must be finite");
  }
  return 0.5 * (f_plus_15 + f_minus_15) - 0.5 * (f_plus_14 + f_minus_14);
}

RatioEstimates ratio_estimators(const TransitionSet& nuclear, double f_plus, double f_minus) {
  if (nuclear.isotope != Isotope::N14) throw ConfigError("ratio estimators need the 14N line set");
  double f[7];
  for (int i = 1; i <= 6; ++i) f[i] = nuclear.at(TransitionLabel::nuclear(i));
  const double split = f[3] - f[6];
  if (split == 0.0) throw ConfigError("ratio estimators: f3 == f6");
  RatioEstimates r;
  r.gamma_ratio = (f_plus - f_minus + f[5] - f[3]) / split;
  r.gamma_n_bz = 0.5 * split;
  r.q_abs = (f[1] + f[2] + f[3] + f[4] + f[5] + f[6]) / 6.0;
  r.a_par_abs = (f[1] + f[2] - 2.0 * f[3] + f[4] + f[5] - 2.0 * f[6]) / 6.0;
  return r;
}

RatioEstimates ratio_estimators(const TransitionSet& ts) {
  return ratio_estimators(ts, ts.at(TransitionLabel::plus(2)), ts.at(TransitionLabel::minus(2)));
}

}  // namespace nvspin
