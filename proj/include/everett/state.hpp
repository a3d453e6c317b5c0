#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace everett {

using Amplitude = std::complex<double>;

// Physical identities hold to norm_tolerance; pure arithmetic to
// arithmetic_tolerance (relative). Terms at or below prune_threshold
// (squared modulus) are dropped after every operation.
inline constexpr double norm_tolerance = 1e-12;
inline constexpr double arithmetic_tolerance = 1e-15;
inline constexpr double prune_threshold = 1e-14;

enum class Kind { electron, apparatus };

enum class Outcome { up, down };

// One label per subsystem per basis term. Electrons use {up, down}
// relative to the register's basis angle; apparatus registers use the
// fixed pointer basis {ready, recorded_up, recorded_down}.
enum class BasisLabel : unsigned char { up, down, ready, recorded_up, recorded_down };

struct SubsystemLabel {
  Kind kind;
  int index;
  friend auto operator<=>(const SubsystemLabel&, const SubsystemLabel&) = default;
};

inline SubsystemLabel electron(int index) { return {Kind::electron, index}; }
inline SubsystemLabel apparatus(int index) { return {Kind::apparatus, index}; }

// Analyzer direction in the x-z plane, measured from +z, radians in [0, pi).
struct MeasurementSetting {
  double radians;

  explicit MeasurementSetting(double r) : radians(r) {
    if (!std::isfinite(r) || r < 0.0 || r >= std::numbers::pi)
      throw std::invalid_argument("analyzer angle must be finite and in [0, pi)");
  }
};

struct Register {
  SubsystemLabel label;
  // Electrons: the analyzer angle their up/down labels refer to.
  double basis_angle = 0.0;
  // Apparatus: present exactly when some term carries a recorded mark.
  std::optional<double> setting_used{};
};

struct BasisState {
  std::vector<BasisLabel> labels;  // one per register, same order
  friend auto operator<=>(const BasisState&, const BasisState&) = default;
};

inline bool is_electron_label(BasisLabel l) {
  return l == BasisLabel::up || l == BasisLabel::down;
}

inline bool is_recorded_label(BasisLabel l) {
  return l == BasisLabel::recorded_up || l == BasisLabel::recorded_down;
}

inline const char* label_name(BasisLabel l) {
  switch (l) {
    case BasisLabel::up: return "up";
    case BasisLabel::down: return "down";
    case BasisLabel::ready: return "ready";
    case BasisLabel::recorded_up: return "recorded_up";
    case BasisLabel::recorded_down: return "recorded_down";
  }
  return "?";
}

inline const char* outcome_name(Outcome o) { return o == Outcome::up ? "up" : "down"; }

inline int outcome_sign(Outcome o) { return o == Outcome::up ? +1 : -1; }

namespace detail {

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// Full round-trip precision for reports and keys.
inline std::string num(double v) { return fmt("%.17g", v); }

// Fixed 17-significant-digit field for the canonical state text.
inline std::string amp_field(double v) { return fmt("%.16e", v); }

}  // namespace detail

// Sparse normalized state over labeled subsystems. Construction runs the
// full invariant check; instances are immutable afterwards.
class StateVector {
 public:
  static StateVector from_terms(std::vector<Register> regs,
                                std::map<BasisState, Amplitude> terms) {
    if (regs.empty()) throw std::invalid_argument("state needs at least one register");
    for (std::size_t i = 0; i < regs.size(); ++i)
      for (std::size_t j = i + 1; j < regs.size(); ++j)
        if (regs[i].label == regs[j].label)
          throw std::invalid_argument("duplicate subsystem label");
    for (const auto& r : regs)
      if (!std::isfinite(r.basis_angle) ||
          (r.setting_used && !std::isfinite(*r.setting_used)))
        throw std::invalid_argument("non-finite register angle");

    for (auto it = terms.begin(); it != terms.end();) {
      const auto& [basis, amp] = *it;
      if (basis.labels.size() != regs.size())
        throw std::invalid_argument("basis term length does not match register list");
      if (!std::isfinite(amp.real()) || !std::isfinite(amp.imag()))
        throw std::invalid_argument("non-finite amplitude");
      for (std::size_t i = 0; i < basis.labels.size(); ++i) {
        bool electron_reg = regs[i].label.kind == Kind::electron;
        if (electron_reg != is_electron_label(basis.labels[i]))
          throw std::invalid_argument("basis label does not fit subsystem kind");
      }
      it = std::norm(amp) <= prune_threshold ? terms.erase(it) : std::next(it);
    }
    if (terms.empty()) throw std::invalid_argument("state has no surviving terms");

    // Recorded marks and the setting_used bookkeeping must agree, and a
    // register must not mix ready with recorded marks across terms.
    for (std::size_t i = 0; i < regs.size(); ++i) {
      if (regs[i].label.kind != Kind::apparatus) continue;
      bool any_recorded = false, any_ready = false;
      for (const auto& [basis, amp] : terms) {
        (is_recorded_label(basis.labels[i]) ? any_recorded : any_ready) = true;
      }
      if (any_recorded && any_ready)
        throw std::invalid_argument("apparatus mixes ready and recorded marks");
      if (any_recorded != regs[i].setting_used.has_value())
        throw std::invalid_argument("apparatus setting_used inconsistent with marks");
    }

    double n2 = 0.0;
    for (const auto& [basis, amp] : terms) n2 += std::norm(amp);
    if (std::abs(n2 - 1.0) > norm_tolerance)
      throw std::invalid_argument("state is not normalized: squared norm " +
                                  detail::num(n2));

    StateVector s;
    s.regs_ = std::move(regs);
    s.terms_ = std::move(terms);
    return s;
  }

  const std::vector<Register>& registers() const { return regs_; }
  const std::map<BasisState, Amplitude>& amplitudes() const { return terms_; }

  std::size_t register_index(SubsystemLabel label) const {
    for (std::size_t i = 0; i < regs_.size(); ++i)
      if (regs_[i].label == label) return i;
    throw std::invalid_argument("no such subsystem in state");
  }

  bool has_register(SubsystemLabel label) const {
    for (const auto& r : regs_)
      if (r.label == label) return true;
    return false;
  }

  double squared_norm() const {
    double n2 = 0.0;
    for (const auto& [basis, amp] : terms_) n2 += std::norm(amp);
    return n2;
  }

 private:
  StateVector() = default;
  std::vector<Register> regs_;
  std::map<BasisState, Amplitude> terms_;
};

// Unit eigenvector of the spin observable along the setting direction,
// components in the reference z-basis. Half-angle convention: the pair
// (up, down) forms the rotation matrix columns (cos t/2, sin t/2) and
// (-sin t/2, cos t/2), so equal-angle rebasing of the singlet is exact.
inline std::array<Amplitude, 2> eigenstate(const MeasurementSetting& setting,
                                           Outcome outcome) {
  double c = std::cos(setting.radians / 2.0);
  double s = std::sin(setting.radians / 2.0);
  if (outcome == Outcome::up) return {Amplitude{c, 0.0}, Amplitude{s, 0.0}};
  return {Amplitude{-s, 0.0}, Amplitude{c, 0.0}};
}

inline StateVector make_singlet() {
  const double root_half = 1.0 / std::sqrt(2.0);
  std::vector<Register> regs{{electron(1)}, {electron(2)}};
  std::map<BasisState, Amplitude> terms;
  terms[BasisState{{BasisLabel::up, BasisLabel::down}}] = {root_half, 0.0};
  terms[BasisState{{BasisLabel::down, BasisLabel::up}}] = {-root_half, 0.0};
  return StateVector::from_terms(std::move(regs), std::move(terms));
}

// Single electron prepared in an analyzer eigenstate, stored in that basis.
inline StateVector make_electron(int index, const MeasurementSetting& setting,
                                 Outcome outcome) {
  std::vector<Register> regs{{electron(index), setting.radians}};
  std::map<BasisState, Amplitude> terms;
  terms[BasisState{{outcome == Outcome::up ? BasisLabel::up : BasisLabel::down}}] = {1.0,
                                                                                     0.0};
  return StateVector::from_terms(std::move(regs), std::move(terms));
}

inline StateVector make_apparatus_ready(int index) {
  std::vector<Register> regs{{apparatus(index)}};
  std::map<BasisState, Amplitude> terms;
  terms[BasisState{{BasisLabel::ready}}] = {1.0, 0.0};
  return StateVector::from_terms(std::move(regs), std::move(terms));
}

inline StateVector tensor(const StateVector& a, const StateVector& b) {
  for (const auto& r : b.registers())
    if (a.has_register(r.label)) throw std::invalid_argument("overlapping registers");
  std::vector<Register> regs = a.registers();
  regs.insert(regs.end(), b.registers().begin(), b.registers().end());

  std::map<BasisState, Amplitude> terms;
  for (const auto& [ba, aa] : a.amplitudes())
    for (const auto& [bb, ab] : b.amplitudes()) {
      BasisState basis = ba;
      basis.labels.insert(basis.labels.end(), bb.labels.begin(), bb.labels.end());
      terms[std::move(basis)] = aa * ab;
    }
  return StateVector::from_terms(std::move(regs), std::move(terms));
}

// Re-express one electron's components along a new analyzer axis. The
// physical state is unchanged; only the stored basis moves.
inline StateVector rebase(const StateVector& state, SubsystemLabel subsystem,
                          const MeasurementSetting& setting) {
  std::size_t i = state.register_index(subsystem);
  if (subsystem.kind != Kind::electron)
    throw std::invalid_argument("rebase targets an electron");

  std::vector<Register> regs = state.registers();
  if (regs[i].basis_angle == setting.radians) {
    std::map<BasisState, Amplitude> copy = state.amplitudes();
    return StateVector::from_terms(std::move(regs), std::move(copy));
  }

  // Overlap of new-axis eigenvectors with old-axis ones: a rotation by
  // half the angle difference.
  double h = (setting.radians - regs[i].basis_angle) / 2.0;
  double ch = std::cos(h), sh = std::sin(h);
  regs[i].basis_angle = setting.radians;

  std::map<BasisState, Amplitude> terms;
  for (const auto& [basis, amp] : state.amplitudes()) {
    BasisState up_term = basis, down_term = basis;
    up_term.labels[i] = BasisLabel::up;
    down_term.labels[i] = BasisLabel::down;
    if (basis.labels[i] == BasisLabel::up) {
      terms[up_term] += ch * amp;
      terms[down_term] += -sh * amp;
    } else {
      terms[up_term] += sh * amp;
      terms[down_term] += ch * amp;
    }
  }
  return StateVector::from_terms(std::move(regs), std::move(terms));
}

inline StateVector to_reference_basis(const StateVector& state) {
  StateVector out = state;
  for (const auto& r : state.registers())
    if (r.label.kind == Kind::electron && r.basis_angle != 0.0)
      out = rebase(out, r.label, MeasurementSetting(0.0));
  return out;
}

// Hilbert-space overlap <a|b>. Register lists must agree, including the
// electron basis angles; apparatus setting_used is classical bookkeeping
// and does not enter the overlap.
inline Amplitude inner_product(const StateVector& a, const StateVector& b) {
  const auto& ra = a.registers();
  const auto& rb = b.registers();
  if (ra.size() != rb.size()) throw std::invalid_argument("register lists differ");
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (ra[i].label != rb[i].label || ra[i].basis_angle != rb[i].basis_angle)
      throw std::invalid_argument("register lists differ");

  Amplitude sum{0.0, 0.0};
  const auto& ta = a.amplitudes();
  for (const auto& [basis, ab] : b.amplitudes()) {
    auto it = ta.find(basis);
    if (it != ta.end()) sum += std::conj(it->second) * ab;
  }
  return sum;
}

inline bool approx_equal(const StateVector& a, const StateVector& b, double tol) {
  const auto& ra = a.registers();
  const auto& rb = b.registers();
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (ra[i].label != rb[i].label || ra[i].basis_angle != rb[i].basis_angle)
      return false;

  std::map<BasisState, Amplitude> diff = a.amplitudes();
  for (const auto& [basis, amp] : b.amplitudes()) diff[basis] -= amp;
  for (const auto& [basis, amp] : diff)
    if (std::abs(amp) > tol) return false;
  return true;
}

// Equality up to one global phase: rotate each state so its first nonzero
// amplitude (map order) is real positive, then compare componentwise.
inline bool approx_equal_up_to_phase(const StateVector& a, const StateVector& b,
                                     double tol) {
  auto phase_of = [](const StateVector& s) {
    const Amplitude& first = s.amplitudes().begin()->second;
    return first / std::abs(first);
  };
  Amplitude pa = phase_of(a), pb = phase_of(b);

  const auto& ra = a.registers();
  const auto& rb = b.registers();
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (ra[i].label != rb[i].label || ra[i].basis_angle != rb[i].basis_angle)
      return false;

  std::map<BasisState, Amplitude> diff;
  for (const auto& [basis, amp] : a.amplitudes()) diff[basis] += amp / pa;
  for (const auto& [basis, amp] : b.amplitudes()) diff[basis] -= amp / pb;
  for (const auto& [basis, amp] : diff)
    if (std::abs(amp) > tol) return false;
  return true;
}

// Golden-file serialization: register line, then one line per basis term
// in map order, amplitudes as fixed 17-significant-digit decimals.
inline std::string to_canonical_text(const StateVector& state) {
  std::string out = "registers";
  for (const auto& r : state.registers()) {
    out += ' ';
    if (r.label.kind == Kind::electron) {
      out += "electron:" + std::to_string(r.label.index) + '@' +
             detail::num(r.basis_angle);
    } else {
      out += "apparatus:" + std::to_string(r.label.index);
      if (r.setting_used) out += '@' + detail::num(*r.setting_used);
    }
  }
  out += '\n';
  for (const auto& [basis, amp] : state.amplitudes()) {
    std::string line;
    for (auto l : basis.labels) {
      line += label_name(l);
      line += ' ';
    }
    line += detail::amp_field(amp.real());
    line += ' ';
    line += detail::amp_field(amp.imag());
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace everett
