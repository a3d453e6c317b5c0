#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "everett/state.hpp"

namespace everett {

struct MeasurementOp {
  SubsystemLabel target;
  SubsystemLabel pointer;
  MeasurementSetting setting;
};

namespace detail {

// Apparatus mark permutation, one 3-cycle per spin sector. On a ready
// apparatus this is the record step; the action on already-recorded marks
// is an arbitrary fixed extension that makes the whole map unitary.
inline BasisLabel cycle_mark(Outcome sector, BasisLabel mark) {
  if (sector == Outcome::up) {
    switch (mark) {
      case BasisLabel::ready: return BasisLabel::recorded_up;
      case BasisLabel::recorded_up: return BasisLabel::recorded_down;
      default: return BasisLabel::ready;
    }
  }
  switch (mark) {
    case BasisLabel::ready: return BasisLabel::recorded_down;
    case BasisLabel::recorded_down: return BasisLabel::recorded_up;
    default: return BasisLabel::ready;
  }
}

}  // namespace detail

// The raw interaction unitary: expand the target electron in the setting
// eigenbasis, then advance the apparatus mark one step in that spin
// component's cycle. No precondition on the apparatus status.
inline StateVector apply_interaction(const StateVector& state, const MeasurementOp& op) {
  if (op.target.kind != Kind::electron)
    throw std::invalid_argument("measurement target must be an electron");
  if (op.pointer.kind != Kind::apparatus)
    throw std::invalid_argument("measurement pointer must be an apparatus register");
  std::size_t ia = state.register_index(op.pointer);

  StateVector aligned = rebase(state, op.target, op.setting);
  std::size_t ie = aligned.register_index(op.target);

  std::vector<Register> regs = aligned.registers();
  std::map<BasisState, Amplitude> terms;
  bool any_recorded = false;
  for (const auto& [basis, amp] : aligned.amplitudes()) {
    Outcome sector = basis.labels[ie] == BasisLabel::up ? Outcome::up : Outcome::down;
    BasisState next = basis;
    next.labels[ia] = detail::cycle_mark(sector, basis.labels[ia]);
    any_recorded = any_recorded || is_recorded_label(next.labels[ia]);
    terms[std::move(next)] += amp;
  }
  regs[ia].setting_used =
      any_recorded ? std::optional<double>(op.setting.radians) : std::nullopt;
  return StateVector::from_terms(std::move(regs), std::move(terms));
}

// Measurement proper: the interaction applied to a ready apparatus, which
// turns every term's mark into recorded(outcome along the setting axis).
inline StateVector apply_measurement(const StateVector& state, const MeasurementOp& op) {
  std::size_t ia = state.register_index(op.pointer);
  if (op.pointer.kind != Kind::apparatus)
    throw std::invalid_argument("measurement pointer must be an apparatus register");
  for (const auto& [basis, amp] : state.amplitudes())
    if (basis.labels[ia] != BasisLabel::ready)
      throw std::invalid_argument("apparatus register is not ready");
  return apply_interaction(state, op);
}

inline StateVector apply_both_labs(const StateVector& state, const MeasurementOp& op1,
                                   const MeasurementOp& op2) {
  if (op1.target == op2.target || op1.pointer == op2.pointer)
    throw std::invalid_argument("labs must use distinct electrons and apparatus");
  return apply_measurement(apply_measurement(state, op1), op2);
}

}  // namespace everett
