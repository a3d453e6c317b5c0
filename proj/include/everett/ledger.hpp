#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "everett/measurement.hpp"
#include "everett/state.hpp"

namespace everett {

struct LabRecord {
  double setting_radians;
  Outcome outcome;
};

inline double everett_weight(const Amplitude& amplitude) { return std::norm(amplitude); }

// One world: the apparatus records that identify it, plus its amplitude.
struct Branch {
  std::map<SubsystemLabel, LabRecord> outcomes;  // keyed by apparatus label
  Amplitude amplitude;
  double weight;
};

inline double everett_weight(const Branch& branch) {
  return everett_weight(branch.amplitude);
}

struct BranchLedger {
  std::vector<Branch> branches;
  std::string scenario;

  double total_weight() const {
    double sum = 0.0;
    for (const auto& b : branches) sum += b.weight;
    return sum;
  }
};

// Split a fully measured state into branches, one per distinct combination
// of apparatus records, ordered by outcome tuple. In the ordinary flow each
// combination holds exactly one term and keeps its exact amplitude; if a
// later rebase has smeared a combination over several terms, the branch
// keeps the total weight and the dominant term's phase.
inline BranchLedger decompose(const StateVector& state, std::string scenario = "") {
  const auto& regs = state.registers();
  std::vector<std::size_t> pointer_slots;
  for (std::size_t i = 0; i < regs.size(); ++i)
    if (regs[i].label.kind == Kind::apparatus) {
      if (!regs[i].setting_used)
        throw std::invalid_argument("premature branching: apparatus still ready");
      pointer_slots.push_back(i);
    }

  struct Group {
    Amplitude dominant{0.0, 0.0};
    double mass = 0.0;
    std::size_t terms = 0;
  };
  std::map<std::vector<BasisLabel>, Group> groups;
  for (const auto& [basis, amp] : state.amplitudes()) {
    std::vector<BasisLabel> key;
    key.reserve(pointer_slots.size());
    for (auto slot : pointer_slots) {
      if (!is_recorded_label(basis.labels[slot]))
        throw std::invalid_argument("premature branching: apparatus still ready");
      key.push_back(basis.labels[slot]);
    }
    Group& g = groups[std::move(key)];
    g.mass += std::norm(amp);
    g.terms += 1;
    if (std::norm(amp) > std::norm(g.dominant)) g.dominant = amp;
  }

  BranchLedger ledger{{}, std::move(scenario)};
  for (const auto& [key, group] : groups) {
    if (group.mass <= prune_threshold) continue;
    Branch b;
    for (std::size_t k = 0; k < pointer_slots.size(); ++k) {
      const Register& reg = regs[pointer_slots[k]];
      Outcome o = key[k] == BasisLabel::recorded_up ? Outcome::up : Outcome::down;
      b.outcomes[reg.label] = LabRecord{*reg.setting_used, o};
    }
    b.amplitude = group.terms == 1
                      ? group.dominant
                      : std::sqrt(group.mass) * group.dominant / std::abs(group.dominant);
    b.weight = everett_weight(b.amplitude);
    ledger.branches.push_back(std::move(b));
  }
  return ledger;
}

// Singlet measured by two labs, one apparatus each.
inline StateVector two_lab_state(const MeasurementSetting& setting1,
                                 const MeasurementSetting& setting2) {
  StateVector state =
      tensor(tensor(make_singlet(), make_apparatus_ready(1)), make_apparatus_ready(2));
  return apply_both_labs(state, MeasurementOp{electron(1), apparatus(1), setting1},
                         MeasurementOp{electron(2), apparatus(2), setting2});
}

inline BranchLedger two_lab_ledger(const MeasurementSetting& setting1,
                                   const MeasurementSetting& setting2,
                                   std::string scenario = "") {
  if (scenario.empty())
    scenario = "settings(" + detail::num(setting1.radians) + "," +
               detail::num(setting2.radians) + ")";
  return decompose(two_lab_state(setting1, setting2), std::move(scenario));
}

// One ledger per alternative choice of settings. For the two-choice
// vertical/horizontal enumeration this flattens to exactly four worlds.
inline std::vector<BranchLedger> figure_one_enumeration(
    const std::vector<std::pair<MeasurementSetting, MeasurementSetting>>& choices) {
  std::vector<BranchLedger> ledgers;
  ledgers.reserve(choices.size());
  for (const auto& [s1, s2] : choices) ledgers.push_back(two_lab_ledger(s1, s2));
  return ledgers;
}

struct CorrelationReport {
  double setting1_radians;
  double setting2_radians;
  std::map<std::pair<Outcome, Outcome>, double> joint;
  double E;
};

inline CorrelationReport correlation(const MeasurementSetting& setting1,
                                     const MeasurementSetting& setting2) {
  BranchLedger ledger = two_lab_ledger(setting1, setting2);
  CorrelationReport report{setting1.radians, setting2.radians, {}, 0.0};
  for (Outcome o1 : {Outcome::up, Outcome::down})
    for (Outcome o2 : {Outcome::up, Outcome::down}) report.joint[{o1, o2}] = 0.0;
  for (const auto& b : ledger.branches) {
    Outcome o1 = b.outcomes.at(apparatus(1)).outcome;
    Outcome o2 = b.outcomes.at(apparatus(2)).outcome;
    report.joint[{o1, o2}] += b.weight;
    report.E += outcome_sign(o1) * outcome_sign(o2) * b.weight;
  }
  return report;
}

inline double chsh(const MeasurementSetting& a, const MeasurementSetting& a_prime,
                   const MeasurementSetting& b, const MeasurementSetting& b_prime) {
  return correlation(a, b).E - correlation(a, b_prime).E + correlation(a_prime, b).E +
         correlation(a_prime, b_prime).E;
}

// A deterministic local strategy fixes each lab's +-1 answer for both of
// its candidate settings. There are exactly 16.
struct LocalStrategy {
  int at_a, at_a_prime, at_b, at_b_prime;

  int chsh_value() const {
    return at_a * at_b - at_a * at_b_prime + at_a_prime * at_b + at_a_prime * at_b_prime;
  }
};

inline std::vector<LocalStrategy> all_local_strategies() {
  std::vector<LocalStrategy> all;
  for (int a : {+1, -1})
    for (int ap : {+1, -1})
      for (int b : {+1, -1})
        for (int bp : {+1, -1}) all.push_back({a, ap, b, bp});
  return all;
}

inline int lhv_chsh_bound() {
  int best = 0;
  for (const auto& s : all_local_strategies()) best = std::max(best, std::abs(s.chsh_value()));
  return best;
}

struct SampleTable {
  std::uint64_t shots = 0;
  std::vector<std::uint64_t> counts;  // aligned with the ledger's branches

  double frequency(std::size_t branch) const {
    return static_cast<double>(counts.at(branch)) / static_cast<double>(shots);
  }
};

// Seeded draw of worlds proportional to weight, via an explicit inverse-CDF
// walk so the sequence is identical on every platform.
inline SampleTable sample_worlds(const BranchLedger& ledger, std::uint64_t shots,
                                 std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  if (ledger.branches.empty()) throw std::invalid_argument("empty ledger");

  std::vector<double> cumulative;
  cumulative.reserve(ledger.branches.size());
  double running = 0.0;
  for (const auto& b : ledger.branches) {
    running += b.weight;
    cumulative.push_back(running);
  }

  SampleTable table{shots, std::vector<std::uint64_t>(ledger.branches.size(), 0)};
  std::mt19937_64 rng(seed);
  for (std::uint64_t s = 0; s < shots; ++s) {
    double u = (rng() >> 11) * 0x1.0p-53 * running;
    std::size_t pick = ledger.branches.size() - 1;
    for (std::size_t i = 0; i < cumulative.size(); ++i)
      if (u < cumulative[i]) {
        pick = i;
        break;
      }
    ++table.counts[pick];
  }
  return table;
}

inline std::string json_escape(const std::string& raw) {
  std::string out;
  for (char c : raw) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

inline std::string to_json_text(const Branch& branch) {
  std::string out = "{\"outcomes\":{";
  bool first = true;
  for (const auto& [label, record] : branch.outcomes) {
    if (!first) out += ',';
    first = false;
    out += '"' + std::to_string(label.index) + "\":{\"setting_radians\":" +
           detail::num(record.setting_radians) + ",\"outcome\":\"" +
           outcome_name(record.outcome) + "\"}";
  }
  out += "},\"amplitude\":{\"re\":" + detail::num(branch.amplitude.real()) +
         ",\"im\":" + detail::num(branch.amplitude.imag()) +
         "},\"weight\":" + detail::num(branch.weight) + "}";
  return out;
}

inline std::string to_json_text(const BranchLedger& ledger) {
  std::string out = "{\"scenario\":\"" + json_escape(ledger.scenario) + "\",\"branches\":[";
  for (std::size_t i = 0; i < ledger.branches.size(); ++i) {
    if (i) out += ',';
    out += to_json_text(ledger.branches[i]);
  }
  out += "]}";
  return out;
}

inline std::string joint_key(Outcome o1, Outcome o2) {
  return std::string(outcome_name(o1)) + ',' + outcome_name(o2);
}

inline std::string to_json_text(const CorrelationReport& report) {
  std::string out = "{\"settings_radians\":[" + detail::num(report.setting1_radians) +
                    ',' + detail::num(report.setting2_radians) + "],\"joint\":{";
  bool first = true;
  for (const auto& [pair, weight] : report.joint) {
    if (!first) out += ',';
    first = false;
    out += '"' + joint_key(pair.first, pair.second) + "\":" + detail::num(weight);
  }
  out += "},\"E\":" + detail::num(report.E) + "}";
  return out;
}

}  // namespace everett
