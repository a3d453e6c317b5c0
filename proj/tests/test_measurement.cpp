#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "bridge.hpp"
#include "everett/everett.hpp"
#include "oracle.hpp"

using namespace everett;

namespace {
constexpr double pi = std::numbers::pi;
const double root_half = 1.0 / std::sqrt(2.0);

MeasurementOp lab1_op(double theta) {
  return {electron(1), apparatus(1), MeasurementSetting(theta)};
}
MeasurementOp lab2_op(double theta) {
  return {electron(2), apparatus(2), MeasurementSetting(theta)};
}

// Single electron + single apparatus, one basis term.
StateVector factor_state(BasisLabel spin, BasisLabel mark, double electron_angle = 0.0) {
  std::vector<Register> regs{{electron(1), electron_angle}, {apparatus(1)}};
  if (is_recorded_label(mark)) regs[1].setting_used = electron_angle;
  std::map<BasisState, Amplitude> terms;
  terms[BasisState{{spin, mark}}] = {1.0, 0.0};
  return StateVector::from_terms(std::move(regs), std::move(terms));
}
}  // namespace

TEST_CASE("measuring a z-up electron records up with amplitude one") {
  StateVector in = tensor(make_electron(1, MeasurementSetting(0.0), Outcome::up),
                          make_apparatus_ready(1));
  StateVector out = apply_measurement(in, lab1_op(0.0));
  REQUIRE(out.amplitudes().size() == 1);
  const auto& [basis, amp] = *out.amplitudes().begin();
  REQUIRE(basis.labels == std::vector<BasisLabel>{BasisLabel::up, BasisLabel::recorded_up});
  REQUIRE(std::abs(amp - Amplitude{1.0, 0.0}) < 1e-15);
  REQUIRE(out.registers()[1].setting_used.has_value());
  REQUIRE(*out.registers()[1].setting_used == 0.0);
}

TEST_CASE("one-sided measurement of the singlet entangles the apparatus") {
  StateVector in = tensor(make_singlet(), make_apparatus_ready(1));
  StateVector out = apply_measurement(in, lab1_op(0.0));
  REQUIRE(out.amplitudes().size() == 2);
  Amplitude a = out.amplitudes().at(
      BasisState{{BasisLabel::up, BasisLabel::down, BasisLabel::recorded_up}});
  Amplitude b = out.amplitudes().at(
      BasisState{{BasisLabel::down, BasisLabel::up, BasisLabel::recorded_down}});
  REQUIRE(std::abs(a - Amplitude{root_half, 0.0}) < 1e-12);
  REQUIRE(std::abs(b + Amplitude{root_half, 0.0}) < 1e-12);

  // Same amplitudes as the dense brute-force route.
  REQUIRE(bridge::max_abs_diff(bridge::to_dense(out),
                               oracle::apply(oracle::one_lab_unitary(0.0),
                                             oracle::singlet_one_ready())) < 1e-12);
}

TEST_CASE("measuring along the electron's own axis leaves it definite") {
  StateVector in = tensor(make_electron(1, MeasurementSetting(pi / 2), Outcome::up),
                          make_apparatus_ready(1));
  StateVector out = apply_measurement(in, lab1_op(pi / 2));
  REQUIRE(out.amplitudes().size() == 1);
  const auto& [basis, amp] = *out.amplitudes().begin();
  REQUIRE(basis.labels ==
          std::vector<BasisLabel>{BasisLabel::up, BasisLabel::recorded_up});
  REQUIRE(std::abs(std::abs(amp) - 1.0) < 1e-12);
}

TEST_CASE("both labs at theta zero leave two anticorrelated records") {
  StateVector s = two_lab_state(MeasurementSetting(0.0), MeasurementSetting(0.0));
  REQUIRE(s.amplitudes().size() == 2);
  Amplitude a = s.amplitudes().at(BasisState{{BasisLabel::up, BasisLabel::down,
                                              BasisLabel::recorded_up,
                                              BasisLabel::recorded_down}});
  Amplitude b = s.amplitudes().at(BasisState{{BasisLabel::down, BasisLabel::up,
                                              BasisLabel::recorded_down,
                                              BasisLabel::recorded_up}});
  REQUIRE(std::abs(a - Amplitude{root_half, 0.0}) < 1e-12);
  REQUIRE(std::abs(b + Amplitude{root_half, 0.0}) < 1e-12);
}

TEST_CASE("both labs horizontal keep perfect anticorrelation") {
  StateVector s = two_lab_state(MeasurementSetting(pi / 2), MeasurementSetting(pi / 2));
  REQUIRE(s.amplitudes().size() == 2);
  for (const auto& [basis, amp] : s.amplitudes()) {
    REQUIRE(std::abs(std::norm(amp) - 0.5) < 1e-12);
    REQUIRE(basis.labels[2] != basis.labels[3]);  // opposite records
  }
}

TEST_CASE("crossed settings split into four equal-weight terms") {
  StateVector s = two_lab_state(MeasurementSetting(0.0), MeasurementSetting(pi / 2));
  REQUIRE(s.amplitudes().size() == 4);
  for (const auto& [basis, amp] : s.amplitudes())
    REQUIRE(std::abs(std::norm(amp) - 0.25) < 1e-12);

  // Dense comparison against U2 U1 applied to singlet x ready x ready.
  oracle::Vec expect = oracle::apply(
      oracle::mul(oracle::lab_unitary(pi / 2, 2), oracle::lab_unitary(0.0, 1)),
      oracle::singlet_ready_ready());
  REQUIRE(bridge::max_abs_diff(bridge::to_dense(s), expect) < 1e-12);
}

TEST_CASE("measurement rejects bad targets") {
  StateVector in = tensor(make_singlet(), make_apparatus_ready(1));
  // apparatus not in state
  REQUIRE_THROWS_AS(apply_measurement(in, lab2_op(0.0)), std::invalid_argument);
  // electron and apparatus swapped
  REQUIRE_THROWS_AS(
      apply_measurement(in, MeasurementOp{apparatus(1), electron(1),
                                          MeasurementSetting(0.0)}),
      std::invalid_argument);
  // apparatus already used
  StateVector once = apply_measurement(in, lab1_op(0.0));
  REQUIRE_THROWS_AS(apply_measurement(once, lab1_op(0.0)), std::invalid_argument);
  // same apparatus for both labs
  StateVector both = tensor(in, make_apparatus_ready(2));
  REQUIRE_THROWS_AS(
      apply_both_labs(both, lab1_op(0.0),
                      MeasurementOp{electron(2), apparatus(1), MeasurementSetting(0.0)}),
      std::invalid_argument);
}

TEST_CASE("interaction images of the factor basis stay orthonormal") {
  const BasisLabel spins[2] = {BasisLabel::up, BasisLabel::down};
  const BasisLabel marks[3] = {BasisLabel::ready, BasisLabel::recorded_up,
                               BasisLabel::recorded_down};
  for (double theta : {0.0, 0.4, pi / 2, 2.8}) {
    std::vector<StateVector> images;
    for (auto spin : spins)
      for (auto mark : marks)
        images.push_back(
            apply_interaction(factor_state(spin, mark, theta), lab1_op(theta)));
    for (std::size_t i = 0; i < images.size(); ++i)
      for (std::size_t j = 0; j < images.size(); ++j) {
        double expect = i == j ? 1.0 : 0.0;
        REQUIRE(std::abs(std::abs(inner_product(images[i], images[j])) - expect) <
                1e-12);
      }
  }
}

TEST_CASE("interaction cycles marks and returns after three applications") {
  StateVector in = tensor(make_singlet(), make_apparatus_ready(1));
  MeasurementOp op = lab1_op(0.7);
  StateVector once = apply_measurement(in, op);
  StateVector twice = apply_interaction(once, op);
  StateVector thrice = apply_interaction(twice, op);

  // After the second application the records are swapped, not cleared.
  for (const auto& [basis, amp] : twice.amplitudes())
    REQUIRE(is_recorded_label(basis.labels[2]));
  REQUIRE_FALSE(approx_equal(once, twice, 1e-12));

  // The third application completes the cycle back to the ready apparatus.
  StateVector expected = rebase(in, electron(1), MeasurementSetting(0.7));
  REQUIRE(approx_equal(thrice, expected, 1e-12));
  REQUIRE_FALSE(thrice.registers()[2].setting_used.has_value());
}

TEST_CASE("measurement is linear on superpositions") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(0.0, pi - 1e-9);
  std::uniform_real_distribution<double> phase(0.0, 2 * pi);
  for (int trial = 0; trial < 50; ++trial) {
    double theta = angle(rng);
    double mix = angle(rng) / 2.0;
    Amplitude alpha = std::polar(std::cos(mix), phase(rng));
    Amplitude beta = std::polar(std::sin(mix), phase(rng));
    if (std::norm(alpha) < 1e-6 || std::norm(beta) < 1e-6) continue;

    StateVector a = factor_state(BasisLabel::up, BasisLabel::ready);
    StateVector b = factor_state(BasisLabel::down, BasisLabel::ready);
    std::vector<Register> regs = a.registers();
    std::map<BasisState, Amplitude> terms;
    terms[a.amplitudes().begin()->first] = alpha;
    terms[b.amplitudes().begin()->first] = beta;
    StateVector combo = StateVector::from_terms(regs, terms);

    StateVector out_combo = apply_measurement(combo, lab1_op(theta));
    StateVector out_a = apply_measurement(a, lab1_op(theta));
    StateVector out_b = apply_measurement(b, lab1_op(theta));

    std::map<BasisState, Amplitude> expect;
    for (const auto& [basis, amp] : out_a.amplitudes()) expect[basis] += alpha * amp;
    for (const auto& [basis, amp] : out_b.amplitudes()) expect[basis] += beta * amp;
    for (const auto& [basis, amp] : out_combo.amplitudes()) expect[basis] -= amp;
    for (const auto& [basis, residual] : expect) REQUIRE(std::abs(residual) < 1e-12);
  }
}

TEST_CASE("measurement acts as identity on the distant subsystems") {
  StateVector in = tensor(tensor(make_singlet(), make_apparatus_ready(1)),
                          make_apparatus_ready(2));
  // Registers: e1 e2 a1 a2; the distant half is positions 1 and 3.
  oracle::Mat before = bridge::reduced_density(in, {1, 3});
  for (double theta : {0.0, 0.9, pi / 2, 2.2}) {
    StateVector out = apply_measurement(in, lab1_op(theta));
    oracle::Mat after = bridge::reduced_density(out, {1, 3});
    REQUIRE(bridge::max_abs_diff(before, after) < 1e-12);
  }
}

TEST_CASE("the two labs' measurements commute") {
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double t1 = i * pi / 8.0, t2 = j * pi / 8.0;
      StateVector in = tensor(tensor(make_singlet(), make_apparatus_ready(1)),
                              make_apparatus_ready(2));
      StateVector order_a = apply_both_labs(in, lab1_op(t1), lab2_op(t2));
      StateVector order_b = apply_both_labs(in, lab2_op(t2), lab1_op(t1));
      REQUIRE(approx_equal(order_a, order_b, 1e-12));
    }
}

TEST_CASE("measurement preserves the norm") {
  for (double theta : {0.0, 0.5, 1.3, 2.7}) {
    StateVector in = tensor(make_singlet(), make_apparatus_ready(1));
    StateVector out = apply_measurement(in, lab1_op(theta));
    REQUIRE(std::abs(out.squared_norm() - 1.0) < 1e-12);
  }
}
