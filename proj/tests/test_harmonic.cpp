#include <cmath>
#include <vector>

#include "condwalk/errors.hpp"
#include "condwalk/harmonic.hpp"
#include "condwalk/increments.hpp"
#include "condwalk/kernel.hpp"
#include "doctest.h"

using condwalk::builtin_law;
using condwalk::IncrementLaw;
using condwalk::make_lattice_law;
namespace harmonic = condwalk::harmonic;
using harmonic::Direction;
using harmonic::HarmonicTable;
using harmonic::Method;

namespace {

// For laws whose single downward step equals the grid spacing the exit
// position is deterministic: x descends through its shifted grid and lands at
// frac(x) - grid.  Hence V(x) = W_n(x) + (grid - frac(x)) * P(tau > n) holds
// exactly at every finite depth.  This is the sharpest oracle available for
// the truncated dynamic program.
void check_exact_truncation_identity(const IncrementLaw& law, double x,
                                     double grid) {
  const double v = harmonic::v_skipfree(law, x);
  const double frac = x - grid * std::floor(x / grid);
  const double depth = grid - frac;
  for (int n : {1, 2, 3, 5, 8, 13, 21, 64}) {
    const harmonic::PartialValue pv = harmonic::v_partial(law, x, n);
    const double persistence = pv.bias_bound / law.max_down();
    CHECK(pv.estimate + depth * persistence == doctest::Approx(v).epsilon(1e-12));
    CHECK(pv.estimate <= v + 1e-12);
    CHECK(v <= pv.estimate + pv.bias_bound + 1e-12);
  }
}

}  // namespace

TEST_CASE("truncated harmonic values: anchors and the exact exit identity") {
  const IncrementLaw ssrw = builtin_law("ssrw");
  const harmonic::PartialValue pv = harmonic::v_partial(ssrw, 0.0, 2);
  CHECK(pv.estimate == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pv.bias_bound == doctest::Approx(0.5).epsilon(1e-15));

  check_exact_truncation_identity(ssrw, 0.0, 1.0);
  check_exact_truncation_identity(ssrw, 3.0, 1.0);
  check_exact_truncation_identity(builtin_law("trinomial"), 2.0, 1.0);
  check_exact_truncation_identity(builtin_law("skipfree"), 1.0, 1.0);
  // A start strictly between grid points is legitimate: the walk lives on a
  // shifted copy of the grid and exits at fractional - grid deterministically.
  check_exact_truncation_identity(ssrw, 0.5, 1.0);
}

TEST_CASE("truncated harmonic values: preconditions") {
  const IncrementLaw ssrw = builtin_law("ssrw");
  CHECK_THROWS_AS(harmonic::v_partial(ssrw, 0.0, 0), condwalk::DomainError);
  CHECK_THROWS_AS(harmonic::v_partial(ssrw, -0.5, 4), condwalk::OffLattice);
  // Near-miss of the grid signals rounding drift in the caller.
  CHECK_THROWS_AS(harmonic::v_partial(ssrw, 1.0 + 1e-12, 4),
                  condwalk::OffLattice);
  CHECK_THROWS_AS(harmonic::v_partial(builtin_law("uniform"), 0.0, 4),
                  condwalk::UnsupportedLaw);
}

TEST_CASE("extrapolated harmonic values hit the known limits") {
  const std::vector<int> ladder{256, 1024, 4096};

  const harmonic::Extrapolated a =
      harmonic::v_extrapolated(builtin_law("ssrw"), 0.0, ladder);
  CHECK(std::abs(a.value - 1.0) < 0.01);
  CHECK(std::abs(a.value - 1.0) <= a.error_estimate + 1e-12);

  const harmonic::Extrapolated b =
      harmonic::v_extrapolated(builtin_law("skipfree"), 3.0, ladder);
  CHECK(std::abs(b.value - 4.0) < 0.01);
  CHECK(std::abs(b.value - 4.0) <= b.error_estimate + 1e-12);

  // sigma * exp(ln 2) / sqrt(2) = 1 for the lazy +-1 law.
  const harmonic::Extrapolated c =
      harmonic::v_extrapolated(builtin_law("trinomial"), 0.0, ladder);
  CHECK(std::abs(c.value - 1.0) < 0.01);

  // The result must sit inside the rigorous bracket at the deepest rung.
  for (const char* name : {"ssrw", "trinomial", "skipfree"}) {
    const IncrementLaw law = builtin_law(name);
    for (double x : {0.0, 2.0}) {
      const harmonic::Extrapolated e = harmonic::v_extrapolated(law, x, ladder);
      const harmonic::PartialValue pv = harmonic::v_partial(law, x, 4096);
      CHECK(e.value >= pv.estimate - 1e-12);
      CHECK(e.value <= pv.estimate + pv.bias_bound + 1e-12);
    }
  }
}

TEST_CASE("extrapolation ladder preconditions") {
  const IncrementLaw ssrw = builtin_law("ssrw");
  CHECK_THROWS_AS(harmonic::v_extrapolated(ssrw, 0.0, {64}),
                  condwalk::DomainError);
  CHECK_THROWS_AS(harmonic::v_extrapolated(ssrw, 0.0, {64, 64}),
                  condwalk::DomainError);
  CHECK_THROWS_AS(harmonic::v_extrapolated(ssrw, 0.0, {0, 64}),
                  condwalk::DomainError);
}

TEST_CASE("closed-form harmonic values for single-down-step laws") {
  CHECK(harmonic::v_skipfree(builtin_law("ssrw"), 7.0) == 8.0);
  CHECK(harmonic::v_skipfree(builtin_law("skipfree"), 0.0) == 1.0);
  CHECK(harmonic::v_skipfree(builtin_law("trinomial"), 2.0) == 3.0);

  // Off-grid starts exit at fractional-part minus one grid step.
  CHECK(harmonic::v_skipfree(builtin_law("trinomial"), 2.5) == 3.0);
  CHECK(harmonic::v_skipfree(builtin_law("trinomial"), 0.25) == 1.0);
  const IncrementLaw half = make_lattice_law({{-0.5, 0.5}, {0.5, 0.5}});
  CHECK(harmonic::v_skipfree(half, 0.7) == doctest::Approx(1.0).epsilon(1e-15));

  // Starts a hair under a grid level snap up rather than losing a whole step.
  CHECK(harmonic::v_skipfree(builtin_law("ssrw"), 3.0 - 3e-13) == 4.0);

  // Value minus state equals the grid spacing on the grid itself.
  for (int y = 0; y <= 10; ++y) {
    CHECK(harmonic::v_skipfree(builtin_law("ssrw"), y) - y == 1.0);
  }
}

TEST_CASE("closed-form harmonic values: applicability") {
  CHECK_THROWS_AS(harmonic::v_skipfree(builtin_law("uniform"), 1.0),
                  condwalk::NotSkipFree);
  const IncrementLaw two_down = make_lattice_law(
      {{-2.0, 1.0 / 6}, {-1.0, 1.0 / 6}, {0.0, 1.0 / 6}, {1.0, 0.5}});
  CHECK_THROWS_AS(harmonic::v_skipfree(two_down, 1.0), condwalk::NotSkipFree);
  // Unique downward point, but it jumps over grid levels.
  const IncrementLaw skipper =
      make_lattice_law({{-2.0, 1.0 / 3}, {1.0, 2.0 / 3}});
  CHECK_THROWS_AS(harmonic::v_skipfree(skipper, 2.0), condwalk::NotSkipFree);
  CHECK_THROWS_AS(harmonic::v_skipfree(builtin_law("ssrw"), -1.0),
                  condwalk::DomainError);
}

TEST_CASE("harmonicity of the closed-form values") {
  for (const char* name : {"ssrw", "trinomial", "skipfree"}) {
    const IncrementLaw law = builtin_law(name);
    for (int x = 0; x <= 12; ++x) {
      double lhs = 0.0;
      for (const condwalk::LatticeAtom& atom : law.atoms) {
        const double y = x + atom.value;
        if (y < 0.0) continue;
        lhs += atom.prob * harmonic::v_skipfree(law, y);
      }
      CHECK(lhs == doctest::Approx(harmonic::v_skipfree(law, x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Monte Carlo harmonic values agree with the dynamic program") {
  const IncrementLaw ssrw = builtin_law("ssrw");
  const harmonic::McHarmonic mc = harmonic::v_mc(ssrw, 0.0, 64, 20000, 11);
  const harmonic::PartialValue pv = harmonic::v_partial(ssrw, 0.0, 64);
  CHECK(std::abs(mc.estimate - pv.estimate) <= 4.0 * mc.stderr_);
  CHECK(mc.stderr_ > 0.0);
  CHECK(mc.bias_bound > 0.0);

  // Same seed reproduces bit-for-bit; a different seed moves the estimate.
  const harmonic::McHarmonic again = harmonic::v_mc(ssrw, 0.0, 64, 20000, 11);
  CHECK(again.estimate == mc.estimate);
  CHECK(again.stderr_ == mc.stderr_);
  const harmonic::McHarmonic other = harmonic::v_mc(ssrw, 0.0, 64, 20000, 12);
  CHECK(other.estimate != mc.estimate);

  // Quadrupling the depth cap halves the truncation bias (survival decays
  // like n^{-1/2}).
  const harmonic::McHarmonic shallow = harmonic::v_mc(ssrw, 0.0, 64, 10000, 3);
  const harmonic::McHarmonic deep = harmonic::v_mc(ssrw, 0.0, 256, 10000, 3);
  CHECK(deep.bias_bound < 0.8 * shallow.bias_bound);

  CHECK_THROWS_AS(harmonic::v_mc(ssrw, 0.0, 64, 0, 1), condwalk::DomainError);
  CHECK_THROWS_AS(harmonic::v_mc(ssrw, -1.0, 64, 20000, 1),
                  condwalk::DomainError);
  CHECK_THROWS_AS(harmonic::v_mc(ssrw, 0.0, 0, 20000, 1),
                  condwalk::DomainError);
}

TEST_CASE("exact tables and interpolation") {
  const HarmonicTable table =
      harmonic::make_skipfree_table(builtin_law("ssrw"), Direction::forward,
                                    10.0);
  CHECK(table.size() == 11);
  CHECK(table.grid_step == 1.0);
  CHECK(table.sigma == doctest::Approx(1.0));
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(table.values[i] == static_cast<double>(i) + 1.0);
    CHECK(table.errors[i] == 0.0);
  }
  CHECK(table.value_at(3.5) == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(table.error_at(3.0) == 0.0);
  CHECK(table.covers(10.0));
  CHECK(!table.covers(10.5));
  CHECK_THROWS_AS(table.value_at(10.5), condwalk::InsufficientTable);
  CHECK_THROWS_AS(table.value_at(-0.5), condwalk::InsufficientTable);

  // Reversing the one-up-two-down law gives a two-step descent, which is not
  // skip-free, and the builder must refuse rather than tabulate nonsense.
  CHECK_THROWS_AS(harmonic::make_skipfree_table(builtin_law("skipfree"),
                                                Direction::reversed, 5.0),
                  condwalk::NotSkipFree);
  // The lazy +-1 law is symmetric, so both directions coincide.
  const HarmonicTable rev = harmonic::make_skipfree_table(
      builtin_law("trinomial"), Direction::reversed, 5.0);
  CHECK(rev.direction == Direction::reversed);
  CHECK(rev.values[3] == 4.0);
}

TEST_CASE("extrapolated tables satisfy the structural invariants") {
  const std::vector<int> ladder{256, 1024, 4096};
  const HarmonicTable table = harmonic::make_extrapolated_table(
      builtin_law("skipfree"), Direction::reversed, 6.0, ladder);
  const IncrementLaw rev = condwalk::reverse(builtin_law("skipfree"));
  CHECK(table.method == Method::extrapolated);
  CHECK(table.size() == 7);

  double max_err = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(table.values[i] >= 0.0);
    CHECK(table.errors[i] > 0.0);
    max_err = std::max(max_err, table.errors[i]);
    // The limit dominates the state itself.
    CHECK(table.values[i] >= table.grid_x(i) - table.errors[i]);
    if (i > 0) {
      CHECK(table.values[i] >=
            table.values[i - 1] - 2.0 * (table.errors[i] + table.errors[i - 1]));
    }
  }

  // Harmonicity within three error budgets at interior states.
  for (int x = 2; x <= 4; ++x) {
    double lhs = 0.0;
    for (const condwalk::LatticeAtom& atom : rev.atoms) {
      const double y = x + atom.value;
      if (y < 0.0) continue;
      lhs += atom.prob * table.value_at(y);
    }
    CHECK(std::abs(lhs - table.value_at(x)) <= 3.0 * max_err);
  }

  // On a law with a closed form the builder cross-checks itself; a passing
  // build means every entry matched the exact value within its budget.
  const HarmonicTable checked = harmonic::make_extrapolated_table(
      builtin_law("ssrw"), Direction::forward, 5.0, ladder);
  for (std::size_t i = 0; i < checked.size(); ++i) {
    CHECK(std::abs(checked.values[i] - (checked.grid_x(i) + 1.0)) <=
          checked.errors[i]);
  }
}

TEST_CASE("Monte Carlo tables carry honest half-width errors") {
  const HarmonicTable table = harmonic::make_mc_table(
      builtin_law("ssrw"), Direction::forward, 2.0, 1.0, 128, 20000, 5);
  CHECK(table.method == Method::monte_carlo);
  CHECK(table.size() == 3);
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(std::abs(table.values[i] - (table.grid_x(i) + 1.0)) <=
          table.errors[i]);
  }
}

TEST_CASE("harmonic extension to negative states") {
  const IncrementLaw ssrw = builtin_law("ssrw");
  const HarmonicTable table =
      harmonic::make_skipfree_table(ssrw, Direction::forward, 10.0);
  CHECK(harmonic::v_negative(ssrw, table, -1.0) ==
        doctest::Approx(0.5 * table.value_at(0.0)).epsilon(1e-15));
  CHECK(harmonic::v_negative(ssrw, table, -3.0) == 0.0);
  CHECK(harmonic::v_negative(ssrw, table, -0.5) ==
        doctest::Approx(0.75).epsilon(1e-12));

  const IncrementLaw skip = builtin_law("skipfree");
  const HarmonicTable skip_table =
      harmonic::make_skipfree_table(skip, Direction::forward, 10.0);
  CHECK(harmonic::v_negative(skip, skip_table, -2.0) ==
        doctest::Approx(skip_table.value_at(0.0) / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(harmonic::v_negative(ssrw, table, 0.0),
                  condwalk::DomainError);
  const HarmonicTable tiny =
      harmonic::make_skipfree_table(skip, Direction::forward, 0.0);
  CHECK_THROWS_AS(harmonic::v_negative(skip, tiny, -1.0),
                  condwalk::InsufficientTable);

  // Continuous route: against a linear synthetic table the one-step integral
  // has the closed form 0.5 * int_{1/2}^{1} (1/2 + s) ds = 0.3125.
  HarmonicTable linear;
  linear.law_id = "uniform";
  linear.sigma = builtin_law("uniform").sigma();
  linear.grid_base = 0.0;
  linear.grid_step = 0.1;
  for (int i = 0; i <= 20; ++i) {
    linear.values.push_back(1.0 + 0.1 * i);
    linear.errors.push_back(0.0);
  }
  CHECK(harmonic::v_negative(builtin_law("uniform"), linear, -0.5) ==
        doctest::Approx(0.3125).epsilon(1e-9));
}

TEST_CASE("finite-depth normalization") {
  const HarmonicTable table =
      harmonic::make_skipfree_table(builtin_law("ssrw"), Direction::forward,
                                    10.0);
  const double x = 3.0;
  const int n = 64;
  const double expected =
      table.value_at(x) * condwalk::kernel::bigL(x / std::sqrt(64.0));
  CHECK(harmonic::vn(table, x, n) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(harmonic::vn_value(4.0, x, 1.0, n) ==
        doctest::Approx(expected).epsilon(1e-15));
  CHECK_THROWS_AS(harmonic::vn(table, x, 0), condwalk::DomainError);
  CHECK_THROWS_AS(harmonic::vn(table, 11.0, n), condwalk::InsufficientTable);
}

TEST_CASE("point-evaluable harmonic sources") {
  const auto exact = harmonic::skipfree_source(builtin_law("ssrw"));
  CHECK(exact->value(3.5) == 4.0);
  CHECK(exact->error(3.5) == 0.0);
  CHECK(exact->covers(0.0));
  CHECK(!exact->covers(-1.0));
  CHECK_THROWS_AS(harmonic::skipfree_source(builtin_law("uniform")),
                  condwalk::NotSkipFree);

  const auto ladder =
      harmonic::ladder_source(builtin_law("ssrw"), {256, 1024, 4096});
  const double v0 = ladder->value(0.0);
  CHECK(std::abs(v0 - 1.0) < 0.01);
  CHECK(ladder->value(0.0) == v0);  // memoized, so bit-identical
  CHECK(ladder->error(0.0) > 0.0);

  const auto table = harmonic::table_source(harmonic::make_skipfree_table(
      builtin_law("ssrw"), Direction::forward, 5.0));
  CHECK(table->value(2.0) == 3.0);
  CHECK(!table->covers(6.0));
  CHECK_THROWS_AS(table->value(6.0), condwalk::InsufficientTable);
}
