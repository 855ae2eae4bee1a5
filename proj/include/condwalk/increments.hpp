#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condwalk/errors.hpp"

namespace condwalk {

// Minimal arithmetic lattice hZ + a supporting a pmf, kept alongside an
// exact integer representation: multiplying values by `scale` makes every
// support point, the span and the shift integers.  This is what lets the
// dynamic programs compute kill thresholds without floating-point ties.
struct LatticeSpec {
  double span = 0.0;   // h > 0, the coarsest common spacing
  double shift = 0.0;  // a in [0, h), support lies in hZ + a
  std::int64_t scale = 1;
  std::int64_t ispan = 0;   // span  * scale
  std::int64_t ishift = 0;  // shift * scale
};

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;    // sigma^2
  double delta = 1.0;       // tail-moment exponent: E|X|^(2+delta) is tracked
  double abs_moment = 0.0;  // E|X|^(2+delta)
  double delta1 = 1.0;      // min(1, delta)
};

struct LatticeAtom {
  double value = 0.0;
  double prob = 0.0;
  std::int64_t ivalue = 0;  // value * lattice.scale, exact
  std::int64_t offset = 0;  // (ivalue - ishift) / ispan, exact integer
};

// A zero-mean step distribution: either a finite-support lattice pmf or a
// bounded-support density with an inverse-CDF sampler.
struct IncrementLaw {
  enum class Kind { lattice, nonlattice };

  Kind kind = Kind::lattice;
  std::string name;

  // lattice-only
  std::vector<LatticeAtom> atoms;  // sorted by value, values distinct
  LatticeSpec lattice;

  // nonlattice-only
  std::function<double(double)> density;
  std::function<double(double)> sample_from_u01;  // inverse CDF

  double support_lo = 0.0;
  double support_hi = 0.0;
  MomentSummary moments;

  bool is_lattice() const { return kind == Kind::lattice; }
  double sigma() const;      // sqrt(variance)
  double max_down() const;   // -support_lo, the largest downward step
};

// Best rational approximation p/q of x with |x - p/q| <= rel_tol*max(1,|x|)
// and q <= max_den, found by continued fractions.  nullopt if none exists.
std::optional<std::pair<std::int64_t, std::int64_t>> rationalize(
    double x, double rel_tol = 1e-12, std::int64_t max_den = 1000000);

// Coarsest lattice hZ + a containing all the given (distinct) points.
// Throws NotLattice when the points have no common rational structure.
LatticeSpec detect_lattice(const std::vector<double>& values);

// Validated lattice law from (value, prob) pairs.  Duplicated values are
// merged.  Throws BadProbabilities / NonZeroMean / DegenerateLaw / NotLattice.
IncrementLaw make_lattice_law(
    const std::vector<std::pair<double, double>>& points, double delta = 1.0);

// Validated density law.  The density must integrate to 1 over
// [support_lo, support_hi] within 1e-8 and have mean 0; the sampler is
// validated against the density by first- and second-moment agreement
// within five standard errors on a fixed-seed sample.
IncrementLaw make_nonlattice_law(const std::string& name,
                                 std::function<double(double)> density,
                                 std::function<double(double)> sample_from_u01,
                                 double support_lo, double support_hi,
                                 double delta = 1.0);

// Law of the negated step.  An involution; lattice structure is recomputed
// (the shift generally changes).
IncrementLaw reverse(const IncrementLaw& law);

// Named built-ins: "ssrw" {-1,+1} fair; "trinomial" {-1:1/4, 0:1/2, +1:1/4};
// "skipfree" {-1:2/3, +2:1/3}; "uniform" = Uniform[-1,1].
// Throws ConfigError for unknown names.
IncrementLaw builtin_law(const std::string& name);

// Line-based law file: `value prob` pairs, '#' comments, blank lines skipped.
IncrementLaw load_law_file(const std::string& path);

// One step drawn by inverse CDF from a uniform u in [0,1).
double sample(const IncrementLaw& law, double u);

// P(|X| > v) for the Fuk-Nagaev-style tail term.
double prob_abs_gt(const IncrementLaw& law, double v);

// P(X < -y), the down-crossing weight used by the exit-time constants.
double prob_lt(const IncrementLaw& law, double threshold);

// gcd of the scaled support values: the state grid reachable from 0 is
// (gcd/scale)*Z.  Lattice laws only.
std::int64_t support_gcd_scaled(const IncrementLaw& law);

}  // namespace condwalk
