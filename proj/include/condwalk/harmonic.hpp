#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "condwalk/increments.hpp"

namespace condwalk::harmonic {

enum class Direction { forward, reversed };
enum class Method { skipfree_exact, extrapolated, monte_carlo };

struct PartialValue {
  double estimate = 0.0;    // W_n(x) = E(x + S_n; tau_x > n)
  double bias_bound = 0.0;  // V(x) - W_n(x) lies in [0, bias_bound]
};

struct Extrapolated {
  double value = 0.0;
  double error_estimate = 0.0;
};

struct McHarmonic {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double bias_bound = 0.0;
};

// Truncated-martingale value: exact DP expectation of the surviving walk.
// The limit of these is the harmonic function; the gap to the limit is the
// (negative) expected overshoot on later exits, bounded by the largest
// downward step times the survival probability.
PartialValue v_partial(const IncrementLaw& law, double x, int n);

// Richardson acceleration along a ladder of n values, assuming the
// W_n = V - c/sqrt(n) approach; result is clamped into the rigorous
// v_partial bracket at the deepest rung.
Extrapolated v_extrapolated(const IncrementLaw& law, double x,
                            const std::vector<int>& ladder);

// Closed form for walks that cannot jump below zero without touching every
// grid level: the overshoot is deterministic.  Defined for every real
// x >= 0 (the exit position is x minus one grid step past the last
// nonnegative grid point below x).
double v_skipfree(const IncrementLaw& law, double x);

// Monte Carlo value for laws without an exact oracle.
McHarmonic v_mc(const IncrementLaw& law, double x, int n_cap,
                std::int64_t paths, std::uint64_t seed);

struct HarmonicTable {
  std::string law_id;
  Direction direction = Direction::forward;
  Method method = Method::skipfree_exact;
  double sigma = 1.0;      // of the step law (same in both directions)
  double grid_base = 0.0;
  double grid_step = 1.0;
  std::vector<double> values;
  std::vector<double> errors;

  std::size_t size() const { return values.size(); }
  double grid_x(std::size_t i) const {
    return grid_base + grid_step * static_cast<double>(i);
  }
  bool covers(double x) const;
  double value_at(double x) const;  // linear interpolation; InsufficientTable
  double error_at(double x) const;
};

// Harmonic extension to negative states through one step of the walk;
// 0 when no single step reaches the half line.
double v_negative(const IncrementLaw& law, const HarmonicTable& table,
                  double x);

// V_n(x) = V(x) * L(x/(sigma*sqrt(n))), the finite-n normalization.
double vn(const HarmonicTable& table, double x, int n);
double vn_value(double v_at_x, double x, double sigma, int n);

HarmonicTable make_skipfree_table(const IncrementLaw& law, Direction dir,
                                  double xmax);
HarmonicTable make_extrapolated_table(const IncrementLaw& law, Direction dir,
                                      double xmax,
                                      const std::vector<int>& ladder);
HarmonicTable make_mc_table(const IncrementLaw& law, Direction dir,
                            double xmax, double grid_step, int n_cap,
                            std::int64_t paths, std::uint64_t seed);

// Point-evaluable view used by the predictors: exact closed form, memoized
// ladder extrapolation at arbitrary real points, or table interpolation.
class HarmonicSource {
 public:
  virtual ~HarmonicSource() = default;
  virtual double value(double x) const = 0;
  virtual double error(double x) const = 0;
  virtual bool covers(double x) const = 0;
};

std::shared_ptr<HarmonicSource> skipfree_source(IncrementLaw law);
std::shared_ptr<HarmonicSource> ladder_source(IncrementLaw law,
                                              std::vector<int> ladder);
std::shared_ptr<HarmonicSource> table_source(HarmonicTable table);

}  // namespace condwalk::harmonic
