#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "condwalk/increments.hpp"

namespace condwalk::renewal {

struct SpitzerConstants {
  double c_plus = 0.0;
  double c_minus = 0.0;
  double c_zero = 0.0;
  int terms_used = 0;
  double tail_estimate = 0.0;   // largest fitted |remainder| among the three
  double fitted_exponent = 0.0; // block-ratio decay estimate (theory: -3/2)
};

// Partial sums of (1/k)(P(S_k>0) - 1/2), (1/k)(P(S_k<0) - 1/2) and
// (1/k) P(S_k=0) over k <= K, each completed by an amplitude-only
// alpha*k^{-3/2} tail fitted on the last octave of terms.
SpitzerConstants spitzer_constants(const IncrementLaw& law, int K);

struct RenewalSeries {
  std::vector<double> values;
  std::vector<double> errors;
  double fitted_exponent = 0.0;
};

// Renewal functions on the state grid x_i = i * grid_step.  Every series is
// 1{x>=0} plus the sum over epochs of the constrained mass ending at or
// below x; the constraint and walk direction distinguish them:
//   u_d      strictly positive forward walk   (U_D, equal to the reversed
//            walk's weak variant by the mirrored window)
//   u_d_rev  strictly positive reversed walk  (the paper-standard U_K)
//   v_d      weakly nonnegative reversed walk (V_D)
//   v_d_rev  weakly nonnegative forward walk
struct RenewalTable {
  std::string law_id;
  double grid_step = 1.0;
  int terms_used = 0;
  RenewalSeries u_d;
  RenewalSeries u_d_rev;
  RenewalSeries v_d;
  RenewalSeries v_d_rev;

  std::size_t size() const { return u_d.values.size(); }
  double grid_x(std::size_t i) const {
    return grid_step * static_cast<double>(i);
  }
};

RenewalTable renewal_functions(const IncrementLaw& law, double x_max, int K);

struct IdentityRow {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct IdentityReport {
  std::vector<IdentityRow> rows;
  bool all_pass = false;
};

// Evaluates every identity tying the Spitzer constants and renewal functions
// to the harmonic functions: the zero sum of the constants, the value of V
// and of the reversed V at zero, the per-state ratio identities, and the
// product identities on a small state square.  Failures are carried in the
// report, never thrown.
IdentityReport identity_report(const IncrementLaw& law, double x_max = 5.0,
                               int K = 20000);

}  // namespace condwalk::renewal
