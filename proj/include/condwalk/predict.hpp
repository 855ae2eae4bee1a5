#pragma once

#include <string>
#include <vector>

#include "condwalk/harmonic.hpp"
#include "condwalk/increments.hpp"

namespace condwalk::predict {

// Everything the closed-form predictors need to know about a walk: the
// scale sigma, the lattice geometry (span 0 marks a density law), the
// tail-moment exponent delta, and tabulated harmonic functions of the walk
// (V) and of its reversal (Vcheck).
struct PredictorInputs {
  double sigma = 1.0;
  double hbar = 0.0;   // lattice span; 0 for density laws
  double shift = 0.0;  // lattice offset in [0, hbar); 0 for density laws
  harmonic::HarmonicTable V;
  harmonic::HarmonicTable Vcheck;
  double delta = 1.0;
};

// Bundle a law's geometry with its two harmonic tables.  DomainError if
// either table is empty.
PredictorInputs make_inputs(const IncrementLaw& law, harmonic::HarmonicTable v,
                            harmonic::HarmonicTable vcheck);

// P(tau_x > n) ~ V_n(x) / (sigma*sqrt(n)); zero for x < 0.
double persistence_pred(const PredictorInputs& in, double x, int n);

// P(tau_x > n, x+S_n <= u*sigma*sqrt(n)); u is in units of sigma*sqrt(n).
// DomainError if u < 0.
double cdf_pred(const PredictorInputs& in, double x, double u, int n);

// Point probability P(x+S_n = y, tau_x > n-1) through the two-side kernel:
// hbar * V_n(x) * Vcheck_n(y) * p(X, Y) / (sigma^3 n^{3/2}).  UnsupportedLaw
// for density laws; LatticeMismatch when y - x is not in hbar*Z + n*shift
// (the true probability is then structurally zero, not small).
double local_pred(const PredictorInputs& in, double x, double y, int n);

// The same point probability through the one-side kernel, first-order in n:
// hbar * V_n(x) * ell(X, Y) / (sigma^2 n).  Same preconditions.
double caravenna_pred(const PredictorInputs& in, double x, double y, int n);

// Down-crossing constant of the exit-time local limit.  For a lattice walk
// the harmonic function between state-grid nodes is the step function
// taking the value at the highest node below, and that is how Vcheck is
// read here (interpolating instead would inflate every off-node residue).
//
//   varkappa_u(u)    = sum_{k>=0} Vcheck(hbar*k + u) P(X < -hbar*k - u),
//                      for u in [0, hbar);
//   varkappa_n(x, n) = the same sum over the reachable coset, which equals
//                      varkappa_u({n*shift + x}_hbar) exactly.
double varkappa_u(const PredictorInputs& in, const IncrementLaw& law,
                  double u);
double varkappa_n(const PredictorInputs& in, const IncrementLaw& law, double x,
                  int n);

// Canonical representative of `value` modulo span in [0, span).
double lattice_residue(double value, double span);

// P(tau_x = n+1) ~ hbar * phi(X) * 2 V(x) varkappa_n(x) / (sigma^3 n^{3/2}).
double exit_pred_lattice(const PredictorInputs& in, const IncrementLaw& law,
                         double x, int n);

// P(x+S_n in [y, y+v), tau_x > n-1) for density laws:
// V_n(x)/(sigma^3 n^{3/2}) * int_y^{y+v} Vcheck_n(z) p(X, Z) dz by composite
// Simpson on nodes at most 0.01 apart.  The uncertainty propagates the
// tabulated errors of both harmonic tables through the same quadrature.
// TableCoverage if [y, y+v] leaves the Vcheck table.
struct IntervalPrediction {
  double value = 0.0;
  double uncertainty = 0.0;
};
IntervalPrediction interval_pred_with_uncertainty(const PredictorInputs& in,
                                                  double x, double y, double v,
                                                  int n);
double interval_pred(const PredictorInputs& in, double x, double y, double v,
                     int n);

// kappa = int_{R_-} Vcheck(y) dy for density laws, computed two independent
// ways: extending Vcheck to negative states through one step of the
// reversed walk, and integrating Vcheck against the reversed upper tail on
// the positive side.  KappaDisagreement if the two integrals differ by more
// than 2%; the returned value is their mean.
struct KappaForms {
  double from_negative_side = 0.0;
  double from_positive_tail = 0.0;
};
KappaForms kappa_forms(const PredictorInputs& in, const IncrementLaw& law);
double kappa_nonlattice(const PredictorInputs& in, const IncrementLaw& law);

// P(tau_x = n) ~ phi(X) * 2 V(x) kappa / (sigma^3 n^{3/2}) for density laws.
double exit_pred_nonlattice(const PredictorInputs& in, const IncrementLaw& law,
                            double x, int n);

// Envelope for the point-probability error: (n^{-d/8} + V_n(x)) *
// (n^{-d/8} + Vcheck_n(y)) * n^{-d/(8(3+d))} * log n / n^{3/2} with
// d = delta.  The unknowable constant factor is omitted, so envelopes are
// for normalized-error reporting, never for pass/fail thresholds.
struct ErrorEnvelope {
  int n = 0;
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};
ErrorEnvelope error_envelope(const PredictorInputs& in, double x, double y,
                             int n);

// R_{n,d}(x) = n^{-d/4} + V_n(x) n^{-d/(4(3+d))} log n, the persistence and
// cdf rate.
double rate_Rn(const PredictorInputs& in, double x, int n);

// Envelope mates of the remaining predictors (same constant-free reading).
double caravenna_envelope(const PredictorInputs& in, double x, int n);
double exit_envelope(const PredictorInputs& in, double x, int n);
double interval_envelope(const PredictorInputs& in, double x, double y,
                         double v, int n);

// All asymptotic regimes containing the point, with the vanishing and
// diverging tuning sequences pinned to n^{-1/4} and n^{1/4} and the
// moderate-deviation band to sigma*sqrt(2*q*n*log n).  Lattice scenarios
// a1..a7 when hbar_or_0 > 0, interval scenarios b1..b3 (of width v)
// otherwise; Q_member marks kernel superlevel membership p >= n^{-q}.
// Advisory metadata only: no predictor branches on these tags.
std::vector<std::string> classify_regime(double x, double y, int n, double q,
                                         double sigma, double hbar_or_0,
                                         double v = 0.0);

}  // namespace condwalk::predict
