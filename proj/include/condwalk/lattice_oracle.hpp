#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "condwalk/increments.hpp"

namespace condwalk::oracle {

// Which prefix of the walk the positivity constraint applies to.  The joint
// local law at time n conditions on the first n-1 steps (the final step is
// free and may land below zero); persistence-type quantities constrain all n.
enum class Constraint { survive_through_n_minus_1, survive_through_n };

enum class KillMode {
  none,
  below_zero,         // remove states with value < 0 (weak positivity)
  at_or_below_zero,   // remove states with value <= 0 (strict positivity)
  outside_abs,        // remove states with |value| > barrier
};

struct DpConfig {
  KillMode mode = KillMode::none;
  double barrier = 0.0;  // used by outside_abs
  int kill_through = 0;  // apply the kill rule after steps 1..kill_through
};

// Read-only window onto the post-kill state pmf after step k.  States live
// on x + k*shift + span*Z; index j of the mass vector is lattice offset
// m_lo + j.
struct StepView {
  int k = 0;
  std::int64_t m_lo = 0;
  const std::vector<double>* mass = nullptr;
  double killed = 0.0;  // mass removed by the kill rule at this step
  double x = 0.0;
  double shift = 0.0;
  double span = 1.0;

  std::size_t size() const { return mass->size(); }
  double mass_at(std::size_t j) const { return (*mass)[j]; }
  double value_of(std::size_t j) const {
    return x + k * shift +
           span * static_cast<double>(m_lo + static_cast<std::int64_t>(j));
  }
};

struct DpResult {
  std::vector<double> mass;
  std::int64_t m_lo = 0;
  double killed_total = 0.0;      // compensated sum over all steps
  double float_error_bound = 0.0; // (adds performed) * machine epsilon
};

// Exact state-enumeration dynamic program.  Kill thresholds are resolved in
// integer arithmetic (the start point is rationalized first), so a state at
// exactly zero is never misclassified; a start point with no small rational
// form falls back to comparisons with tolerance 1e-9*span.
DpResult run_killed_dp(const IncrementLaw& law, double x, int n,
                       const DpConfig& config,
                       const std::function<void(const StepView&)>& visit = {});

struct ConditionedLawTable {
  std::string law_id;
  double x = 0.0;
  int n = 0;
  Constraint constraint = Constraint::survive_through_n;
  double base_value = 0.0;  // state value of mass[0]
  double span = 1.0;
  std::vector<double> mass;
  double persistence = 0.0;  // total surviving mass
  double float_error_bound = 0.0;

  // Probability at a lattice point: 0 outside the reachable range,
  // LatticeMismatch if y does not sit on the state lattice.
  double prob_at(double y) const;
  std::vector<std::pair<double, double>> entries() const;  // nonzero only
  double total_mass() const;
};

// P(x + S_n = y, tau_x > m) for m = n-1 or n, as a full table over y.
ConditionedLawTable joint_law(const IncrementLaw& law, double x, int n,
                              Constraint constraint);

// P(tau_x > n), and the whole profile [P(tau_x > k)]_{k=0..n} in one sweep.
double persistence(const IncrementLaw& law, double x, int n);
std::vector<double> persistence_profile(const IncrementLaw& law, double x,
                                        int n);

// [P(tau_x = k)]_{k=1..n_max} with index 0 unused; entry k is the
// as-computed difference of consecutive persistences.
std::vector<double> exit_pmf(const IncrementLaw& law, double x, int n_max);

// P(x + S_n <= u*sigma*sqrt(n), tau_x > n).
double conditional_cdf(const IncrementLaw& law, double x, int n, double u);

struct UnconditionedLaw {
  double base_value = 0.0;
  double span = 1.0;
  int n = 0;
  std::vector<double> mass;
  double float_error_bound = 0.0;

  double prob_at(double z) const;
};

UnconditionedLaw unconditioned_law(const IncrementLaw& law, int n);

// sup over the step-n lattice (plus one point beyond each end) of
// |P(S_n = z) - span*phi_{sigma^2 n}(z)|.
double llt_sup_error(const IncrementLaw& law, int n);

// |P(x+S_n=y, tau_x>n-1) - P(y+S*_n=x, tau*_y>n-1)| with S* the reversed
// walk; an exact identity, so the residual is pure float noise.
double duality_residual(const IncrementLaw& law, double x, double y, int n);

struct FukNagaev {
  double exact_prob = 0.0;
  double bound = 0.0;
};

// Exact P(max_{k<=n}|S_k| > u) against the truncation bound
// 2*exp[(u/v)(1 + log(n/(uv)))] + n*P(|X_1| > v).
FukNagaev fuk_nagaev_check(const IncrementLaw& law, int n, double u, double v);
double fuk_nagaev_bound(int n, double u, double v, double tail_prob);

}  // namespace condwalk::oracle
