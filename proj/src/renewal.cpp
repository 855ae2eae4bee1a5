#include "condwalk/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <utility>

#include "condwalk/errors.hpp"
#include "condwalk/harmonic.hpp"

namespace condwalk::renewal {

namespace {

constexpr double kPrune = 1e-22;

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double term) {
    const double y = term - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double total() const { return sum; }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  // b > 0 throughout this file
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return a > 0 ? (a + b - 1) / b : -((-a) / b);
}

// Unconditioned or barrier-killed mass vector advanced one convolution per
// epoch, with edge cells below kPrune dropped so the working width stays at
// the central-limit scale instead of the full support range.
struct MassWalk {
  std::vector<double> f{1.0};
  std::vector<double> scratch;
  std::int64_t m_lo = 0;

  void step(const IncrementLaw& law) {
    std::int64_t off_min = law.atoms.front().offset;
    std::int64_t off_max = off_min;
    for (const LatticeAtom& atom : law.atoms) {
      off_min = std::min(off_min, atom.offset);
      off_max = std::max(off_max, atom.offset);
    }
    scratch.assign(f.size() + static_cast<std::size_t>(off_max - off_min),
                   0.0);
    for (const LatticeAtom& atom : law.atoms) {
      const std::size_t shift =
          static_cast<std::size_t>(atom.offset - off_min);
      for (std::size_t j = 0; j < f.size(); ++j) {
        scratch[j + shift] += atom.prob * f[j];
      }
    }
    f.swap(scratch);
    m_lo += off_min;
    prune();
  }

  void zero_below(std::int64_t m_alive_lo) {
    const std::int64_t j_lo = m_alive_lo - m_lo;
    const std::size_t stop =
        static_cast<std::size_t>(std::clamp<std::int64_t>(
            j_lo, 0, static_cast<std::int64_t>(f.size())));
    std::fill(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(stop), 0.0);
    prune();
  }

  void prune() {
    std::size_t a = 0;
    std::size_t b = f.size();
    while (a < b && f[a] < kPrune) ++a;
    while (b > a && f[b - 1] < kPrune) --b;
    if (b < f.size()) f.resize(b);
    if (a > 0) {
      f.erase(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(a));
      m_lo += static_cast<std::int64_t>(a);
    }
  }
};

// Amplitude-only k^{-3/2} tail from the last two octaves of partial terms:
// the older octave certifies the decay exponent, the newer one fits the
// amplitude, and the analytic remainder of sum k^{-3/2} closes the series.
struct TailFit {
  double tail = 0.0;
  double exponent = 0.0;
  bool has_signal = false;
};

TailFit fit_tail(double s1, double s2, double d2, int K) {
  TailFit out;
  if (std::abs(s2) < 1e-300) return out;  // nothing left to extrapolate
  out.has_signal = true;
  if (std::abs(s1) < 1e-300) {
    throw SlowDecay("term decay cannot be certified: older octave is empty");
  }
  out.exponent = std::log2(std::abs(s2) / std::abs(s1)) - 1.0;
  out.tail = (s2 / d2) * 2.0 / std::sqrt(static_cast<double>(K) + 0.5);
  return out;
}

void gate_exponent(double exponent) {
  if (exponent > -1.2) {
    throw SlowDecay("fitted term exponent " + std::to_string(exponent) +
                    " is above -1.2");
  }
}

void check_lattice_terms(const IncrementLaw& law, int K) {
  if (!law.is_lattice()) {
    throw UnsupportedLaw("series terms need the exact lattice walk");
  }
  if (K < 1000) {
    throw DomainError("term count must be at least 1000");
  }
}

}  // namespace

SpitzerConstants spitzer_constants(const IncrementLaw& law, int K) {
  check_lattice_terms(law, K);
  const LatticeSpec& spec = law.lattice;
  const int k_quarter = K / 4;
  const int k_half = K / 2;

  KahanSum part_plus, part_minus, part_zero;
  double s1[3] = {0.0, 0.0, 0.0};
  double s2[3] = {0.0, 0.0, 0.0};
  double d2 = 0.0;

  MassWalk walk;
  for (int k = 1; k <= K; ++k) {
    walk.step(law);
    const std::vector<double>& f = walk.f;
    const std::int64_t size = static_cast<std::int64_t>(f.size());
    const std::int64_t t = -static_cast<std::int64_t>(k) * spec.ishift;

    // The three sign masses are summed independently (positive part from the
    // top, negative part from the bottom, zero cell read directly) so that no
    // mass is inferred by complementing another sum.
    const std::int64_t j_pos = floor_div(t, spec.ispan) + 1 - walk.m_lo;
    long double above = 0.0L;
    for (std::int64_t j = size - 1; j >= std::max<std::int64_t>(j_pos, 0);
         --j) {
      above += f[static_cast<std::size_t>(j)];
    }
    const std::int64_t j_neg = ceil_div(t, spec.ispan) - 1 - walk.m_lo;
    long double below = 0.0L;
    for (std::int64_t j = 0; j <= std::min(j_neg, size - 1); ++j) {
      below += f[static_cast<std::size_t>(j)];
    }
    double at_zero = 0.0;
    if (t % spec.ispan == 0) {
      const std::int64_t j_zero = t / spec.ispan - walk.m_lo;
      if (j_zero >= 0 && j_zero < size) {
        at_zero = f[static_cast<std::size_t>(j_zero)];
      }
    }

    const double inv_k = 1.0 / static_cast<double>(k);
    const double term[3] = {(static_cast<double>(above) - 0.5) * inv_k,
                            (static_cast<double>(below) - 0.5) * inv_k,
                            at_zero * inv_k};
    part_plus.add(term[0]);
    part_minus.add(term[1]);
    part_zero.add(term[2]);
    if (k > k_quarter && k <= k_half) {
      for (int s = 0; s < 3; ++s) s1[s] += term[s];
    } else if (k > k_half) {
      for (int s = 0; s < 3; ++s) s2[s] += term[s];
      d2 += std::pow(static_cast<double>(k), -1.5);
    }
  }

  TailFit fits[3];
  int strongest = 0;
  for (int s = 0; s < 3; ++s) {
    fits[s] = fit_tail(s1[s], s2[s], d2, K);
    if (std::abs(s2[s]) > std::abs(s2[strongest])) strongest = s;
  }
  if (fits[strongest].has_signal) gate_exponent(fits[strongest].exponent);

  SpitzerConstants out;
  out.c_plus = part_plus.total() + fits[0].tail;
  out.c_minus = part_minus.total() + fits[1].tail;
  out.c_zero = part_zero.total() + fits[2].tail;
  out.terms_used = K;
  out.tail_estimate = std::max({std::abs(fits[0].tail), std::abs(fits[1].tail),
                                std::abs(fits[2].tail)});
  out.fitted_exponent = fits[strongest].exponent;
  return out;
}

namespace {

RenewalSeries run_series(const IncrementLaw& law, bool strict, double x_max,
                         int K) {
  const LatticeSpec& spec = law.lattice;
  const std::int64_t grid_scaled = support_gcd_scaled(law);
  const double grid = static_cast<double>(grid_scaled) / spec.scale;
  const std::size_t n_states =
      static_cast<std::size_t>(std::floor(x_max / grid + 1e-9)) + 1;
  const int k_quarter = K / 4;
  const int k_half = K / 2;

  std::vector<KahanSum> partial(n_states);
  for (KahanSum& p : partial) p.add(1.0);  // the k = 0 indicator term
  std::vector<double> s1(n_states, 0.0), s2(n_states, 0.0);
  double d2 = 0.0;

  MassWalk walk;
  for (int k = 1; k <= K && !walk.f.empty(); ++k) {
    walk.step(law);
    // Scaled walk value at offset m is k*ishift + ispan*m, so alive/threshold
    // cuts are exact integer comparisons against t = -k*ishift.
    const std::int64_t t = -static_cast<std::int64_t>(k) * spec.ishift;
    const std::int64_t m_alive =
        strict ? floor_div(t, spec.ispan) + 1 : ceil_div(t, spec.ispan);
    walk.zero_below(m_alive);
    if (walk.f.empty()) break;

    const std::vector<double>& f = walk.f;
    const std::int64_t size = static_cast<std::int64_t>(f.size());
    long double cum = 0.0L;
    std::int64_t jptr = -1;
    const bool in_block1 = k > k_quarter && k <= k_half;
    const bool in_block2 = k > k_half;
    for (std::size_t i = 0; i < n_states; ++i) {
      const std::int64_t threshold =
          static_cast<std::int64_t>(i) * grid_scaled;
      // ends at or below x_i  <=>  m <= (threshold + t) / ispan
      const std::int64_t j_hi = std::min(
          floor_div(threshold + t, spec.ispan) - walk.m_lo, size - 1);
      while (jptr < j_hi) {
        ++jptr;
        cum += f[static_cast<std::size_t>(jptr)];
      }
      const double used = j_hi < 0 ? 0.0 : static_cast<double>(cum);
      partial[i].add(used);
      if (in_block1) s1[i] += used;
      if (in_block2) s2[i] += used;
    }
    if (in_block2) d2 += std::pow(static_cast<double>(k), -1.5);
  }

  RenewalSeries out;
  out.values.resize(n_states);
  out.errors.resize(n_states);
  std::size_t strongest = 0;
  TailFit strongest_fit;
  for (std::size_t i = 0; i < n_states; ++i) {
    const TailFit fit = fit_tail(s1[i], s2[i], d2, K);
    out.values[i] = partial[i].total() + fit.tail;
    out.errors[i] = 0.5 * std::abs(fit.tail) + 1e-12;
    if (std::abs(s2[i]) >= std::abs(s2[strongest])) {
      strongest = i;
      strongest_fit = fit;
    }
  }
  if (strongest_fit.has_signal) gate_exponent(strongest_fit.exponent);
  out.fitted_exponent = strongest_fit.exponent;
  return out;
}

}  // namespace

RenewalTable renewal_functions(const IncrementLaw& law, double x_max, int K) {
  check_lattice_terms(law, K);
  if (x_max < 0.0) throw DomainError("x_max must be nonnegative");
  const IncrementLaw rev = reverse(law);
  RenewalTable table;
  table.law_id = law.name;
  table.grid_step =
      static_cast<double>(support_gcd_scaled(law)) / law.lattice.scale;
  table.terms_used = K;
  table.u_d = run_series(law, /*strict=*/true, x_max, K);
  table.u_d_rev = run_series(rev, /*strict=*/true, x_max, K);
  table.v_d = run_series(rev, /*strict=*/false, x_max, K);
  table.v_d_rev = run_series(law, /*strict=*/false, x_max, K);
  return table;
}

namespace {

std::shared_ptr<harmonic::HarmonicSource> best_source(
    const IncrementLaw& law) {
  try {
    return harmonic::skipfree_source(law);
  } catch (const NotSkipFree&) {
    return harmonic::ladder_source(law, {256, 1024, 4096});
  }
}

void add_row(IdentityReport& report, std::string name, double lhs, double rhs,
             double tol) {
  IdentityRow row;
  row.name = std::move(name);
  row.lhs = lhs;
  row.rhs = rhs;
  row.residual = std::abs(lhs - rhs);
  row.tol = tol;
  row.pass = row.residual <= tol;
  report.rows.push_back(std::move(row));
}

std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace

IdentityReport identity_report(const IncrementLaw& law, double x_max, int K) {
  const SpitzerConstants sc = spitzer_constants(law, K);
  const RenewalTable rt = renewal_functions(law, x_max, K);
  const IncrementLaw rev = reverse(law);
  const auto v_fwd = best_source(law);
  const auto v_rev = best_source(rev);

  const double sigma2 = law.moments.variance;
  const double sigma = std::sqrt(sigma2);
  // Sensitivity of exp(+-c_zero) to the remaining series truncation.
  const double c0_slack = std::expm1(3.0 * sc.tail_estimate);

  IdentityReport report;
  add_row(report, "c_plus+c_minus+c_zero = 0",
          sc.c_plus + sc.c_minus + sc.c_zero, 0.0,
          3.0 * sc.tail_estimate + 1e-10);

  {
    const double rhs = sigma * std::exp(-sc.c_minus) / std::sqrt(2.0);
    add_row(report, "V(0) = sigma*exp(-c_minus)/sqrt(2)", v_fwd->value(0.0),
            rhs, v_fwd->error(0.0) + rhs * c0_slack + 1e-9);
    const double rhs_rev = sigma * std::exp(-sc.c_plus) / std::sqrt(2.0);
    add_row(report, "Vcheck(0) = sigma*exp(-c_plus)/sqrt(2)",
            v_rev->value(0.0), rhs_rev,
            v_rev->error(0.0) + rhs_rev * c0_slack + 1e-9);
  }

  add_row(report, "U_D(0) = 1", rt.u_d.values[0], 1.0,
          rt.u_d.errors[0] + 1e-12);
  add_row(report, "U_D_rev(0) = 1", rt.u_d_rev.values[0], 1.0,
          rt.u_d_rev.errors[0] + 1e-12);

  const double v0 = v_fwd->value(0.0);
  const double e0 = v_fwd->error(0.0);
  const double vc0 = v_rev->value(0.0);
  const double ec0 = v_rev->error(0.0);
  const std::size_t i_max = std::min<std::size_t>(rt.size() - 1, 5);

  for (std::size_t i = 0; i <= i_max; ++i) {
    const double x = rt.grid_x(i);
    const std::string at = " @ x=" + short_num(x);

    const double ratio_rev = v_rev->value(x) / vc0;
    const double ratio_rev_err =
        (v_rev->error(x) + std::abs(ratio_rev) * ec0) / vc0;
    add_row(report, "U_D = Vcheck/Vcheck(0)" + at, rt.u_d.values[i], ratio_rev,
            rt.u_d.errors[i] + ratio_rev_err + 1e-9);

    const double ratio_fwd = v_fwd->value(x) / v0;
    const double ratio_fwd_err =
        (v_fwd->error(x) + std::abs(ratio_fwd) * e0) / v0;
    add_row(report, "U_D_rev = V/V(0)" + at, rt.u_d_rev.values[i], ratio_fwd,
            rt.u_d_rev.errors[i] + ratio_fwd_err + 1e-9);

    const double scale = std::exp(-sc.c_zero);
    const double rhs_vd = scale * rt.v_d.values[i];
    add_row(report, "V/V(0) = exp(-c_zero)*V_D" + at, ratio_fwd, rhs_vd,
            ratio_fwd_err + scale * rt.v_d.errors[i] +
                std::abs(rhs_vd) * c0_slack + 1e-9);

    const double rhs_vdr = scale * rt.v_d_rev.values[i];
    add_row(report, "Vcheck/Vcheck(0) = exp(-c_zero)*V_D_rev" + at, ratio_rev,
            rhs_vdr,
            ratio_rev_err + scale * rt.v_d_rev.errors[i] +
                std::abs(rhs_vdr) * c0_slack + 1e-9);
  }

  const double half_var = 0.5 * sigma2;
  for (std::size_t i = 0; i <= i_max; ++i) {
    const double x = rt.grid_x(i);
    const double vx = v_fwd->value(x);
    const double evx = v_fwd->error(x);
    for (std::size_t j = 0; j <= i_max; ++j) {
      const double y = rt.grid_x(j);
      const std::string at =
          " @ (" + short_num(x) + "," + short_num(y) + ")";
      const double vcy = v_rev->value(y);
      const double evcy = v_rev->error(y);
      const double lhs = vx * vcy;
      const double lhs_err = evx * std::abs(vcy) + std::abs(vx) * evcy;

      const double boost = std::exp(sc.c_zero);
      const double rhs_a = rt.u_d_rev.values[i] * rt.u_d.values[j] *
                           half_var * boost;
      const double rhs_a_err =
          (rt.u_d_rev.errors[i] * std::abs(rt.u_d.values[j]) +
           std::abs(rt.u_d_rev.values[i]) * rt.u_d.errors[j]) *
              half_var * boost +
          std::abs(rhs_a) * c0_slack;
      add_row(report,
              "V*Vcheck = U_D_rev*U_D*sigma^2*exp(c_zero)/2" + at, lhs, rhs_a,
              lhs_err + rhs_a_err + 1e-9);

      const double rhs_b = rt.v_d.values[i] * rt.u_d.values[j] * half_var;
      const double rhs_b_err =
          (rt.v_d.errors[i] * std::abs(rt.u_d.values[j]) +
           std::abs(rt.v_d.values[i]) * rt.u_d.errors[j]) *
          half_var;
      add_row(report, "V*Vcheck = V_D*U_D*sigma^2/2" + at, lhs, rhs_b,
              lhs_err + rhs_b_err + 1e-9);

      const double rhs_c =
          rt.u_d_rev.values[i] * rt.v_d_rev.values[j] * half_var;
      const double rhs_c_err =
          (rt.u_d_rev.errors[i] * std::abs(rt.v_d_rev.values[j]) +
           std::abs(rt.u_d_rev.values[i]) * rt.v_d_rev.errors[j]) *
          half_var;
      add_row(report, "V*Vcheck = U_D_rev*V_D_rev*sigma^2/2" + at, lhs, rhs_c,
              lhs_err + rhs_c_err + 1e-9);
    }
  }

  report.all_pass = true;
  for (const IdentityRow& row : report.rows) {
    report.all_pass = report.all_pass && row.pass;
  }
  return report;
}

}  // namespace condwalk::renewal
