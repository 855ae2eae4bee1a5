#include "condwalk/lattice_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condwalk/kernel.hpp"

namespace condwalk::oracle {

namespace {

using int128 = __int128;

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::int64_t ceil_div(int128 num, int128 den) {  // den > 0
  int128 q = num / den;
  if (num % den > 0) ++q;
  return static_cast<std::int64_t>(q);
}

std::int64_t floor_div(int128 num, int128 den) {  // den > 0
  int128 q = num / den;
  if (num % den < 0) --q;
  return static_cast<std::int64_t>(q);
}

struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

double plain_sum(const std::vector<double>& v) {
  KahanSum acc;
  for (double m : v) acc.add(m);
  return acc.sum;
}

// Smallest alive lattice offset after step k, or INT64_MIN when nothing is
// killed from below.  Exact when the start point has a rational form.
struct LowKill {
  bool exact = false;
  std::int64_t px = 0, qx = 1;  // x = px/qx when exact

  std::int64_t first_alive(const IncrementLaw& law, double x, int k,
                           KillMode mode) const {
    const auto& lat = law.lattice;
    if (exact) {
      // value >= 0  <=>  qx*ispan*M >= -(px*scale + qx*k*ishift)
      const int128 num = -(static_cast<int128>(px) * lat.scale +
                           static_cast<int128>(qx) * k * lat.ishift);
      const int128 den = static_cast<int128>(qx) * lat.ispan;
      return mode == KillMode::below_zero ? ceil_div(num, den)
                                          : floor_div(num, den) + 1;
    }
    const double tol = 1e-9 * lat.span;
    const double cut = mode == KillMode::below_zero ? -tol : tol;
    // smallest M with x + k*shift + span*M >= cut (resp. > cut)
    return static_cast<std::int64_t>(
        std::ceil((cut - x - k * lat.shift) / lat.span - 1e-12));
  }
};

}  // namespace

DpResult run_killed_dp(const IncrementLaw& law, double x, int n,
                       const DpConfig& config,
                       const std::function<void(const StepView&)>& visit) {
  if (!law.is_lattice()) {
    throw UnsupportedLaw("exact state enumeration needs a lattice law");
  }
  if (n < 1) throw DomainError("need at least one step");

  std::int64_t m_min = law.atoms.front().offset;
  std::int64_t m_max = m_min;
  for (const auto& atom : law.atoms) {
    m_min = std::min(m_min, atom.offset);
    m_max = std::max(m_max, atom.offset);
  }
  const auto width = static_cast<std::size_t>(m_max - m_min);

  LowKill low;
  if (const auto pq = rationalize(x)) {
    low.exact = true;
    low.px = pq->first;
    low.qx = pq->second;
  }

  const double span = law.lattice.span;
  const double shift = law.lattice.shift;
  const double snap = 1e-9 * span;

  std::vector<double> f{1.0}, g;
  std::int64_t f_lo = 0;
  KahanSum killed_total;
  double adds = 0.0;

  for (int k = 1; k <= n; ++k) {
    g.assign(f.size() + width, 0.0);
    const std::int64_t g_lo = f_lo + m_min;
    for (const auto& atom : law.atoms) {
      const auto off = static_cast<std::size_t>(atom.offset - m_min);
      const double p = atom.prob;
      for (std::size_t j = 0; j < f.size(); ++j) g[j + off] += p * f[j];
    }
    adds += static_cast<double>(f.size() * law.atoms.size());

    double killed_step = 0.0;
    if (config.mode != KillMode::none && k <= config.kill_through) {
      std::int64_t alive_lo = g_lo;
      std::int64_t alive_hi = g_lo + static_cast<std::int64_t>(g.size()) - 1;
      if (config.mode == KillMode::outside_abs) {
        const double u = config.barrier;
        alive_lo = static_cast<std::int64_t>(
            std::ceil((-u - snap - x - k * shift) / span));
        alive_hi = static_cast<std::int64_t>(
            std::floor((u + snap - x - k * shift) / span));
      } else {
        alive_lo = low.first_alive(law, x, k, config.mode);
      }
      KahanSum removed;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const std::int64_t m = g_lo + static_cast<std::int64_t>(j);
        if (m < alive_lo || m > alive_hi) {
          removed.add(g[j]);
          g[j] = 0.0;
        }
      }
      killed_step = removed.sum;
      killed_total.add(killed_step);
    }

    if (visit) {
      StepView view;
      view.k = k;
      view.m_lo = g_lo;
      view.mass = &g;
      view.killed = killed_step;
      view.x = x;
      view.shift = shift;
      view.span = span;
      visit(view);
    }
    f.swap(g);
    f_lo = g_lo;
  }

  DpResult result;
  result.mass = std::move(f);
  result.m_lo = f_lo;
  result.killed_total = killed_total.sum;
  result.float_error_bound =
      (adds + static_cast<double>(result.mass.size())) * kEps;
  return result;
}

double ConditionedLawTable::prob_at(double y) const {
  const double rel = (y - base_value) / span;
  const double rounded = std::round(rel);
  if (std::abs(y - (base_value + rounded * span)) > 1e-9 * span) {
    throw LatticeMismatch("point off the state lattice of the table");
  }
  if (rounded < 0.0 || rounded >= static_cast<double>(mass.size())) return 0.0;
  return mass[static_cast<std::size_t>(rounded)];
}

std::vector<std::pair<double, double>> ConditionedLawTable::entries() const {
  std::vector<std::pair<double, double>> out;
  for (std::size_t j = 0; j < mass.size(); ++j) {
    if (mass[j] > 0.0) {
      out.emplace_back(base_value + span * static_cast<double>(j), mass[j]);
    }
  }
  return out;
}

double ConditionedLawTable::total_mass() const { return plain_sum(mass); }

ConditionedLawTable joint_law(const IncrementLaw& law, double x, int n,
                              Constraint constraint) {
  DpConfig config;
  config.mode = KillMode::below_zero;
  config.kill_through =
      constraint == Constraint::survive_through_n_minus_1 ? n - 1 : n;

  const DpResult dp = run_killed_dp(law, x, n, config);

  ConditionedLawTable table;
  table.law_id = law.name;
  table.x = x;
  table.n = n;
  table.constraint = constraint;
  table.span = law.lattice.span;
  table.base_value = x + n * law.lattice.shift +
                     law.lattice.span * static_cast<double>(dp.m_lo);
  table.mass = std::move(dp.mass);
  table.float_error_bound = dp.float_error_bound;
  table.persistence = plain_sum(table.mass);
  return table;
}

double persistence(const IncrementLaw& law, double x, int n) {
  return joint_law(law, x, n, Constraint::survive_through_n).persistence;
}

std::vector<double> persistence_profile(const IncrementLaw& law, double x,
                                        int n) {
  std::vector<double> profile(static_cast<std::size_t>(n) + 1, 0.0);
  profile[0] = 1.0;
  DpConfig config;
  config.mode = KillMode::below_zero;
  config.kill_through = n;
  run_killed_dp(law, x, n, config, [&](const StepView& view) {
    profile[static_cast<std::size_t>(view.k)] = plain_sum(*view.mass);
  });
  return profile;
}

std::vector<double> exit_pmf(const IncrementLaw& law, double x, int n_max) {
  const auto profile = persistence_profile(law, x, n_max);
  std::vector<double> pmf(profile.size(), 0.0);
  for (std::size_t k = 1; k < profile.size(); ++k) {
    // An exact identity; the clamp only strips float noise of order eps.
    pmf[k] = std::max(0.0, profile[k - 1] - profile[k]);
  }
  return pmf;
}

double conditional_cdf(const IncrementLaw& law, double x, int n, double u) {
  if (u < 0.0) throw DomainError("conditional_cdf needs u >= 0");
  const auto table = joint_law(law, x, n, Constraint::survive_through_n);
  const double cutoff =
      u * law.sigma() * std::sqrt(static_cast<double>(n)) + 1e-9 * table.span;
  KahanSum acc;
  for (std::size_t j = 0; j < table.mass.size(); ++j) {
    const double y = table.base_value + table.span * static_cast<double>(j);
    if (y <= cutoff) acc.add(table.mass[j]);
  }
  return acc.sum;
}

double UnconditionedLaw::prob_at(double z) const {
  const double rel = (z - base_value) / span;
  const double rounded = std::round(rel);
  if (std::abs(z - (base_value + rounded * span)) > 1e-9 * span) {
    throw LatticeMismatch("point off the step-n lattice");
  }
  if (rounded < 0.0 || rounded >= static_cast<double>(mass.size())) return 0.0;
  return mass[static_cast<std::size_t>(rounded)];
}

UnconditionedLaw unconditioned_law(const IncrementLaw& law, int n) {
  const DpResult dp = run_killed_dp(law, 0.0, n, DpConfig{});
  UnconditionedLaw out;
  out.span = law.lattice.span;
  out.base_value = n * law.lattice.shift +
                   law.lattice.span * static_cast<double>(dp.m_lo);
  out.n = n;
  out.mass = std::move(dp.mass);
  out.float_error_bound = dp.float_error_bound;
  return out;
}

double llt_sup_error(const IncrementLaw& law, int n) {
  const auto table = unconditioned_law(law, n);
  const double var = law.moments.variance * n;
  double sup = 0.0;
  for (std::int64_t j = -1; j <= static_cast<std::int64_t>(table.mass.size());
       ++j) {
    const double z = table.base_value + table.span * static_cast<double>(j);
    const double prob =
        (j < 0 || j >= static_cast<std::int64_t>(table.mass.size()))
            ? 0.0
            : table.mass[static_cast<std::size_t>(j)];
    sup = std::max(sup,
                   std::abs(prob - table.span * kernel::gaussian_pdf(var, z)));
  }
  return sup;
}

double duality_residual(const IncrementLaw& law, double x, double y, int n) {
  const double span = law.lattice.span;
  const double rel = (y - x - n * law.lattice.shift) / span;
  if (std::abs(rel - std::round(rel)) > 1e-9) {
    throw LatticeMismatch("y is not reachable from x in n lattice steps");
  }
  const auto fwd =
      joint_law(law, x, n, Constraint::survive_through_n_minus_1);
  const auto rev =
      joint_law(reverse(law), y, n, Constraint::survive_through_n_minus_1);
  return std::abs(fwd.prob_at(y) - rev.prob_at(x));
}

double fuk_nagaev_bound(int n, double u, double v, double tail_prob) {
  return 2.0 * std::exp((u / v) * (1.0 + std::log(n / (u * v)))) +
         n * tail_prob;
}

FukNagaev fuk_nagaev_check(const IncrementLaw& law, int n, double u,
                           double v) {
  if (!(u > 0.0) || !(v > 0.0)) {
    throw DomainError("fuk_nagaev_check needs u, v > 0");
  }
  DpConfig config;
  config.mode = KillMode::outside_abs;
  config.barrier = u;
  config.kill_through = n;
  const DpResult dp = run_killed_dp(law, 0.0, n, config);

  FukNagaev out;
  out.exact_prob = dp.killed_total;
  out.bound = fuk_nagaev_bound(n, u, v, prob_abs_gt(law, v));
  return out;
}

}  // namespace condwalk::oracle
