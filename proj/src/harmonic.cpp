#include "condwalk/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <utility>

#include "condwalk/errors.hpp"
#include "condwalk/kernel.hpp"
#include "condwalk/lattice_oracle.hpp"
#include "condwalk/quadrature.hpp"
#include "condwalk/rng.hpp"

namespace condwalk::harmonic {

namespace {

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

// Spacing of the grid generated by the step values (the group they span).
double state_grid(const IncrementLaw& law) {
  return static_cast<double>(support_gcd_scaled(law)) / law.lattice.scale;
}

// Starts are allowed anywhere on the half line, but a start that is almost
// exactly on the step grid without being on it is a symptom of accumulated
// rounding in the caller, so it is rejected rather than silently computed.
void check_start(const IncrementLaw& law, double x) {
  if (x < 0.0) {
    throw OffLattice("start below zero: x = " + std::to_string(x));
  }
  if (!law.is_lattice()) return;
  const double grid = state_grid(law);
  const double drift = std::abs(x - grid * std::round(x / grid));
  if (drift != 0.0 && drift < 1e-9 * grid) {
    throw OffLattice("start drifted off the step grid by " +
                     std::to_string(drift));
  }
}

struct LadderSweep {
  std::vector<double> w;            // E(x + S_n; alive) at each rung
  std::vector<double> persistence;  // alive mass at each rung
};

LadderSweep sweep_ladder(const IncrementLaw& law, double x,
                         const std::vector<int>& ladder) {
  const int n_max = ladder.back();
  LadderSweep out;
  out.w.resize(ladder.size());
  out.persistence.resize(ladder.size());
  std::size_t idx = 0;
  auto visit = [&](const oracle::StepView& sv) {
    if (idx >= ladder.size() || sv.k != ladder[idx]) return;
    KahanSum value;
    KahanSum mass;
    for (std::size_t j = 0; j < sv.size(); ++j) {
      const double q = sv.mass_at(j);
      if (q == 0.0) continue;
      value.add(q * sv.value_of(j));
      mass.add(q);
    }
    out.w[idx] = value.total();
    out.persistence[idx] = mass.total();
    ++idx;
  };
  oracle::DpConfig config{oracle::KillMode::below_zero, 0.0, n_max};
  oracle::run_killed_dp(law, x, n_max, config, visit);
  return out;
}

void validate_ladder(const std::vector<int>& ladder) {
  if (ladder.size() < 2) {
    throw DomainError("extrapolation needs at least two ladder depths");
  }
  if (ladder.front() < 1) {
    throw DomainError("ladder depths must be positive");
  }
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (ladder[i] <= ladder[i - 1]) {
      throw DomainError("ladder depths must be strictly increasing");
    }
  }
}

}  // namespace

PartialValue v_partial(const IncrementLaw& law, double x, int n) {
  if (n < 1) throw DomainError("depth must be at least 1");
  check_start(law, x);
  const LadderSweep sweep = sweep_ladder(law, x, std::vector<int>{n});
  PartialValue out;
  out.estimate = sweep.w.back();
  out.bias_bound = law.max_down() * sweep.persistence.back();
  return out;
}

Extrapolated v_extrapolated(const IncrementLaw& law, double x,
                            const std::vector<int>& ladder) {
  validate_ladder(ladder);
  check_start(law, x);
  const LadderSweep sweep = sweep_ladder(law, x, ladder);
  const std::vector<double>& w = sweep.w;
  for (std::size_t i = 1; i < w.size(); ++i) {
    // The truncated expectation is nondecreasing in the depth exactly, so a
    // decrease beyond roundoff means the dynamic program is corrupted.
    if (w[i] < w[i - 1] - 1e-9 * std::max(1.0, std::abs(w[i - 1]))) {
      throw NonMonotone("truncated values decreased between depths " +
                        std::to_string(ladder[i - 1]) + " and " +
                        std::to_string(ladder[i]));
    }
  }

  // One Richardson step per adjacent pair, each eliminating the n^{-1/2}
  // deficit term under the assumed approach to the limit.
  std::vector<double> extrapolants(w.size() - 1);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double rho = static_cast<double>(ladder[i + 1]) /
                       static_cast<double>(ladder[i]);
    const double f = 1.0 / std::sqrt(rho);
    extrapolants[i] = (w[i + 1] - f * w[i]) / (1.0 - f);
  }

  const double bias = law.max_down() * sweep.persistence.back();
  Extrapolated out;
  if (extrapolants.size() >= 2) {
    out.value = extrapolants.back();
    out.error_estimate =
        std::abs(extrapolants.back() - extrapolants[extrapolants.size() - 2]) +
        0.01 * bias;
  } else {
    out.value = extrapolants.back();
    out.error_estimate = std::abs(extrapolants.back() - w.back()) + 0.01 * bias;
  }

  // The limit provably lies in [W, W + bias] at the deepest rung; pulling the
  // extrapolant back into that bracket can only move it toward the truth, and
  // the move is charged to the error estimate.
  const double lo = w.back();
  const double hi = w.back() + bias;
  if (out.value < lo) {
    out.error_estimate += lo - out.value;
    out.value = lo;
  } else if (out.value > hi) {
    out.error_estimate += out.value - hi;
    out.value = hi;
  }
  return out;
}

double v_skipfree(const IncrementLaw& law, double x) {
  if (!law.is_lattice()) {
    throw NotSkipFree("law has continuous support");
  }
  if (x < 0.0) throw DomainError("state must be nonnegative");
  const LatticeAtom* down = nullptr;
  for (const LatticeAtom& atom : law.atoms) {
    if (atom.value < 0.0) {
      if (down != nullptr) {
        throw NotSkipFree("law has several downward support points");
      }
      down = &atom;
    }
  }
  if (down == nullptr) throw NotSkipFree("law has no downward support point");
  // Descents must pass through every level of the step grid, i.e. the single
  // downward step must equal the grid spacing.
  if (-down->ivalue != support_gcd_scaled(law)) {
    throw NotSkipFree("downward step skips grid levels");
  }
  const double grid = -down->value;
  const double q = x / grid;
  double m = std::floor(q);
  if (q - m > 1.0 - 1e-9) m += 1.0;  // snap starts that sit on a grid level
  return grid * (m + 1.0);
}

McHarmonic v_mc(const IncrementLaw& law, double x, int n_cap,
                std::int64_t paths, std::uint64_t seed) {
  if (paths < 10000) throw DomainError("path count must be at least 10000");
  if (n_cap < 1) throw DomainError("depth cap must be at least 1");
  if (x < 0.0) throw DomainError("start must be nonnegative");
  long double sum = 0.0L;
  long double sum_sq = 0.0L;
  std::int64_t alive_count = 0;
  for (std::int64_t p = 0; p < paths; ++p) {
    rng::PathRng gen(seed, static_cast<std::uint64_t>(p));
    double s = x;
    bool alive = true;
    for (int k = 0; k < n_cap; ++k) {
      s += sample(law, gen.next_u01());
      if (s < 0.0) {
        alive = false;
        break;
      }
    }
    const double y = alive ? s : 0.0;
    sum += y;
    sum_sq += static_cast<long double>(y) * y;
    alive_count += alive ? 1 : 0;
  }
  const double np = static_cast<double>(paths);
  const double mean = static_cast<double>(sum / paths);
  double variance = 0.0;
  if (paths > 1) {
    variance = static_cast<double>((sum_sq - sum * sum / paths) / (paths - 1));
    variance = std::max(variance, 0.0);
  }
  const double survival = static_cast<double>(alive_count) / np;
  const double survival_se = std::sqrt(survival * (1.0 - survival) / np);
  McHarmonic out;
  out.estimate = mean;
  out.stderr_ = std::sqrt(variance / np);
  out.bias_bound = law.max_down() * (survival + 3.0 * survival_se);
  return out;
}

bool HarmonicTable::covers(double x) const {
  if (values.empty()) return false;
  const double snap = 1e-9 * std::max(grid_step, 1.0);
  return x >= grid_base - snap &&
         x <= grid_x(values.size() - 1) + snap;
}

double HarmonicTable::value_at(double x) const {
  if (!covers(x)) {
    throw InsufficientTable("state " + std::to_string(x) +
                            " outside tabulated range");
  }
  if (values.size() == 1) return values[0];
  const double t = (x - grid_base) / grid_step;
  std::size_t i = static_cast<std::size_t>(
      std::clamp(std::floor(t), 0.0, static_cast<double>(values.size() - 2)));
  const double frac = t - static_cast<double>(i);
  return values[i] + frac * (values[i + 1] - values[i]);
}

double HarmonicTable::error_at(double x) const {
  if (!covers(x)) {
    throw InsufficientTable("state " + std::to_string(x) +
                            " outside tabulated range");
  }
  if (values.size() == 1) return errors[0];
  const double t = (x - grid_base) / grid_step;
  std::size_t i = static_cast<std::size_t>(
      std::clamp(std::floor(t), 0.0, static_cast<double>(values.size() - 2)));
  const double frac = t - static_cast<double>(i);
  if (std::abs(frac) < 1e-12) return errors[i];
  if (std::abs(frac - 1.0) < 1e-12) return errors[i + 1];
  double bend = 0.0;
  if (values.size() >= 3) {
    const std::size_t c =
        std::min(std::max<std::size_t>(i, 1), values.size() - 2);
    bend = std::abs(values[c + 1] - 2.0 * values[c] + values[c - 1]);
  }
  return std::max(errors[i], errors[i + 1]) + 0.125 * bend;
}

double v_negative(const IncrementLaw& law, const HarmonicTable& table,
                  double x) {
  if (x >= 0.0) throw DomainError("state must be negative");
  if (law.is_lattice()) {
    const double snap = 1e-9 * state_grid(law);
    KahanSum sum;
    bool any = false;
    for (const LatticeAtom& atom : law.atoms) {
      const double y = x + atom.value;
      if (y < -snap) continue;
      any = true;
      sum.add(atom.prob * table.value_at(std::max(y, 0.0)));
    }
    return any ? sum.total() : 0.0;
  }
  const double lo = std::max(law.support_lo, -x);
  if (lo >= law.support_hi) return 0.0;
  auto integrand = [&](double s) {
    return law.density(s) * table.value_at(std::max(x + s, 0.0));
  };
  return quadrature::integrate(integrand, lo, law.support_hi, 1e-10).value;
}

double vn_value(double v_at_x, double x, double sigma, int n) {
  if (n < 1) throw DomainError("depth must be at least 1");
  if (sigma <= 0.0) throw DomainError("sigma must be positive");
  return v_at_x * kernel::bigL(x / (sigma * std::sqrt(static_cast<double>(n))));
}

double vn(const HarmonicTable& table, double x, int n) {
  return vn_value(table.value_at(x), x, table.sigma, n);
}

namespace {

IncrementLaw oriented(const IncrementLaw& law, Direction dir) {
  return dir == Direction::reversed ? reverse(law) : law;
}

void check_against_exact(const HarmonicTable& table, const IncrementLaw& law) {
  // When the closed form applies it must agree with whatever method built the
  // table; a discrepancy beyond the stated error budget is a hard failure
  // rather than something to average away.
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double exact = v_skipfree(law, table.grid_x(i));
    const double slack = table.errors[i] + 1e-9;
    if (std::abs(table.values[i] - exact) > slack) {
      throw Error("harmonic table disagrees with closed form at x = " +
                  std::to_string(table.grid_x(i)) + ": " +
                  std::to_string(table.values[i]) + " vs " +
                  std::to_string(exact) + " (budget " + std::to_string(slack) +
                  ")");
    }
  }
}

bool is_skipfree(const IncrementLaw& law) {
  if (!law.is_lattice()) return false;
  const LatticeAtom* down = nullptr;
  for (const LatticeAtom& atom : law.atoms) {
    if (atom.value < 0.0) {
      if (down != nullptr) return false;
      down = &atom;
    }
  }
  return down != nullptr && -down->ivalue == support_gcd_scaled(law);
}

}  // namespace

HarmonicTable make_skipfree_table(const IncrementLaw& law, Direction dir,
                                  double xmax) {
  if (xmax < 0.0) throw DomainError("xmax must be nonnegative");
  const IncrementLaw use = oriented(law, dir);
  const double grid = state_grid(use);
  HarmonicTable table;
  table.law_id = law.name;
  table.direction = dir;
  table.method = Method::skipfree_exact;
  table.sigma = use.sigma();
  table.grid_base = 0.0;
  table.grid_step = grid;
  const std::size_t count =
      static_cast<std::size_t>(std::floor(xmax / grid + 1e-9)) + 1;
  table.values.resize(count);
  table.errors.assign(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    table.values[i] = v_skipfree(use, table.grid_x(i));
  }
  return table;
}

HarmonicTable make_extrapolated_table(const IncrementLaw& law, Direction dir,
                                      double xmax,
                                      const std::vector<int>& ladder) {
  if (xmax < 0.0) throw DomainError("xmax must be nonnegative");
  validate_ladder(ladder);
  const IncrementLaw use = oriented(law, dir);
  const double grid = state_grid(use);
  HarmonicTable table;
  table.law_id = law.name;
  table.direction = dir;
  table.method = Method::extrapolated;
  table.sigma = use.sigma();
  table.grid_base = 0.0;
  table.grid_step = grid;
  const std::size_t count =
      static_cast<std::size_t>(std::floor(xmax / grid + 1e-9)) + 1;
  table.values.resize(count);
  table.errors.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Extrapolated e = v_extrapolated(use, table.grid_x(i), ladder);
    table.values[i] = e.value;
    table.errors[i] = e.error_estimate;
  }
  if (is_skipfree(use)) check_against_exact(table, use);
  return table;
}

HarmonicTable make_mc_table(const IncrementLaw& law, Direction dir,
                            double xmax, double grid_step, int n_cap,
                            std::int64_t paths, std::uint64_t seed) {
  if (xmax < 0.0) throw DomainError("xmax must be nonnegative");
  if (grid_step <= 0.0) throw DomainError("grid step must be positive");
  const IncrementLaw use = oriented(law, dir);
  HarmonicTable table;
  table.law_id = law.name;
  table.direction = dir;
  table.method = Method::monte_carlo;
  table.sigma = use.sigma();
  table.grid_base = 0.0;
  table.grid_step = grid_step;
  const std::size_t count =
      static_cast<std::size_t>(std::floor(xmax / grid_step + 1e-9)) + 1;
  table.values.resize(count);
  table.errors.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t cell_seed =
        rng::mix64(seed ^ (rng::kGolden * static_cast<std::uint64_t>(i + 1)));
    const McHarmonic mc = v_mc(use, table.grid_x(i), n_cap, paths, cell_seed);
    // Center the estimate inside the truncation bracket [W, W + bias] so the
    // one-sided bias becomes a symmetric half-width.
    table.values[i] = mc.estimate + 0.5 * mc.bias_bound;
    table.errors[i] = mc.stderr_ + 0.5 * mc.bias_bound;
  }
  if (is_skipfree(use)) check_against_exact(table, use);
  return table;
}

namespace {

class SkipfreeSource final : public HarmonicSource {
 public:
  explicit SkipfreeSource(IncrementLaw law) : law_(std::move(law)) {
    v_skipfree(law_, 0.0);  // validate applicability up front
  }
  double value(double x) const override { return v_skipfree(law_, x); }
  double error(double) const override { return 0.0; }
  bool covers(double x) const override { return x >= 0.0; }

 private:
  IncrementLaw law_;
};

class LadderSource final : public HarmonicSource {
 public:
  LadderSource(IncrementLaw law, std::vector<int> ladder)
      : law_(std::move(law)), ladder_(std::move(ladder)) {
    validate_ladder(ladder_);
  }
  double value(double x) const override { return lookup(x).value; }
  double error(double x) const override { return lookup(x).error_estimate; }
  bool covers(double x) const override { return x >= 0.0; }

 private:
  const Extrapolated& lookup(double x) const {
    std::lock_guard<std::mutex> guard(mutex_);
    auto it = cache_.find(x);
    if (it == cache_.end()) {
      it = cache_.emplace(x, v_extrapolated(law_, x, ladder_)).first;
    }
    return it->second;
  }

  IncrementLaw law_;
  std::vector<int> ladder_;
  mutable std::mutex mutex_;
  mutable std::map<double, Extrapolated> cache_;
};

class TableSource final : public HarmonicSource {
 public:
  explicit TableSource(HarmonicTable table) : table_(std::move(table)) {}
  double value(double x) const override { return table_.value_at(x); }
  double error(double x) const override { return table_.error_at(x); }
  bool covers(double x) const override { return table_.covers(x); }

 private:
  HarmonicTable table_;
};

}  // namespace

std::shared_ptr<HarmonicSource> skipfree_source(IncrementLaw law) {
  return std::make_shared<SkipfreeSource>(std::move(law));
}

std::shared_ptr<HarmonicSource> ladder_source(IncrementLaw law,
                                              std::vector<int> ladder) {
  return std::make_shared<LadderSource>(std::move(law), std::move(ladder));
}

std::shared_ptr<HarmonicSource> table_source(HarmonicTable table) {
  return std::make_shared<TableSource>(std::move(table));
}

}  // namespace condwalk::harmonic
