#include "condwalk/predict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "condwalk/errors.hpp"
#include "condwalk/kernel.hpp"
#include "condwalk/quadrature.hpp"

namespace condwalk::predict {

namespace {

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void require_positive_n(int n) {
  if (n < 1) throw DomainError("n must be at least 1");
}

void require_n_at_least_2(int n) {
  if (n < 2) throw DomainError("rate evaluation needs n >= 2");
}

double scaled(double x, double sigma, int n) {
  return x / (sigma * std::sqrt(static_cast<double>(n)));
}

// V(x) read from a table, with the walk dead below zero.
double table_value(const harmonic::HarmonicTable& table, double x) {
  return x < 0.0 ? 0.0 : table.value_at(x);
}

double table_error(const harmonic::HarmonicTable& table, double x) {
  return x < 0.0 ? 0.0 : table.error_at(x);
}

// V_n(x) = V(x) * L(x / (sigma sqrt n)).
double vn_at(const harmonic::HarmonicTable& table, double sigma, double x,
             int n) {
  if (x < 0.0) return 0.0;
  return table.value_at(x) * kernel::bigL(scaled(x, sigma, n));
}

double state_grid(const IncrementLaw& law) {
  return static_cast<double>(support_gcd_scaled(law)) /
         static_cast<double>(law.lattice.scale);
}

// Highest state-grid point at or below y, snapping up across rounding dust
// the same way the closed-form harmonic evaluation does.
double step_floor(double y, double grid) {
  const double q = y / grid;
  double m = std::floor(q);
  if (q - m > 1.0 - 1e-9) m += 1.0;
  return m * grid;
}

void check_admissible(const PredictorInputs& in, double x, double y, int n) {
  if (in.hbar <= 0.0)
    throw UnsupportedLaw("point predictors are defined for lattice laws only");
  const double r = (y - x - static_cast<double>(n) * in.shift) / in.hbar;
  if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, std::abs(r)))
    throw LatticeMismatch("y - x must lie in hbar*Z + n*shift, got offset " +
                          short_num(y - x));
}

// Composite Simpson rule with an even panel count and nodes <= 0.01 apart.
template <typename F>
double simpson(const F& f, double a, double b) {
  const double len = b - a;
  int m = 2 * static_cast<int>(std::ceil(len / 0.02));
  if (m < 2) m = 2;
  const double h = len / m;
  double acc = f(a) + f(b);
  for (int i = 1; i < m; ++i)
    acc += f(a + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

PredictorInputs make_inputs(const IncrementLaw& law, harmonic::HarmonicTable v,
                            harmonic::HarmonicTable vcheck) {
  if (v.values.empty() || vcheck.values.empty())
    throw DomainError("harmonic tables must be nonempty");
  PredictorInputs in;
  in.sigma = law.sigma();
  if (law.is_lattice()) {
    in.hbar = law.lattice.span;
    in.shift = law.lattice.shift;
  }
  in.V = std::move(v);
  in.Vcheck = std::move(vcheck);
  in.delta = law.moments.delta;
  return in;
}

double persistence_pred(const PredictorInputs& in, double x, int n) {
  require_positive_n(n);
  return vn_at(in.V, in.sigma, x, n) /
         (in.sigma * std::sqrt(static_cast<double>(n)));
}

double cdf_pred(const PredictorInputs& in, double x, double u, int n) {
  require_positive_n(n);
  if (u < 0.0) throw DomainError("cdf endpoint must be nonnegative");
  return persistence_pred(in, x, n) *
         kernel::int_ell(scaled(x, in.sigma, n), u);
}

double local_pred(const PredictorInputs& in, double x, double y, int n) {
  require_positive_n(n);
  check_admissible(in, x, y, n);
  const double vnx = vn_at(in.V, in.sigma, x, n);
  const double vny = vn_at(in.Vcheck, in.sigma, y, n);
  if (vnx == 0.0 || vny == 0.0) return 0.0;
  const double s = in.sigma;
  return in.hbar * vnx * vny /
         (s * s * s * std::pow(static_cast<double>(n), 1.5)) *
         kernel::p_kernel(scaled(x, s, n), scaled(y, s, n));
}

double caravenna_pred(const PredictorInputs& in, double x, double y, int n) {
  require_positive_n(n);
  check_admissible(in, x, y, n);
  if (y < 0.0) return 0.0;
  const double vnx = vn_at(in.V, in.sigma, x, n);
  if (vnx == 0.0) return 0.0;
  const double s = in.sigma;
  return in.hbar * vnx / (s * s * static_cast<double>(n)) *
         kernel::ell(scaled(x, s, n), scaled(y, s, n));
}

double lattice_residue(double value, double span) {
  if (span <= 0.0) throw DomainError("span must be positive");
  double r = std::fmod(value, span);
  if (r < 0.0) r += span;
  if (r >= span) r -= span;
  return r;
}

double varkappa_u(const PredictorInputs& in, const IncrementLaw& law,
                  double u) {
  if (!law.is_lattice() || in.hbar <= 0.0)
    throw UnsupportedLaw("the exit-time constant needs a lattice law");
  if (!(u >= 0.0 && u < in.hbar))
    throw DomainError("residue must lie in [0, hbar)");
  const double grid = state_grid(law);
  const double down = law.max_down();
  double acc = 0.0;
  for (int k = 0;; ++k) {
    const double y = u + in.hbar * static_cast<double>(k);
    if (!(y < down)) break;
    acc += in.Vcheck.value_at(step_floor(y, grid)) * prob_lt(law, -y);
  }
  return acc;
}

double varkappa_n(const PredictorInputs& in, const IncrementLaw& law, double x,
                  int n) {
  require_positive_n(n);
  if (!law.is_lattice() || in.hbar <= 0.0)
    throw UnsupportedLaw("the exit-time constant needs a lattice law");
  const double u =
      lattice_residue(static_cast<double>(n) * in.shift + x, in.hbar);
  return varkappa_u(in, law, u);
}

double exit_pred_lattice(const PredictorInputs& in, const IncrementLaw& law,
                         double x, int n) {
  const double kap = varkappa_n(in, law, x, n);
  if (kap == 0.0) return 0.0;
  const double vx = table_value(in.V, x);
  if (vx == 0.0) return 0.0;
  const double s = in.sigma;
  return in.hbar * kernel::gaussian_pdf(1.0, scaled(x, s, n)) * 2.0 * vx *
         kap / (s * s * s * std::pow(static_cast<double>(n), 1.5));
}

IntervalPrediction interval_pred_with_uncertainty(const PredictorInputs& in,
                                                  double x, double y, double v,
                                                  int n) {
  require_positive_n(n);
  if (in.hbar > 0.0)
    throw UnsupportedLaw("the interval predictor needs a density law");
  if (v < 0.0) throw DomainError("interval length must be nonnegative");
  if (v == 0.0) return {};
  if (!in.Vcheck.covers(y) || !in.Vcheck.covers(y + v))
    throw TableCoverage("interval [" + short_num(y) + ", " + short_num(y + v) +
                        ") leaves the tabulated range");
  const double s = in.sigma;
  const double big_x = scaled(x, s, n);
  const auto weight = [&](double z) {
    const double big_z = scaled(z, s, n);
    return kernel::bigL(big_z) * kernel::p_kernel(big_x, big_z);
  };
  const double integral = simpson(
      [&](double z) { return in.Vcheck.value_at(z) * weight(z); }, y, y + v);
  const double integral_err = simpson(
      [&](double z) { return in.Vcheck.error_at(z) * weight(z); }, y, y + v);
  const double pref =
      1.0 / (s * s * s * std::pow(static_cast<double>(n), 1.5));
  const double vnx = vn_at(in.V, s, x, n);
  const double vnx_err = table_error(in.V, x) * kernel::bigL(big_x);
  IntervalPrediction out;
  out.value = pref * vnx * integral;
  out.uncertainty = pref * (vnx_err * integral + vnx * integral_err);
  return out;
}

double interval_pred(const PredictorInputs& in, double x, double y, double v,
                     int n) {
  return interval_pred_with_uncertainty(in, x, y, v, n).value;
}

KappaForms kappa_forms(const PredictorInputs& in, const IncrementLaw& law) {
  if (law.is_lattice())
    throw UnsupportedLaw("the kappa integrals need a density law");
  const IncrementLaw rev = reverse(law);
  const double down = law.max_down();
  KappaForms forms;
  forms.from_negative_side =
      quadrature::integrate(
          [&](double t) { return harmonic::v_negative(rev, in.Vcheck, t); },
          -down, 0.0, 1e-9, 4000)
          .value;
  forms.from_positive_tail =
      quadrature::integrate(
          [&](double z) { return in.Vcheck.value_at(z) * prob_lt(law, -z); },
          0.0, down, 1e-9, 4000)
          .value;
  return forms;
}

double kappa_nonlattice(const PredictorInputs& in, const IncrementLaw& law) {
  const KappaForms forms = kappa_forms(in, law);
  const double a = forms.from_negative_side;
  const double b = forms.from_positive_tail;
  const double tol = 0.02 * std::max({std::abs(a), std::abs(b), 1e-12});
  if (std::abs(a - b) > tol)
    throw KappaDisagreement("negative-side form " + short_num(a) +
                            " vs positive-tail form " + short_num(b));
  return 0.5 * (a + b);
}

double exit_pred_nonlattice(const PredictorInputs& in, const IncrementLaw& law,
                            double x, int n) {
  require_positive_n(n);
  const double vx = table_value(in.V, x);
  if (vx == 0.0) return 0.0;
  const double kap = kappa_nonlattice(in, law);
  const double s = in.sigma;
  return kernel::gaussian_pdf(1.0, scaled(x, s, n)) * 2.0 * vx * kap /
         (s * s * s * std::pow(static_cast<double>(n), 1.5));
}

ErrorEnvelope error_envelope(const PredictorInputs& in, double x, double y,
                             int n) {
  require_n_at_least_2(n);
  const double d = in.delta;
  const double base = std::pow(static_cast<double>(n), -d / 8.0);
  const double rate = std::pow(static_cast<double>(n), -d / (8.0 * (3.0 + d))) *
                      std::log(static_cast<double>(n));
  ErrorEnvelope env;
  env.n = n;
  env.x = x;
  env.y = y;
  env.value = (base + vn_at(in.V, in.sigma, x, n)) *
              (base + vn_at(in.Vcheck, in.sigma, y, n)) * rate /
              std::pow(static_cast<double>(n), 1.5);
  return env;
}

double rate_Rn(const PredictorInputs& in, double x, int n) {
  require_n_at_least_2(n);
  const double d = in.delta;
  return std::pow(static_cast<double>(n), -d / 4.0) +
         vn_at(in.V, in.sigma, x, n) *
             std::pow(static_cast<double>(n), -d / (4.0 * (3.0 + d))) *
             std::log(static_cast<double>(n));
}

double caravenna_envelope(const PredictorInputs& in, double x, int n) {
  require_n_at_least_2(n);
  const double d = in.delta;
  return (std::pow(static_cast<double>(n), -d / 6.0) +
          vn_at(in.V, in.sigma, x, n) *
              std::pow(static_cast<double>(n), -d / (8.0 * (3.0 + d))) *
              std::log(static_cast<double>(n))) /
         static_cast<double>(n);
}

double exit_envelope(const PredictorInputs& in, double x, int n) {
  require_n_at_least_2(n);
  const double d = in.delta;
  return (std::pow(static_cast<double>(n), -d / 8.0) +
          vn_at(in.V, in.sigma, x, n)) *
         std::pow(static_cast<double>(n), -d / (8.0 * (3.0 + d))) *
         std::log(static_cast<double>(n)) /
         std::pow(static_cast<double>(n), 1.5);
}

double interval_envelope(const PredictorInputs& in, double x, double y,
                         double v, int n) {
  require_n_at_least_2(n);
  if (v < 0.0) throw DomainError("interval length must be nonnegative");
  if (!in.Vcheck.covers(y) || !in.Vcheck.covers(y + v))
    throw TableCoverage("interval [" + short_num(y) + ", " + short_num(y + v) +
                        ") leaves the tabulated range");
  const double d = in.delta;
  const double integral =
      v == 0.0 ? 0.0
               : simpson([&](double z) { return vn_at(in.Vcheck, in.sigma, z, n); },
                         y, y + v);
  return (std::pow(static_cast<double>(n), -d / 8.0) +
          vn_at(in.V, in.sigma, x, n)) *
         (integral + v * std::pow(static_cast<double>(n), -d / 4.0)) *
         std::pow(static_cast<double>(n), -d / (8.0 * (3.0 + d))) *
         std::log(static_cast<double>(n)) /
         std::pow(static_cast<double>(n), 1.5);
}

std::vector<std::string> classify_regime(double x, double y, int n, double q,
                                         double sigma, double hbar_or_0,
                                         double v) {
  require_positive_n(n);
  if (sigma <= 0.0) throw DomainError("sigma must be positive");
  if (v < 0.0) throw DomainError("interval length must be nonnegative");
  std::vector<std::string> tags;
  const double nd = static_cast<double>(n);
  const double sqn = std::sqrt(nd);
  const double alpha_n = std::pow(nd, -0.25);
  const double beta_n = std::pow(nd, 0.25);
  const double band = sigma * std::sqrt(2.0 * q * nd * std::log(nd));
  if (kernel::p_kernel(x / (sigma * sqn), y / (sigma * sqn)) >=
      std::pow(nd, -q))
    tags.push_back("Q_member");
  const bool small_x = std::abs(x) / sqn <= alpha_n;
  const bool small_y = std::abs(y) / sqn <= alpha_n;
  if (hbar_or_0 > 0.0) {
    const bool small_xy = std::abs(x * y) / nd <= alpha_n;
    if (small_x && small_xy && y <= band) tags.push_back("a1");
    if (small_y && small_xy && x <= band) tags.push_back("a2");
    if (x >= beta_n && y >= beta_n && std::abs(y - x) <= band)
      tags.push_back("a3");
    if (small_x && small_y) tags.push_back("a4");
    if (small_x && y / sqn >= alpha_n && y / sqn <= beta_n)
      tags.push_back("a5");
    if (small_x && small_xy && band > 0.0 && std::abs(y / band - 1.0) <= alpha_n)
      tags.push_back("a6");
    if (x >= beta_n && y >= beta_n && x * y / nd >= beta_n &&
        std::abs(y - x) <= band)
      tags.push_back("a7");
  } else {
    const bool small_xyv = (std::abs(x * y) + std::abs(x * v)) / nd <= alpha_n;
    const bool in_band = std::abs(x - y) + v <= band;
    if (small_x && small_xyv && in_band) tags.push_back("b1");
    if ((std::abs(y) + std::abs(v)) / sqn <= alpha_n && small_xyv && in_band)
      tags.push_back("b2");
    if (x >= beta_n && y >= beta_n && in_band) tags.push_back("b3");
  }
  if (tags.empty()) tags.push_back("none");
  return tags;
}

}  // namespace condwalk::predict
