#include "condwalk/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "condwalk/quadrature.hpp"

namespace condwalk::kernel {

namespace {

constexpr double kSqrt1_2 = 0.7071067811865476;  // 1/sqrt(2)

double phi(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

}  // namespace

double gaussian_pdf(double t, double x) {
  if (!(t > 0.0)) throw DomainError("gaussian_pdf needs t > 0");
  return std::exp(-0.5 * x * x / t) / std::sqrt(2.0 * M_PI * t);
}

double gaussian_cdf(double x) { return 0.5 * std::erfc(-x * kSqrt1_2); }

double expm1_ratio(double u) {
  if (std::abs(u) < 1e-8) {
    return 1.0 + u * (-0.5 + u * (1.0 / 6.0 - u / 24.0));
  }
  return -std::expm1(-u) / u;
}

// For strongly opposite-sign arguments exp(-2xy) overflows while phi(x-y)
// underflows, so the factored form degenerates to 0 * inf; the plain
// difference is exact there because both Gaussians are already subnormal.
constexpr double kFactoredFormLimit = -350.0;

double psi(double x, double y) {
  if (x * y < kFactoredFormLimit) return phi(x - y) - phi(x + y);
  return -phi(x - y) * std::expm1(-2.0 * x * y);
}

double psi_t(double t, double x, double y) {
  if (!(t > 0.0)) throw DomainError("psi_t needs t > 0");
  const double root = std::sqrt(t);
  return psi(x / root, y / root) / root;
}

double bigH(double x) { return std::erf(x * kSqrt1_2); }

double bigL(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 2.0 * kInvSqrt2Pi *
           (1.0 +
            x2 * (-1.0 / 6.0 +
                  x2 * (1.0 / 40.0 + x2 * (-1.0 / 336.0 + x2 / 3456.0))));
  }
  return bigH(x) / x;
}

double ell(double x, double y) {
  if (x * y < kFactoredFormLimit) {
    return (phi(x - y) - phi(x + y)) / bigH(x);
  }
  return phi(x - y) * 2.0 * y * expm1_ratio(2.0 * x * y) / bigL(x);
}

double ell_v(double v, double x, double y) {
  if (!(v > 0.0) || v > 1.0) throw DomainError("ell_v needs v in (0,1]");
  // psi_v(x,y)/H(x): the numerator rescales its arguments by sqrt(v), the
  // normalization does not.
  const double root = std::sqrt(v);
  return phi((x - y) / root) * (2.0 * y / v) * expm1_ratio(2.0 * x * y / v) /
         (bigL(x) * root);
}

double p_kernel(double x, double y) {
  if (x * y < kFactoredFormLimit) {
    return (phi(x - y) - phi(x + y)) / (bigH(x) * bigH(y));
  }
  return phi(x - y) * 2.0 * expm1_ratio(2.0 * x * y) / (bigL(x) * bigL(y));
}

double phi_L(double y) { return std::exp(-0.5 * y * y) / bigL(y); }

double int_ell(double x, double u) {
  if (u <= 0.0) return 0.0;
  if (std::abs(x) < 1e-4) {
    // Odd Taylor expansion of Phi(u-x) - Phi(u+x) in x, divided by
    // H(x) = x*L(x); the Hermite coefficients come from phi's derivatives.
    const double x2 = x * x;
    const double u2 = u * u;
    const double bracket =
        1.0 + x2 * ((u2 - 1.0) / 6.0 +
                    x2 * (u2 * (u2 - 6.0) + 3.0) / 120.0);
    return 1.0 - 2.0 * phi(u) * bracket / bigL(x);
  }
  return 1.0 + (gaussian_cdf(u - x) - gaussian_cdf(u + x)) / bigH(x);
}

bool superlevel_member(double alpha, double x, double y) {
  return p_kernel(x, y) >= alpha;
}

double q_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > kInvSqrt2Pi) {
    throw DomainError("q_alpha needs alpha in (0, 1/sqrt(2*pi)]");
  }
  double v = -2.0 * std::log(kSqrt2Pi * alpha);
  if (v < 0.0) v = 0.0;  // alpha at the domain edge, up to roundoff
  return std::sqrt(v);
}

double semigroup_residual(double s, double t, double x, double y) {
  if (!(s > 0.0) || !(t > 0.0)) {
    throw DomainError("semigroup_residual needs s, t > 0");
  }
  const double cut = std::max(std::abs(x), std::abs(y)) +
                     12.0 * std::max({1.0, std::sqrt(s), std::sqrt(t)});
  const double integral =
      quadrature::integrate(
          [&](double z) { return psi_t(s, x, z) * psi_t(t, z, y); }, 0.0, cut)
          .value;
  return std::abs(integral - psi_t(s + t, x, y));
}

double gaussian_product_residual(double s, double t, double x, double y) {
  if (!(s > 0.0) || !(t > 0.0)) {
    throw DomainError("gaussian_product_residual needs s, t > 0");
  }
  const double cut = std::max(std::abs(x), std::abs(y)) +
                     12.0 * std::max({1.0, std::sqrt(s), std::sqrt(t)});
  const double integral =
      quadrature::integrate(
          [&](double z) {
            return gaussian_pdf(s, z - x) * gaussian_pdf(t, z - y);
          },
          0.0, cut)
          .value;
  const double w = s * t / (s + t);
  const double h = (t * x + s * y) / (s + t);
  const double closed =
      gaussian_pdf(s + t, x - y) * gaussian_cdf(h / std::sqrt(w));
  return std::abs(integral - closed);
}

double smoothing_residual(double v, double x, double y) {
  if (!(v > 0.0) || !(v < 1.0)) {
    throw DomainError("smoothing_residual needs v in (0,1)");
  }
  const double cut = std::max(std::abs(x), std::abs(y)) + 14.0;
  const double integral =
      quadrature::integrate(
          [&](double z) {
            return gaussian_pdf(v, y - z) * psi_t(1.0 - v, x, z);
          },
          -cut, cut)
          .value;
  return std::abs(integral - psi(x, y));
}

}  // namespace condwalk::kernel
