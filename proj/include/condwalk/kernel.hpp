#pragma once

#include <vector>

#include "condwalk/errors.hpp"

namespace condwalk::kernel {

inline constexpr double kSqrt2Pi = 2.5066282746310005;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Heat kernel at time t and the standard normal CDF.
double gaussian_pdf(double t, double x);  // DomainError if t <= 0
double gaussian_cdf(double x);

// s(u) = (1 - e^{-u})/u, the factor shared by every expm1 factorization
// below; s(0) = 1, series for |u| < 1e-8.
double expm1_ratio(double u);

// psi(x,y) = phi(x-y) - phi(x+y), evaluated as -phi(x-y)*expm1(-2xy) so the
// small-xy cancellation never happens in floating point.
double psi(double x, double y);
double psi_t(double t, double x, double y);  // DomainError if t <= 0

// H(x) = 2*Phi(x) - 1 and its odd-part normalization L(x) = H(x)/x, with the
// removable singularity at 0 handled by a Taylor series below |x| = 1e-3.
double bigH(double x);
double bigL(double x);

// One-side normalized kernel: a probability density in y on the half line.
double ell(double x, double y);
double ell_v(double v, double x, double y);  // DomainError if v outside (0,1]

// Two-side normalized kernel p(x,y) = psi(x,y)/(H(x)H(y)) and its x -> 0
// limit phi_L(y) = e^{-y^2/2}/L(y).
double p_kernel(double x, double y);
double phi_L(double y);

// Closed form of int_0^u ell(x,z) dz; exactly 0 for u <= 0, tends to 1.
double int_ell(double x, double u);

// Superlevel set Q(alpha) = {p >= alpha} and the half-width q_alpha of the
// band {|x-y| <= q_alpha} that sits inside it.
bool superlevel_member(double alpha, double x, double y);
double q_alpha(double alpha);  // DomainError unless 0 < alpha <= 1/sqrt(2*pi)

// Quadrature residuals of the convolution identities the kernels satisfy.
// Each returns |numeric integral - closed form|; QuadratureFailure if the
// integral cannot be resolved to the requested tolerance.
double semigroup_residual(double s, double t, double x, double y);
double gaussian_product_residual(double s, double t, double x, double y);
double smoothing_residual(double v, double x, double y);

struct KernelGrid {
  std::vector<double> x_values;
  std::vector<double> y_values;
  std::vector<std::vector<double>> values;  // values[i][j] = f(x_i, y_j)
};

template <typename F>
KernelGrid tabulate(std::vector<double> xs, std::vector<double> ys, F&& f) {
  KernelGrid grid;
  grid.x_values = std::move(xs);
  grid.y_values = std::move(ys);
  grid.values.reserve(grid.x_values.size());
  for (double x : grid.x_values) {
    std::vector<double> row;
    row.reserve(grid.y_values.size());
    for (double y : grid.y_values) row.push_back(f(x, y));
    grid.values.push_back(std::move(row));
  }
  return grid;
}

}  // namespace condwalk::kernel
