#pragma once

#include <functional>

namespace condwalk::quadrature {

struct Result {
  double value = 0.0;
  double error = 0.0;  // conservative absolute error estimate
  int intervals = 0;   // panels in the final subdivision
};

// Adaptive Gauss-Kronrod 7/15 integration of f over [a, b] to an absolute
// tolerance.  The worst panel (by |K15 - G7|) is bisected until the summed
// panel estimates fall below abs_tol.  Throws QuadratureFailure if the
// tolerance is not met within max_intervals panels.
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-11, int max_intervals = 2000);

}  // namespace condwalk::quadrature
