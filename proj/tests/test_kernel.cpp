#include "condwalk/kernel.hpp"

#include <cmath>
#include <vector>

#include "condwalk/quadrature.hpp"
#include "condwalk/rng.hpp"
#include "doctest.h"

namespace k = condwalk::kernel;
using condwalk::DomainError;
using condwalk::QuadratureFailure;

TEST_CASE("quadrature basics") {
  auto r = condwalk::quadrature::integrate(
      [](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-13));
  r = condwalk::quadrature::integrate([](double x) { return std::sin(x); },
                                      M_PI, 0.0);
  CHECK(r.value == doctest::Approx(-2.0).epsilon(1e-13));
  r = condwalk::quadrature::integrate([](double x) { return x * x; }, 2.0,
                                      2.0);
  CHECK(r.value == 0.0);

  // Interior algebraic singularity cannot reach 1e-11 in 50 panels.
  CHECK_THROWS_AS(condwalk::quadrature::integrate(
                      [](double x) { return std::pow(std::abs(x - 0.3), -0.9); },
                      0.0, 1.0, 1e-11, 50),
                  QuadratureFailure);
}

TEST_CASE("gaussian pdf and cdf anchors") {
  CHECK(k::gaussian_pdf(1.0, 0.0) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(k::gaussian_pdf(4.0, 2.0) ==
        doctest::Approx(0.3989422804014327 / 2.0 * std::exp(-0.5))
            .epsilon(1e-14));
  CHECK(k::gaussian_cdf(0.0) == 0.5);
  CHECK(k::gaussian_cdf(1.0) ==
        doctest::Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(k::gaussian_cdf(-8.0) + k::gaussian_cdf(8.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(k::gaussian_pdf(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(k::gaussian_pdf(-1.0, 1.0), DomainError);
}

TEST_CASE("psi values and symmetries") {
  CHECK(k::psi(0.0, 1.0) == 0.0);
  CHECK(k::psi(1.0, 1.0) ==
        doctest::Approx(-std::expm1(-2.0) / k::kSqrt2Pi).epsilon(1e-15));
  CHECK_THROWS_AS(k::psi_t(0.0, 1.0, 1.0), DomainError);
  CHECK(k::psi_t(1.0, 0.3, 0.7) == k::psi(0.3, 0.7));

  condwalk::rng::PathRng rng(2024, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = 8.0 * rng.next_u01() - 4.0;
    const double y = 8.0 * rng.next_u01() - 4.0;
    CHECK(std::abs(k::psi(x, y) - k::psi(y, x)) <= 1e-13);
    CHECK(std::abs(k::psi(x, -y) + k::psi(x, y)) <= 1e-13);
  }

  // The expm1 route stays accurate where the naive difference cancels.
  const double x = 1e-8, y = 2e-8;
  const double exact = 2.0 * x * y * k::gaussian_pdf(1.0, x - y);
  CHECK(k::psi(x, y) == doctest::Approx(exact).epsilon(1e-9));

  // Strongly opposite-sign arguments once produced 0 * inf = NaN from the
  // factored form; the values are subnormal-small but must stay finite so
  // that integrating through such a region cannot poison a quadrature.
  for (const double big : {30.0, 60.0, 120.0}) {
    CHECK(std::isfinite(k::psi(8.0, -big)));
    CHECK(std::isfinite(k::ell(8.0, -big)));
    CHECK(std::isfinite(k::p_kernel(8.0, -big)));
  }
  CHECK(std::abs(k::smoothing_residual(0.932, 1.93, 0.43)) <= 1e-8);
}

TEST_CASE("H and L: anchors, parity, decay") {
  CHECK(k::bigH(0.0) == 0.0);
  CHECK(k::bigL(0.0) == doctest::Approx(0.7978845608028654).epsilon(1e-16));
  CHECK(50.0 * k::bigL(50.0) == doctest::Approx(1.0).epsilon(1e-6));

  double prev = k::bigL(0.0);
  for (double x = 0.25; x <= 10.0; x += 0.25) {
    const double cur = k::bigL(x);
    CHECK(cur < prev);
    CHECK(k::bigL(-x) == cur);
    prev = cur;
  }

  // Series and ratio branches agree across the switch at |x| = 1e-3
  // (the points themselves differ by ~5e-10 through the x^2 term).
  CHECK(std::abs(k::bigL(0.999e-3) - k::bigL(1.001e-3)) <= 1e-9);
}

TEST_CASE("expm1_ratio series matches the direct form") {
  CHECK(k::expm1_ratio(0.0) == 1.0);
  for (double u : {1e-9, -1e-9, 9.9e-9, 1.01e-8, 0.5, -0.5, 30.0}) {
    const double direct = -std::expm1(-u) / u;
    CHECK(k::expm1_ratio(u) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("ell anchors and normalization") {
  CHECK(k::ell(0.0, 1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  for (double x : {-3.0, 0.0, 0.4, 2.0}) CHECK(k::ell(x, 0.0) == 0.0);
  CHECK(k::ell(0.0, 2.5) ==
        doctest::Approx(2.5 * std::exp(-0.5 * 2.5 * 2.5)).epsilon(1e-14));

  for (double x : {0.0, 0.5, 1.0, 3.0}) {
    const double cut = std::abs(x) + 12.0;
    const double mass =
        condwalk::quadrature::integrate(
            [&](double y) { return k::ell(x, y); }, 0.0, cut)
            .value;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("ell_v reduces to ell at v=1 and matches psi_v/H") {
  CHECK(k::ell_v(1.0, 0.7, 1.1) == doctest::Approx(k::ell(0.7, 1.1)));
  CHECK_THROWS_AS(k::ell_v(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(k::ell_v(1.5, 1.0, 1.0), DomainError);

  for (double v : {0.1, 0.5, 0.9}) {
    for (double xx : {0.4, 1.3, 2.2}) {
      for (double yy : {0.2, 1.0, 3.0}) {
        const double lhs = k::ell_v(v, xx, yy) * k::bigH(xx);
        const double rhs = k::psi_t(v, xx, yy);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("p kernel anchors and symmetries") {
  CHECK(k::p_kernel(0.0, 0.0) ==
        doctest::Approx(k::kSqrt2Pi / 2.0).epsilon(1e-15));
  CHECK(k::phi_L(0.0) == doctest::Approx(k::kSqrt2Pi / 2.0).epsilon(1e-15));
  CHECK(k::phi_L(3.0) ==
        doctest::Approx(std::exp(-4.5) / k::bigL(3.0)).epsilon(1e-15));

  condwalk::rng::PathRng rng(7, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = 8.0 * rng.next_u01() - 4.0;
    const double y = 8.0 * rng.next_u01() - 4.0;
    const double p = k::p_kernel(x, y);
    CHECK(std::abs(p - k::p_kernel(y, x)) <= 1e-13);
    CHECK(std::abs(p - k::p_kernel(x, -y)) <= 1e-13);
    CHECK(std::abs(k::ell(x, y) - k::ell(-x, y)) <= 1e-13);
    CHECK(std::abs(k::ell(x, y) + k::ell(x, -y)) <= 1e-13);
  }

  for (double y : {0.0, 0.3, 1.0, 2.7}) {
    CHECK(std::abs(k::p_kernel(0.0, y) - k::phi_L(y)) <= 1e-13);
  }
  for (double h : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    CHECK(std::abs(k::p_kernel(8.0, 8.0 - h) - k::gaussian_pdf(1.0, h)) <=
          1e-6);
  }
}

TEST_CASE("p attains its maximum at the origin on a grid") {
  const double p00 = k::p_kernel(0.0, 0.0);
  double best = 0.0;
  // Step 0.01 over [-10,10]^2 exploiting symmetry in both arguments.
  for (int i = 0; i <= 1000; ++i) {
    const double x = i * 0.01;
    for (int j = 0; j <= 1000; ++j) {
      const double v = k::p_kernel(x, j * 0.01);
      if (v > best) best = v;
      REQUIRE(v > 0.0);
      REQUIRE(std::isfinite(v));
    }
  }
  CHECK(best <= p00 + 1e-9);
  CHECK(best == doctest::Approx(k::kSqrt2Pi / 2.0).epsilon(1e-9));
}

TEST_CASE("int_ell closed form") {
  for (double x : {-2.0, 0.0, 1e-5, 0.3, 4.0}) {
    CHECK(k::int_ell(x, 0.0) == 0.0);
    CHECK(k::int_ell(x, -1.0) == 0.0);
  }
  for (double u : {0.1, 0.7, 1.5, 3.0}) {
    CHECK(k::int_ell(0.0, u) ==
          doctest::Approx(-std::expm1(-0.5 * u * u)).epsilon(1e-14));
  }
  CHECK(k::int_ell(1.0, 40.0) == doctest::Approx(1.0).epsilon(1e-12));

  // Against direct quadrature of ell.
  for (double x : {0.0, 5e-5, 0.02, 0.9, 2.5}) {
    for (double u : {0.4, 1.1, 2.6}) {
      const double direct =
          condwalk::quadrature::integrate(
              [&](double y) { return k::ell(x, y); }, 0.0, u)
              .value;
      CHECK(k::int_ell(x, u) == doctest::Approx(direct).epsilon(1e-10));
    }
  }

  // Monotone in u; even in x; branches agree at the series threshold.
  double prev = 0.0;
  for (double u = 0.0; u <= 5.0; u += 0.05) {
    const double cur = k::int_ell(0.7, u);
    CHECK(cur >= prev);
    prev = cur;
  }
  CHECK(k::int_ell(-0.6, 1.2) == doctest::Approx(k::int_ell(0.6, 1.2)));
  for (double u : {0.3, 1.0, 2.0}) {
    CHECK(std::abs(k::int_ell(0.99e-4, u) - k::int_ell(1.01e-4, u)) <= 1e-9);
  }
}

TEST_CASE("superlevel sets and the diagonal band") {
  CHECK(k::superlevel_member(1.0, 0.0, 0.0));
  CHECK_FALSE(k::superlevel_member(1.0, 3.0, 0.5));
  CHECK(k::q_alpha(k::kInvSqrt2Pi) == 0.0);
  CHECK(k::q_alpha(0.1) ==
        doctest::Approx(std::sqrt(-2.0 * std::log(k::kSqrt2Pi * 0.1))));
  CHECK_THROWS_AS(k::q_alpha(0.4), DomainError);
  CHECK_THROWS_AS(k::q_alpha(0.0), DomainError);
  CHECK_THROWS_AS(k::q_alpha(-0.1), DomainError);

  // Pairs within q_alpha of either diagonal belong to the superlevel set.
  condwalk::rng::PathRng rng(99, 0);
  for (double alpha : {0.05, 0.15, 0.3}) {
    const double q = k::q_alpha(alpha);
    for (int i = 0; i < 400; ++i) {
      const double x = 12.0 * rng.next_u01() - 6.0;
      const double off = q * (2.0 * rng.next_u01() - 1.0);
      CHECK(k::superlevel_member(alpha, x, x + off));
      CHECK(k::superlevel_member(alpha, x, -x + off));
    }
  }
}

TEST_CASE("convolution identities hold to quadrature accuracy") {
  CHECK(k::semigroup_residual(1.0, 1.0, 0.7, 1.3) <= 1e-8);
  CHECK(k::gaussian_product_residual(1.0, 1.0, 0.7, 1.3) <= 1e-10);
  CHECK(k::smoothing_residual(0.5, 0.7, 1.3) <= 1e-8);

  condwalk::rng::PathRng rng(31337, 0);
  for (int i = 0; i < 8; ++i) {
    const double s = 0.1 + 1.9 * rng.next_u01();
    const double t = 0.1 + 1.9 * rng.next_u01();
    const double x = 3.0 * rng.next_u01();
    const double y = 3.0 * rng.next_u01();
    const double v = 0.05 + 0.9 * rng.next_u01();
    CHECK(k::semigroup_residual(s, t, x, y) <= 1e-8);
    CHECK(k::gaussian_product_residual(s, t, x, y) <= 1e-10);
    CHECK(k::smoothing_residual(v, x, y) <= 1e-8);
  }
  CHECK_THROWS_AS(k::semigroup_residual(0.0, 1.0, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(k::smoothing_residual(1.0, 0.0, 0.0), DomainError);
}

TEST_CASE("empirical Lipschitz constants stay finite and stable") {
  auto fit = [](auto&& f, double a) {
    double worst = 0.0;
    for (double x = -6.0; x <= 6.0; x += 0.25) {
      for (double y = -6.0; y <= 6.0; y += 0.25) {
        worst = std::max(worst, std::abs(f(x, y + a) - f(x, y)) / a);
      }
    }
    return worst;
  };
  const double c1 = fit(k::p_kernel, 1e-1);
  const double c2 = fit(k::p_kernel, 1e-2);
  const double c3 = fit(k::p_kernel, 1e-3);
  CHECK(c1 < 5.0);
  CHECK(c2 < 5.0);
  CHECK(c3 < 5.0);
  CHECK(c2 == doctest::Approx(c3).epsilon(0.05));

  const double e2 = fit(k::ell, 1e-2);
  const double e3 = fit(k::ell, 1e-3);
  CHECK(e2 < 5.0);
  CHECK(e2 == doctest::Approx(e3).epsilon(0.05));

  // L-ratio Lipschitz bound |L(x')/L(x) - 1| <= C|x' - x|.
  double cl = 0.0;
  for (double x = -6.0; x <= 6.0; x += 0.1) {
    for (double d : {1e-3, 1e-2, 1e-1}) {
      cl = std::max(cl, std::abs(k::bigL(x + d) / k::bigL(x) - 1.0) / d);
    }
  }
  CHECK(cl < 2.0);

  // Small-x equivalence: p(x,y) approaches phi_L(y) linearly in x.
  for (double eps : {1e-3, 1e-2}) {
    for (double y : {0.1, 0.8, 2.0}) {
      const double x = eps;
      CHECK(std::abs(k::p_kernel(x, y) / k::phi_L(y) - 1.0) <= 2.0 * eps);
    }
  }
}

TEST_CASE("kernel grids tabulate the product lattice") {
  const auto grid = k::tabulate({0.0, 1.0}, {0.0, 0.5, 1.0}, k::p_kernel);
  REQUIRE(grid.values.size() == 2);
  REQUIRE(grid.values[0].size() == 3);
  CHECK(grid.values[0][0] == k::p_kernel(0.0, 0.0));
  CHECK(grid.values[1][2] == k::p_kernel(1.0, 1.0));
}
