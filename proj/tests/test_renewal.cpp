#include <cmath>
#include <cstddef>
#include <string>

#include "condwalk/errors.hpp"
#include "condwalk/increments.hpp"
#include "condwalk/renewal.hpp"
#include "doctest.h"

using condwalk::builtin_law;
namespace renewal = condwalk::renewal;

TEST_CASE("sign-walk constants for the simple random walk") {
  const renewal::SpitzerConstants sc =
      renewal::spitzer_constants(builtin_law("ssrw"), 20000);
  const double ln2 = std::log(2.0);
  CHECK(std::abs(sc.c_minus + 0.5 * ln2) < 1e-4);
  CHECK(std::abs(sc.c_zero - ln2) < 1e-4);
  CHECK(sc.terms_used == 20000);
  CHECK(sc.tail_estimate > 0.0);
  CHECK(std::abs(sc.c_plus + sc.c_minus + sc.c_zero) <=
        3.0 * sc.tail_estimate + 1e-10);
  CHECK(sc.fitted_exponent > -1.7);
  CHECK(sc.fitted_exponent < -1.3);
  // Symmetric law: the independently computed positive and negative sums run
  // over mirrored cells in the same order, so they agree bit for bit.
  CHECK(sc.c_plus == sc.c_minus);
}

TEST_CASE("sign-walk constants for the lazy and one-up-two-down laws") {
  const double ln2 = std::log(2.0);
  const renewal::SpitzerConstants tri =
      renewal::spitzer_constants(builtin_law("trinomial"), 10000);
  CHECK(std::abs(tri.c_plus + ln2) < 1e-4);
  CHECK(std::abs(tri.c_zero - 2.0 * ln2) < 1e-4);
  // Three-atom convolutions associate mirrored cells in different orders, so
  // the symmetry holds to accumulated roundoff rather than bit-exactly.
  CHECK(std::abs(tri.c_plus - tri.c_minus) < 1e-12);

  const renewal::SpitzerConstants skip =
      renewal::spitzer_constants(builtin_law("skipfree"), 10000);
  // Downward-skip-free walks never dip below zero without touching it, which
  // forces the negative-side series to vanish in the limit.
  CHECK(std::abs(skip.c_minus) < 1e-5);
  CHECK(std::abs(skip.c_plus + skip.c_minus + skip.c_zero) <=
        3.0 * skip.tail_estimate + 1e-10);
  CHECK(skip.fitted_exponent > -1.7);
  CHECK(skip.fitted_exponent < -1.3);
}

TEST_CASE("sign-walk constants: preconditions") {
  CHECK_THROWS_AS(renewal::spitzer_constants(builtin_law("uniform"), 20000),
                  condwalk::UnsupportedLaw);
  CHECK_THROWS_AS(renewal::spitzer_constants(builtin_law("ssrw"), 999),
                  condwalk::DomainError);
}

TEST_CASE("renewal functions reproduce the simple-walk staircases") {
  const renewal::RenewalTable rt =
      renewal::renewal_functions(builtin_law("ssrw"), 6.0, 4000);
  CHECK(rt.size() == 7);
  CHECK(rt.grid_step == 1.0);
  CHECK(rt.terms_used == 4000);

  // Strictly positive paths can never end at or below zero, so the zero
  // entry is the k = 0 indicator alone.
  CHECK(rt.u_d.values[0] == 1.0);
  CHECK(rt.u_d.errors[0] <= 2e-12);

  for (std::size_t i = 0; i < rt.size(); ++i) {
    const double x = rt.grid_x(i);
    CHECK(std::abs(rt.u_d.values[i] - (x + 1.0)) <= rt.u_d.errors[i]);
    // Weak-barrier series carries the extra exp(c_zero) = 2 factor.
    CHECK(std::abs(rt.v_d.values[i] - 2.0 * (x + 1.0)) <= rt.v_d.errors[i]);
  }

  // The +-1 law is its own reversal, so the mirrored runs agree bit for bit.
  for (std::size_t i = 0; i < rt.size(); ++i) {
    CHECK(rt.u_d_rev.values[i] == rt.u_d.values[i]);
    CHECK(rt.v_d_rev.values[i] == rt.v_d.values[i]);
  }

  CHECK(rt.u_d.fitted_exponent > -1.7);
  CHECK(rt.u_d.fitted_exponent < -1.3);
  CHECK(rt.v_d.fitted_exponent > -1.7);
  CHECK(rt.v_d.fitted_exponent < -1.3);

  CHECK_THROWS_AS(renewal::renewal_functions(builtin_law("ssrw"), -1.0, 4000),
                  condwalk::DomainError);
}

TEST_CASE("identity report: simple random walk") {
  const renewal::IdentityReport report =
      renewal::identity_report(builtin_law("ssrw"), 5.0, 8000);
  // 5 scalar rows, 4 ratio identities on 6 states, 3 product identities on
  // the 6x6 state square.
  CHECK(report.rows.size() == 5 + 4 * 6 + 3 * 36);
  CHECK(report.all_pass);
  for (const renewal::IdentityRow& row : report.rows) {
    CAPTURE(row.name);
    CHECK(row.residual <= row.tol);
    CHECK(row.pass);
  }
  CHECK(report.rows[0].name == "c_plus+c_minus+c_zero = 0");
  // V(0) = 1 and sigma*exp(ln2 / 2)/sqrt(2) = 1 for the +-1 law.
  CHECK(report.rows[1].lhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.rows[1].rhs == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("identity report: lazy law") {
  const renewal::IdentityReport report =
      renewal::identity_report(builtin_law("trinomial"), 4.0, 8000);
  CHECK(report.all_pass);
}

TEST_CASE("identity report: one-up-two-down law") {
  // The reversed walk is not skip-free, so the reversed harmonic values come
  // from ladder extrapolation; the report must still close every identity.
  const renewal::IdentityReport report =
      renewal::identity_report(builtin_law("skipfree"), 3.0, 6000);
  CHECK(report.all_pass);
  for (const renewal::IdentityRow& row : report.rows) {
    CAPTURE(row.name);
    CHECK(row.pass);
  }
}
