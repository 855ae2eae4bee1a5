#pragma once

#include <stdexcept>
#include <string>

namespace condwalk {

// Root of the library's exception hierarchy.  Every failure mode raised by
// this library derives from Error so the CLI boundary can catch a single
// type and map it to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

#define CONDWALK_DEFINE_ERROR(NAME)                    \
  class NAME : public Error {                          \
   public:                                             \
    explicit NAME(const std::string& what_arg)         \
        : Error(std::string(#NAME) + ": " + what_arg) {} \
  }

// Increment-law construction and validation.
CONDWALK_DEFINE_ERROR(BadProbabilities);   // pmf weights invalid or not normalized
CONDWALK_DEFINE_ERROR(NonZeroMean);        // law is not centered
CONDWALK_DEFINE_ERROR(DegenerateLaw);      // fewer than two support points / zero variance
CONDWALK_DEFINE_ERROR(NotLattice);         // support has no common rational spacing
CONDWALK_DEFINE_ERROR(UnsupportedLaw);     // operation needs the other law kind

// State/lattice bookkeeping.
CONDWALK_DEFINE_ERROR(OffLattice);         // start state microscopically off the state grid
CONDWALK_DEFINE_ERROR(LatticeMismatch);    // target state unreachable by lattice arithmetic

// Harmonic-function estimation.
CONDWALK_DEFINE_ERROR(NotSkipFree);        // closed form needs a unique minimal down-step
CONDWALK_DEFINE_ERROR(NonMonotone);        // truncated-expectation sequence decreased
CONDWALK_DEFINE_ERROR(InsufficientTable);  // tabulated values do not cover a needed state

// Numerics.
CONDWALK_DEFINE_ERROR(QuadratureFailure);  // adaptive integration missed its tolerance
CONDWALK_DEFINE_ERROR(SlowDecay);          // series terms decay slower than the fitted model allows
CONDWALK_DEFINE_ERROR(TableCoverage);      // integration range exceeds tabulated coverage
CONDWALK_DEFINE_ERROR(KappaDisagreement);  // the two kappa integral forms disagree
CONDWALK_DEFINE_ERROR(DomainError);        // argument outside a function's domain

// Harness / IO.
CONDWALK_DEFINE_ERROR(ConfigError);        // malformed or inconsistent experiment config
CONDWALK_DEFINE_ERROR(IoError);            // file could not be read or written

#undef CONDWALK_DEFINE_ERROR

}  // namespace condwalk
