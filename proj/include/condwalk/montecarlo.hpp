#pragma once

#include <cstdint>
#include <map>

#include "condwalk/increments.hpp"

namespace condwalk::montecarlo {

struct MCEstimate {
  double value = 0.0;
  double stderr_ = 0.0;  // sqrt(p(1-p)/paths); trailing _ avoids the C macro
  std::int64_t paths = 0;
  std::uint64_t seed = 0;
  int n = 0;
};

// Fraction of paths with x + S_j >= 0 for every j <= n-1 and x + S_n in
// [y, y+v).  Deterministic given (seed, paths) for any worker count.
MCEstimate mc_joint_interval(const IncrementLaw& law, double x, double y,
                             double v, int n, std::int64_t paths,
                             std::uint64_t seed, int threads = 1);

// Fraction of paths with x + S_j >= 0 for every j <= n.
MCEstimate mc_persistence(const IncrementLaw& law, double x, int n,
                          std::int64_t paths, std::uint64_t seed,
                          int threads = 1);

// Exit-time histogram: for each k <= n with at least one hit, the fraction
// of paths whose first entry into the negative half line is at epoch k.
std::map<int, MCEstimate> mc_exit_pmf(const IncrementLaw& law, double x,
                                      int n, std::int64_t paths,
                                      std::uint64_t seed, int threads = 1);

// Estimate of P(max_{k<=n} |S_k| > u).
MCEstimate mc_max_abs(const IncrementLaw& law, int n, double u,
                      std::int64_t paths, std::uint64_t seed,
                      int threads = 1);

}  // namespace condwalk::montecarlo
