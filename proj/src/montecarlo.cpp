#include "condwalk/montecarlo.hpp"

#include <cmath>
#include <thread>
#include <vector>

#include "condwalk/errors.hpp"
#include "condwalk/rng.hpp"

namespace condwalk::montecarlo {

namespace {

void check_common(int n, std::int64_t paths) {
  if (n < 1) throw DomainError("step count must be at least 1");
  if (paths < 10000) throw DomainError("path count must be at least 10000");
}

// Runs `pred` over path indices [0, paths) split into contiguous worker
// ranges.  Hits are integer counts, so the merged total is identical for
// every worker count.
template <typename Pred>
std::int64_t count_hits(std::int64_t paths, int threads, const Pred& pred) {
  if (threads <= 1) {
    std::int64_t hits = 0;
    for (std::int64_t p = 0; p < paths; ++p) hits += pred(p) ? 1 : 0;
    return hits;
  }
  const int workers = std::min<std::int64_t>(threads, paths);
  std::vector<std::int64_t> partial(static_cast<std::size_t>(workers), 0);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = paths * w / workers;
    const std::int64_t hi = paths * (w + 1) / workers;
    pool.emplace_back([&, lo, hi, w] {
      std::int64_t hits = 0;
      for (std::int64_t p = lo; p < hi; ++p) hits += pred(p) ? 1 : 0;
      partial[static_cast<std::size_t>(w)] = hits;
    });
  }
  for (std::thread& t : pool) t.join();
  std::int64_t total = 0;
  for (std::int64_t h : partial) total += h;
  return total;
}

MCEstimate indicator_estimate(std::int64_t hits, std::int64_t paths,
                              std::uint64_t seed, int n) {
  MCEstimate out;
  const double np = static_cast<double>(paths);
  out.value = static_cast<double>(hits) / np;
  out.stderr_ = std::sqrt(out.value * (1.0 - out.value) / np);
  out.paths = paths;
  out.seed = seed;
  out.n = n;
  return out;
}

}  // namespace

MCEstimate mc_joint_interval(const IncrementLaw& law, double x, double y,
                             double v, int n, std::int64_t paths,
                             std::uint64_t seed, int threads) {
  check_common(n, paths);
  if (v < 0.0) throw DomainError("interval width must be nonnegative");
  const auto pred = [&](std::int64_t p) {
    rng::PathRng gen(seed, static_cast<std::uint64_t>(p));
    double s = x;
    for (int k = 1; k <= n - 1; ++k) {
      s += sample(law, gen.next_u01());
      if (s < 0.0) return false;
    }
    s += sample(law, gen.next_u01());
    return s >= y && s < y + v;
  };
  return indicator_estimate(count_hits(paths, threads, pred), paths, seed, n);
}

MCEstimate mc_persistence(const IncrementLaw& law, double x, int n,
                          std::int64_t paths, std::uint64_t seed,
                          int threads) {
  check_common(n, paths);
  const auto pred = [&](std::int64_t p) {
    rng::PathRng gen(seed, static_cast<std::uint64_t>(p));
    double s = x;
    for (int k = 1; k <= n; ++k) {
      s += sample(law, gen.next_u01());
      if (s < 0.0) return false;
    }
    return true;
  };
  return indicator_estimate(count_hits(paths, threads, pred), paths, seed, n);
}

std::map<int, MCEstimate> mc_exit_pmf(const IncrementLaw& law, double x,
                                      int n, std::int64_t paths,
                                      std::uint64_t seed, int threads) {
  check_common(n, paths);
  const std::size_t buckets = static_cast<std::size_t>(n) + 1;
  const auto exit_epoch = [&](std::int64_t p) {
    rng::PathRng gen(seed, static_cast<std::uint64_t>(p));
    double s = x;
    for (int k = 1; k <= n; ++k) {
      s += sample(law, gen.next_u01());
      if (s < 0.0) return k;
    }
    return 0;  // survived through n
  };

  std::vector<std::int64_t> hist(buckets, 0);
  if (threads <= 1) {
    for (std::int64_t p = 0; p < paths; ++p) {
      ++hist[static_cast<std::size_t>(exit_epoch(p))];
    }
  } else {
    const int workers = std::min<std::int64_t>(threads, paths);
    std::vector<std::vector<std::int64_t>> partial(
        static_cast<std::size_t>(workers),
        std::vector<std::int64_t>(buckets, 0));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      const std::int64_t lo = paths * w / workers;
      const std::int64_t hi = paths * (w + 1) / workers;
      pool.emplace_back([&, lo, hi, w] {
        std::vector<std::int64_t>& mine =
            partial[static_cast<std::size_t>(w)];
        for (std::int64_t p = lo; p < hi; ++p) {
          ++mine[static_cast<std::size_t>(exit_epoch(p))];
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::vector<std::int64_t>& mine : partial) {
      for (std::size_t k = 0; k < buckets; ++k) hist[k] += mine[k];
    }
  }

  std::map<int, MCEstimate> out;
  for (int k = 1; k <= n; ++k) {
    const std::int64_t hits = hist[static_cast<std::size_t>(k)];
    if (hits == 0) continue;
    out.emplace(k, indicator_estimate(hits, paths, seed, n));
  }
  return out;
}

MCEstimate mc_max_abs(const IncrementLaw& law, int n, double u,
                      std::int64_t paths, std::uint64_t seed, int threads) {
  check_common(n, paths);
  if (u <= 0.0) throw DomainError("threshold must be positive");
  const auto pred = [&](std::int64_t p) {
    rng::PathRng gen(seed, static_cast<std::uint64_t>(p));
    double s = 0.0;
    for (int k = 1; k <= n; ++k) {
      s += sample(law, gen.next_u01());
      if (s > u || s < -u) return true;
    }
    return false;
  };
  return indicator_estimate(count_hits(paths, threads, pred), paths, seed, n);
}

}  // namespace condwalk::montecarlo
