#include "condwalk/increments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "condwalk/quadrature.hpp"
#include "condwalk/rng.hpp"

namespace condwalk {

namespace {

// Multiply with overflow detection; returns false when the product would
// leave the comfortable int64 range we allow for scaled lattice arithmetic.
bool checked_mul(std::int64_t a, std::int64_t b, std::int64_t& out) {
  const __int128 p = static_cast<__int128>(a) * static_cast<__int128>(b);
  if (p > static_cast<__int128>(4000000000000000000LL) ||
      p < -static_cast<__int128>(4000000000000000000LL)) {
    return false;
  }
  out = static_cast<std::int64_t>(p);
  return true;
}

}  // namespace

double IncrementLaw::sigma() const { return std::sqrt(moments.variance); }

double IncrementLaw::max_down() const { return -support_lo; }

std::optional<std::pair<std::int64_t, std::int64_t>> rationalize(
    double x, double rel_tol, std::int64_t max_den) {
  if (!std::isfinite(x)) return std::nullopt;
  const double tol = rel_tol * std::max(1.0, std::abs(x));

  std::int64_t h2 = 0, h1 = 1;  // numerator convergents
  std::int64_t k2 = 1, k1 = 0;  // denominator convergents
  double r = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double fa = std::floor(r);
    if (std::abs(fa) > 3.0e18) return std::nullopt;
    const auto a = static_cast<std::int64_t>(fa);
    std::int64_t h = 0, k = 0, t = 0;
    if (!checked_mul(a, h1, t) || __builtin_add_overflow(t, h2, &h))
      return std::nullopt;
    if (!checked_mul(a, k1, t) || __builtin_add_overflow(t, k2, &k))
      return std::nullopt;
    if (k > max_den) return std::nullopt;
    if (std::abs(x - static_cast<double>(h) / static_cast<double>(k)) <= tol) {
      return std::make_pair(h, k);
    }
    const double frac = r - fa;
    if (frac <= 0.0) return std::nullopt;  // exhausted precision, no match
    r = 1.0 / frac;
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
  }
  return std::nullopt;
}

LatticeSpec detect_lattice(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw NotLattice("need at least two distinct support points");
  }

  // Common denominator for all support points.
  std::vector<std::int64_t> num(values.size()), den(values.size());
  std::int64_t common = 1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto pq = rationalize(values[i]);
    if (!pq) throw NotLattice("support point has no small rational form");
    num[i] = pq->first;
    den[i] = pq->second;
    const std::int64_t g = std::gcd(common, den[i]);
    std::int64_t l = 0;
    if (!checked_mul(common / g, den[i], l) || l > 1000000000000LL) {
      throw NotLattice("support points are not commensurable");
    }
    common = l;
  }

  std::vector<std::int64_t> scaled(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!checked_mul(num[i], common / den[i], scaled[i])) {
      throw NotLattice("scaled support exceeds integer range");
    }
  }

  std::int64_t g = 0;
  for (std::size_t i = 1; i < scaled.size(); ++i) {
    g = std::gcd(g, std::llabs(scaled[i] - scaled[0]));
  }
  if (g == 0) throw NotLattice("support points coincide");
  const std::int64_t s0 = ((scaled[0] % g) + g) % g;

  // Reduce the scale so (span, shift, values) stay integral but minimal.
  const std::int64_t t = std::gcd(common, std::gcd(g, s0));
  LatticeSpec spec;
  spec.scale = common / t;
  spec.ispan = g / t;
  spec.ishift = s0 / t;
  spec.span = static_cast<double>(spec.ispan) / static_cast<double>(spec.scale);
  spec.shift =
      static_cast<double>(spec.ishift) / static_cast<double>(spec.scale);
  return spec;
}

IncrementLaw make_lattice_law(
    const std::vector<std::pair<double, double>>& points, double delta) {
  std::vector<std::pair<double, double>> pts = points;
  std::sort(pts.begin(), pts.end());

  // Merge duplicates, drop zero-mass atoms, reject negative masses.
  std::vector<std::pair<double, double>> merged;
  for (const auto& [v, p] : pts) {
    if (p < 0.0) throw BadProbabilities("negative probability");
    if (!merged.empty() &&
        std::abs(v - merged.back().first) <= 1e-12 * std::max(1.0, std::abs(v))) {
      merged.back().second += p;
    } else {
      merged.emplace_back(v, p);
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const auto& a) { return a.second == 0.0; }),
               merged.end());

  double total = 0.0, mean = 0.0;
  for (const auto& [v, p] : merged) {
    total += p;
    mean += v * p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw BadProbabilities("probabilities sum to " + std::to_string(total));
  }
  if (merged.size() < 2) throw DegenerateLaw("support has fewer than two points");
  if (std::abs(mean) > 1e-10) {
    throw NonZeroMean("mean is " + std::to_string(mean));
  }

  IncrementLaw law;
  law.kind = IncrementLaw::Kind::lattice;

  std::vector<double> values;
  values.reserve(merged.size());
  for (const auto& [v, p] : merged) values.push_back(v);
  law.lattice = detect_lattice(values);

  law.atoms.reserve(merged.size());
  for (const auto& [v, p] : merged) {
    LatticeAtom atom;
    atom.value = v;
    atom.prob = p;
    const auto pq = rationalize(v);
    atom.ivalue = pq->first * (law.lattice.scale / pq->second);
    atom.offset = (atom.ivalue - law.lattice.ishift) / law.lattice.ispan;
    law.atoms.push_back(atom);
  }

  law.support_lo = merged.front().first;
  law.support_hi = merged.back().first;

  law.moments.mean = 0.0;
  law.moments.delta = delta;
  law.moments.delta1 = std::min(1.0, delta);
  for (const auto& [v, p] : merged) {
    law.moments.variance += v * v * p;
    law.moments.abs_moment += std::pow(std::abs(v), 2.0 + delta) * p;
  }
  return law;
}

IncrementLaw make_nonlattice_law(const std::string& name,
                                 std::function<double(double)> density,
                                 std::function<double(double)> sample_from_u01,
                                 double support_lo, double support_hi,
                                 double delta) {
  if (!(support_lo < support_hi)) throw DegenerateLaw("empty support interval");

  const double total =
      quadrature::integrate(density, support_lo, support_hi).value;
  if (std::abs(total - 1.0) > 1e-8) {
    throw BadProbabilities("density integrates to " + std::to_string(total));
  }
  const double mean =
      quadrature::integrate([&](double z) { return z * density(z); },
                            support_lo, support_hi)
          .value;
  if (std::abs(mean) > 1e-8) {
    throw NonZeroMean("density mean is " + std::to_string(mean));
  }

  IncrementLaw law;
  law.kind = IncrementLaw::Kind::nonlattice;
  law.name = name;
  law.density = std::move(density);
  law.sample_from_u01 = std::move(sample_from_u01);
  law.support_lo = support_lo;
  law.support_hi = support_hi;

  // Split moment integrals at zero: |z|^(2+delta) has a kink there.
  auto piecewise = [&](const std::function<double(double)>& f) {
    double acc = 0.0;
    if (support_lo < 0.0) {
      acc += quadrature::integrate(f, support_lo, std::min(0.0, support_hi))
                 .value;
    }
    if (support_hi > 0.0) {
      acc += quadrature::integrate(f, std::max(0.0, support_lo), support_hi)
                 .value;
    }
    return acc;
  };
  law.moments.mean = 0.0;
  law.moments.delta = delta;
  law.moments.delta1 = std::min(1.0, delta);
  law.moments.variance =
      piecewise([&](double z) { return z * z * law.density(z); });
  law.moments.abs_moment = piecewise(
      [&](double z) { return std::pow(std::abs(z), 2.0 + delta) * law.density(z); });
  const double m4 =
      piecewise([&](double z) { return z * z * z * z * law.density(z); });

  // Cross-check the sampler against the density on a fixed-seed sample.
  constexpr int kDraws = 65536;
  rng::PathRng draws(0x436f6e6457616c6bULL, 0);
  const double slack = 1e-9 * (support_hi - support_lo);
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double z = law.sample_from_u01(draws.next_u01());
    if (z < support_lo - slack || z > support_hi + slack) {
      throw BadProbabilities("sampler leaves the declared support");
    }
    s1 += z;
    s2 += z * z;
  }
  const double mean_hat = s1 / kDraws;
  const double m2_hat = s2 / kDraws;
  const double se_mean = std::sqrt(law.moments.variance / kDraws);
  const double se_m2 = std::sqrt(
      std::max(0.0, m4 - law.moments.variance * law.moments.variance) / kDraws);
  if (std::abs(mean_hat) > 5.0 * se_mean + 1e-9 ||
      std::abs(m2_hat - law.moments.variance) > 5.0 * se_m2 + 1e-9) {
    throw BadProbabilities("sampler moments disagree with the density");
  }
  return law;
}

IncrementLaw reverse(const IncrementLaw& law) {
  std::string name = law.name;
  const std::string suffix = "~rev";
  if (name.size() >= suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    name.erase(name.size() - suffix.size());
  } else {
    name += suffix;
  }

  if (law.is_lattice()) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(law.atoms.size());
    for (const auto& atom : law.atoms) pts.emplace_back(-atom.value, atom.prob);
    IncrementLaw rev = make_lattice_law(pts, law.moments.delta);
    rev.name = std::move(name);
    return rev;
  }

  auto density = law.density;
  auto sampler = law.sample_from_u01;
  IncrementLaw rev = make_nonlattice_law(
      name, [density](double z) { return density(-z); },
      [sampler](double u) { return -sampler(1.0 - u); }, -law.support_hi,
      -law.support_lo, law.moments.delta);
  return rev;
}

IncrementLaw builtin_law(const std::string& name) {
  if (name == "ssrw") {
    IncrementLaw law = make_lattice_law({{-1.0, 0.5}, {1.0, 0.5}});
    law.name = name;
    return law;
  }
  if (name == "trinomial") {
    IncrementLaw law =
        make_lattice_law({{-1.0, 0.25}, {0.0, 0.5}, {1.0, 0.25}});
    law.name = name;
    return law;
  }
  if (name == "skipfree") {
    IncrementLaw law = make_lattice_law({{-1.0, 2.0 / 3.0}, {2.0, 1.0 / 3.0}});
    law.name = name;
    return law;
  }
  if (name == "uniform") {
    return make_nonlattice_law(
        name, [](double z) { return (z >= -1.0 && z <= 1.0) ? 0.5 : 0.0; },
        [](double u) { return 2.0 * u - 1.0; }, -1.0, 1.0);
  }
  throw ConfigError("unknown law '" + name + "'");
}

IncrementLaw load_law_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open law file '" + path + "'");

  std::vector<std::pair<double, double>> points;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double value = 0.0, prob = 0.0;
    if (!(row >> value)) continue;  // blank or comment-only line
    if (!(row >> prob)) {
      throw IoError("law file '" + path + "' line " + std::to_string(lineno) +
                    ": expected `value prob`");
    }
    std::string extra;
    if (row >> extra) {
      throw IoError("law file '" + path + "' line " + std::to_string(lineno) +
                    ": trailing token '" + extra + "'");
    }
    points.emplace_back(value, prob);
  }
  if (points.empty()) throw IoError("law file '" + path + "' has no atoms");

  IncrementLaw law = make_lattice_law(points);
  const auto slash = path.find_last_of("/\\");
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos && dot > 0) stem.erase(dot);
  law.name = stem;
  return law;
}

double sample(const IncrementLaw& law, double u) {
  if (!law.is_lattice()) return law.sample_from_u01(u);
  double acc = 0.0;
  for (const auto& atom : law.atoms) {
    acc += atom.prob;
    if (u < acc) return atom.value;
  }
  return law.atoms.back().value;
}

double prob_abs_gt(const IncrementLaw& law, double v) {
  if (v < 0.0) return 1.0;
  if (law.is_lattice()) {
    double acc = 0.0;
    for (const auto& atom : law.atoms) {
      if (std::abs(atom.value) > v) acc += atom.prob;
    }
    return acc;
  }
  double acc = 0.0;
  if (-v > law.support_lo) {
    acc += quadrature::integrate(law.density, law.support_lo,
                                 std::min(-v, law.support_hi))
               .value;
  }
  if (v < law.support_hi) {
    acc += quadrature::integrate(law.density, std::max(v, law.support_lo),
                                 law.support_hi)
               .value;
  }
  return acc;
}

double prob_lt(const IncrementLaw& law, double threshold) {
  if (law.is_lattice()) {
    double acc = 0.0;
    for (const auto& atom : law.atoms) {
      if (atom.value < threshold) acc += atom.prob;
    }
    return acc;
  }
  if (threshold <= law.support_lo) return 0.0;
  return quadrature::integrate(law.density, law.support_lo,
                               std::min(threshold, law.support_hi))
      .value;
}

std::int64_t support_gcd_scaled(const IncrementLaw& law) {
  if (!law.is_lattice()) {
    throw UnsupportedLaw("support gcd is defined for lattice laws only");
  }
  std::int64_t g = 0;
  for (const auto& atom : law.atoms) g = std::gcd(g, std::llabs(atom.ivalue));
  return g;
}

}  // namespace condwalk
