// Shared synthetic inputs for unit and acceptance tests.
#ifndef PERIOCULAR_TEST_FIXTURES_HPP
#define PERIOCULAR_TEST_FIXTURES_HPP

#include <cmath>
#include <vector>

#include "periocular/common.hpp"
#include "periocular/fanova.hpp"

namespace fixture {

// A group of CCR-like curves: a smooth mean profile plus correlated noise
// (shared per-curve offset and independent per-point jitter).
inline periocular::CurveGroup ccr_curves(const std::string& label, std::size_t n, std::size_t length,
                                         periocular::Rng& rng, double shift = 0.0) {
  periocular::CurveGroup g;
  g.label = label;
  for (std::size_t i = 0; i < n; ++i) {
    const double offset = 0.006 * rng.normal();
    std::vector<double> c(length);
    for (std::size_t t = 0; t < length; ++t) {
      c[t] = 0.8 + 0.05 * std::sin(static_cast<double>(t)) + shift + offset + 0.01 * rng.normal();
    }
    g.curves.push_back(std::move(c));
  }
  return g;
}

// Fraction of `reps` same-distribution comparisons that reject at 5%.
inline double fanova_rejection_rate(int reps, std::size_t n_per_group, std::size_t length, int n_boot,
                                    std::uint64_t seed) {
  int rejected = 0;
  for (int r = 0; r < reps; ++r) {
    periocular::Rng rng(periocular::derive_seed(seed, static_cast<std::uint64_t>(r)));
    const std::vector<periocular::CurveGroup> groups{ccr_curves("a", n_per_group, length, rng),
                                                     ccr_curves("b", n_per_group, length, rng)};
    rejected += periocular::fanova_test(groups, n_boot, periocular::derive_seed(seed + 1, r)).reject;
  }
  return static_cast<double>(rejected) / reps;
}

}  // namespace fixture

#endif  // PERIOCULAR_TEST_FIXTURES_HPP
