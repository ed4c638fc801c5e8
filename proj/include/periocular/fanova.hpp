#ifndef PERIOCULAR_FANOVA_HPP
#define PERIOCULAR_FANOVA_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace periocular {

/// Curves of one condition: one CCR-per-method vector per CV repetition.
struct CurveGroup {
  std::string label;
  std::vector<std::vector<double>> curves;
};

/// Euclidean norm over the L sampled points.
double curve_norm(const std::vector<double>& x);

/// sum over group pairs i < j of n_i * ||mean_i - mean_j||^2.
double fanova_statistic(const std::vector<CurveGroup>& groups);

struct FanovaResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n_boot = 0;
  std::uint64_t seed = 0;
  bool reject = false;  // p <= 0.05
};

/// Residual bootstrap test of equal group mean curves. Replicate b draws
/// from derive_seed(seed, b), so results do not depend on `jobs`.
FanovaResult fanova_test(const std::vector<CurveGroup>& groups, int n_boot, std::uint64_t seed, int jobs = 1);

/// CSV with a `group` column and one numeric column per curve point. Groups
/// keep first-appearance order. Throws DataError naming the line.
std::vector<CurveGroup> parse_curves_csv(std::string_view text);

std::string fanova_json(const FanovaResult& r);

}  // namespace periocular

#endif  // PERIOCULAR_FANOVA_HPP
