#ifndef PERIOCULAR_LEARN_TREE_GROWER_HPP
#define PERIOCULAR_LEARN_TREE_GROWER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "periocular/common.hpp"
#include "periocular/learn.hpp"

namespace periocular::detail {

/// How a node's two accumulated statistics (a, b) score and what a leaf emits.
///   gini:          a = weight of +1 rows, b = weight of -1 rows
///   squared_error: a = sum w*t,           b = sum w
///   newton:        a = sum gradient,      b = sum hessian
/// A split's gain is score(left) + score(right) - score(parent).
enum class Criterion { gini, squared_error, newton };

/// Column-major copy of the design matrix with each column's row order
/// sorted by value (ties by row index). Built once, reused across rounds.
class SortedColumns {
 public:
  explicit SortedColumns(const Matrix& x);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double value(std::size_t col, std::size_t row) const noexcept { return values_[col * rows_ + row]; }
  std::span<const std::uint32_t> order(std::size_t col) const noexcept { return {order_.data() + col * rows_, rows_}; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
  std::vector<std::uint32_t> order_;
};

struct GrowParams {
  Criterion criterion = Criterion::gini;
  int max_depth = 3;      // 0 = unlimited
  int min_leaf = 1;       // minimum multiplicity per child
  int max_features = 0;   // 0 = all, else sampled per node
  double lambda = 0.0;    // newton only
  double min_child_weight = 0.0;  // newton only: minimum hessian per child
  /// Features this tree may split on, ascending; empty = all.
  std::vector<std::size_t> pool;
};

/// Grows one CART tree. `a`, `b` are per-row statistics, `count` per-row
/// multiplicities (0 excludes the row). Split search scans features in
/// ascending index and thresholds in ascending value; a candidate replaces the
/// incumbent only if it is better by more than a relative 1e-9, so ties go to
/// the lowest feature, then the lowest threshold.
Tree grow_tree(const SortedColumns& columns, const GrowParams& params, std::span<const double> a,
               std::span<const double> b, std::span<const double> count, Rng* rng);

double node_score(Criterion c, double a, double b, double lambda) noexcept;
double leaf_value(Criterion c, double a, double b, double lambda) noexcept;

/// True when `candidate` beats `incumbent` under the tie rule above.
inline bool better_gain(double candidate, double incumbent) noexcept {
  return candidate > incumbent + 1e-9 * std::abs(incumbent);
}

}  // namespace periocular::detail

#endif  // PERIOCULAR_LEARN_TREE_GROWER_HPP
