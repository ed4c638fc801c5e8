#include "tree_grower.hpp"

#include <algorithm>
#include <numeric>

namespace periocular::detail {

SortedColumns::SortedColumns(const Matrix& x)
    : rows_(x.rows()), cols_(x.cols()), values_(x.rows() * x.cols()), order_(x.rows() * x.cols()) {
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < cols_; ++c) values_[c * rows_ + r] = row[c];
  }
  for (std::size_t c = 0; c < cols_; ++c) {
    auto* first = order_.data() + c * rows_;
    std::iota(first, first + rows_, 0u);
    const double* col = values_.data() + c * rows_;
    std::stable_sort(first, first + rows_, [col](std::uint32_t i, std::uint32_t j) { return col[i] < col[j]; });
  }
}

double node_score(Criterion c, double a, double b, double lambda) noexcept {
  switch (c) {
    case Criterion::gini: {
      const double w = a + b;
      return w > 0.0 ? (a * a + b * b) / w : 0.0;
    }
    case Criterion::squared_error:
      return b > 0.0 ? a * a / b : 0.0;
    case Criterion::newton:
      return 0.5 * a * a / (b + lambda);
  }
  return 0.0;
}

double leaf_value(Criterion c, double a, double b, double lambda) noexcept {
  switch (c) {
    case Criterion::gini: {
      const double w = a + b;
      return w > 0.0 ? (a - b) / w : 0.0;
    }
    case Criterion::squared_error:
      return b > 0.0 ? a / b : 0.0;
    case Criterion::newton:
      return -a / (b + lambda);
  }
  return 0.0;
}

namespace {

class Grower {
 public:
  Grower(const SortedColumns& columns, const GrowParams& params, std::span<const double> a, std::span<const double> b,
         std::span<const double> count, Rng* rng)
      : cols_(columns), p_(params), a_(a), b_(b), count_(count), rng_(rng), goes_left_(columns.rows(), 0) {
    if (p_.pool.empty()) {
      p_.pool.resize(cols_.cols());
      std::iota(p_.pool.begin(), p_.pool.end(), 0);
    }
  }

  // Per-feature row lists are indexed by position in the pool.
  Tree run() {
    const std::size_t d = p_.pool.size();
    std::size_t m = 0;
    for (std::size_t r = 0; r < cols_.rows(); ++r) m += count_[r] > 0.0;
    std::vector<std::uint32_t> lists;
    lists.reserve(d * m);
    for (std::size_t f = 0; f < d; ++f) {
      for (std::uint32_t r : cols_.order(p_.pool[f])) {
        if (count_[r] > 0.0) lists.push_back(r);
      }
    }
    if (m == 0) throw TrainingError("cannot grow a tree on an empty sample");
    build(std::move(lists), m, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int build(std::vector<std::uint32_t> lists, std::size_t m, int depth) {
    const std::size_t d = p_.pool.size();
    double A = 0.0, B = 0.0, C = 0.0;
    // Any one feature's list holds the node's rows; use the first.
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = lists[i];
      A += a_[r];
      B += b_[r];
      C += count_[r];
    }
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    {
      auto& node = tree_.nodes.back();
      node.value = leaf_value(p_.criterion, A, B, p_.lambda);
      node.cover = p_.criterion == Criterion::gini ? A + B : B;
    }

    const bool depth_reached = p_.max_depth > 0 && depth >= p_.max_depth;
    const bool pure = p_.criterion == Criterion::gini && (A == 0.0 || B == 0.0);
    if (depth_reached || pure || m < 2 || C < 2.0 * p_.min_leaf) return index;

    const Split split = find_split(lists, m, A, B, C);
    if (split.feature < 0) return index;

    std::size_t m_left = 0;
    {
      const auto rows = std::span<const std::uint32_t>(lists.data(), m);
      for (auto r : rows) {
        goes_left_[r] = cols_.value(static_cast<std::size_t>(split.feature), r) <= split.threshold;
        m_left += goes_left_[r];
      }
    }
    const std::size_t m_right = m - m_left;
    std::vector<std::uint32_t> left(d * m_left), right(d * m_right);
    for (std::size_t f = 0; f < d; ++f) {
      auto* l = left.data() + f * m_left;
      auto* r = right.data() + f * m_right;
      for (std::size_t i = 0; i < m; ++i) {
        const auto row = lists[f * m + i];
        if (goes_left_[row]) {
          *l++ = row;
        } else {
          *r++ = row;
        }
      }
    }
    lists.clear();
    lists.shrink_to_fit();

    const int left_index = build(std::move(left), m_left, depth + 1);
    const int right_index = build(std::move(right), m_right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.gain = split.gain;
    node.left = left_index;
    node.right = right_index;
    return index;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = p_.pool.size();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    if (p_.max_features > 0 && static_cast<std::size_t>(p_.max_features) < d && rng_ != nullptr) {
      const auto k = static_cast<std::size_t>(p_.max_features);
      for (std::size_t i = 0; i < k; ++i) std::swap(features[i], features[i + rng_->index(d - i)]);
      features.resize(k);
      std::sort(features.begin(), features.end());
    }
    return features;
  }

  Split find_split(const std::vector<std::uint32_t>& lists, std::size_t m, double A, double B, double C) {
    const double parent = node_score(p_.criterion, A, B, p_.lambda);
    const bool newton = p_.criterion == Criterion::newton;
    Split best;
    double best_noise = 0.0;
    for (std::size_t f : candidate_features()) {
      const auto* list = lists.data() + f * m;
      double aL = 0.0, bL = 0.0, cL = 0.0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto r = list[i];
        aL += a_[r];
        bL += b_[r];
        cL += count_[r];
        const double v = cols_.value(p_.pool[f], r);
        const double next = cols_.value(p_.pool[f], list[i + 1]);
        if (v == next) continue;
        if (cL < p_.min_leaf || C - cL < p_.min_leaf) continue;
        const double bR = B - bL;
        if (newton && (bL < p_.min_child_weight || bR < p_.min_child_weight)) continue;
        const double sL = node_score(p_.criterion, aL, bL, p_.lambda);
        const double sR = node_score(p_.criterion, A - aL, bR, p_.lambda);
        const double gain = sL + sR - parent;
        if (better_gain(gain, best.gain)) {
          double t = v + (next - v) / 2.0;
          if (t >= next) t = v;
          best = {static_cast<int>(p_.pool[f]), t, gain};
          best_noise = 1e-12 * (std::abs(sL) + std::abs(sR) + std::abs(parent));
        }
      }
    }
    if (best.feature >= 0 && best.gain <= best_noise) best.feature = -1;
    return best;
  }

  const SortedColumns& cols_;
  GrowParams p_;
  std::span<const double> a_, b_, count_;
  Rng* rng_;
  std::vector<std::uint8_t> goes_left_;
  Tree tree_;
};

}  // namespace

Tree grow_tree(const SortedColumns& columns, const GrowParams& params, std::span<const double> a,
               std::span<const double> b, std::span<const double> count, Rng* rng) {
  return Grower(columns, params, a, b, count, rng).run();
}

}  // namespace periocular::detail
