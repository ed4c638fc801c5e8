#ifndef PERIOCULAR_RELEVANCE_HPP
#define PERIOCULAR_RELEVANCE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "periocular/features.hpp"
#include "periocular/image.hpp"
#include "periocular/learn.hpp"

namespace periocular {

enum class Normalization { raw_gain, unit_sum };

/// Per-feature relevance aligned with a feature spec.
struct ImportanceMap {
  std::vector<double> scores;
  Normalization normalization = Normalization::unit_sum;
  std::string spec_id;

  std::size_t size() const noexcept { return scores.size(); }
  /// Features that appear in at least one split.
  std::size_t nonzero() const noexcept;
};

/// Sum of split gains per feature over every tree of a GBT model.
ImportanceMap gbt_split_gains(const TrainedModel& model);
/// gbt_split_gains rescaled to unit sum (left all-zero if nothing was split).
ImportanceMap importance_from_gbt(const TrainedModel& model);

/// Indices with score >= threshold, by descending score then ascending index.
std::vector<std::size_t> select_by_threshold(const ImportanceMap& imp, double threshold);
/// The first n indices of the full ranking.
std::vector<std::size_t> top_features(const ImportanceMap& imp, std::size_t n);

struct SelectionResult {
  double threshold = 0.0;
  std::vector<std::size_t> selected;
  std::size_t n_selected = 0;
  /// How many of the selected features were ever split on.
  std::size_t n_nonzero = 0;
  double ccr = 0.0;
  /// Nothing selected: ccr is the rate of the training majority class on test.
  bool degenerate = false;
};

struct SweepResult {
  ImportanceMap importance;
  std::vector<SelectionResult> entries;
};

/// Fits one GBT on `train`, then for every threshold retrains `retrain` on
/// the selected columns and scores it on `test`. Entry i trains with seed
/// derive_seed(seed, i); entries run on up to `jobs` threads.
SweepResult threshold_sweep(const LabeledSet& train, const LabeledSet& test, const std::vector<double>& thresholds,
                            const GbtParams& gbt, const LearnerConfig& retrain, std::uint64_t seed, int jobs = 1);

/// Fig. 4-style overlay: the pixel loci of the top_n features painted pure
/// blue over the grayscale base. Throws UsageError when the spec has no
/// pixel loci, ArgumentError when the base size does not fit the spec.
RgbImage render_overlay(const ImportanceMap& imp, const FeatureSpec& spec, std::size_t top_n, const GrayImage& base);

/// `threshold,n_selected,ccr` rows, one per entry, in order.
std::string sweep_csv(const std::vector<SelectionResult>& entries);

}  // namespace periocular

#endif  // PERIOCULAR_RELEVANCE_HPP
