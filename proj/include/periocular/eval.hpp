#ifndef PERIOCULAR_EVAL_HPP
#define PERIOCULAR_EVAL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "periocular/dataset.hpp"
#include "periocular/learn.hpp"

namespace periocular {

/// Positive class is female (+1).
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  void add(int truth, int predicted) noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  double ccr = 0.0;
  double tpr = 0.0;  // 0 when there are no positives
  double tnr = 0.0;  // 0 when there are no negatives
  double mcc = 0.0;  // 0 when any marginal is empty
  /// MCC fell back to the zero-denominator convention.
  bool mcc_undefined = false;
};

/// Throws ArgumentError on an empty matrix.
Metrics metrics(const ConfusionCounts& c);

/// A fitted classifier seen as a function of (dataset, row).
using Predictor = std::function<int(const LabeledSet&, std::size_t)>;
/// Fits on the given set; may throw TrainingError for unusable data.
using Fitter = std::function<Predictor(const LabeledSet&, std::uint64_t seed)>;

/// Fitter that trains `config` and predicts from the row's features.
Fitter model_fitter(const LearnerConfig& config);

struct FoldResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  bool skipped = false;
  std::string reason;  // why a skipped fold was skipped
  ConfusionCounts counts;
  Metrics metrics;
};

struct CvResult {
  std::vector<FoldResult> folds;
  std::size_t folds_used = 0;
  double mean_ccr = 0.0;
  double stdev_ccr = 0.0;  // sample stdev over used folds; 0 with fewer than two
};

/// Rows of `data` whose subject is in `subjects`, in data order.
std::vector<std::size_t> rows_for_subjects(const LabeledSet& data, const std::vector<std::string>& subjects);

/// Runs every fold of the plan. Fold f trains with derive_seed(seed, f).
/// Throws InvariantError if a subject appears on both sides of a fold.
CvResult cross_validate(const LabeledSet& data, const SplitPlan& plan, const Fitter& fit, std::uint64_t seed,
                        int jobs = 1);

/// Mean and sample standard deviation.
std::pair<double, double> mean_stdev(const std::vector<double>& values);

struct GridPoint {
  double C = 0.0;
  double gamma = 0.0;
  double mean_ccr = 0.0;
};

struct EvalReport {
  LearnerConfig config;        // after grid selection
  std::vector<GridPoint> grid;  // empty unless the SVM grid ran
  CvResult cv;
  std::optional<ConfusionCounts> test_counts;  // absent when the final fit was impossible
  std::optional<Metrics> test;
  std::string test_failure;
  std::uint64_t seed = 0;
  std::uint64_t test_seed = 0;
  std::size_t n_train_rows = 0;
  std::size_t n_test_rows = 0;
};

/// Full protocol: optional SVM grid on the folds, cross-validation of the
/// chosen configuration, then one fit on all train subjects scored once on
/// the held-out test subjects.
EvalReport evaluate(const LabeledSet& data, const SplitPlan& plan, const LearnerConfig& config, std::uint64_t seed,
                    int jobs = 1);

/// Same protocol with an arbitrary fitter (no grid).
EvalReport evaluate_with(const LabeledSet& data, const SplitPlan& plan, const Fitter& fit, std::uint64_t seed,
                         int jobs = 1);

/// Deterministic JSON rendering of a report (no timestamps).
std::string report_json(const EvalReport& report);

struct TableRow {
  std::string method;
  std::string condition;
  Metrics metrics;
  std::optional<std::pair<double, double>> cv;  // fold CCR mean, stdev
};

/// CSV `method,condition,ccr,tpr,tnr,mcc,cv_mean,cv_stdev`. Rates print as
/// percentages with two decimals, MCC with four; rows keep input order.
std::string emit_table(const std::vector<TableRow>& rows);

}  // namespace periocular

#endif  // PERIOCULAR_EVAL_HPP
