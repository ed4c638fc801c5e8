#ifndef PERIOCULAR_LEARN_HPP
#define PERIOCULAR_LEARN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "periocular/features.hpp"

namespace periocular {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  void append_row(std::span<const double> values);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Training/evaluation data: one row per image, labels in {-1 (male), +1 (female)}.
struct LabeledSet {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> subjects;
  std::string spec_id;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return x.cols(); }

  static LabeledSet from_vectors(const std::vector<FeatureVector>& vectors, std::vector<int> labels,
                                 std::vector<std::string> subjects);

  /// Throws ArgumentError unless the lists align, labels are +/-1 and there
  /// are at least two rows; with require_both_classes, TrainingError if only
  /// one class is present.
  void validate(bool require_both_classes) const;

  LabeledSet subset(std::span<const std::size_t> rows) const;
  /// Keeps only the given columns, in order; the result carries `new_spec_id`.
  LabeledSet select_columns(std::span<const std::size_t> cols, std::string new_spec_id) const;

  std::size_t count(int label) const noexcept;
};

enum class ModelKind { svm, tree, bagging, random_forest, adaboost_m1, logitboost, gentleboost, rusboost, gbt };

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view name);
bool is_ensemble(ModelKind k) noexcept;

struct SvmParams {
  double C = 1.0;
  double gamma = 1.0;
  double tol = 1e-3;
  /// Z-score every feature with training-set statistics before the kernel.
  bool standardize = false;
};

struct TreeParams {
  int max_depth = 8;
  int min_leaf = 1;
  /// Candidate features per split; 0 means all.
  int max_features = 0;
};

struct EnsembleParams {
  int n_learners = 100;
  double learning_rate = 0.1;
  /// Depth of each weak learner; 0 grows until pure or min_leaf.
  int max_depth = 3;
  int min_leaf = 1;
  /// Worker threads for bagging / random forest.
  int jobs = 1;
};

struct GbtParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double lambda = 1.0;
  int min_leaf = 1;
  /// Minimum hessian sum in a child.
  double min_child_weight = 1.0;
  /// Fraction of features each tree may split on, drawn per round from
  /// derive_seed(seed, round); 1 uses every feature and ignores the seed.
  double colsample = 1.0;
};

/// One node of a binary decision tree. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  double gain = 0.0;   // impurity / loss reduction of the split
  double cover = 0.0;  // sample weight reaching the node

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const double> x) const;
  bool operator==(const Tree&) const = default;
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  bool empty() const noexcept { return mean.empty(); }
  static Standardizer fit(const Matrix& x);
  void apply(std::span<const double> in, std::span<double> out) const;
  bool operator==(const Standardizer&) const = default;
};

struct SvmState {
  Standardizer standardizer;
  Matrix support_vectors;     // already standardized
  std::vector<double> coef;   // alpha_i * y_i
  double bias = 0.0;
  double gamma = 1.0;
  std::size_t iterations = 0;
  bool converged = true;
  bool operator==(const SvmState&) const = default;
};

struct TreeState {
  Tree tree;
  bool operator==(const TreeState&) const = default;
};

/// Bagging / forest learners vote with alpha 1; boosting learners carry their
/// stage weights.
struct EnsembleState {
  std::vector<Tree> learners;
  std::vector<double> alphas;
  bool operator==(const EnsembleState&) const = default;
};

struct GbtState {
  std::vector<Tree> trees;  // leaf values already include the learning rate
  double base_margin = 0.0;
  bool operator==(const GbtState&) const = default;
};

struct Prediction {
  int label = 1;
  double score = 0.0;  // SVM margin, vote fraction, boosted margin or logit
};

class TrainedModel {
 public:
  ModelKind kind = ModelKind::svm;
  std::string config_json;
  std::uint64_t seed = 0;
  std::string spec_id;
  std::size_t dim = 0;
  std::variant<SvmState, TreeState, EnsembleState, GbtState> state;

  /// Throws UsageError when the vector's spec differs from the training spec.
  Prediction predict(const FeatureVector& x) const;
  Prediction predict_row(std::span<const double> x) const;

  std::string to_json() const;
  static TrainedModel from_json(std::string_view text);
};

/// Per-round bookkeeping for audits; trainers fill it when given one.
struct TrainingLog {
  std::vector<double> weight_sums;                  // boosting distribution mass after each round
  std::vector<std::pair<std::size_t, std::size_t>> class_counts;  // (+1, -1) rows each learner saw
  std::vector<std::vector<std::size_t>> resamples;  // bagging / forest bootstrap rows
  std::vector<double> losses;                       // GBT training log-loss after each round
  std::size_t rounds = 0;
};

TrainedModel train_svm(const LabeledSet& data, const SvmParams& params, std::uint64_t seed);
TrainedModel train_tree(const LabeledSet& data, const TreeParams& params, std::uint64_t seed);
TrainedModel train_ensemble(ModelKind kind, const LabeledSet& data, const EnsembleParams& params, std::uint64_t seed,
                            TrainingLog* log = nullptr);
TrainedModel train_gbt(const LabeledSet& data, const GbtParams& params, std::uint64_t seed,
                       TrainingLog* log = nullptr);

Prediction predict(const TrainedModel& model, const FeatureVector& x);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij of an
/// SVM's solution over its training data (non-support rows have alpha 0).
double svm_dual_objective(const TrainedModel& model);

/// Learner choice plus hyperparameters, as used by the evaluation pipeline.
struct LearnerConfig {
  ModelKind kind = ModelKind::svm;
  SvmParams svm{1.0, 0.0, 1e-3, true};  // gamma 0 means 1/d
  /// Pick C and gamma on the CV folds from {1,10,100} x {1/d, 2/d, 4/d}.
  bool svm_grid = false;
  TreeParams tree;
  EnsembleParams ensemble;
  GbtParams gbt;

  std::string to_json() const;
};

/// Default ensemble settings for a kind (900 trees for random forest).
EnsembleParams default_ensemble_params(ModelKind kind);

TrainedModel train(const LearnerConfig& config, const LabeledSet& data, std::uint64_t seed);

}  // namespace periocular

#endif  // PERIOCULAR_LEARN_HPP
