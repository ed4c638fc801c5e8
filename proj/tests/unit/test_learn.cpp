#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "periocular/common.hpp"
#include "periocular/learn.hpp"
#include "qp_oracle.hpp"

using namespace periocular;

namespace {

using Rows = std::vector<std::vector<double>>;

LabeledSet make_set(const Rows& x, const std::vector<int>& y, std::string spec = "test") {
  LabeledSet s;
  s.x = Matrix(0, x.front().size());
  for (const auto& r : x) s.x.append_row(r);
  s.y = y;
  for (std::size_t i = 0; i < y.size(); ++i) s.subjects.push_back("s" + std::to_string(i));
  s.spec_id = std::move(spec);
  return s;
}

// Two noisy Gaussian blobs in d dimensions, labels balanced unless `pos_share` says otherwise.
LabeledSet blobs(std::size_t n, std::size_t d, double sep, std::uint64_t seed, double pos_share = 0.5) {
  Rng rng(seed);
  Rows x;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<double>(i) < pos_share * static_cast<double>(n) ? 1 : -1;
    std::vector<double> row(d);
    for (auto& v : row) v = rng.normal() + (label > 0 ? sep : 0.0);
    x.push_back(row);
    y.push_back(label);
  }
  return make_set(x, y);
}

double training_accuracy(const TrainedModel& m, const LabeledSet& s) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ok += m.predict_row(s.x.row(i)).label == s.y[i];
  return static_cast<double>(ok) / static_cast<double>(s.size());
}

std::vector<double> svm_alphas_full(const TrainedModel& m, const LabeledSet& s) {
  // Map stored support vectors back to training rows (inputs are distinct).
  const auto& st = std::get<SvmState>(m.state);
  std::vector<double> alpha(s.size(), 0.0);
  for (std::size_t k = 0; k < st.coef.size(); ++k) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<double> z(s.dim());
      if (st.standardizer.empty()) {
        z.assign(s.x.row(i).begin(), s.x.row(i).end());
      } else {
        st.standardizer.apply(s.x.row(i), z);
      }
      const auto sv = st.support_vectors.row(k);
      if (std::equal(z.begin(), z.end(), sv.begin())) alpha[i] = std::abs(st.coef[k]);
    }
  }
  return alpha;
}

}  // namespace

TEST_CASE("labeled set validation") {
  CHECK_THROWS_AS(make_set({{0.0}, {1.0}}, {1, 1}).validate(true), TrainingError);
  CHECK_NOTHROW(make_set({{0.0}, {1.0}}, {1, 1}).validate(false));
  CHECK_THROWS_AS(make_set({{0.0}}, {1}).validate(false), ArgumentError);
  CHECK_THROWS_AS(make_set({{0.0}, {1.0}}, {1, 0}).validate(false), ArgumentError);
  auto s = make_set({{0.0, 1.0}, {1.0, 2.0}, {3.0, 4.0}}, {1, -1, 1});
  const std::vector<std::size_t> cols{1};
  const auto t = s.select_columns(cols, "sub");
  CHECK(t.dim() == 1);
  CHECK(t.x(2, 0) == 4.0);
  const std::vector<std::size_t> rows{2, 0};
  CHECK(s.subset(rows).y == std::vector<int>{1, 1});
  CHECK(parse_model_kind("random_forest") == ModelKind::random_forest);
  CHECK_THROWS_AS(parse_model_kind("lpboost"), ArgumentError);
}

TEST_CASE("svm separable pair") {
  const auto s = make_set({{0.0}, {1.0}}, {-1, 1});
  const auto m = train_svm(s, {1000.0, 1.0, 1e-3, false}, 1);
  CHECK(m.predict_row(s.x.row(0)).label == -1);
  CHECK(m.predict_row(s.x.row(1)).label == 1);
  CHECK_THROWS_AS(train_svm(make_set({{0.0}, {1.0}}, {1, 1}), {}, 1), TrainingError);
  CHECK_THROWS_AS(train_svm(s, {1.0, 1.0, 0.5, false}, 1), ArgumentError);
}

TEST_CASE("svm matches the dense QP oracle on tiny problems") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng.index(6);
    Rows x;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
      y.push_back(i == 0 ? 1 : i == 1 ? -1 : (rng.uniform() < 0.5 ? 1 : -1));
    }
    const double C = trial % 2 ? 1.0 : 10.0;
    const double gamma = 0.5;
    const auto s = make_set(x, y);
    const auto m = train_svm(s, {C, gamma, 1e-6, false}, 7);
    const auto ref = oracle::solve_svm_dual(x, y, C, gamma);
    CHECK(std::abs(svm_dual_objective(m) - ref.objective) <= 1e-3);
    for (int p = 0; p < 100; ++p) {
      const std::vector<double> probe{rng.uniform(-3, 3), rng.uniform(-3, 3)};
      const double f_ref = oracle::decision(ref, x, y, gamma, probe);
      if (std::abs(f_ref) < 1e-3) continue;
      CHECK(m.predict_row(probe).label == (f_ref >= 0 ? 1 : -1));
    }
  }
}

TEST_CASE("svm KKT conditions hold at termination") {
  const auto s = blobs(60, 3, 1.5, 5);
  const double C = 2.0, gamma = 0.3, tol = 1e-3;
  const auto m = train_svm(s, {C, gamma, tol, false}, 1);
  const auto& st = std::get<SvmState>(m.state);
  CHECK(st.converged);
  const auto alpha = svm_alphas_full(m, s);
  // With b fixed, the violation of each point's KKT condition is bounded by
  // the maximal-violating-pair gap, which SMO drives below tol.
  double max_up = -1e300, min_low = 1e300;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(alpha[i] >= 0.0);
    CHECK(alpha[i] <= C);
    const double f = m.predict_row(s.x.row(i)).score - st.bias;
    const double grad = s.y[i] * f - 1.0;  // gradient of the dual in alpha_i
    const double yg = -s.y[i] * grad;
    const bool up = (s.y[i] > 0 && alpha[i] < C) || (s.y[i] < 0 && alpha[i] > 0);
    const bool low = (s.y[i] > 0 && alpha[i] > 0) || (s.y[i] < 0 && alpha[i] < C);
    if (up) max_up = std::max(max_up, yg);
    if (low) min_low = std::min(min_low, yg);
  }
  CHECK(max_up - min_low <= tol + 1e-9);
}

TEST_CASE("svm decision sign survives duplicating the training set") {
  const auto s = blobs(30, 2, 1.0, 11);
  auto doubled = s;
  for (std::size_t i = 0; i < s.size(); ++i) {
    doubled.x.append_row(s.x.row(i));
    doubled.y.push_back(s.y[i]);
    doubled.subjects.push_back(s.subjects[i]);
  }
  // Duplicates share the C budget: C on the doubled set equals C/2 per copy.
  const auto a = train_svm(s, {4.0, 0.5, 1e-6, false}, 1);
  const auto b = train_svm(doubled, {2.0, 0.5, 1e-6, false}, 1);
  int agree = 0, total = 0;
  for (double u = -3; u <= 4; u += 0.25) {
    for (double v = -3; v <= 4; v += 0.25) {
      const std::vector<double> probe{u, v};
      const double fa = a.predict_row(probe).score;
      if (std::abs(fa) < 1e-3) continue;
      ++total;
      agree += (fa >= 0) == (b.predict_row(probe).score >= 0);
    }
  }
  CHECK(agree == total);
}

TEST_CASE("svm label flip mirrors the score") {
  const auto s = blobs(40, 2, 1.2, 21);
  auto flipped = s;
  for (auto& v : flipped.y) v = -v;
  const auto a = train_svm(s, {1.0, 0.5, 1e-6, true}, 3);
  const auto b = train_svm(flipped, {1.0, 0.5, 1e-6, true}, 3);
  Rng rng(4);
  for (int p = 0; p < 50; ++p) {
    const std::vector<double> probe{rng.uniform(-2, 3), rng.uniform(-2, 3)};
    const double fa = a.predict_row(probe).score, fb = b.predict_row(probe).score;
    CHECK(fa == doctest::Approx(-fb).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("tree finds a perfect split on feature 3") {
  Rng rng(8);
  Rows x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> row(5);
    for (auto& v : row) v = rng.uniform();
    row[3] = i < 20 ? rng.uniform(0.0, 0.45) : rng.uniform(0.55, 1.0);
    x.push_back(row);
    y.push_back(i < 20 ? -1 : 1);
  }
  const auto s = make_set(x, y);
  const auto m = train_tree(s, {4, 1, 0}, 1);
  const auto& tree = std::get<TreeState>(m.state).tree;
  CHECK(tree.nodes[0].feature == 3);
  CHECK(tree.nodes[0].threshold > 0.45);
  CHECK(tree.nodes[0].threshold < 0.55);
  CHECK(tree.nodes.size() == 3);  // both children pure
  CHECK(training_accuracy(m, s) == 1.0);
}

TEST_CASE("tree root split matches the exhaustive gini oracle") {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    Rows x;
    std::vector<int> y;
    for (int i = 0; i < 8; ++i) {
      // Coarse values force ties between thresholds and features.
      x.push_back({static_cast<double>(rng.index(4)), static_cast<double>(rng.index(4)),
                   static_cast<double>(rng.index(4))});
      y.push_back(i < 2 ? (i == 0 ? 1 : -1) : (rng.uniform() < 0.5 ? 1 : -1));
    }
    const auto expected = oracle::best_gini_split(x, y);
    const auto m = train_tree(make_set(x, y), {1, 1, 0}, 1);
    const auto& root = std::get<TreeState>(m.state).tree.nodes[0];
    CHECK(root.feature == expected.feature);
    if (expected.feature >= 0) {
      CHECK(root.threshold == expected.threshold);
      CHECK(root.gain == doctest::Approx(expected.gain).epsilon(1e-12));
    }
  }
}

TEST_CASE("trees never split pure or undersized nodes and every gain is positive") {
  const auto s = blobs(80, 4, 0.8, 77);
  const auto m = train_tree(s, {8, 5, 0}, 1);
  const auto& nodes = std::get<TreeState>(m.state).tree.nodes;
  for (const auto& n : nodes) {
    if (n.is_leaf()) {
      CHECK(n.cover >= 5);
    } else {
      CHECK(n.gain > 0.0);
      CHECK(std::abs(n.value) < 1.0);  // internal nodes are impure
      CHECK(nodes[static_cast<std::size_t>(n.left)].cover >= 5);
      CHECK(nodes[static_cast<std::size_t>(n.right)].cover >= 5);
    }
  }
}

TEST_CASE("adaboost reaches zero training error with one perfect stump") {
  const auto s = make_set({{0.0, 5.0}, {1.0, 3.0}, {2.0, 1.0}, {3.0, 4.0}, {4.0, 2.0}, {5.0, 0.0}},
                          {-1, -1, -1, 1, 1, 1});
  TrainingLog log;
  const auto m = train_ensemble(ModelKind::adaboost_m1, s, {10, 0.1, 1, 1, 1}, 1, &log);
  CHECK(log.rounds == 1);
  CHECK(training_accuracy(m, s) == 1.0);
}

TEST_CASE("boosting weights stay a distribution") {
  const auto s = blobs(100, 3, 0.7, 5);
  for (auto kind : {ModelKind::adaboost_m1, ModelKind::logitboost, ModelKind::gentleboost, ModelKind::rusboost}) {
    TrainingLog log;
    train_ensemble(kind, s, {25, 0.1, 2, 1, 1}, 9, &log);
    CHECK(!log.weight_sums.empty());
    for (double w : log.weight_sums) CHECK(std::abs(w - 1.0) <= 1e-12);
  }
}

TEST_CASE("bagging with one learner equals a tree on its resample") {
  const auto s = blobs(50, 3, 0.9, 31);
  TrainingLog log;
  const auto m = train_ensemble(ModelKind::bagging, s, {1, 0.1, 0, 1, 1}, 42, &log);
  REQUIRE(log.resamples.size() == 1);
  const auto resample = s.subset(log.resamples[0]);
  const auto tree = train_tree(resample, {64, 1, 0}, 42);
  const auto& bagged = std::get<EnsembleState>(m.state).learners[0];
  const auto& single = std::get<TreeState>(tree.state).tree;
  Rng rng(3);
  for (int p = 0; p < 200; ++p) {
    std::vector<double> probe{rng.uniform(-2, 3), rng.uniform(-2, 3), rng.uniform(-2, 3)};
    CHECK(bagged.evaluate(probe) == single.evaluate(probe));
  }
}

TEST_CASE("rusboost rounds see balanced classes") {
  const auto s = blobs(200, 3, 1.0, 17, 0.1);
  TrainingLog log;
  train_ensemble(ModelKind::rusboost, s, {30, 0.1, 2, 1, 1}, 5, &log);
  REQUIRE(!log.class_counts.empty());
  for (const auto& [pos, neg] : log.class_counts) {
    CHECK(pos == 20);
    CHECK(neg == 20);
  }
}

TEST_CASE("bagging and forest are reproducible for any worker count") {
  const auto s = blobs(60, 9, 0.8, 2);
  for (auto kind : {ModelKind::bagging, ModelKind::random_forest}) {
    const auto a = train_ensemble(kind, s, {12, 0.1, 0, 1, 1}, 77);
    const auto b = train_ensemble(kind, s, {12, 0.1, 0, 1, 3}, 77);
    CHECK(std::get<EnsembleState>(a.state) == std::get<EnsembleState>(b.state));
  }
  CHECK_THROWS_AS(train_ensemble(ModelKind::svm, s, {}, 1), ArgumentError);
  CHECK_THROWS_AS(train_ensemble(ModelKind::bagging, s, {0, 0.1, 0, 1, 1}, 1), ArgumentError);
  CHECK_THROWS_AS(train_ensemble(ModelKind::adaboost_m1, s, {5, 1.5, 1, 1, 1}, 1), ArgumentError);
}

TEST_CASE("ensemble score equals a manual tally over serialized learners") {
  const auto s = blobs(80, 3, 0.8, 44);
  for (auto kind : {ModelKind::random_forest, ModelKind::adaboost_m1, ModelKind::gentleboost}) {
    const auto m = train_ensemble(kind, s, {15, 0.1, 3, 1, 1}, 6);
    const auto restored = TrainedModel::from_json(m.to_json());
    const auto& st = std::get<EnsembleState>(restored.state);
    Rng rng(1);
    for (int p = 0; p < 30; ++p) {
      std::vector<double> probe{rng.uniform(-2, 3), rng.uniform(-2, 3), rng.uniform(-2, 3)};
      double num = 0, den = 0;
      for (std::size_t l = 0; l < st.learners.size(); ++l) {
        const double v = st.learners[l].evaluate(probe);
        num += st.alphas[l] * (kind == ModelKind::gentleboost ? v : (v >= 0 ? 1.0 : -1.0));
        den += st.alphas[l];
      }
      const double expected = kind == ModelKind::gentleboost ? num : num / den;
      CHECK(m.predict_row(probe).score == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("gbt one stump separates separable data") {
  const auto s = make_set({{0.0}, {1.0}, {2.0}, {3.0}, {10.0}, {11.0}, {12.0}, {13.0}}, {-1, -1, -1, -1, 1, 1, 1, 1});
  const auto m = train_gbt(s, {1, 0.1, 1, 1.0, 1, 0.0}, 1);
  CHECK(training_accuracy(m, s) == 1.0);
}

TEST_CASE("gbt training loss never increases") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = blobs(80, 5, 0.3, seed);
    TrainingLog log;
    train_gbt(s, {60, 0.9, 4, 0.0, 1, 0.0}, seed, &log);
    for (std::size_t i = 1; i < log.losses.size(); ++i) CHECK(log.losses[i] <= log.losses[i - 1]);
  }
}

TEST_CASE("gbt first split matches the exhaustive gain oracle") {
  Rng rng(606);
  for (int trial = 0; trial < 50; ++trial) {
    Rows x;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
      x.push_back({rng.uniform(), std::floor(rng.uniform(0, 5)), rng.uniform()});
      y.push_back(i < 2 ? (i == 0 ? 1 : -1) : (rng.uniform() < 0.5 ? 1 : -1));
    }
    const double lambda = trial % 3 == 0 ? 0.0 : 1.0;
    const double mcw = trial % 2 ? 1.0 : 0.0;
    const auto expected = oracle::best_newton_split(x, y, lambda, mcw);
    const auto m = train_gbt(make_set(x, y), {1, 0.3, 1, lambda, 1, mcw}, 1);
    const auto& root = std::get<GbtState>(m.state).trees[0].nodes[0];
    CHECK(root.feature == expected.feature);
    if (expected.feature >= 0) {
      CHECK(root.threshold == expected.threshold);
      CHECK(root.gain == doctest::Approx(expected.gain).epsilon(1e-12));
    }
  }
}

TEST_CASE("gbt column sampling restricts each tree to its drawn features") {
  const auto s = blobs(60, 10, 1.0, 12);
  // One column per tree: every split of a tree uses the same feature.
  const GbtParams one{40, 0.3, 3, 1.0, 1, 0.0, 0.1};
  const auto m = train_gbt(s, one, 5);
  std::set<int> used;
  for (const auto& t : std::get<GbtState>(m.state).trees) {
    std::set<int> in_tree;
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) in_tree.insert(n.feature);
    }
    CHECK(in_tree.size() <= 1);
    used.insert(in_tree.begin(), in_tree.end());
  }
  CHECK(used.size() > 3);
  CHECK(std::get<GbtState>(train_gbt(s, one, 5).state) == std::get<GbtState>(m.state));
  CHECK(std::get<GbtState>(train_gbt(s, one, 6).state) != std::get<GbtState>(m.state));
  // Without sampling the seed plays no part.
  const GbtParams all{20, 0.3, 3, 1.0, 1, 0.0, 1.0};
  CHECK(std::get<GbtState>(train_gbt(s, all, 1).state) == std::get<GbtState>(train_gbt(s, all, 2).state));
  CHECK_THROWS_AS(train_gbt(s, {5, 0.3, 3, 1.0, 1, 0.0, 0.0}, 1), ArgumentError);
  CHECK_THROWS_AS(train_gbt(s, {5, 0.3, 3, 1.0, 1, 0.0, 1.5}, 1), ArgumentError);
}

TEST_CASE("models round-trip through JSON bit-exactly") {
  const auto s = blobs(60, 4, 0.8, 8);
  std::vector<TrainedModel> models;
  models.push_back(train_svm(s, {3.0, 0.25, 1e-3, true}, 1));
  models.push_back(train_tree(s, {5, 2, 0}, 2));
  models.push_back(train_ensemble(ModelKind::logitboost, s, {10, 0.1, 2, 1, 1}, 3));
  models.push_back(train_ensemble(ModelKind::random_forest, s, {10, 0.1, 0, 1, 1}, 4));
  models.push_back(train_gbt(s, {20, 0.3, 3, 1.0, 1, 1.0}, 5));
  Rng rng(12);
  for (const auto& m : models) {
    const auto r = TrainedModel::from_json(m.to_json());
    CHECK(r.to_json() == m.to_json());
    CHECK(r.state == m.state);
    for (int p = 0; p < 20; ++p) {
      std::vector<double> probe(4);
      for (auto& v : probe) v = rng.uniform(-2, 3);
      CHECK(r.predict_row(probe).score == m.predict_row(probe).score);
    }
  }
  CHECK_THROWS_AS(TrainedModel::from_json("{\"format\":1}"), DataError);
  CHECK_THROWS_AS(TrainedModel::from_json("not json"), DataError);
}

TEST_CASE("prediction checks the feature spec") {
  const auto s = blobs(20, 2, 2.0, 1);
  const auto m = train_tree(s, {3, 1, 0}, 1);
  CHECK_NOTHROW(m.predict(FeatureVector{{0.0, 0.0}, "test"}));
  CHECK_THROWS_AS(m.predict(FeatureVector{{0.0, 0.0}, "other"}), UsageError);
  CHECK_THROWS_AS(m.predict_row(std::vector<double>{1.0}), UsageError);
}

TEST_CASE("zero-error models reproduce their training labels") {
  const auto s = blobs(40, 2, 6.0, 3);
  LearnerConfig cfg;
  for (auto kind : {ModelKind::svm, ModelKind::tree, ModelKind::bagging, ModelKind::gbt}) {
    cfg.kind = kind;
    cfg.ensemble = default_ensemble_params(kind);
    cfg.ensemble.n_learners = 15;
    cfg.gbt.n_rounds = 30;
    const auto m = train(cfg, s, 1);
    CHECK(training_accuracy(m, s) == 1.0);
  }
  CHECK(default_ensemble_params(ModelKind::random_forest).n_learners == 900);
}

TEST_CASE("trainers are deterministic") {
  const auto s = blobs(50, 3, 0.5, 9);
  for (auto kind : {ModelKind::random_forest, ModelKind::rusboost}) {
    CHECK(train_ensemble(kind, s, {8, 0.1, 3, 1, 1}, 5).to_json() ==
          train_ensemble(kind, s, {8, 0.1, 3, 1, 1}, 5).to_json());
  }
  CHECK(train_gbt(s, {10, 0.1, 3, 1.0, 1, 1.0}, 5).to_json() == train_gbt(s, {10, 0.1, 3, 1.0, 1, 1.0}, 5).to_json());
}
