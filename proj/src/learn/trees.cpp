// CART, the tree ensembles and gradient-boosted trees. All of them share the
// presorted grower in tree_grower.cpp.

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/learn.hpp"
#include "tree_grower.hpp"

namespace periocular {

using detail::Criterion;
using detail::GrowParams;
using detail::SortedColumns;
using json = nlohmann::ordered_json;

namespace {

TrainedModel make_model(ModelKind kind, const LabeledSet& data, std::uint64_t seed, json config) {
  TrainedModel m;
  m.kind = kind;
  m.seed = seed;
  m.spec_id = data.spec_id;
  m.dim = data.dim();
  m.config_json = config.dump();
  return m;
}

/// Splits per-row weights into the (positive, negative) class statistics gini expects.
void class_weights(const std::vector<int>& y, std::span<const double> w, std::vector<double>& a,
                   std::vector<double>& b) {
  a.assign(y.size(), 0.0);
  b.assign(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? a[i] : b[i]) = w[i];
}

int vote(double v) noexcept { return v >= 0.0 ? 1 : -1; }

double normalize(std::vector<double>& w) {
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= s;
  return std::accumulate(w.begin(), w.end(), 0.0);
}

}  // namespace

TrainedModel train_tree(const LabeledSet& data, const TreeParams& params, std::uint64_t seed) {
  data.validate(true);
  if (params.max_depth < 1) throw ArgumentError("tree max_depth must be >= 1");
  if (params.min_leaf < 1) throw ArgumentError("tree min_leaf must be >= 1");
  const SortedColumns cols(data.x);
  std::vector<double> ones(data.size(), 1.0), a, b;
  class_weights(data.y, ones, a, b);
  GrowParams gp;
  gp.criterion = Criterion::gini;
  gp.max_depth = params.max_depth;
  gp.min_leaf = params.min_leaf;
  gp.max_features = params.max_features;
  Rng rng(seed);
  auto m = make_model(ModelKind::tree, data, seed,
                      {{"max_depth", params.max_depth}, {"min_leaf", params.min_leaf},
                       {"max_features", params.max_features}});
  m.state = TreeState{detail::grow_tree(cols, gp, a, b, ones, &rng)};
  return m;
}

namespace {

EnsembleState train_bootstrap(ModelKind kind, const LabeledSet& data, const SortedColumns& cols,
                              const EnsembleParams& p, std::uint64_t seed, TrainingLog* log) {
  const std::size_t n = data.size();
  const auto L = static_cast<std::size_t>(p.n_learners);
  GrowParams gp;
  gp.criterion = Criterion::gini;
  gp.max_depth = p.max_depth;
  gp.min_leaf = p.min_leaf;
  if (kind == ModelKind::random_forest) {
    gp.max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.dim()))));
  }
  EnsembleState st;
  st.learners.resize(L);
  st.alphas.assign(L, 1.0);
  std::vector<std::vector<std::size_t>> resamples(L);
  parallel_for(L, p.jobs, [&](std::size_t l) {
    Rng rng(derive_seed(seed, l));
    std::vector<double> count(n, 0.0), a, b;
    auto& rows = resamples[l];
    rows.resize(n);
    for (auto& r : rows) {
      r = rng.index(n);
      count[r] += 1.0;
    }
    class_weights(data.y, count, a, b);
    st.learners[l] = detail::grow_tree(cols, gp, a, b, count, &rng);
  });
  if (log) {
    for (const auto& rows : resamples) {
      std::size_t pos = 0;
      for (auto r : rows) pos += data.y[r] > 0;
      log->class_counts.emplace_back(pos, rows.size() - pos);
    }
    log->resamples = std::move(resamples);
    log->rounds = L;
  }
  return st;
}

/// AdaBoostM1, optionally with random undersampling of the majority class
/// before each round (RUSBoost).
EnsembleState train_adaboost(const LabeledSet& data, const SortedColumns& cols, const EnsembleParams& p,
                             std::uint64_t seed, bool undersample, TrainingLog* log) {
  const std::size_t n = data.size();
  GrowParams gp;
  gp.criterion = Criterion::gini;
  gp.max_depth = p.max_depth;
  gp.min_leaf = p.min_leaf;
  Rng rng(seed);

  std::vector<std::size_t> pos_rows, neg_rows;
  for (std::size_t i = 0; i < n; ++i) (data.y[i] > 0 ? pos_rows : neg_rows).push_back(i);
  const bool pos_minor = pos_rows.size() <= neg_rows.size();
  const auto& minority = pos_minor ? pos_rows : neg_rows;
  const auto& majority = pos_minor ? neg_rows : pos_rows;

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<double> count(n), sw(n), a, b;
  EnsembleState st;
  for (int round = 0; round < p.n_learners; ++round) {
    if (undersample) {
      std::fill(count.begin(), count.end(), 0.0);
      for (auto r : minority) count[r] = 1.0;
      std::vector<std::size_t> pool = majority;
      for (std::size_t k = 0; k < minority.size(); ++k) {
        std::swap(pool[k], pool[k + rng.index(pool.size() - k)]);
        count[pool[k]] = 1.0;
      }
      for (std::size_t i = 0; i < n; ++i) sw[i] = w[i] * count[i];
      if (log) log->class_counts.emplace_back(minority.size(), minority.size());
    } else {
      std::fill(count.begin(), count.end(), 1.0);
      sw = w;
      if (log) log->class_counts.emplace_back(pos_rows.size(), neg_rows.size());
    }
    class_weights(data.y, sw, a, b);
    Tree tree = detail::grow_tree(cols, gp, a, b, count, &rng);

    std::vector<int> h(n);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = vote(tree.evaluate(data.x.row(i)));
      if (h[i] != data.y[i]) err += w[i];
    }
    if (err >= 0.5) {
      // No better than chance. Keep the first learner so the model is usable.
      if (st.learners.empty()) {
        st.learners.push_back(std::move(tree));
        st.alphas.push_back(1.0);
      }
      break;
    }
    const double e = std::max(err, 1e-10);
    const double alpha = p.learning_rate * 0.5 * std::log((1.0 - e) / e);
    st.learners.push_back(std::move(tree));
    st.alphas.push_back(alpha);
    for (std::size_t i = 0; i < n; ++i) w[i] *= std::exp(-alpha * data.y[i] * h[i]);
    const double mass = normalize(w);
    if (log) log->weight_sums.push_back(mass);
    if (err == 0.0) break;
  }
  if (log) log->rounds = st.learners.size();
  return st;
}

/// Additive logistic regression with Newton steps (Friedman, Hastie & Tibshirani).
EnsembleState train_logitboost(const LabeledSet& data, const SortedColumns& cols, const EnsembleParams& p,
                               std::uint64_t seed, TrainingLog* log) {
  const std::size_t n = data.size();
  GrowParams gp;
  gp.criterion = Criterion::squared_error;
  gp.max_depth = p.max_depth;
  gp.min_leaf = p.min_leaf;
  Rng rng(seed);
  std::vector<double> F(n, 0.0), w(n), a(n), ones(n, 1.0);
  EnsembleState st;
  const double step = 0.5 * p.learning_rate;
  for (int round = 0; round < p.n_learners; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = 1.0 / (1.0 + std::exp(-2.0 * F[i]));
      const double y01 = data.y[i] > 0 ? 1.0 : 0.0;
      const double pq = std::max(prob * (1.0 - prob), 1e-12);
      w[i] = pq;
      a[i] = std::clamp((y01 - prob) / pq, -4.0, 4.0);
    }
    const double mass = normalize(w);
    if (log) log->weight_sums.push_back(mass);
    for (std::size_t i = 0; i < n; ++i) a[i] *= w[i];
    Tree tree = detail::grow_tree(cols, gp, a, w, ones, &rng);
    for (std::size_t i = 0; i < n; ++i) F[i] += step * tree.evaluate(data.x.row(i));
    st.learners.push_back(std::move(tree));
    st.alphas.push_back(step);
    if (log) log->class_counts.emplace_back(data.count(1), data.count(-1));
  }
  if (log) log->rounds = st.learners.size();
  return st;
}

EnsembleState train_gentleboost(const LabeledSet& data, const SortedColumns& cols, const EnsembleParams& p,
                                std::uint64_t seed, TrainingLog* log) {
  const std::size_t n = data.size();
  GrowParams gp;
  gp.criterion = Criterion::squared_error;
  gp.max_depth = p.max_depth;
  gp.min_leaf = p.min_leaf;
  Rng rng(seed);
  std::vector<double> w(n, 1.0 / static_cast<double>(n)), a(n), ones(n, 1.0);
  EnsembleState st;
  for (int round = 0; round < p.n_learners; ++round) {
    for (std::size_t i = 0; i < n; ++i) a[i] = w[i] * data.y[i];
    Tree tree = detail::grow_tree(cols, gp, a, w, ones, &rng);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::exp(-data.y[i] * p.learning_rate * tree.evaluate(data.x.row(i)));
    }
    const double mass = normalize(w);
    if (log) {
      log->weight_sums.push_back(mass);
      log->class_counts.emplace_back(data.count(1), data.count(-1));
    }
    st.learners.push_back(std::move(tree));
    st.alphas.push_back(p.learning_rate);
  }
  if (log) log->rounds = st.learners.size();
  return st;
}

}  // namespace

TrainedModel train_ensemble(ModelKind kind, const LabeledSet& data, const EnsembleParams& params, std::uint64_t seed,
                            TrainingLog* log) {
  if (!is_ensemble(kind)) throw ArgumentError("'" + std::string(to_string(kind)) + "' is not an ensemble kind");
  data.validate(true);
  if (params.n_learners < 1) throw ArgumentError("n_learners must be >= 1");
  if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) {
    throw ArgumentError("learning_rate must lie in (0, 1]");
  }
  if (params.max_depth < 0 || params.min_leaf < 1) throw ArgumentError("invalid weak-learner depth or min_leaf");
  const SortedColumns cols(data.x);
  EnsembleState st;
  switch (kind) {
    case ModelKind::bagging:
    case ModelKind::random_forest:
      st = train_bootstrap(kind, data, cols, params, seed, log);
      break;
    case ModelKind::adaboost_m1:
      st = train_adaboost(data, cols, params, seed, false, log);
      break;
    case ModelKind::rusboost:
      st = train_adaboost(data, cols, params, seed, true, log);
      break;
    case ModelKind::logitboost:
      st = train_logitboost(data, cols, params, seed, log);
      break;
    case ModelKind::gentleboost:
      st = train_gentleboost(data, cols, params, seed, log);
      break;
    default:
      break;
  }
  auto m = make_model(kind, data, seed,
                      {{"n_learners", params.n_learners}, {"learning_rate", params.learning_rate},
                       {"max_depth", params.max_depth}, {"min_leaf", params.min_leaf}});
  m.state = std::move(st);
  return m;
}

namespace {

double log_loss(const std::vector<double>& F, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    // log(1 + exp(-y F)), computed stably
    const double z = -y[i] * F[i];
    s += z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  return s / static_cast<double>(F.size());
}

}  // namespace

TrainedModel train_gbt(const LabeledSet& data, const GbtParams& params, std::uint64_t seed, TrainingLog* log) {
  data.validate(true);
  if (params.n_rounds < 1) throw ArgumentError("n_rounds must be >= 1");
  if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) {
    throw ArgumentError("learning_rate must lie in (0, 1]");
  }
  if (params.max_depth < 1) throw ArgumentError("GBT max_depth must be >= 1");
  if (!(params.lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  if (params.min_leaf < 1 || params.min_child_weight < 0.0) throw ArgumentError("invalid min_leaf or min_child_weight");
  if (!(params.colsample > 0.0 && params.colsample <= 1.0)) throw ArgumentError("colsample must lie in (0, 1]");

  const std::size_t n = data.size();
  const SortedColumns cols(data.x);
  GrowParams gp;
  gp.criterion = Criterion::newton;
  gp.max_depth = params.max_depth;
  gp.min_leaf = params.min_leaf;
  gp.lambda = params.lambda;
  gp.min_child_weight = params.min_child_weight;

  GbtState st;
  std::vector<double> F(n, st.base_margin), g(n), h(n), ones(n, 1.0), next(n), delta(n);
  double loss = log_loss(F, data.y);
  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = 1.0 / (1.0 + std::exp(-F[i]));
      g[i] = prob - (data.y[i] > 0 ? 1.0 : 0.0);
      h[i] = prob * (1.0 - prob);
    }
    if (params.colsample < 1.0) {
      const std::size_t d = data.dim();
      const auto k = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::ceil(params.colsample * static_cast<double>(d))), 1, d);
      std::vector<std::size_t> all(d);
      std::iota(all.begin(), all.end(), 0);
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(round)));
      for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.index(d - i)]);
      all.resize(k);
      std::sort(all.begin(), all.end());
      gp.pool = std::move(all);
    }
    Tree tree = detail::grow_tree(cols, gp, g, h, ones, nullptr);
    for (auto& node : tree.nodes) {
      if (node.is_leaf()) node.value *= params.learning_rate;
    }
    for (std::size_t i = 0; i < n; ++i) delta[i] = tree.evaluate(data.x.row(i));
    // The Newton step can overshoot where the quadratic model is poor; halve
    // the leaves until the training loss does not rise.
    double new_loss = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      for (std::size_t i = 0; i < n; ++i) next[i] = F[i] + delta[i];
      new_loss = log_loss(next, data.y);
      if (new_loss <= loss) {
        accepted = true;
        break;
      }
      for (auto& node : tree.nodes) {
        if (node.is_leaf()) node.value *= 0.5;
      }
      for (auto& d : delta) d *= 0.5;
    }
    if (!accepted) break;
    F.swap(next);
    loss = new_loss;
    st.trees.push_back(std::move(tree));
    if (log) log->losses.push_back(loss);
  }
  if (st.trees.empty()) {
    // Degenerate data where even a halved step cannot help: a single constant leaf.
    Tree t;
    t.nodes.emplace_back();
    st.trees.push_back(std::move(t));
  }
  if (log) log->rounds = st.trees.size();

  auto m = make_model(ModelKind::gbt, data, seed,
                      {{"n_rounds", params.n_rounds}, {"learning_rate", params.learning_rate},
                       {"max_depth", params.max_depth}, {"lambda", params.lambda}, {"min_leaf", params.min_leaf},
                       {"min_child_weight", params.min_child_weight}, {"colsample", params.colsample}});
  m.state = std::move(st);
  return m;
}

}  // namespace periocular
