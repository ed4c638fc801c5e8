#include <cmath>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/learn.hpp"

namespace periocular {

using json = nlohmann::ordered_json;

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw ArgumentError("append_row: row length " + std::to_string(values.size()) +
                                                  " != " + std::to_string(cols_));
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

LabeledSet LabeledSet::from_vectors(const std::vector<FeatureVector>& vectors, std::vector<int> labels,
                                    std::vector<std::string> subjects) {
  LabeledSet s;
  if (!vectors.empty()) {
    s.spec_id = vectors.front().spec_id;
    s.x = Matrix(0, vectors.front().size());
  }
  for (const auto& v : vectors) {
    if (v.spec_id != s.spec_id) throw UsageError("LabeledSet mixes feature specs");
    s.x.append_row(v.values);
  }
  s.y = std::move(labels);
  s.subjects = std::move(subjects);
  return s;
}

void LabeledSet::validate(bool require_both_classes) const {
  if (x.rows() != y.size() || (!subjects.empty() && subjects.size() != y.size())) {
    throw ArgumentError("labeled set lists differ in length");
  }
  if (y.size() < 2) throw ArgumentError("labeled set needs at least two rows");
  for (int v : y) {
    if (v != 1 && v != -1) throw ArgumentError("labels must be +1 or -1");
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw ArgumentError("feature matrix holds a non-finite value");
  }
  if (require_both_classes && (count(1) == 0 || count(-1) == 0)) {
    throw TrainingError("training data contains a single class");
  }
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
  LabeledSet s;
  s.spec_id = spec_id;
  s.x = Matrix(0, x.cols());
  for (auto r : rows) {
    if (r >= size()) throw ArgumentError("subset row out of range");
    s.x.append_row(x.row(r));
    s.y.push_back(y[r]);
    if (!subjects.empty()) s.subjects.push_back(subjects[r]);
  }
  return s;
}

LabeledSet LabeledSet::select_columns(std::span<const std::size_t> cols, std::string new_spec_id) const {
  LabeledSet s;
  s.spec_id = std::move(new_spec_id);
  s.y = y;
  s.subjects = subjects;
  s.x = Matrix(x.rows(), cols.size());
  for (auto c : cols) {
    if (c >= x.cols()) throw ArgumentError("select_columns: column out of range");
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) s.x(r, j) = x(r, cols[j]);
  }
  return s;
}

std::size_t LabeledSet::count(int label) const noexcept {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::svm: return "svm";
    case ModelKind::tree: return "tree";
    case ModelKind::bagging: return "bagging";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::adaboost_m1: return "adaboost_m1";
    case ModelKind::logitboost: return "logitboost";
    case ModelKind::gentleboost: return "gentleboost";
    case ModelKind::rusboost: return "rusboost";
    case ModelKind::gbt: return "gbt";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::svm, ModelKind::tree, ModelKind::bagging, ModelKind::random_forest, ModelKind::adaboost_m1,
                 ModelKind::logitboost, ModelKind::gentleboost, ModelKind::rusboost, ModelKind::gbt}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown model kind '" + std::string(name) + "'");
}

bool is_ensemble(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::bagging:
    case ModelKind::random_forest:
    case ModelKind::adaboost_m1:
    case ModelKind::logitboost:
    case ModelKind::gentleboost:
    case ModelKind::rusboost:
      return true;
    default:
      return false;
  }
}

double Tree::evaluate(std::span<const double> x) const {
  if (nodes.empty()) throw UsageError("empty tree");
  std::size_t i = 0;
  for (;;) {
    const auto& n = nodes[i];
    if (n.is_leaf()) return n.value;
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const std::size_t n = x.rows(), d = x.cols();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += x(r, c);
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double t = x(r, c) - s.mean[c];
      var[c] += t * t;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(n));
    // Constant columns stay centred but unscaled.
    s.scale[c] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) * scale[c];
}

namespace {

bool is_vote(ModelKind k) noexcept {
  return k == ModelKind::bagging || k == ModelKind::random_forest || k == ModelKind::adaboost_m1 ||
         k == ModelKind::rusboost;
}

int sign_label(double score) noexcept { return score >= 0.0 ? 1 : -1; }

}  // namespace

Prediction TrainedModel::predict_row(std::span<const double> x) const {
  if (x.size() != dim) throw UsageError("feature vector has length " + std::to_string(x.size()) + ", model expects " +
                                        std::to_string(dim));
  Prediction p;
  if (const auto* s = std::get_if<SvmState>(&state)) {
    std::vector<double> z(x.begin(), x.end());
    if (!s->standardizer.empty()) s->standardizer.apply(x, z);
    double f = s->bias;
    for (std::size_t i = 0; i < s->coef.size(); ++i) {
      const auto sv = s->support_vectors.row(i);
      double d2 = 0.0;
      for (std::size_t c = 0; c < z.size(); ++c) {
        const double t = z[c] - sv[c];
        d2 += t * t;
      }
      f += s->coef[i] * std::exp(-s->gamma * d2);
    }
    p.score = f;
  } else if (const auto* t = std::get_if<TreeState>(&state)) {
    p.score = t->tree.evaluate(x);
  } else if (const auto* e = std::get_if<EnsembleState>(&state)) {
    double num = 0.0, den = 0.0;
    const bool vote = is_vote(kind);
    for (std::size_t i = 0; i < e->learners.size(); ++i) {
      const double v = e->learners[i].evaluate(x);
      num += e->alphas[i] * (vote ? sign_label(v) : v);
      den += e->alphas[i];
    }
    // Voting ensembles report the signed weighted vote fraction in [-1, 1].
    p.score = vote ? (den > 0.0 ? num / den : 0.0) : num;
  } else if (const auto* g = std::get_if<GbtState>(&state)) {
    double f = g->base_margin;
    for (const auto& tree : g->trees) f += tree.evaluate(x);
    p.score = f;
  }
  p.label = sign_label(p.score);
  return p;
}

Prediction TrainedModel::predict(const FeatureVector& x) const {
  if (x.spec_id != spec_id) throw UsageError("feature spec " + x.spec_id + " does not match model spec " + spec_id);
  return predict_row(x.values);
}

Prediction predict(const TrainedModel& model, const FeatureVector& x) { return model.predict(x); }

namespace {

json tree_json(const Tree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value, n.gain, n.cover}));
  return nodes;
}

Tree tree_from(const json& j) {
  Tree t;
  for (const auto& n : j) {
    TreeNode node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.value = n.at(4).get<double>();
    node.gain = n.at(5).get<double>();
    node.cover = n.at(6).get<double>();
    t.nodes.push_back(node);
  }
  const auto size = static_cast<int>(t.nodes.size());
  if (size == 0) throw DataError("model JSON holds an empty tree");
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
      throw DataError("model JSON tree has a dangling child index");
    }
  }
  return t;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from(const json& j, std::size_t cols) {
  Matrix m(0, cols);
  for (const auto& row : j) m.append_row(row.get<std::vector<double>>());
  return m;
}

}  // namespace

std::string TrainedModel::to_json() const {
  json j;
  j["format"] = "periocular-model";
  j["version"] = 1;
  j["kind"] = std::string(to_string(kind));
  j["seed"] = seed;
  j["spec_id"] = spec_id;
  j["dim"] = dim;
  j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  json st;
  if (const auto* s = std::get_if<SvmState>(&state)) {
    st["standardizer"] = {{"mean", s->standardizer.mean}, {"scale", s->standardizer.scale}};
    st["support_vectors"] = matrix_json(s->support_vectors);
    st["coef"] = s->coef;
    st["bias"] = s->bias;
    st["gamma"] = s->gamma;
    st["iterations"] = s->iterations;
    st["converged"] = s->converged;
  } else if (const auto* t = std::get_if<TreeState>(&state)) {
    st["tree"] = tree_json(t->tree);
  } else if (const auto* e = std::get_if<EnsembleState>(&state)) {
    st["alphas"] = e->alphas;
    st["learners"] = json::array();
    for (const auto& l : e->learners) st["learners"].push_back(tree_json(l));
  } else if (const auto* g = std::get_if<GbtState>(&state)) {
    st["base_margin"] = g->base_margin;
    st["trees"] = json::array();
    for (const auto& tr : g->trees) st["trees"].push_back(tree_json(tr));
  }
  j["state"] = std::move(st);
  return j.dump();
}

TrainedModel TrainedModel::from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format").get<std::string>() != "periocular-model") throw DataError("not a model document");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported model version");
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.spec_id = j.at("spec_id").get<std::string>();
    m.dim = j.at("dim").get<std::size_t>();
    m.config_json = j.at("config").dump();
    const auto& st = j.at("state");
    switch (m.kind) {
      case ModelKind::svm: {
        SvmState s;
        s.standardizer.mean = st.at("standardizer").at("mean").get<std::vector<double>>();
        s.standardizer.scale = st.at("standardizer").at("scale").get<std::vector<double>>();
        s.support_vectors = matrix_from(st.at("support_vectors"), m.dim);
        s.coef = st.at("coef").get<std::vector<double>>();
        s.bias = st.at("bias").get<double>();
        s.gamma = st.at("gamma").get<double>();
        s.iterations = st.at("iterations").get<std::size_t>();
        s.converged = st.at("converged").get<bool>();
        if (s.coef.size() != s.support_vectors.rows()) throw DataError("SVM coefficient count mismatch");
        m.state = std::move(s);
        break;
      }
      case ModelKind::tree:
        m.state = TreeState{tree_from(st.at("tree"))};
        break;
      case ModelKind::gbt: {
        GbtState g;
        g.base_margin = st.at("base_margin").get<double>();
        for (const auto& t : st.at("trees")) g.trees.push_back(tree_from(t));
        m.state = std::move(g);
        break;
      }
      default: {
        EnsembleState e;
        e.alphas = st.at("alphas").get<std::vector<double>>();
        for (const auto& t : st.at("learners")) e.learners.push_back(tree_from(t));
        if (e.alphas.size() != e.learners.size()) throw DataError("ensemble weight count mismatch");
        m.state = std::move(e);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
}

std::string LearnerConfig::to_json() const {
  json j;
  j["kind"] = std::string(to_string(kind));
  switch (kind) {
    case ModelKind::svm:
      j["C"] = svm.C;
      j["gamma"] = svm.gamma;
      j["tol"] = svm.tol;
      j["standardize"] = svm.standardize;
      j["grid"] = svm_grid;
      break;
    case ModelKind::tree:
      j["max_depth"] = tree.max_depth;
      j["min_leaf"] = tree.min_leaf;
      j["max_features"] = tree.max_features;
      break;
    case ModelKind::gbt:
      j["n_rounds"] = gbt.n_rounds;
      j["learning_rate"] = gbt.learning_rate;
      j["max_depth"] = gbt.max_depth;
      j["lambda"] = gbt.lambda;
      j["min_leaf"] = gbt.min_leaf;
      j["min_child_weight"] = gbt.min_child_weight;
      j["colsample"] = gbt.colsample;
      break;
    default:
      j["n_learners"] = ensemble.n_learners;
      j["learning_rate"] = ensemble.learning_rate;
      j["max_depth"] = ensemble.max_depth;
      j["min_leaf"] = ensemble.min_leaf;
      break;
  }
  return j.dump();
}

EnsembleParams default_ensemble_params(ModelKind kind) {
  EnsembleParams p;
  switch (kind) {
    case ModelKind::random_forest:
      p.n_learners = 900;
      p.max_depth = 0;
      break;
    case ModelKind::bagging:
      p.max_depth = 0;
      break;
    default:
      break;
  }
  return p;
}

TrainedModel train(const LearnerConfig& config, const LabeledSet& data, std::uint64_t seed) {
  switch (config.kind) {
    case ModelKind::svm: {
      SvmParams p = config.svm;
      if (p.gamma == 0.0) p.gamma = 1.0 / static_cast<double>(std::max<std::size_t>(1, data.dim()));
      return train_svm(data, p, seed);
    }
    case ModelKind::tree:
      return train_tree(data, config.tree, seed);
    case ModelKind::gbt:
      return train_gbt(data, config.gbt, seed);
    default:
      return train_ensemble(config.kind, data, config.ensemble, seed);
  }
}

}  // namespace periocular
