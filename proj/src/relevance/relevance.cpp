#include <algorithm>
#include <numeric>

#include "periocular/common.hpp"
#include "periocular/relevance.hpp"

namespace periocular {

std::size_t ImportanceMap::nonzero() const noexcept {
  return static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [](double s) { return s > 0.0; }));
}

ImportanceMap gbt_split_gains(const TrainedModel& model) {
  const auto* st = std::get_if<GbtState>(&model.state);
  if (model.kind != ModelKind::gbt || st == nullptr) {
    throw UsageError("importance needs a GBT model, got " + std::string(to_string(model.kind)));
  }
  ImportanceMap imp;
  imp.normalization = Normalization::raw_gain;
  imp.spec_id = model.spec_id;
  imp.scores.assign(model.dim, 0.0);
  for (const auto& tree : st->trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) imp.scores.at(static_cast<std::size_t>(node.feature)) += node.gain;
    }
  }
  return imp;
}

ImportanceMap importance_from_gbt(const TrainedModel& model) {
  auto imp = gbt_split_gains(model);
  imp.normalization = Normalization::unit_sum;
  const double total = std::accumulate(imp.scores.begin(), imp.scores.end(), 0.0);
  if (total > 0.0) {
    for (auto& s : imp.scores) s /= total;
  }
  return imp;
}

namespace {

std::vector<std::size_t> ranking(const ImportanceMap& imp) {
  std::vector<std::size_t> order(imp.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return imp.scores[a] > imp.scores[b]; });
  return order;
}

}  // namespace

std::vector<std::size_t> select_by_threshold(const ImportanceMap& imp, double threshold) {
  if (!(threshold >= 0.0)) throw ArgumentError("selection threshold must be >= 0");
  auto order = ranking(imp);
  const auto end = std::find_if(order.begin(), order.end(), [&](std::size_t i) { return imp.scores[i] < threshold; });
  order.erase(end, order.end());
  return order;
}

std::vector<std::size_t> top_features(const ImportanceMap& imp, std::size_t n) {
  auto order = ranking(imp);
  order.resize(std::min(n, order.size()));
  return order;
}

SweepResult threshold_sweep(const LabeledSet& train, const LabeledSet& test, const std::vector<double>& thresholds,
                            const GbtParams& gbt, const LearnerConfig& retrain, std::uint64_t seed, int jobs) {
  if (train.spec_id != test.spec_id) throw UsageError("train and test sets use different feature specs");
  if (train.dim() != test.dim()) throw UsageError("train and test sets differ in dimension");
  test.validate(false);
  for (double t : thresholds) {
    if (!(t >= 0.0)) throw ArgumentError("selection threshold must be >= 0");
  }

  SweepResult out;
  out.importance = importance_from_gbt(train_gbt(train, gbt, seed));
  const int majority = train.count(1) >= train.count(-1) ? 1 : -1;

  out.entries.resize(thresholds.size());
  parallel_for(thresholds.size(), jobs, [&](std::size_t i) {
    SelectionResult& r = out.entries[i];
    r.threshold = thresholds[i];
    r.selected = select_by_threshold(out.importance, r.threshold);
    r.n_selected = r.selected.size();
    r.n_nonzero = static_cast<std::size_t>(std::count_if(
        r.selected.begin(), r.selected.end(), [&](std::size_t f) { return out.importance.scores[f] > 0.0; }));
    if (r.selected.empty()) {
      r.degenerate = true;
      r.ccr = static_cast<double>(test.count(majority)) / static_cast<double>(test.size());
      return;
    }
    // Column order follows the ranking; the reduced spec id names the subset.
    std::string key = train.spec_id + "/select";
    for (auto f : r.selected) key += ":" + std::to_string(f);
    const std::string sub_id = hex64(fnv1a(key));
    const auto tr = train.select_columns(r.selected, sub_id);
    const auto te = test.select_columns(r.selected, sub_id);
    const auto model = periocular::train(retrain, tr, derive_seed(seed, i));
    std::size_t ok = 0;
    for (std::size_t row = 0; row < te.size(); ++row) ok += model.predict_row(te.x.row(row)).label == te.y[row];
    r.ccr = static_cast<double>(ok) / static_cast<double>(te.size());
  });
  return out;
}

RgbImage render_overlay(const ImportanceMap& imp, const FeatureSpec& spec, std::size_t top_n, const GrayImage& base) {
  if (!spec.has_spatial_loci()) throw UsageError("feature spec " + spec.descriptor() + " has no pixel loci");
  if (imp.size() != spec.length()) throw ArgumentError("importance map length does not match the feature spec");
  RgbImage out = RgbImage::from_gray(base);
  for (auto index : top_features(imp, top_n)) {
    const auto entry = spec.locate(index);
    if (!entry.locus) continue;
    const auto& rect = *entry.locus;
    if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > base.width() || rect.y1 > base.height()) {
      throw ArgumentError("overlay base is smaller than the feature spec's pixel grid");
    }
    for (int y = rect.y0; y < rect.y1; ++y) {
      for (int x = rect.x0; x < rect.x1; ++x) out.set(x, y, 0, 0, 255);
    }
  }
  return out;
}

std::string sweep_csv(const std::vector<SelectionResult>& entries) {
  std::string out = "threshold,n_selected,ccr\n";
  for (const auto& e : entries) {
    out += format_double(e.threshold) + ',' + std::to_string(e.n_selected) + ',' + format_double(e.ccr) + '\n';
  }
  return out;
}

}  // namespace periocular
