#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/eval.hpp"

namespace periocular {

using json = nlohmann::ordered_json;

void ConfusionCounts::add(int truth, int predicted) noexcept {
  if (truth > 0) {
    (predicted > 0 ? tp : fn) += 1;
  } else {
    (predicted > 0 ? fp : tn) += 1;
  }
}

Metrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw ArgumentError("metrics need at least one prediction");
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  Metrics m;
  m.ccr = d(c.tp + c.tn) / d(c.total());
  m.tpr = c.tp + c.fn > 0 ? d(c.tp) / d(c.tp + c.fn) : 0.0;
  m.tnr = c.tn + c.fp > 0 ? d(c.tn) / d(c.tn + c.fp) : 0.0;
  const double den = d(c.tp + c.fp) * d(c.tp + c.fn) * d(c.tn + c.fp) * d(c.tn + c.fn);
  if (den == 0.0) {
    m.mcc = 0.0;
    m.mcc_undefined = true;
  } else {
    m.mcc = (d(c.tp) * d(c.tn) - d(c.fp) * d(c.fn)) / std::sqrt(den);
    m.mcc = std::clamp(m.mcc, -1.0, 1.0);
  }
  return m;
}

Fitter model_fitter(const LearnerConfig& config) {
  return [config](const LabeledSet& train_set, std::uint64_t seed) -> Predictor {
    auto model = std::make_shared<const TrainedModel>(train(config, train_set, seed));
    return [model](const LabeledSet& s, std::size_t row) { return model->predict_row(s.x.row(row)).label; };
  };
}

std::vector<std::size_t> rows_for_subjects(const LabeledSet& data, const std::vector<std::string>& subjects) {
  const std::unordered_set<std::string> wanted(subjects.begin(), subjects.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    if (wanted.count(data.subjects[i])) rows.push_back(i);
  }
  return rows;
}

std::pair<double, double> mean_stdev(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

namespace {

void check_disjoint(const LabeledSet& data, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                    const std::string& where) {
  std::set<std::string> left;
  for (auto r : a) left.insert(data.subjects[r]);
  for (auto r : b) {
    if (left.count(data.subjects[r])) {
      throw InvariantError("subject " + data.subjects[r] + " appears on both sides of " + where);
    }
  }
}

bool has_both_classes(const LabeledSet& s) { return s.count(1) > 0 && s.count(-1) > 0; }

// Fits on `train_rows`, predicts `eval_rows`. Returns nullopt and sets `why`
// when the training side cannot support a classifier.
std::optional<ConfusionCounts> fit_and_score(const LabeledSet& data, const std::vector<std::size_t>& train_rows,
                                             const std::vector<std::size_t>& eval_rows, const Fitter& fit,
                                             std::uint64_t seed, std::string& why) {
  const auto tr = data.subset(train_rows);
  const auto ev = data.subset(eval_rows);
  if (ev.size() == 0) {
    why = "no evaluation rows";
    return std::nullopt;
  }
  if (tr.size() < 2 || !has_both_classes(tr)) {
    why = "training side holds a single class";
    return std::nullopt;
  }
  Predictor predict;
  try {
    predict = fit(tr, seed);
  } catch (const TrainingError& e) {
    why = e.what();
    return std::nullopt;
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < ev.size(); ++i) c.add(ev.y[i], predict(ev, i));
  return c;
}

}  // namespace

CvResult cross_validate(const LabeledSet& data, const SplitPlan& plan, const Fitter& fit, std::uint64_t seed,
                        int jobs) {
  if (data.subjects.size() != data.size()) throw ArgumentError("cross_validate needs subject ids for every row");
  if (plan.folds.empty()) throw ArgumentError("split plan has no folds");
  audit_split(plan);
  CvResult out;
  out.folds.resize(plan.folds.size());
  parallel_for(plan.folds.size(), jobs, [&](std::size_t f) {
    auto& r = out.folds[f];
    r.index = f;
    r.seed = derive_seed(seed, f);
    const auto tr = rows_for_subjects(data, plan.folds[f].train);
    const auto va = rows_for_subjects(data, plan.folds[f].validation);
    check_disjoint(data, tr, va, "fold " + std::to_string(f));
    r.n_train = tr.size();
    r.n_validation = va.size();
    const auto counts = fit_and_score(data, tr, va, fit, r.seed, r.reason);
    if (!counts) {
      r.skipped = true;
      return;
    }
    r.counts = *counts;
    r.metrics = metrics(r.counts);
  });
  std::vector<double> ccrs;
  for (const auto& r : out.folds) {
    if (!r.skipped) ccrs.push_back(r.metrics.ccr);
  }
  out.folds_used = ccrs.size();
  std::tie(out.mean_ccr, out.stdev_ccr) = mean_stdev(ccrs);
  return out;
}

namespace {

void final_fit(EvalReport& report, const LabeledSet& data, const SplitPlan& plan, const Fitter& fit,
               std::uint64_t seed) {
  const auto tr = rows_for_subjects(data, plan.train_subjects);
  const auto te = rows_for_subjects(data, plan.test_subjects);
  check_disjoint(data, tr, te, "the train/test split");
  report.n_train_rows = tr.size();
  report.n_test_rows = te.size();
  // The final model's seed sits past every fold index.
  report.test_seed = derive_seed(seed, plan.folds.size());
  const auto counts = fit_and_score(data, tr, te, fit, report.test_seed, report.test_failure);
  if (counts) {
    report.test_counts = counts;
    report.test = metrics(*counts);
  }
}

}  // namespace

EvalReport evaluate_with(const LabeledSet& data, const SplitPlan& plan, const Fitter& fit, std::uint64_t seed,
                         int jobs) {
  EvalReport report;
  report.seed = seed;
  report.cv = cross_validate(data, plan, fit, seed, jobs);
  final_fit(report, data, plan, fit, seed);
  return report;
}

EvalReport evaluate(const LabeledSet& data, const SplitPlan& plan, const LearnerConfig& config, std::uint64_t seed,
                    int jobs) {
  LearnerConfig chosen = config;
  std::vector<GridPoint> grid;
  std::optional<CvResult> best_cv;
  if (config.kind == ModelKind::svm && config.svm_grid) {
    const double d = static_cast<double>(std::max<std::size_t>(1, data.dim()));
    double best = -1.0;
    for (double C : {1.0, 10.0, 100.0}) {
      for (double mult : {1.0, 2.0, 4.0}) {
        LearnerConfig trial = config;
        trial.svm.C = C;
        trial.svm.gamma = mult / d;
        auto cv = cross_validate(data, plan, model_fitter(trial), seed, jobs);
        grid.push_back({C, trial.svm.gamma, cv.mean_ccr});
        if (cv.folds_used > 0 && cv.mean_ccr > best) {
          best = cv.mean_ccr;
          chosen = trial;
          best_cv = std::move(cv);
        }
      }
    }
    chosen.svm_grid = false;
  }
  EvalReport report;
  report.seed = seed;
  report.grid = std::move(grid);
  const auto fit = model_fitter(chosen);
  report.cv = best_cv ? std::move(*best_cv) : cross_validate(data, plan, fit, seed, jobs);
  final_fit(report, data, plan, fit, seed);
  report.config = chosen;
  return report;
}

namespace {

json metrics_json(const Metrics& m) {
  return {{"ccr", m.ccr}, {"tpr", m.tpr}, {"tnr", m.tnr}, {"mcc", m.mcc}, {"mcc_undefined", m.mcc_undefined}};
}

json counts_json(const ConfusionCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

}  // namespace

std::string report_json(const EvalReport& r) {
  json j;
  j["learner"] = json::parse(r.config.to_json());
  j["seed"] = r.seed;
  if (!r.grid.empty()) {
    json g = json::array();
    for (const auto& p : r.grid) g.push_back({{"C", p.C}, {"gamma", p.gamma}, {"cv_mean_ccr", p.mean_ccr}});
    j["svm_grid"] = std::move(g);
  }
  json folds = json::array();
  for (const auto& f : r.cv.folds) {
    json fj{{"fold", f.index}, {"seed", f.seed}, {"n_train", f.n_train}, {"n_validation", f.n_validation},
            {"skipped", f.skipped}};
    if (f.skipped) {
      fj["reason"] = f.reason;
    } else {
      fj["counts"] = counts_json(f.counts);
      fj["metrics"] = metrics_json(f.metrics);
    }
    folds.push_back(std::move(fj));
  }
  j["cv"] = {{"folds", std::move(folds)},
             {"folds_used", r.cv.folds_used},
             {"ccr_mean", r.cv.mean_ccr},
             {"ccr_stdev", r.cv.stdev_ccr},
             {"stdev_kind", "sample"}};
  json test{{"seed", r.test_seed}, {"n_train_rows", r.n_train_rows}, {"n_test_rows", r.n_test_rows}};
  if (r.test) {
    test["counts"] = counts_json(*r.test_counts);
    test["metrics"] = metrics_json(*r.test);
  } else {
    test["failure"] = r.test_failure;
  }
  j["test"] = std::move(test);
  j["conventions"] = {{"positive_class", "female"}, {"mcc_zero_denominator", 0}};
  return j.dump(2);
}

std::string emit_table(const std::vector<TableRow>& rows) {
  std::string out = "method,condition,ccr,tpr,tnr,mcc,cv_mean,cv_stdev\n";
  char buf[64];
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out += r.method + ',' + r.condition + ',' + pct(r.metrics.ccr) + ',' + pct(r.metrics.tpr) + ',' +
           pct(r.metrics.tnr) + ',';
    std::snprintf(buf, sizeof buf, "%.4f", r.metrics.mcc);
    out += buf;
    if (r.cv) {
      out += ',' + pct(r.cv->first) + ',' + pct(r.cv->second) + '\n';
    } else {
      out += ",,\n";
    }
  }
  return out;
}

}  // namespace periocular
