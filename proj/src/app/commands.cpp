#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "periocular/app.hpp"
#include "periocular/common.hpp"

namespace periocular {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

// Settings that shaped a result, as an object (excludes out and jobs).
json settings_json(const Config& c) {
  json j = json::object();
  for (const auto& [k, v] : c.values()) {
    if (k != "out" && k != "jobs") j[k] = v;
  }
  return j;
}

json provenance(const RunContext& ctx, std::string_view format) {
  return {{"format", format}, {"version", 1}, {"config_hash", ctx.config.hash()}, {"seed", ctx.seed},
          {"config", settings_json(ctx.config)}};
}

// Digests of artifacts whose formats cannot carry the config hash themselves.
void write_digests(const fs::path& dir, const RunContext& ctx, const std::vector<fs::path>& files) {
  auto j = provenance(ctx, "periocular-digests");
  json d = json::object();
  for (const auto& f : files) d[f.filename().string()] = hex64(fnv1a(read_text(f)));
  j["fnv1a"] = std::move(d);
  write_text(dir / "digests.json", j.dump(2) + "\n");
}

std::string slug(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  }
  return s;
}

fs::path cache_dir(const RunContext& ctx, Condition c) { return ctx.out / "cache" / std::string(to_string(c)); }

Condition condition_of(const RunContext& ctx) { return parse_condition(ctx.config.get("condition", "non_occluded")); }

FeatureSpec spec_of(const RunContext& ctx) {
  try {
    return FeatureSpec::parse(ctx.config.require("extractor"));
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

// Resizes to the working resolution, mapping the circle along with it.
std::pair<GrayImage, std::optional<OcclusionCircle>> canonicalize(const GrayImage& img,
                                                                   std::optional<OcclusionCircle> circle) {
  if (img.width() == kCanonicalWidth && img.height() == kCanonicalHeight) return {img, circle};
  const double sx = static_cast<double>(kCanonicalWidth) / img.width();
  const double sy = static_cast<double>(kCanonicalHeight) / img.height();
  if (circle) *circle = OcclusionCircle{circle->cx * sx, circle->cy * sy, circle->r * 0.5 * (sx + sy)};
  return {resize_bilinear(img, kCanonicalWidth, kCanonicalHeight), circle};
}

}  // namespace

PrepareResult cmd_prepare(const RunContext& ctx) {
  const fs::path manifest_path = ctx.config.require("manifest");
  const auto condition = condition_of(ctx);
  const double fraction = ctx.config.get_double("split.fraction", 0.6);
  const auto k = static_cast<int>(ctx.config.get_int("split.k", 5));
  if (!fs::exists(manifest_path)) throw DataError("manifest not found: " + manifest_path.string());
  const auto records = load_manifest(read_text(manifest_path));

  PrepareResult result;
  try {
    result.plan = make_split(records, fraction, k, ctx.seed);
  } catch (const ArgumentError& e) {
    throw UsageError(std::string("cannot split the manifest: ") + e.what());
  }
  write_text(ctx.out / "split.json", split_to_json(result.plan) + "\n");

  const auto dir = cache_dir(ctx, condition);
  fs::create_directories(dir);
  std::vector<std::optional<SampleRecord>> cached(records.size());
  std::vector<std::string> failures(records.size());
  parallel_for(records.size(), ctx.jobs, [&](std::size_t i) {
    const auto& r = records[i];
    const auto row = "row " + std::to_string(i + 2) + " (" + r.image_path + "): ";
    if (condition == Condition::occluded && !r.occlusion) {
      failures[i] = row + "no occlusion circle";
      return;
    }
    fs::path src = r.image_path;
    if (src.is_relative()) src = manifest_path.parent_path() / src;
    GrayImage img;
    try {
      img = read_pgm(src);
    } catch (const DataError& e) {
      failures[i] = row + e.what();
      return;
    }
    auto [canon, circle] = canonicalize(img, r.occlusion);
    if (condition == Condition::occluded) canon = apply_occlusion(canon, *circle);
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.pgm", i);
    write_bytes(dir / name, encode_pgm(canon));
    SampleRecord c = r;
    c.image_path = name;
    c.occlusion = circle;
    cached[i] = std::move(c);
  });

  std::vector<SampleRecord> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (cached[i]) index.push_back(*cached[i]);
    if (!failures[i].empty()) result.errors.push_back(failures[i]);
  }
  result.cached = index.size();
  write_text(dir / "index.csv", write_manifest(index));
  std::string errors;
  for (const auto& e : result.errors) errors += e + '\n';
  write_text(dir / "errors.txt", errors);

  auto j = provenance(ctx, "periocular-prepare");
  j["condition"] = to_string(condition);
  j["n_records"] = records.size();
  j["n_cached"] = result.cached;
  j["errors"] = result.errors;
  j["split_fnv1a"] = hex64(fnv1a(read_text(ctx.out / "split.json")));
  j["index_fnv1a"] = hex64(fnv1a(read_text(dir / "index.csv")));
  write_text(dir / "prepare.json", j.dump(2) + "\n");
  return result;
}

PreparedData load_prepared(const RunContext& ctx, Condition condition) {
  const auto dir = cache_dir(ctx, condition);
  if (!fs::exists(ctx.out / "split.json") || !fs::exists(dir / "index.csv")) {
    throw UsageError("no prepared cache for condition " + std::string(to_string(condition)) + " under " +
                     ctx.out.string() + "; run prepare first");
  }
  PreparedData data;
  data.plan = split_from_json(read_text(ctx.out / "split.json"));
  data.records = load_manifest(read_text(dir / "index.csv"));
  data.images.resize(data.records.size());
  parallel_for(data.records.size(), ctx.jobs,
               [&](std::size_t i) { data.images[i] = read_pgm(dir / data.records[i].image_path); });
  return data;
}

LabeledSet extract_labeled(const PreparedData& data, const FeatureSpec& spec, int jobs) {
  for (const auto& img : data.images) {
    if (img.width() != kCanonicalWidth || img.height() != kCanonicalHeight) {
      throw UsageError("cached image size " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                       " does not match the working resolution");
    }
  }
  if ((spec.extractor() == Extractor::raw || spec.extractor() == Extractor::hog) &&
      (spec.width() != kCanonicalWidth || spec.height() != kCanonicalHeight)) {
    throw UsageError("feature spec " + spec.descriptor() + " does not match the cached image size");
  }
  std::vector<FeatureVector> vectors(data.images.size());
  parallel_for(data.images.size(), jobs, [&](std::size_t i) { vectors[i] = spec.extract(data.images[i]); });
  std::vector<int> labels;
  std::vector<std::string> subjects;
  for (const auto& r : data.records) {
    labels.push_back(label_of(r.gender));
    subjects.push_back(r.subject_id);
  }
  return LabeledSet::from_vectors(vectors, std::move(labels), std::move(subjects));
}

ExperimentResult cmd_experiment(const RunContext& ctx) {
  const auto condition = condition_of(ctx);
  const auto spec = spec_of(ctx);
  auto learner = learner_from_config(ctx.config);
  learner.ensemble.jobs = 1;
  const auto data = load_prepared(ctx, condition);
  const auto set = extract_labeled(data, spec, ctx.jobs);
  auto report = evaluate(set, data.plan, learner, ctx.seed, ctx.jobs);

  auto j = provenance(ctx, "periocular-experiment");
  j["condition"] = to_string(condition);
  j["feature"] = {{"descriptor", spec.descriptor()},
                  {"id", spec.id()},
                  {"length", spec.length()},
                  {"spec", json::parse(spec.to_json())}};
  j["evaluation"] = json::parse(report_json(report));
  const auto archive = j.dump(2) + "\n";

  const auto dir = ctx.out / "experiment" / std::string(to_string(condition)) /
                   (slug(ctx.config.get("extractor", "")) + "-" + std::string(to_string(learner.kind)));
  write_text(dir / "report.json", archive);
  std::vector<TableRow> rows;
  if (report.test) {
    rows.push_back({spec.descriptor() + "+" + std::string(to_string(learner.kind)), std::string(to_string(condition)),
                    *report.test, std::make_pair(report.cv.mean_ccr, report.cv.stdev_ccr)});
  }
  write_text(dir / "table.csv", emit_table(rows));
  write_digests(dir, ctx, {dir / "table.csv"});
  return ExperimentResult{spec, std::move(report), archive, dir};
}

RelevanceResult cmd_relevance(const RunContext& ctx) {
  const auto condition = condition_of(ctx);
  const auto spec = spec_of(ctx);
  if (!spec.has_spatial_loci()) {
    throw UsageError("relevance needs an extractor with pixel loci (raw or hog), not " + spec.descriptor());
  }
  const auto thresholds = ctx.config.get_doubles("relevance.thresholds", {0.0, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3});
  std::vector<std::size_t> top_n;
  for (double v : ctx.config.get_doubles("relevance.top_n", {1000, 2000, 3000, 5000, 10000})) {
    if (!(v >= 1.0) || v != std::floor(v)) throw UsageError("relevance.top_n entries must be positive integers");
    top_n.push_back(static_cast<std::size_t>(v));
  }
  auto retrain = learner_from_config(ctx.config);
  retrain.ensemble.jobs = 1;
  const auto gbt = gbt_from_config(ctx.config);

  const auto data = load_prepared(ctx, condition);
  const auto set = extract_labeled(data, spec, ctx.jobs);
  const auto tr = set.subset(rows_for_subjects(set, data.plan.train_subjects));
  const auto te = set.subset(rows_for_subjects(set, data.plan.test_subjects));
  auto sweep = threshold_sweep(tr, te, thresholds, gbt, retrain, ctx.seed, ctx.jobs);

  // Overlay base: per-pixel mean of the training images.
  const auto train_rows = rows_for_subjects(set, data.plan.train_subjects);
  std::vector<double> sum(static_cast<std::size_t>(kCanonicalWidth) * kCanonicalHeight, 0.0);
  for (auto r : train_rows) {
    const auto px = data.images[r].pixels();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += px[i];
  }
  GrayImage base(kCanonicalWidth, kCanonicalHeight);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    base.pixels()[i] = static_cast<std::uint8_t>(
        std::nearbyint(train_rows.empty() ? 0.0 : sum[i] / static_cast<double>(train_rows.size())));
  }

  const auto dir = ctx.out / "relevance" / std::string(to_string(condition)) / slug(ctx.config.get("extractor", ""));
  RelevanceResult result{spec, std::move(sweep), {}, dir};
  write_text(dir / "sweep.csv", sweep_csv(result.sweep.entries));
  std::vector<fs::path> files{dir / "sweep.csv"};
  for (auto n : top_n) {
    const auto path = dir / ("overlay_top" + std::to_string(n) + ".ppm");
    write_bytes(path, encode_ppm(render_overlay(result.sweep.importance, spec, n, base)));
    result.overlays.push_back(path);
    files.push_back(path);
  }
  write_digests(dir, ctx, files);

  auto j = provenance(ctx, "periocular-relevance");
  j["condition"] = to_string(condition);
  j["feature"] = {{"descriptor", spec.descriptor()}, {"id", spec.id()}, {"length", spec.length()}};
  j["gbt"] = json::parse(retrain.to_json())["gbt"];
  j["n_features"] = result.sweep.importance.size();
  j["n_nonzero"] = result.sweep.importance.nonzero();
  j["n_train_rows"] = tr.size();
  j["n_test_rows"] = te.size();
  json entries = json::array();
  for (const auto& e : result.sweep.entries) {
    entries.push_back({{"threshold", e.threshold},
                       {"n_selected", e.n_selected},
                       {"n_nonzero", e.n_nonzero},
                       {"ccr", e.ccr},
                       {"degenerate", e.degenerate}});
  }
  j["sweep"] = std::move(entries);
  j["top_n"] = top_n;
  j["conventions"] = {{"importance", "sum of split gains per feature, rescaled to unit sum"},
                      {"degenerate_ccr", "training majority class rate on test"}};
  write_text(dir / "relevance.json", j.dump(2) + "\n");
  return result;
}

FanovaResult cmd_fanova(const RunContext& ctx) {
  const fs::path curves = ctx.config.require("fanova.curves");
  if (!fs::exists(curves)) throw DataError("curves file not found: " + curves.string());
  const auto n_boot = ctx.config.get_int("fanova.n_boot", 1000);
  if (n_boot < 100 || n_boot > 10'000'000) throw UsageError("fanova.n_boot must be in [100, 10000000]");
  const auto groups = parse_curves_csv(read_text(curves));
  FanovaResult r;
  try {
    r = fanova_test(groups, static_cast<int>(n_boot), ctx.seed, ctx.jobs);
  } catch (const ArgumentError& e) {
    throw DataError(curves.string() + ": " + e.what());
  }
  auto j = json::parse(fanova_json(r));
  j["config_hash"] = ctx.config.hash();
  json g = json::array();
  for (const auto& grp : groups) g.push_back({{"label", grp.label}, {"n_curves", grp.curves.size()}});
  j["groups"] = std::move(g);
  write_text(ctx.out / "fanova.json", j.dump(2) + "\n");
  return r;
}

}  // namespace periocular
