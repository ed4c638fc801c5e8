#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "periocular/app.hpp"
#include "periocular/common.hpp"

using namespace periocular;
namespace fs = std::filesystem;

namespace {

std::string text_of(const fs::path& p) {
  const auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  write_bytes(p, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

// A small synthetic dataset plus a config pointing at it.
struct Workspace {
  fs::path root;
  Config config;

  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("periocular_" + name)) {
    fs::remove_all(root);
    config.set("seed", "5");
    config.set("out", (root / "out").string());
    config.set("manifest", (root / "synth" / "manifest.csv").string());
    Config s = config;
    s.set("out", (root / "synth").string());
    s.set("synth.subjects", "10");
    cmd_synth(RunContext::from_config(s));
  }
  ~Workspace() { fs::remove_all(root); }

  RunContext ctx(std::initializer_list<std::pair<const char*, const char*>> kv) const {
    Config c = config;
    for (const auto& [k, v] : kv) c.set(k, v);
    return RunContext::from_config(std::move(c));
  }
};

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse("# comment\nseed = 3\n[svm]\nC = 10   # trailing\n\n[split]\nk=4\n");
  CHECK(c.get("seed", "") == "3");
  CHECK(c.get_double("svm.C", 0) == 10.0);
  CHECK(c.get_int("split.k", 0) == 4);
  CHECK_THROWS_AS(Config::parse("seed 3\n"), UsageError);
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), UsageError);
  CHECK_THROWS_AS(Config::parse("[svm\n"), UsageError);
  CHECK_THROWS_AS(Config::parse("x = 1.5").get_int("x", 0), UsageError);
  CHECK(Config::parse("t = 0, 0.5,1").get_doubles("t", {}) == std::vector<double>{0, 0.5, 1});
}

TEST_CASE("config hash ignores output location and workers") {
  auto a = Config::parse("seed = 1\nlearner = svm\nout = /a\njobs = 1\n");
  auto b = Config::parse("learner = svm\nseed = 1\nout = /b\njobs = 4\n");
  CHECK(a.hash() == b.hash());
  b.set("learner", "tree");
  CHECK(a.hash() != b.hash());
}

TEST_CASE("run context requires a seed and rejects unknown keys") {
  CHECK_THROWS_AS(RunContext::from_config(Config::parse("out = x\n")), UsageError);
  CHECK_THROWS_AS(RunContext::from_config(Config::parse("seed = 1\nout = x\nsvm.c = 3\n")), UsageError);
  CHECK_THROWS_AS(RunContext::from_config(Config::parse("seed = -1\nout = x\n")), UsageError);
  const auto ctx = RunContext::from_config(Config::parse("seed = 9\nout = x\njobs = 2\n"));
  CHECK(ctx.seed == 9);
  CHECK(ctx.jobs == 2);
}

TEST_CASE("learner settings map onto the learner config") {
  const auto l = learner_from_config(
      Config::parse("learner = random_forest\nensemble.n_learners = 12\ngbt.colsample = 0.25\n"));
  CHECK(l.kind == ModelKind::random_forest);
  CHECK(l.ensemble.n_learners == 12);
  CHECK(l.ensemble.max_depth == default_ensemble_params(ModelKind::random_forest).max_depth);
  CHECK(l.gbt.colsample == 0.25);
  CHECK_THROWS_AS(learner_from_config(Config::parse("learner = lpboost\n")), UsageError);
}

TEST_CASE("synthetic images differ by class only inside the annulus") {
  SynthParams p;
  p.subjects_per_gender = 20;
  p.images_per_subject = 1;
  const auto samples = generate_synthetic(p, 3);
  REQUIRE(samples.size() == 40);
  CHECK(generate_synthetic(p, 3)[7].image == samples[7].image);
  // Per-region pixel spread by class.
  auto spread = [&](Gender g, double lo, double hi) {
    double s = 0, s2 = 0, n = 0;
    for (const auto& smp : samples) {
      if (smp.record.gender != g) continue;
      for (int y = 0; y < kCanonicalHeight; ++y) {
        for (int x = 0; x < kCanonicalWidth; ++x) {
          const double d = std::hypot(x + 0.5 - 60, y + 0.5 - 80);
          if (d <= lo || d > hi) continue;
          const double v = smp.image.at(x, y);
          s += v, s2 += v * v, n += 1;
        }
      }
    }
    return std::sqrt(s2 / n - (s / n) * (s / n));
  };
  CHECK(std::abs(spread(Gender::female, 0, 25) - spread(Gender::male, 0, 25)) < 1.0);
  CHECK(std::abs(spread(Gender::female, 55, 1e9) - spread(Gender::male, 55, 1e9)) < 1.0);
  CHECK(spread(Gender::female, 25, 55) > 2 * spread(Gender::male, 25, 55));
  for (const auto& s : samples) CHECK(s.record.occlusion == OcclusionCircle{60, 80, 25});
}

TEST_CASE("prepare caches occluded images idempotently") {
  Workspace ws("prepare");
  const auto ctx = ws.ctx({{"condition", "occluded"}});
  const auto r = cmd_prepare(ctx);
  CHECK(r.errors.empty());
  CHECK(r.cached == 40);
  audit_split(r.plan);
  const auto dir = ctx.out / "cache" / "occluded";
  const auto first = text_of(dir / "0003.pgm");
  const auto img = read_pgm(dir / "0003.pgm");
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (pixel_in_disk(x, y, {60, 80, 25})) CHECK(img.at(x, y) == 0);
    }
  }
  const auto index = text_of(dir / "index.csv");
  const auto report = text_of(dir / "prepare.json");
  cmd_prepare(ctx);
  CHECK(text_of(dir / "0003.pgm") == first);
  CHECK(text_of(dir / "index.csv") == index);
  CHECK(text_of(dir / "prepare.json") == report);
}

TEST_CASE("prepare lists missing files and missing circles") {
  Workspace ws("prepare_errors");
  const fs::path manifest = ws.root / "synth" / "manifest.csv";
  auto records = load_manifest(text_of(manifest));
  fs::remove(ws.root / "synth" / records[2].image_path);
  records[5].occlusion.reset();
  write_text(manifest, write_manifest(records));
  const auto full = cmd_prepare(ws.ctx({{"condition", "non_occluded"}}));
  REQUIRE(full.errors.size() == 1);
  CHECK(full.errors[0].rfind("row 4 ", 0) == 0);
  CHECK(full.cached == 39);
  const auto occ = cmd_prepare(ws.ctx({{"condition", "occluded"}}));
  REQUIRE(occ.errors.size() == 2);
  CHECK(occ.errors[1].find("no occlusion circle") != std::string::npos);
  CHECK(text_of(ws.root / "out" / "cache" / "occluded" / "errors.txt").find("row 7 ") != std::string::npos);
}

TEST_CASE("experiment records feature lengths and reruns identically") {
  Workspace ws("experiment");
  cmd_prepare(ws.ctx({}));
  CHECK_THROWS_AS(cmd_experiment(ws.ctx({{"condition", "occluded"}, {"extractor", "raw"}})), UsageError);
  const auto ulbp = cmd_experiment(ws.ctx({{"extractor", "ulbp_concat"}}));
  const auto j = nlohmann::json::parse(ulbp.archive);
  CHECK(j["feature"]["length"] == 472);
  CHECK(j["seed"] == 5);
  CHECK(j["config_hash"] == ws.ctx({{"extractor", "ulbp_concat"}}).config.hash());
  CHECK(j["config"]["extractor"] == "ulbp_concat");
  CHECK(j["evaluation"]["cv"]["folds"].size() == 5);
  const auto raw = cmd_experiment(ws.ctx({{"extractor", "raw"}, {"learner", "tree"}}));
  CHECK(nlohmann::json::parse(raw.archive)["feature"]["length"] == 19200);
  CHECK(text_of(raw.directory / "table.csv").rfind("method,condition,ccr", 0) == 0);
  const auto again = cmd_experiment(ws.ctx({{"extractor", "ulbp_concat"}}));
  CHECK(again.archive == ulbp.archive);
  CHECK_THROWS_AS(cmd_experiment(ws.ctx({{"extractor", "sift"}})), UsageError);
}

TEST_CASE("relevance writes the sweep and one overlay per requested size") {
  Workspace ws("relevance");
  cmd_prepare(ws.ctx({}));
  const auto r = cmd_relevance(ws.ctx({{"extractor", "raw"},
                                       {"learner", "tree"},
                                       {"gbt.n_rounds", "50"},
                                       {"gbt.max_depth", "1"},
                                       {"gbt.colsample", "0.01"},
                                       {"relevance.thresholds", "0,0.01,0.5"}}));
  const auto csv = text_of(r.directory / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("\n0,19200,") != std::string::npos);
  REQUIRE(r.overlays.size() == 5);
  CHECK(r.overlays.front().filename() == "overlay_top1000.ppm");
  CHECK(r.overlays.back().filename() == "overlay_top10000.ppm");
  const auto j = nlohmann::json::parse(text_of(r.directory / "relevance.json"));
  CHECK(j["n_nonzero"] == r.sweep.importance.nonzero());
  CHECK(j["sweep"].size() == 3);
  CHECK_THROWS_AS(cmd_relevance(ws.ctx({{"extractor", "ulbp_concat"}})), UsageError);
}

TEST_CASE("fanova command") {
  const auto root = fs::temp_directory_path() / "periocular_fanova_cmd";
  fs::remove_all(root);
  write_text(root / "same.csv", "group,a,b\nx,0.8,0.9\nx,0.8,0.9\ny,0.8,0.9\ny,0.8,0.9\n");
  write_text(root / "bad.csv", "group,a,b\nx,0.8,0.9\nx,0.8\n");
  write_text(root / "shift.csv", "group,a,b\nx,0.8,0.9\nx,0.82,0.91\nx,0.79,0.88\ny,0.7,0.8\ny,0.72,0.79\ny,0.69,0.81\n");
  Config c;
  c.set("out", root.string());
  c.set("seed", "1");
  c.set("fanova.n_boot", "200");
  auto run = [&](const char* file, const char* seed) {
    Config d = c;
    d.set("fanova.curves", (root / file).string());
    d.set("seed", seed);
    return cmd_fanova(RunContext::from_config(d));
  };
  const auto same = run("same.csv", "1");
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);
  const auto j = nlohmann::json::parse(text_of(root / "fanova.json"));
  CHECK(j["verdict"] == "fail to reject H0");
  CHECK(j.contains("config_hash"));
  try {
    run("bad.csv", "1");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  const auto s1 = run("shift.csv", "1");
  const auto s2 = run("shift.csv", "2");
  CHECK(s1.statistic == s2.statistic);
  fs::remove_all(root);
}
