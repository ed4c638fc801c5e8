#ifndef PERIOCULAR_APP_HPP
#define PERIOCULAR_APP_HPP

// Orchestration behind the command-line tool. Every command is a plain
// function so tests can drive it without spawning processes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "periocular/dataset.hpp"
#include "periocular/eval.hpp"
#include "periocular/fanova.hpp"
#include "periocular/features.hpp"
#include "periocular/image.hpp"
#include "periocular/learn.hpp"
#include "periocular/relevance.hpp"

namespace periocular {

/// Flat `key = value` settings. `[section]` headers prefix the keys that
/// follow (`[svm]` then `C = 10` gives `svm.C`); `#` starts a comment.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Sorted `key=value` lines, excluding keys that cannot change results
  /// (`out`, `jobs`).
  std::string canonical() const;
  /// hex64(fnv1a(canonical())).
  std::string hash() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Throws UsageError naming the first key that no command understands.
void check_known_keys(const Config& config);

/// Effective settings for one command run. Flags have already been folded
/// into `config` by the caller.
struct RunContext {
  Config config;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out;

  /// Reads `seed` (required), `jobs` (default 1) and `out` (required).
  static RunContext from_config(Config config);
};

enum class Condition { non_occluded, occluded };
std::string_view to_string(Condition c) noexcept;
Condition parse_condition(std::string_view s);

LearnerConfig learner_from_config(const Config& config);
GbtParams gbt_from_config(const Config& config);

// ---- synthetic benchmark -------------------------------------------------

struct SynthParams {
  int subjects_per_gender = 100;
  int images_per_subject = 2;
  /// Annulus around the image center that carries the class signal.
  double inner_radius = 25.0;
  double outer_radius = 55.0;
};

struct SynthSample {
  SampleRecord record;
  GrayImage image;
};

/// Deterministic 120x160 images. Both classes share the iris disk and the
/// skin outside the annulus; inside it, female images carry fine i.i.d.
/// grain and male images a weaker, spatially smoothed texture.
std::vector<SynthSample> generate_synthetic(const SynthParams& params, std::uint64_t seed);

/// Writes images and manifest.csv under ctx.out; returns the manifest path.
std::filesystem::path cmd_synth(const RunContext& ctx);

// ---- pipeline commands ---------------------------------------------------

struct PrepareResult {
  SplitPlan plan;
  std::vector<std::string> errors;  // one line per failed row
  std::size_t cached = 0;
};

/// Loads the manifest, writes split.json and caches 120x160 (optionally
/// occluded) PGMs under out/cache/<condition>/. Rows that fail are listed,
/// not fatal; the caller decides the exit status.
PrepareResult cmd_prepare(const RunContext& ctx);

struct ExperimentResult {
  FeatureSpec spec;
  EvalReport report;
  std::string archive;  // report JSON as written
  std::filesystem::path directory;
};

ExperimentResult cmd_experiment(const RunContext& ctx);

struct RelevanceResult {
  FeatureSpec spec;
  SweepResult sweep;
  std::vector<std::filesystem::path> overlays;
  std::filesystem::path directory;
};

RelevanceResult cmd_relevance(const RunContext& ctx);

FanovaResult cmd_fanova(const RunContext& ctx);

/// Loaded prepared data for one condition: features of every cached image
/// plus the split, in manifest order.
struct PreparedData {
  std::vector<SampleRecord> records;
  SplitPlan plan;
  std::vector<GrayImage> images;
};

PreparedData load_prepared(const RunContext& ctx, Condition condition);

/// Extracts `spec` from every image on up to `jobs` threads.
LabeledSet extract_labeled(const PreparedData& data, const FeatureSpec& spec, int jobs);

}  // namespace periocular

#endif  // PERIOCULAR_APP_HPP
