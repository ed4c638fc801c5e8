#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "periocular/app.hpp"
#include "periocular/common.hpp"

using namespace periocular;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInvariant = 3 };

struct Flags {
  std::string config;
  std::optional<std::string> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::vector<std::string> set;
};

RunContext context(const Flags& f) {
  Config c = f.config.empty() ? Config{} : Config::load(f.config);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) c.set("seed", *f.seed);
  if (f.jobs) c.set("jobs", std::to_string(*f.jobs));
  if (f.out) c.set("out", *f.out);
  return RunContext::from_config(std::move(c));
}

int run(const std::string& command, const Flags& flags) {
  const auto ctx = context(flags);
  if (command == "synth") {
    std::cout << "wrote " << cmd_synth(ctx).string() << "\n";
  } else if (command == "prepare") {
    const auto r = cmd_prepare(ctx);
    std::cout << "cached " << r.cached << " images; split: " << r.plan.train_subjects.size() << " train / "
              << r.plan.test_subjects.size() << " test subjects, " << r.plan.folds.size() << " folds\n";
    for (const auto& e : r.errors) std::cerr << "error: " << e << "\n";
    if (!r.errors.empty()) return kData;
  } else if (command == "experiment") {
    const auto r = cmd_experiment(ctx);
    std::cout << r.spec.descriptor() << " (length " << r.spec.length() << "): cv ccr " << r.report.cv.mean_ccr
              << " +/- " << r.report.cv.stdev_ccr;
    if (r.report.test) std::cout << ", test ccr " << r.report.test->ccr;
    std::cout << "\nwrote " << (r.directory / "report.json").string() << "\n";
    if (!r.report.test) {
      std::cerr << "error: held-out evaluation failed: " << r.report.test_failure << "\n";
      return kData;
    }
  } else if (command == "relevance") {
    const auto r = cmd_relevance(ctx);
    std::cout << r.sweep.importance.nonzero() << " of " << r.sweep.importance.size()
              << " features carry importance\n";
    for (const auto& e : r.sweep.entries) {
      std::cout << "  threshold " << e.threshold << ": " << e.n_selected << " selected, ccr " << e.ccr << "\n";
    }
    std::cout << "wrote " << r.directory.string() << "\n";
  } else if (command == "fanova") {
    const auto r = cmd_fanova(ctx);
    std::cout << "statistic " << r.statistic << ", p " << r.p_value << ": "
              << (r.reject ? "reject H0" : "fail to reject H0") << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periocular gender classification pipeline"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "Generate the synthetic benchmark images and manifest"},
      {"prepare", "Split subjects and cache working-resolution images"},
      {"experiment", "Cross-validate a feature/learner pair and score the held-out test set"},
      {"relevance", "Rank pixels by boosted-tree importance and sweep selection thresholds"},
      {"fanova", "Functional ANOVA on CCR curves"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "key = value settings file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Base seed (required here or in the config)");
    sub->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::Range(1, 1024));
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--set", flags.set, "Override a setting, key=value (repeatable)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  const auto command = app.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return kInvariant;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const TrainingError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariant;
  }
}
