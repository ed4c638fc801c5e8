#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "periocular/app.hpp"
#include "periocular/common.hpp"

namespace periocular {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw UsageError("setting '" + key + "' = '" + value + "' is not " + want);
}

double to_double(const std::string& key, std::string_view text) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
    bad_value(key, std::string(text), "a number");
  }
  return v;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "manifest", "condition", "extractor", "learner", "seed", "out", "jobs",
      "svm.C", "svm.gamma", "svm.tol", "svm.grid", "svm.standardize",
      "tree.max_depth", "tree.min_leaf", "tree.max_features",
      "ensemble.n_learners", "ensemble.learning_rate", "ensemble.max_depth", "ensemble.min_leaf",
      "gbt.n_rounds", "gbt.learning_rate", "gbt.max_depth", "gbt.lambda",
      "gbt.min_leaf", "gbt.min_child_weight", "gbt.colsample",
      "split.fraction", "split.k",
      "relevance.thresholds", "relevance.top_n",
      "fanova.curves", "fanova.n_boot",
      "synth.subjects", "synth.images_per_subject"};
  return keys;
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config c;
  std::string section;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw UsageError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError(where + "expected key = value");
    const auto key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) throw UsageError(where + "empty key");
    const auto full = section.empty() ? key : section + "." + key;
    if (c.has(full)) throw UsageError(where + "duplicate key '" + full + "'");
    c.set(full, std::string(trim(line.substr(eq + 1))));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) throw UsageError("missing required setting '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? to_double(key, values_.at(key)) : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  if (!has(key)) return fallback;
  const auto& text = values_.at(key);
  long long v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size()) bad_value(key, text, "an integer");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  std::string_view rest = values_.at(key);
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(to_double(key, trim(rest.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "out" || k == "jobs") continue;
    out += k + '=' + v + '\n';
  }
  return out;
}

std::string Config::hash() const { return hex64(fnv1a(canonical())); }

void check_known_keys(const Config& config) {
  for (const auto& [k, v] : config.values()) {
    if (!known_keys().count(k)) throw UsageError("unknown setting '" + k + "'");
  }
}

RunContext RunContext::from_config(Config config) {
  check_known_keys(config);
  RunContext ctx;
  const auto seed_text = config.require("seed");
  const auto [p, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), ctx.seed);
  if (ec != std::errc() || p != seed_text.data() + seed_text.size()) {
    bad_value("seed", seed_text, "a non-negative integer");
  }
  const auto jobs = config.get_int("jobs", 1);
  if (jobs < 1 || jobs > 1024) bad_value("jobs", config.get("jobs", ""), "in [1, 1024]");
  ctx.jobs = static_cast<int>(jobs);
  ctx.out = config.require("out");
  ctx.config = std::move(config);
  return ctx;
}

std::string_view to_string(Condition c) noexcept { return c == Condition::occluded ? "occluded" : "non_occluded"; }

Condition parse_condition(std::string_view s) {
  if (s == "non_occluded") return Condition::non_occluded;
  if (s == "occluded") return Condition::occluded;
  throw UsageError("condition must be non_occluded or occluded, not '" + std::string(s) + "'");
}

LearnerConfig learner_from_config(const Config& c) {
  LearnerConfig l;
  try {
    l.kind = parse_model_kind(c.get("learner", "svm"));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  l.svm.C = c.get_double("svm.C", l.svm.C);
  l.svm.gamma = c.get_double("svm.gamma", l.svm.gamma);
  l.svm.tol = c.get_double("svm.tol", l.svm.tol);
  l.svm.standardize = c.get_bool("svm.standardize", l.svm.standardize);
  l.svm_grid = c.get_bool("svm.grid", false);
  l.tree.max_depth = static_cast<int>(c.get_int("tree.max_depth", l.tree.max_depth));
  l.tree.min_leaf = static_cast<int>(c.get_int("tree.min_leaf", l.tree.min_leaf));
  l.tree.max_features = static_cast<int>(c.get_int("tree.max_features", l.tree.max_features));
  if (is_ensemble(l.kind)) l.ensemble = default_ensemble_params(l.kind);
  l.ensemble.n_learners = static_cast<int>(c.get_int("ensemble.n_learners", l.ensemble.n_learners));
  l.ensemble.learning_rate = c.get_double("ensemble.learning_rate", l.ensemble.learning_rate);
  l.ensemble.max_depth = static_cast<int>(c.get_int("ensemble.max_depth", l.ensemble.max_depth));
  l.ensemble.min_leaf = static_cast<int>(c.get_int("ensemble.min_leaf", l.ensemble.min_leaf));
  l.gbt = gbt_from_config(c);
  return l;
}

GbtParams gbt_from_config(const Config& c) {
  GbtParams g;
  g.n_rounds = static_cast<int>(c.get_int("gbt.n_rounds", g.n_rounds));
  g.learning_rate = c.get_double("gbt.learning_rate", g.learning_rate);
  g.max_depth = static_cast<int>(c.get_int("gbt.max_depth", g.max_depth));
  g.lambda = c.get_double("gbt.lambda", g.lambda);
  g.min_leaf = static_cast<int>(c.get_int("gbt.min_leaf", g.min_leaf));
  g.min_child_weight = c.get_double("gbt.min_child_weight", g.min_child_weight);
  g.colsample = c.get_double("gbt.colsample", g.colsample);
  return g;
}

}  // namespace periocular
