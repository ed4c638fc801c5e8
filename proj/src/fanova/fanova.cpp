#include <cmath>
#include <charconv>
#include <map>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/fanova.hpp"

namespace periocular {

double curve_norm(const std::vector<double>& x) {
  if (x.empty()) throw ArgumentError("curve_norm needs a non-empty vector");
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

namespace {

using Curve = std::vector<double>;

void validate(const std::vector<CurveGroup>& groups) {
  if (groups.size() < 2) throw ArgumentError("functional ANOVA needs at least two groups");
  std::size_t L = 0;
  for (const auto& g : groups) {
    if (g.curves.size() < 2) throw ArgumentError("group '" + g.label + "' needs at least two curves");
    for (const auto& c : g.curves) {
      if (c.empty()) throw ArgumentError("curves must have at least one point");
      if (L == 0) L = c.size();
      if (c.size() != L) throw ArgumentError("curve length mismatch in group '" + g.label + "'");
    }
  }
}

// Offsetting by the first curve makes the mean of identical curves exact.
Curve mean_curve(const std::vector<Curve>& curves) {
  const Curve& first = curves.front();
  Curve m(first.size(), 0.0);
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < m.size(); ++t) m[t] += c[t] - first[t];
  }
  for (std::size_t t = 0; t < m.size(); ++t) m[t] = first[t] + m[t] / static_cast<double>(curves.size());
  return m;
}

double statistic_from_means(const std::vector<Curve>& means, const std::vector<std::size_t>& sizes) {
  double s = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    for (std::size_t j = i + 1; j < means.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t t = 0; t < means[i].size(); ++t) {
        const double d = means[i][t] - means[j][t];
        d2 += d * d;
      }
      s += static_cast<double>(sizes[i]) * d2;
    }
  }
  return s;
}

}  // namespace

double fanova_statistic(const std::vector<CurveGroup>& groups) {
  validate(groups);
  std::vector<Curve> means;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    means.push_back(mean_curve(g.curves));
    sizes.push_back(g.curves.size());
  }
  return statistic_from_means(means, sizes);
}

FanovaResult fanova_test(const std::vector<CurveGroup>& groups, int n_boot, std::uint64_t seed, int jobs) {
  validate(groups);
  if (n_boot < 100) throw ArgumentError("n_boot must be >= 100");
  FanovaResult r;
  r.n_boot = n_boot;
  r.seed = seed;
  r.statistic = fanova_statistic(groups);

  // Centred residuals, inflated by sqrt(n/(n-1)) so their spread matches the
  // sampling variance rather than the (biased) plug-in variance.
  std::vector<std::vector<Curve>> residuals;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    const auto m = mean_curve(g.curves);
    const double n = static_cast<double>(g.curves.size());
    const double inflate = std::sqrt(n / (n - 1.0));
    auto& res = residuals.emplace_back();
    for (const auto& c : g.curves) {
      Curve e(c.size());
      for (std::size_t t = 0; t < c.size(); ++t) e[t] = (c[t] - m[t]) * inflate;
      res.push_back(std::move(e));
    }
    sizes.push_back(g.curves.size());
  }

  const auto B = static_cast<std::size_t>(n_boot);
  std::vector<double> boot(B);
  parallel_for(B, jobs, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<Curve> means;
    for (const auto& res : residuals) {
      Curve m(res.front().size(), 0.0);
      for (std::size_t k = 0; k < res.size(); ++k) {
        const auto& e = res[rng.index(res.size())];
        for (std::size_t t = 0; t < m.size(); ++t) m[t] += e[t];
      }
      for (auto& v : m) v /= static_cast<double>(res.size());
      means.push_back(std::move(m));
    }
    boot[b] = statistic_from_means(means, sizes);
  });
  std::size_t exceed = 0;
  for (double v : boot) exceed += v >= r.statistic;
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(B + 1);
  r.reject = r.p_value <= 0.05;
  return r;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<CurveGroup> parse_curves_csv(std::string_view text) {
  std::vector<CurveGroup> groups;
  std::map<std::string, std::size_t, std::less<>> index;
  std::size_t group_col = 0, n_cols = 0, line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      n_cols = fields.size();
      std::size_t found = 0;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "group") {
          group_col = i;
          ++found;
        }
      }
      if (found != 1) fail(line_no, "header needs exactly one 'group' column");
      if (n_cols < 2) fail(line_no, "header has no curve columns");
      have_header = true;
      continue;
    }
    if (fields.size() != n_cols) {
      fail(line_no, "expected " + std::to_string(n_cols) + " fields, found " + std::to_string(fields.size()));
    }
    const std::string label(fields[group_col]);
    if (label.empty()) fail(line_no, "empty group label");
    Curve curve;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == group_col) continue;
      double v = 0.0;
      const auto f = fields[i];
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size() || f.empty() || !std::isfinite(v)) {
        fail(line_no, "'" + std::string(f) + "' is not a number");
      }
      curve.push_back(v);
    }
    auto it = index.find(label);
    if (it == index.end()) {
      it = index.emplace(label, groups.size()).first;
      groups.push_back({label, {}});
    }
    groups[it->second].curves.push_back(std::move(curve));
  }
  if (!have_header) throw DataError("line 1: empty curves file");
  return groups;
}

std::string fanova_json(const FanovaResult& r) {
  nlohmann::ordered_json j{{"statistic", r.statistic},
                           {"p_value", r.p_value},
                           {"n_boot", r.n_boot},
                           {"seed", r.seed},
                           {"alpha", 0.05},
                           {"verdict", r.reject ? "reject H0" : "fail to reject H0"}};
  return j.dump(2);
}

}  // namespace periocular
