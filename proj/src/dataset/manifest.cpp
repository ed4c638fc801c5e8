#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "periocular/common.hpp"
#include "periocular/dataset.hpp"

namespace periocular {

std::string_view to_string(Gender g) noexcept { return g == Gender::female ? "female" : "male"; }
std::string_view to_string(Eye e) noexcept { return e == Eye::left ? "left" : "right"; }

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Minimal CSV field splitter; double quotes may wrap a field containing commas.
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

double parse_real(const std::string& s, const char* what, std::size_t row) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw LoadError(std::string("invalid ") + what + " '" + s + "'", row);
  return v;
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

constexpr std::string_view kColumns[] = {"path", "subject_id", "gender", "eye", "session", "cx", "cy", "r"};

}  // namespace

std::vector<SampleRecord> load_manifest(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty() || trim(lines[0]).empty()) throw LoadError("missing header", 1);
  const auto header = split_fields(lines[0]);
  if (header.size() < 5 || header.size() > 8) throw LoadError("header must be path,subject_id,gender,eye,session,cx,cy,r", 1);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (lower(header[i]) != kColumns[i]) {
      throw LoadError("unexpected header column '" + header[i] + "', expected '" + std::string(kColumns[i]) + "'", 1);
    }
  }

  std::vector<SampleRecord> records;
  std::set<std::string> seen_paths;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li + 1;
    if (trim(lines[li]).empty()) continue;
    auto f = split_fields(lines[li]);
    if (f.size() > header.size()) throw LoadError("too many fields", row);
    f.resize(8);

    SampleRecord rec;
    rec.image_path = f[0];
    if (rec.image_path.empty()) throw LoadError("missing path", row);
    if (!seen_paths.insert(rec.image_path).second) throw LoadError("duplicate path '" + rec.image_path + "'", row);

    rec.subject_id = f[1];
    if (rec.subject_id.empty()) throw LoadError("missing subject_id", row);

    const std::string g = lower(f[2]);
    if (g == "f" || g == "female") {
      rec.gender = Gender::female;
    } else if (g == "m" || g == "male") {
      rec.gender = Gender::male;
    } else {
      throw LoadError("unknown gender '" + f[2] + "'", row);
    }

    const std::string e = lower(f[3]);
    if (e == "l" || e == "left") {
      rec.eye = Eye::left;
    } else if (e == "r" || e == "right") {
      rec.eye = Eye::right;
    } else {
      throw LoadError("unknown eye '" + f[3] + "'", row);
    }

    if (!f[4].empty()) rec.session = f[4];

    const int present = !f[5].empty() + !f[6].empty() + !f[7].empty();
    if (present == 3) {
      OcclusionCircle c{parse_real(f[5], "cx", row), parse_real(f[6], "cy", row), parse_real(f[7], "r", row)};
      if (!(c.r >= 0.0)) throw LoadError("occlusion radius must be non-negative", row);
      rec.occlusion = c;
    } else if (present != 0) {
      throw LoadError("occlusion needs all of cx, cy, r", row);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string write_manifest(const std::vector<SampleRecord>& records) {
  std::string out = "path,subject_id,gender,eye,session,cx,cy,r\n";
  for (const auto& r : records) {
    out += csv_escape(r.image_path) + ',' + csv_escape(r.subject_id) + ',' + std::string(to_string(r.gender)) + ',' +
           std::string(to_string(r.eye)) + ',' + csv_escape(r.session.value_or(""));
    if (r.occlusion) {
      out += ',' + format_real(r.occlusion->cx) + ',' + format_real(r.occlusion->cy) + ',' + format_real(r.occlusion->r);
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

}  // namespace periocular
