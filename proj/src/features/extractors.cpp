#include <cmath>
#include <numbers>

#include "periocular/common.hpp"
#include "periocular/features.hpp"

namespace periocular {

namespace {

void require_size(const GrayImage& img, int w, int h, const char* what) {
  if (img.width() != w || img.height() != h) {
    throw ArgumentError(std::string(what) + " expects a " + std::to_string(w) + "x" + std::to_string(h) +
                        " image, got " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
}

// Sample offset of one LBP neighbor, split into integer cell and fraction.
struct NeighborOffset {
  int ix = 0, iy = 0;
  double fx = 0.0, fy = 0.0;
};

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

std::array<NeighborOffset, 8> neighbor_offsets(int radius) {
  std::array<NeighborOffset, 8> out{};
  for (int k = 0; k < 8; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / 8.0;
    // Image rows grow downward, so counter-clockwise means negative dy.
    const double dx = snap(radius * std::cos(angle));
    const double dy = snap(-radius * std::sin(angle));
    out[k].ix = static_cast<int>(std::floor(dx));
    out[k].iy = static_cast<int>(std::floor(dy));
    out[k].fx = dx - out[k].ix;
    out[k].fy = dy - out[k].iy;
  }
  return out;
}

// Interpolation round-off within this margin counts as a tie (bit set).
constexpr double kTieEpsilon = 1e-9;

inline double sample(const GrayImage& img, int x, int y, const NeighborOffset& o) {
  const int x0 = x + o.ix;
  const int y0 = y + o.iy;
  const double a = img.at(x0, y0);
  if (o.fx == 0.0 && o.fy == 0.0) return a;
  if (o.fy == 0.0) return a + o.fx * (img.at(x0 + 1, y0) - a);
  if (o.fx == 0.0) return a + o.fy * (img.at(x0, y0 + 1) - a);
  const double top = a + o.fx * (img.at(x0 + 1, y0) - a);
  const double c = img.at(x0, y0 + 1);
  const double bottom = c + o.fx * (img.at(x0 + 1, y0 + 1) - c);
  return top + o.fy * (bottom - top);
}

inline std::uint8_t code_at(const GrayImage& img, int x, int y, const std::array<NeighborOffset, 8>& offsets) {
  const double center = img.at(x, y);
  std::uint8_t code = 0;
  for (int k = 0; k < 8; ++k) {
    if (sample(img, x, y, offsets[k]) + kTieEpsilon >= center) code |= static_cast<std::uint8_t>(1u << k);
  }
  return code;
}

void check_radius(const GrayImage& img, int radius) {
  if (radius < 1 || radius > kMaxUlbpRadius) throw ArgumentError("ULBP radius must lie in 1..8");
  if (img.width() < 2 * radius + 1 || img.height() < 2 * radius + 1) {
    throw ArgumentError("image too small for ULBP radius " + std::to_string(radius));
  }
}

}  // namespace

int UlbpTable::transitions(std::uint8_t code) noexcept {
  int t = 0;
  for (int k = 0; k < 8; ++k) {
    t += ((code >> k) & 1u) != ((code >> ((k + 1) % 8)) & 1u);
  }
  return t;
}

UlbpTable::UlbpTable() {
  std::uint8_t next = 0;
  for (int code = 0; code < 256; ++code) {
    mapping_[code] = transitions(static_cast<std::uint8_t>(code)) <= 2 ? next++ : kUlbpBins - 1;
  }
}

const UlbpTable& UlbpTable::instance() {
  static const UlbpTable table;
  return table;
}

FeatureVector raw_features(const GrayImage& img) {
  require_size(img, kCanonicalWidth, kCanonicalHeight, "raw_features");
  FeatureVector out{std::vector<double>(img.size()), FeatureSpec::raw().id()};
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) out.values[i] = px[i] / 255.0;
  return out;
}

FeatureVector intensity_histogram(const GrayImage& img) {
  if (img.empty()) throw ArgumentError("intensity_histogram: empty image");
  std::vector<std::size_t> counts(kIntensityBins, 0);
  for (std::uint8_t v : img.pixels()) ++counts[v];
  FeatureVector out{std::vector<double>(kIntensityBins), FeatureSpec::intensity_histogram().id()};
  const double n = static_cast<double>(img.size());
  for (int b = 0; b < kIntensityBins; ++b) out.values[b] = counts[b] / n;
  return out;
}

std::uint8_t lbp_code(const GrayImage& img, int x, int y, int radius) {
  check_radius(img, radius);
  if (x < radius || y < radius || x >= img.width() - radius || y >= img.height() - radius) {
    throw ArgumentError("pixel neighborhood leaves the image");
  }
  return code_at(img, x, y, neighbor_offsets(radius));
}

FeatureVector ulbp_histogram(const GrayImage& img, int radius) {
  check_radius(img, radius);
  const auto offsets = neighbor_offsets(radius);
  const auto& table = UlbpTable::instance();
  std::vector<std::size_t> counts(kUlbpBins, 0);
  for (int y = radius; y < img.height() - radius; ++y) {
    for (int x = radius; x < img.width() - radius; ++x) {
      ++counts[table.bin(code_at(img, x, y, offsets))];
    }
  }
  const double n = static_cast<double>(img.width() - 2 * radius) * (img.height() - 2 * radius);
  FeatureVector out{std::vector<double>(kUlbpBins), FeatureSpec::ulbp({radius}).id()};
  for (int b = 0; b < kUlbpBins; ++b) out.values[b] = counts[b] / n;
  return out;
}

FeatureVector ulbp_concat(const GrayImage& img) {
  require_size(img, kCanonicalWidth, kCanonicalHeight, "ulbp_concat");
  FeatureVector out{{}, FeatureSpec::ulbp_concat().id()};
  out.values.reserve(kUlbpBins * kMaxUlbpRadius);
  for (int r = 1; r <= kMaxUlbpRadius; ++r) {
    const auto h = ulbp_histogram(img, r);
    out.values.insert(out.values.end(), h.values.begin(), h.values.end());
  }
  return out;
}

PixelRect hog_window(int width, int height, int grid, int wx, int wy) noexcept {
  return {wx * width / grid, wy * height / grid, (wx + 1) * width / grid, (wy + 1) * height / grid};
}

std::vector<double> hog_window_histograms(const GrayImage& img, int grid) {
  if (grid < 1) throw ArgumentError("HOG grid must be >= 1");
  if (img.width() < 3 || img.height() < 3 || grid > img.width() || grid > img.height()) {
    throw ArgumentError("image too small for HOG grid " + std::to_string(grid));
  }
  const int w = img.width();
  const int h = img.height();
  std::vector<int> col_window(w), row_window(h);
  for (int wx = 0; wx < grid; ++wx) {
    const auto r = hog_window(w, h, grid, wx, 0);
    for (int x = r.x0; x < r.x1; ++x) col_window[x] = wx;
  }
  for (int wy = 0; wy < grid; ++wy) {
    const auto r = hog_window(w, h, grid, 0, wy);
    for (int y = r.y0; y < r.y1; ++y) row_window[y] = wy;
  }

  std::vector<double> hist(static_cast<std::size_t>(grid) * grid * kHogBins, 0.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      // Central differences: [-1, 0, 1] across columns (h) and down rows (v).
      const double gh = static_cast<double>(img.at(x + 1, y)) - img.at(x - 1, y);
      const double gv = static_cast<double>(img.at(x, y + 1)) - img.at(x, y - 1);
      if (gh == 0.0 && gv == 0.0) continue;
      const double m = std::sqrt(gv * gv + gh * gh);
      double theta = std::atan2(gv, gh) * (180.0 / std::numbers::pi);
      if (theta < 0.0) theta += 360.0;
      const int bin = std::min(static_cast<int>(theta / 18.0), kHogBins - 1);
      const std::size_t window = static_cast<std::size_t>(row_window[y]) * grid + col_window[x];
      hist[window * kHogBins + bin] += m;
    }
  }
  return hist;
}

FeatureVector hog_features(const GrayImage& img, int grid) {
  require_size(img, kCanonicalWidth, kCanonicalHeight, "hog_features");
  FeatureVector out{hog_window_histograms(img, grid), FeatureSpec::hog(grid).id()};
  for (std::size_t w = 0; w < out.values.size(); w += kHogBins) {
    double sq = 0.0;
    for (int b = 0; b < kHogBins; ++b) sq += out.values[w + b] * out.values[w + b];
    if (sq == 0.0) continue;
    const double norm = std::sqrt(sq);
    for (int b = 0; b < kHogBins; ++b) out.values[w + b] /= norm;
  }
  return out;
}

FeatureVector fuse(const FeatureSpec& fusion_spec, const std::vector<FeatureVector>& parts) {
  if (parts.empty()) throw ArgumentError("fuse: empty component list");
  if (fusion_spec.extractor() != Extractor::fusion) throw UsageError("fuse: spec is not a fusion");
  const auto& comps = fusion_spec.components();
  if (comps.size() != parts.size()) throw ArgumentError("fuse: component count mismatch");
  FeatureVector out{{}, fusion_spec.id()};
  out.values.reserve(fusion_spec.length());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].spec_id != comps[i].id() || parts[i].size() != comps[i].length()) {
      throw UsageError("fuse: component " + std::to_string(i) + " does not match " + comps[i].descriptor());
    }
    out.values.insert(out.values.end(), parts[i].values.begin(), parts[i].values.end());
  }
  return out;
}

}  // namespace periocular
