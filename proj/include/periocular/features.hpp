#ifndef PERIOCULAR_FEATURES_HPP
#define PERIOCULAR_FEATURES_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "periocular/image.hpp"

namespace periocular {

enum class Extractor { raw, intensity_hist, ulbp, hog, fusion };

std::string_view to_string(Extractor e) noexcept;

inline constexpr int kUlbpBins = 59;
inline constexpr int kHogBins = 20;
inline constexpr int kIntensityBins = 256;
inline constexpr int kMaxUlbpRadius = 8;

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const PixelRect&) const = default;
};

/// Provenance of one output index.
struct IndexEntry {
  Extractor extractor = Extractor::raw;
  int scale = 0;                  // ULBP radius or HOG grid size; 0 otherwise
  int bin = -1;                   // histogram bin; -1 for raw pixels
  std::optional<PixelRect> locus; // pixel support, when the feature has one
  std::size_t segment = 0;        // component index inside a fusion
};

struct FeatureVector {
  std::vector<double> values;
  std::string spec_id;

  std::size_t size() const noexcept { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

/// Describes an extractor configuration: its output length, a stable id, and
/// the mapping from every output index back to where it came from.
class FeatureSpec {
 public:
  static FeatureSpec raw(int width = kCanonicalWidth, int height = kCanonicalHeight);
  static FeatureSpec intensity_histogram();
  /// One 59-bin block per radius, in the given order.
  static FeatureSpec ulbp(std::vector<int> radii);
  static FeatureSpec ulbp_concat();
  static FeatureSpec hog(int grid, int width = kCanonicalWidth, int height = kCanonicalHeight);
  static FeatureSpec fusion(std::vector<FeatureSpec> components);
  /// intensity histogram + ULBP radii 1..8 + HOG 3, 5, 10.
  static FeatureSpec canonical_fusion();

  /// Parses "raw", "intensity", "ulbp:<R>", "ulbp_concat", "hog:<B>", "fusion".
  static FeatureSpec parse(std::string_view name);

  Extractor extractor() const noexcept { return extractor_; }
  std::size_t length() const noexcept { return length_; }
  const std::string& id() const noexcept { return id_; }
  const std::string& descriptor() const noexcept { return descriptor_; }
  const std::vector<int>& radii() const noexcept { return radii_; }
  int grid() const noexcept { return grid_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<FeatureSpec>& components() const noexcept { return components_; }

  /// Offset of component i inside a fusion (offsets().back() == length()).
  std::vector<std::size_t> offsets() const;

  IndexEntry locate(std::size_t index) const;
  bool has_spatial_loci() const noexcept;

  FeatureVector extract(const GrayImage& img) const;

  std::string to_json() const;

  bool operator==(const FeatureSpec& other) const noexcept { return id_ == other.id_; }

 private:
  FeatureSpec() = default;
  void finalize();

  Extractor extractor_ = Extractor::raw;
  std::vector<int> radii_;
  int grid_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<FeatureSpec> components_;
  std::size_t length_ = 0;
  std::string descriptor_;
  std::string id_;
};

/// Maps 8-bit LBP codes to the 59 uniform-pattern bins. Uniform patterns get
/// bins 0..57 in increasing code order; everything else lands in bin 58.
class UlbpTable {
 public:
  static const UlbpTable& instance();

  int bin(std::uint8_t code) const noexcept { return mapping_[code]; }
  static int transitions(std::uint8_t code) noexcept;

 private:
  UlbpTable();
  std::array<std::uint8_t, 256> mapping_{};
};

FeatureVector raw_features(const GrayImage& img);
FeatureVector intensity_histogram(const GrayImage& img);

/// 8-neighbor LBP code at (x, y) with the given radius. Neighbor k sits at
/// angle 2*pi*k/8 measured counter-clockwise from the +x axis and contributes
/// bit k when its (bilinearly interpolated) value is >= the center.
std::uint8_t lbp_code(const GrayImage& img, int x, int y, int radius);
FeatureVector ulbp_histogram(const GrayImage& img, int radius);
FeatureVector ulbp_concat(const GrayImage& img);

/// Per-window magnitude histograms before normalization, window-major
/// (row of windows, then column), 20 bins each.
std::vector<double> hog_window_histograms(const GrayImage& img, int grid);
FeatureVector hog_features(const GrayImage& img, int grid);

/// Window rectangle (wx, wy) of a grid x grid partition.
PixelRect hog_window(int width, int height, int grid, int wx, int wy) noexcept;

/// Concatenates component vectors; they must match the fusion spec's
/// components in order.
FeatureVector fuse(const FeatureSpec& fusion_spec, const std::vector<FeatureVector>& parts);

/// Columnar CSV: header `path,f0,f1,...`, one row per image.
std::string write_feature_csv(const std::vector<std::string>& paths, const std::vector<FeatureVector>& rows);

}  // namespace periocular

#endif  // PERIOCULAR_FEATURES_HPP
