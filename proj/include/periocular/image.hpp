#ifndef PERIOCULAR_IMAGE_HPP
#define PERIOCULAR_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace periocular {

/// Working resolution every extractor expects (width x height).
inline constexpr int kCanonicalWidth = 120;
inline constexpr int kCanonicalHeight = 160;

/// 8-bit single-channel raster, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  std::span<std::uint8_t> pixels() noexcept { return data_; }

  bool operator==(const GrayImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// 8-bit RGB raster, interleaved row-major. Only used for overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 3 * width * height

  static RgbImage from_gray(const GrayImage& img);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  bool operator==(const RgbImage&) const = default;
};

/// Iris disk to black out. Coordinates in pixels; (0,0) is the top-left corner
/// of the top-left pixel, so pixel (x,y) has its center at (x+0.5, y+0.5).
struct OcclusionCircle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;

  bool operator==(const OcclusionCircle&) const = default;
};

enum class PgmFormat { ascii /* P2 */, binary /* P5 */ };

/// Decodes a P2 or P5 file with maxval 255. Throws DecodeError naming the
/// byte offset of the first problem.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img, PgmFormat format = PgmFormat::binary);
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);

GrayImage read_pgm(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment; results round half-up.
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

/// Zeroes every pixel whose center lies within distance r of (cx, cy).
GrayImage apply_occlusion(const GrayImage& img, const OcclusionCircle& circle);

/// True when the center of pixel (x, y) is inside the closed disk.
bool pixel_in_disk(int x, int y, const OcclusionCircle& circle) noexcept;

}  // namespace periocular

#endif  // PERIOCULAR_IMAGE_HPP
