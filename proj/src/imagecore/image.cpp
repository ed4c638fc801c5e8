#include "periocular/image.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "periocular/common.hpp"

namespace periocular {

GrayImage::GrayImage(int width, int height, std::uint8_t fill) {
  if (width < 0 || height < 0) throw ArgumentError("image dimensions must be non-negative");
  width_ = width;
  height_ = height;
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data) {
  if (width < 0 || height < 0) throw ArgumentError("image dimensions must be non-negative");
  if (data.size() != static_cast<std::size_t>(width) * height) {
    throw ArgumentError("pixel buffer length " + std::to_string(data.size()) + " does not match " +
                        std::to_string(width) + "x" + std::to_string(height));
  }
  width_ = width;
  height_ = height;
  data_ = std::move(data);
}

RgbImage RgbImage::from_gray(const GrayImage& img) {
  RgbImage out{img.width(), img.height(), {}};
  out.data.reserve(img.size() * 3);
  for (std::uint8_t v : img.pixels()) {
    out.data.insert(out.data.end(), {v, v, v});
  }
  return out;
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
  data[i] = r;
  data[i + 1] = g;
  data[i + 2] = b;
}

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments that run to end of line.
  void skip_separators() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_separators();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000L) throw DecodeError(std::string(what) + " out of range", start);
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ >= bytes_.size()) throw DecodeError(std::string("truncated file: missing ") + what, pos_);
      throw DecodeError(std::string("malformed header: expected ") + what, pos_);
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) throw DecodeError("truncated file: missing magic number", 0);
  if (bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw DecodeError("malformed header: not a P2/P5 PGM", 0);
  }
  const bool binary = bytes[1] == '5';
  HeaderReader reader(bytes);
  reader.advance(2);
  const long width = reader.read_uint("width");
  const long height = reader.read_uint("height");
  const std::size_t maxval_offset = reader.pos();
  const long maxval = reader.read_uint("maxval");
  if (maxval != 255) throw DecodeError("unsupported maxval " + std::to_string(maxval), maxval_offset);
  if (width <= 0 || height <= 0) throw DecodeError("malformed header: zero image dimension", maxval_offset);

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::uint8_t> data;
  data.reserve(count);
  if (binary) {
    if (reader.pos() >= bytes.size() || !is_space(bytes[reader.pos()])) {
      throw DecodeError("malformed header: missing separator before raster", reader.pos());
    }
    const std::size_t start = reader.pos() + 1;
    if (bytes.size() - start < count) {
      throw DecodeError("truncated payload: expected " + std::to_string(count) + " bytes", bytes.size());
    }
    data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                bytes.begin() + static_cast<std::ptrdiff_t>(start + count));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t at = reader.pos();
      const long v = reader.read_uint("pixel value");
      if (v > 255) throw DecodeError("pixel value exceeds maxval", at);
      data.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img, PgmFormat format) {
  const bool binary = format == PgmFormat::binary;
  std::string header = std::string(binary ? "P5\n" : "P2\n") + std::to_string(img.width()) + " " +
                       std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  if (binary) {
    out.insert(out.end(), img.pixels().begin(), img.pixels().end());
    return out;
  }
  for (int y = 0; y < img.height(); ++y) {
    std::string line;
    for (int x = 0; x < img.width(); ++x) {
      if (x) line += ' ';
      line += std::to_string(img.at(x, y));
    }
    line += '\n';
    out.insert(out.end(), line.begin(), line.end());
  }
  return out;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode_pgm(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what(), e.offset());
  }
}

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ArgumentError("resize target dimensions must be >= 1");
  if (img.empty()) throw ArgumentError("cannot resize an empty image");
  const double sx = static_cast<double>(img.width()) / out_w;
  const double sy = static_cast<double>(img.height()) / out_h;
  const int max_x = img.width() - 1;
  const int max_y = img.height() - 1;

  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, max_y);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, max_x);
      const double wx = fx - x0;
      const double top = img.at(x0, y0) + wx * (img.at(x1, y0) - img.at(x0, y0));
      const double bottom = img.at(x0, y1) + wx * (img.at(x1, y1) - img.at(x0, y1));
      const double v = top + wy * (bottom - top);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

bool pixel_in_disk(int x, int y, const OcclusionCircle& circle) noexcept {
  const double dx = x + 0.5 - circle.cx;
  const double dy = y + 0.5 - circle.cy;
  return dx * dx + dy * dy <= circle.r * circle.r;
}

GrayImage apply_occlusion(const GrayImage& img, const OcclusionCircle& circle) {
  if (circle.r < 0) throw ArgumentError("occlusion radius must be non-negative");
  GrayImage out = img;
  if (circle.r == 0) return out;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (pixel_in_disk(x, y, circle)) out.at(x, y) = 0;
    }
  }
  return out;
}

}  // namespace periocular
