#include <charconv>
#include <sstream>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/features.hpp"

namespace periocular {

std::string_view to_string(Extractor e) noexcept {
  switch (e) {
    case Extractor::raw: return "raw";
    case Extractor::intensity_hist: return "intensity_hist";
    case Extractor::ulbp: return "ulbp";
    case Extractor::hog: return "hog";
    case Extractor::fusion: return "fusion";
  }
  return "?";
}

FeatureSpec FeatureSpec::raw(int width, int height) {
  if (width < 1 || height < 1) throw ArgumentError("raw spec needs positive dimensions");
  FeatureSpec s;
  s.extractor_ = Extractor::raw;
  s.width_ = width;
  s.height_ = height;
  s.finalize();
  return s;
}

FeatureSpec FeatureSpec::intensity_histogram() {
  FeatureSpec s;
  s.extractor_ = Extractor::intensity_hist;
  s.finalize();
  return s;
}

FeatureSpec FeatureSpec::ulbp(std::vector<int> radii) {
  if (radii.empty()) throw ArgumentError("ULBP spec needs at least one radius");
  for (int r : radii) {
    if (r < 1 || r > kMaxUlbpRadius) throw ArgumentError("ULBP radius must lie in 1..8");
  }
  FeatureSpec s;
  s.extractor_ = Extractor::ulbp;
  s.radii_ = std::move(radii);
  s.finalize();
  return s;
}

FeatureSpec FeatureSpec::ulbp_concat() { return ulbp({1, 2, 3, 4, 5, 6, 7, 8}); }

FeatureSpec FeatureSpec::hog(int grid, int width, int height) {
  if (grid < 1 || grid > width || grid > height) throw ArgumentError("invalid HOG grid " + std::to_string(grid));
  FeatureSpec s;
  s.extractor_ = Extractor::hog;
  s.grid_ = grid;
  s.width_ = width;
  s.height_ = height;
  s.finalize();
  return s;
}

FeatureSpec FeatureSpec::fusion(std::vector<FeatureSpec> components) {
  if (components.empty()) throw ArgumentError("fusion needs at least one component");
  FeatureSpec s;
  s.extractor_ = Extractor::fusion;
  s.components_ = std::move(components);
  s.finalize();
  return s;
}

FeatureSpec FeatureSpec::canonical_fusion() {
  return fusion({intensity_histogram(), ulbp_concat(), hog(3), hog(5), hog(10)});
}

FeatureSpec FeatureSpec::parse(std::string_view name) {
  auto number_after = [&](std::string_view prefix) {
    const auto rest = name.substr(prefix.size());
    int v = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw ArgumentError("bad extractor parameter in '" + std::string(name) + "'");
    }
    return v;
  };
  if (name == "raw") return raw();
  if (name == "intensity" || name == "intensity_hist") return intensity_histogram();
  if (name == "ulbp_concat") return ulbp_concat();
  if (name == "fusion") return canonical_fusion();
  if (name.starts_with("ulbp:")) return ulbp({number_after("ulbp:")});
  if (name.starts_with("hog:")) return hog(number_after("hog:"));
  throw ArgumentError("unknown extractor '" + std::string(name) + "'");
}

void FeatureSpec::finalize() {
  std::ostringstream d;
  switch (extractor_) {
    case Extractor::raw:
      length_ = static_cast<std::size_t>(width_) * height_;
      d << "raw(" << width_ << "x" << height_ << ")";
      break;
    case Extractor::intensity_hist:
      length_ = kIntensityBins;
      d << "intensity_hist(" << kIntensityBins << ")";
      break;
    case Extractor::ulbp:
      length_ = kUlbpBins * radii_.size();
      d << "ulbp(";
      for (std::size_t i = 0; i < radii_.size(); ++i) d << (i ? "," : "") << radii_[i];
      d << ")";
      break;
    case Extractor::hog:
      length_ = static_cast<std::size_t>(kHogBins) * grid_ * grid_;
      d << "hog(" << grid_ << ";" << width_ << "x" << height_ << ")";
      break;
    case Extractor::fusion:
      length_ = 0;
      d << "fusion[";
      for (std::size_t i = 0; i < components_.size(); ++i) {
        length_ += components_[i].length_;
        d << (i ? "|" : "") << components_[i].descriptor_;
      }
      d << "]";
      break;
  }
  descriptor_ = d.str();
  id_ = hex64(fnv1a(descriptor_));
}

std::vector<std::size_t> FeatureSpec::offsets() const {
  std::vector<std::size_t> out{0};
  for (const auto& c : components_) out.push_back(out.back() + c.length());
  return out;
}

IndexEntry FeatureSpec::locate(std::size_t index) const {
  if (index >= length_) throw ArgumentError("feature index out of range");
  IndexEntry e;
  e.extractor = extractor_;
  switch (extractor_) {
    case Extractor::raw: {
      const int x = static_cast<int>(index % width_);
      const int y = static_cast<int>(index / width_);
      e.locus = PixelRect{x, y, x + 1, y + 1};
      break;
    }
    case Extractor::intensity_hist:
      e.bin = static_cast<int>(index);
      break;
    case Extractor::ulbp:
      e.scale = radii_[index / kUlbpBins];
      e.bin = static_cast<int>(index % kUlbpBins);
      break;
    case Extractor::hog: {
      const auto window = static_cast<int>(index / kHogBins);
      e.scale = grid_;
      e.bin = static_cast<int>(index % kHogBins);
      e.locus = hog_window(width_, height_, grid_, window % grid_, window / grid_);
      break;
    }
    case Extractor::fusion: {
      const auto offs = offsets();
      std::size_t c = 0;
      while (offs[c + 1] <= index) ++c;
      e = components_[c].locate(index - offs[c]);
      e.segment = c;
      break;
    }
  }
  return e;
}

bool FeatureSpec::has_spatial_loci() const noexcept {
  switch (extractor_) {
    case Extractor::raw:
    case Extractor::hog:
      return true;
    case Extractor::fusion:
      for (const auto& c : components_) {
        if (c.has_spatial_loci()) return true;
      }
      return false;
    default:
      return false;
  }
}

FeatureVector FeatureSpec::extract(const GrayImage& img) const {
  switch (extractor_) {
    case Extractor::raw: {
      if (img.width() != width_ || img.height() != height_) {
        throw ArgumentError("raw extractor expects " + std::to_string(width_) + "x" + std::to_string(height_));
      }
      FeatureVector out{std::vector<double>(img.size()), id_};
      const auto px = img.pixels();
      for (std::size_t i = 0; i < px.size(); ++i) out.values[i] = px[i] / 255.0;
      return out;
    }
    case Extractor::intensity_hist:
      return periocular::intensity_histogram(img);
    case Extractor::ulbp: {
      FeatureVector out{{}, id_};
      out.values.reserve(length_);
      for (int r : radii_) {
        const auto h = ulbp_histogram(img, r);
        out.values.insert(out.values.end(), h.values.begin(), h.values.end());
      }
      return out;
    }
    case Extractor::hog: {
      if (img.width() != width_ || img.height() != height_) {
        throw ArgumentError("HOG extractor expects " + std::to_string(width_) + "x" + std::to_string(height_));
      }
      auto out = hog_features(img, grid_);
      out.spec_id = id_;
      return out;
    }
    case Extractor::fusion: {
      std::vector<FeatureVector> parts;
      parts.reserve(components_.size());
      for (const auto& c : components_) parts.push_back(c.extract(img));
      return fuse(*this, parts);
    }
  }
  throw ArgumentError("unknown extractor");
}

namespace {

nlohmann::ordered_json spec_json(const FeatureSpec& s) {
  nlohmann::ordered_json j;
  j["extractor"] = std::string(to_string(s.extractor()));
  j["spec_id"] = s.id();
  j["descriptor"] = s.descriptor();
  j["length"] = s.length();
  switch (s.extractor()) {
    case Extractor::raw: j["params"] = {{"width", s.width()}, {"height", s.height()}}; break;
    case Extractor::intensity_hist: j["params"] = {{"bins", kIntensityBins}}; break;
    case Extractor::ulbp: j["params"] = {{"radii", s.radii()}, {"bins_per_radius", kUlbpBins}}; break;
    case Extractor::hog:
      j["params"] = {{"grid", s.grid()}, {"bins", kHogBins}, {"width", s.width()}, {"height", s.height()}};
      break;
    case Extractor::fusion: {
      auto comps = nlohmann::ordered_json::array();
      for (const auto& c : s.components()) comps.push_back(spec_json(c));
      j["params"] = {{"components", comps}};
      break;
    }
  }
  return j;
}

}  // namespace

std::string FeatureSpec::to_json() const { return spec_json(*this).dump(); }

std::string write_feature_csv(const std::vector<std::string>& paths, const std::vector<FeatureVector>& rows) {
  if (paths.size() != rows.size()) throw ArgumentError("write_feature_csv: paths and rows differ in length");
  std::string out = "path";
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  for (std::size_t i = 0; i < d; ++i) out += ",f" + std::to_string(i);
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) throw ArgumentError("write_feature_csv: ragged rows");
    out += paths[r];
    for (double v : rows[r].values) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out += ',';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace periocular
