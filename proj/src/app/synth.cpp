#include <cstdio>

#include <json.hpp>

#include "periocular/app.hpp"
#include "periocular/common.hpp"

namespace periocular {

namespace {

constexpr int W = kCanonicalWidth;
constexpr int H = kCanonicalHeight;

std::vector<double> white_noise(Rng& rng) {
  std::vector<double> f(static_cast<std::size_t>(W) * H);
  for (auto& v : f) v = rng.normal();
  return f;
}

// Box mean over a (2r+1)^2 window with replicated borders, rescaled so an
// i.i.d. unit-variance input keeps unit variance away from the border.
std::vector<double> box_smooth(const std::vector<double>& f, int r) {
  std::vector<double> out(f.size());
  const double scale = static_cast<double>(2 * r + 1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, H - 1);
        for (int dx = -r; dx <= r; ++dx) s += f[static_cast<std::size_t>(yy) * W + std::clamp(x + dx, 0, W - 1)];
      }
      out[static_cast<std::size_t>(y) * W + x] = s / scale;
    }
  }
  return out;
}

GrayImage render(const SynthParams& p, Gender g, double subject_offset, Rng& rng) {
  const auto grain = white_noise(rng);
  const auto skin = box_smooth(white_noise(rng), 3);
  const auto weave = box_smooth(white_noise(rng), 2);
  const double cx = W / 2.0, cy = H / 2.0;
  GrayImage img(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      double v;
      if (d <= p.inner_radius) {
        v = 70.0 + 12.0 * grain[i];
      } else if (d <= p.outer_radius) {
        v = g == Gender::female ? 136.0 + 30.0 * grain[i] : 120.0 + 10.0 * weave[i];
      } else {
        v = 160.0 + 10.0 * skin[i] + 4.0 * grain[i];
      }
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::nearbyint(v + subject_offset), 0.0, 255.0));
    }
  }
  return img;
}

}  // namespace

std::vector<SynthSample> generate_synthetic(const SynthParams& p, std::uint64_t seed) {
  if (p.subjects_per_gender < 1 || p.images_per_subject < 1) {
    throw ArgumentError("synthetic benchmark needs at least one subject and one image per subject");
  }
  if (!(p.inner_radius > 0.0 && p.outer_radius > p.inner_radius)) {
    throw ArgumentError("synthetic annulus needs 0 < inner radius < outer radius");
  }
  std::vector<SynthSample> out;
  std::size_t subject_index = 0;
  for (Gender g : {Gender::female, Gender::male}) {
    for (int s = 0; s < p.subjects_per_gender; ++s, ++subject_index) {
      char id[32];
      std::snprintf(id, sizeof id, "%c%03d", g == Gender::female ? 'f' : 'm', s);
      const auto subject_seed = derive_seed(seed, subject_index);
      Rng subject_rng(subject_seed);
      const double offset = 5.0 * subject_rng.normal();
      for (int k = 0; k < p.images_per_subject; ++k) {
        Rng rng(derive_seed(subject_seed, static_cast<std::uint64_t>(k) + 1));
        SynthSample sample;
        sample.record.image_path = "images/" + std::string(id) + "_" + std::to_string(k) + ".pgm";
        sample.record.subject_id = id;
        sample.record.gender = g;
        sample.record.eye = k % 2 == 0 ? Eye::left : Eye::right;
        sample.record.session = "s1";
        sample.record.occlusion = OcclusionCircle{W / 2.0, H / 2.0, p.inner_radius};
        sample.image = render(p, g, offset, rng);
        out.push_back(std::move(sample));
      }
    }
  }
  return out;
}

std::filesystem::path cmd_synth(const RunContext& ctx) {
  SynthParams p;
  p.subjects_per_gender = static_cast<int>(ctx.config.get_int("synth.subjects", p.subjects_per_gender));
  p.images_per_subject = static_cast<int>(ctx.config.get_int("synth.images_per_subject", p.images_per_subject));
  const auto samples = generate_synthetic(p, ctx.seed);
  std::filesystem::create_directories(ctx.out / "images");
  std::vector<SampleRecord> records;
  for (const auto& s : samples) {
    write_bytes(ctx.out / s.record.image_path, encode_pgm(s.image));
    records.push_back(s.record);
  }
  const auto manifest = ctx.out / "manifest.csv";
  const auto text = write_manifest(records);
  write_bytes(manifest, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  nlohmann::ordered_json info{{"format", "periocular-synth"},
                              {"config_hash", ctx.config.hash()},
                              {"seed", ctx.seed},
                              {"subjects_per_gender", p.subjects_per_gender},
                              {"images_per_subject", p.images_per_subject},
                              {"inner_radius", p.inner_radius},
                              {"outer_radius", p.outer_radius},
                              {"manifest_fnv1a", hex64(fnv1a(text))}};
  const auto js = info.dump(2) + "\n";
  write_bytes(ctx.out / "synth.json", {reinterpret_cast<const std::uint8_t*>(js.data()), js.size()});
  return manifest;
}

}  // namespace periocular
