#include "upisp/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "upisp/errors.hpp"
#include "upisp/imgcore/image_io.hpp"
#include "upisp/rawproc/rawproc.hpp"
#include "upisp/stitcher/stitcher.hpp"

namespace upisp::pipeline {

namespace fs = std::filesystem;

RgbImage smooth_scene(int height, int width, const std::array<double, 3>& cast,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(-1.5, 1.5), phase(0.0, 2.0 * std::numbers::pi),
      amp(0.04, 0.12);
  RgbImage img(height, width);
  for (int c = 0; c < 3; ++c) {
    struct Wave {
      double fy, fx, ph, a;
    };
    Wave waves[6];
    for (auto& w : waves) w = {freq(rng), freq(rng), phase(rng), amp(rng)};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = cast[c];
        for (const auto& w : waves) {
          v += w.a * std::sin(2.0 * std::numbers::pi * (w.fy * y / height + w.fx * x / width) + w.ph);
        }
        img(c, y, x) = std::clamp(v, 0.05, 0.95);
      }
    }
  }
  return img;
}

RawPatch mosaic_raw(const RgbImage& scene) {
  if (scene.height() % 2 != 0 || scene.width() % 2 != 0) {
    throw ShapeError("mosaic_raw: scene size must be even");
  }
  const int h = scene.height() / 2, w = scene.width() / 2;
  std::vector<std::uint16_t> samples(static_cast<std::size_t>(h) * w * 4);
  auto q = [](double v) { return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 1023.0)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * w + x) * 4;
      samples[base + 0] = q(scene(0, 2 * y, 2 * x));
      samples[base + 1] = q(scene(1, 2 * y, 2 * x + 1));
      samples[base + 2] = q(scene(1, 2 * y + 1, 2 * x));
      samples[base + 3] = q(scene(2, 2 * y + 1, 2 * x + 1));
    }
  }
  return RawPatch(h, w, std::move(samples));
}

mapper::CcmHead synth_transform(const SynthSpec& spec) {
  mapper::CcmHead head;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) head.set_matrix(r, c, spec.matrix[r * 3 + c]);
    head.set_bias(r, spec.bias[r]);
  }
  return head;
}

SynthDataset write_synthetic_dataset(const fs::path& root, const SynthSpec& spec) {
  if (spec.images < 1 || spec.rows < 1 || spec.cols < 1 || spec.patch < 2) {
    throw ConfigError("synthetic dataset needs at least one image, one patch and patch >= 2");
  }
  SynthDataset ds{root / "source", root / "target", root / "reference"};
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> cast(0.2, 0.7);
  const mapper::CcmHead transform = synth_transform(spec);
  const rawproc::RawProcConfig raw_cfg{};
  const int side = 2 * spec.patch;

  for (int i = 0; i < spec.images; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img%02d", i);
    for (const auto& dir : {ds.source_dir, ds.target_dir, ds.reference_dir}) {
      fs::create_directories(dir / name);
    }
    const std::array<double, 3> tint{cast(rng), cast(rng), cast(rng)};
    const RgbImage scene = smooth_scene(spec.rows * side, spec.cols * side, tint, rng);
    const RgbImage other = smooth_scene(spec.rows * side, spec.cols * side, tint, rng);
    const auto tiles = stitch::cut<3, RgbTag>(scene, spec.rows, spec.cols);
    const auto other_tiles = stitch::cut<3, RgbTag>(other, spec.rows, spec.cols);
    for (std::size_t k = 0; k < tiles.size(); ++k) {
      char stem[16];
      std::snprintf(stem, sizeof stem, "%02zu", k);
      const RawPatch raw = mosaic_raw(tiles[k]);
      write_raw_file(ds.source_dir / name / (std::string(stem) + ".raw"), raw, true);
      write_png(transform.forward(rawproc::preprocess(raw, raw_cfg)),
                ds.reference_dir / name / (std::string(stem) + ".png"));
      write_png(transform.forward(rawproc::preprocess(mosaic_raw(other_tiles[k]), raw_cfg)),
                ds.target_dir / name / (std::string(stem) + ".png"));
    }
  }
  return ds;
}

}  // namespace upisp::pipeline
