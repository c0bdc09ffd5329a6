#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>

#include "upisp/imgcore/planes.hpp"
#include "upisp/imgcore/raw.hpp"
#include "upisp/mapper/heads.hpp"

namespace upisp::pipeline {

// Smooth linear-light scene: six low-frequency sinusoids per channel
// around a colour cast, kept inside [0.05, 0.95].
RgbImage smooth_scene(int height, int width, const std::array<double, 3>& cast,
                      std::mt19937_64& rng);

// Samples an RGGB mosaic from a 2H x 2W linear scene and packs it into an
// H x W x 4 10-bit patch.
RawPatch mosaic_raw(const RgbImage& scene);

struct SynthSpec {
  int images = 4;
  int rows = 2;
  int cols = 2;
  int patch = 16;  // RAW patch side; RGB patches are twice as large
  std::uint64_t seed = 0;
  // Ground-truth colour transform applied to the pre-processed source.
  std::array<double, 9> matrix{0.9, 0.15, -0.05, 0.05, 0.8, 0.1, -0.05, 0.1, 0.85};
  std::array<double, 3> bias{0.04, 0.02, 0.06};
};

struct SynthDataset {
  std::filesystem::path source_dir;     // <image>/<nn>.raw + .json sidecars
  std::filesystem::path target_dir;     // <image>/<nn>.png, unpaired scenes
  std::filesystem::path reference_dir;  // <image>/<nn>.png, transform of each source patch
};

mapper::CcmHead synth_transform(const SynthSpec& spec);

// Writes source, target and reference trees under `root`.
SynthDataset write_synthetic_dataset(const std::filesystem::path& root, const SynthSpec& spec);

}  // namespace upisp::pipeline
