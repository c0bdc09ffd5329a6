#pragma once

#include <array>

#include "upisp/imgcore/planes.hpp"
#include "upisp/imgcore/raw.hpp"

namespace upisp::rawproc {

enum class Denoise { kOff, kBox3 };

struct RawProcConfig {
  int black_level = 0;
  int white_level = 1023;
  std::array<double, 4> wb_gains{1.0, 1.0, 1.0, 1.0};  // R, Gr, Gb, B
  double gamma = 2.2;
  Denoise denoise = Denoise::kOff;

  // Throws ConfigError when black >= white, gamma <= 0 or any gain <= 0.
  void validate() const;
};

// v = clamp(clamp((s - black) / (white - black), 0, 1) * gain_c, 0, 1)
BayerPlanes normalize(const RawPatch& raw, const RawProcConfig& cfg);

// Unpacks the four H x W planes into a 2H x 2W RGGB mosaic and fills each
// channel by bilinear interpolation over its own sample lattice. Borders are
// replicated per plane, so the CFA phase is preserved at the edges.
RgbImage demosaic(const BayerPlanes& planes);

// 3x3 mean filter with replicate borders, per channel.
RgbImage box3_denoise(const RgbImage& img);

RgbImage gamma_encode(const RgbImage& img, double gamma);

// normalize -> demosaic -> optional box3 -> gamma_encode.
RgbImage preprocess(const RawPatch& raw, const RawProcConfig& cfg);

}  // namespace upisp::rawproc
