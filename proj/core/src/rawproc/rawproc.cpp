#include "upisp/rawproc/rawproc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "upisp/errors.hpp"

namespace upisp::rawproc {

void RawProcConfig::validate() const {
  if (black_level >= white_level) {
    throw ConfigError("rawproc: black_level (" + std::to_string(black_level) +
                      ") must be below white_level (" + std::to_string(white_level) + ")");
  }
  if (!(gamma > 0.0)) throw ConfigError("rawproc: gamma must be positive");
  for (double g : wb_gains) {
    if (!(g > 0.0)) throw ConfigError("rawproc: white-balance gains must be positive");
  }
}

BayerPlanes normalize(const RawPatch& raw, const RawProcConfig& cfg) {
  cfg.validate();
  const double black = cfg.black_level;
  const double range = static_cast<double>(cfg.white_level - cfg.black_level);
  BayerPlanes out(raw.height(), raw.width());
  for (int c = 0; c < kRawChannels; ++c) {
    const auto ch = static_cast<RawChannel>(c);
    const double gain = cfg.wb_gains[c];
    for (int y = 0; y < raw.height(); ++y) {
      for (int x = 0; x < raw.width(); ++x) {
        const double v = std::clamp((raw.at(y, x, ch) - black) / range, 0.0, 1.0);
        out(c, y, x) = std::clamp(v * gain, 0.0, 1.0);
      }
    }
  }
  return out;
}

namespace {

// Sample of plane c at lattice index (i, j) with replicated borders.
double tap(const BayerPlanes& p, int c, int i, int j) noexcept {
  i = std::clamp(i, 0, p.height() - 1);
  j = std::clamp(j, 0, p.width() - 1);
  return p(c, i, j);
}

constexpr int kR = static_cast<int>(RawChannel::kR);
constexpr int kGr = static_cast<int>(RawChannel::kGr);
constexpr int kGb = static_cast<int>(RawChannel::kGb);
constexpr int kB = static_cast<int>(RawChannel::kB);

}  // namespace

RgbImage demosaic(const BayerPlanes& p) {
  const int h = p.height(), w = p.width();
  RgbImage out(2 * h, 2 * w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int y = 2 * i, x = 2 * j;

      // Red lattice sits at (even, even).
      out(0, y, x) = p(kR, i, j);
      out(0, y, x + 1) = 0.5 * (tap(p, kR, i, j) + tap(p, kR, i, j + 1));
      out(0, y + 1, x) = 0.5 * (tap(p, kR, i, j) + tap(p, kR, i + 1, j));
      out(0, y + 1, x + 1) = 0.25 * (tap(p, kR, i, j) + tap(p, kR, i, j + 1) +
                                     tap(p, kR, i + 1, j) + tap(p, kR, i + 1, j + 1));

      // Blue lattice sits at (odd, odd).
      out(2, y + 1, x + 1) = p(kB, i, j);
      out(2, y + 1, x) = 0.5 * (tap(p, kB, i, j - 1) + tap(p, kB, i, j));
      out(2, y, x + 1) = 0.5 * (tap(p, kB, i - 1, j) + tap(p, kB, i, j));
      out(2, y, x) = 0.25 * (tap(p, kB, i - 1, j - 1) + tap(p, kB, i - 1, j) +
                             tap(p, kB, i, j - 1) + tap(p, kB, i, j));

      // Green is quincunx: Gr at (even, odd), Gb at (odd, even).
      out(1, y, x + 1) = p(kGr, i, j);
      out(1, y + 1, x) = p(kGb, i, j);
      out(1, y, x) = 0.25 * (tap(p, kGr, i, j - 1) + tap(p, kGr, i, j) +
                             tap(p, kGb, i - 1, j) + tap(p, kGb, i, j));
      out(1, y + 1, x + 1) = 0.25 * (tap(p, kGb, i, j) + tap(p, kGb, i, j + 1) +
                                     tap(p, kGr, i, j) + tap(p, kGr, i + 1, j));
    }
  }
  clamp_unit(out);
  return out;
}

RgbImage box3_denoise(const RgbImage& img) {
  const int h = img.height(), w = img.width();
  RgbImage out(h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          for (int dx = -1; dx <= 1; ++dx) {
            s += img(c, yy, std::clamp(x + dx, 0, w - 1));
          }
        }
        out(c, y, x) = s / 9.0;
      }
    }
  }
  return out;
}

RgbImage gamma_encode(const RgbImage& img, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  RgbImage out = img;
  const double inv = 1.0 / gamma;
  for (double& v : out.data()) v = std::pow(std::clamp(v, 0.0, 1.0), inv);
  return out;
}

RgbImage preprocess(const RawPatch& raw, const RawProcConfig& cfg) {
  RgbImage rgb = demosaic(normalize(raw, cfg));
  if (cfg.denoise == Denoise::kBox3) rgb = box3_denoise(rgb);
  return gamma_encode(rgb, cfg.gamma);
}

}  // namespace upisp::rawproc
