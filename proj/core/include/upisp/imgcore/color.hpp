#pragma once

#include "upisp/imgcore/planes.hpp"

namespace upisp {

// Full-range BT.601 luma weights; chroma is scaled so U, V lie in [-0.5, 0.5].
struct Bt601 {
  static constexpr double kR = 0.299;
  static constexpr double kG = 0.587;
  static constexpr double kB = 0.114;
  static constexpr double kUScale = 0.5 / (1.0 - kB);  // 0.5 / 0.886
  static constexpr double kVScale = 0.5 / (1.0 - kR);  // 0.5 / 0.701
};

struct Yuv {
  double y, u, v;
};

struct Lab {
  double l, a, b;
};

constexpr double luma(double r, double g, double b) noexcept {
  return Bt601::kR * r + Bt601::kG * g + Bt601::kB * b;
}

constexpr Yuv rgb_to_yuv(double r, double g, double b) noexcept {
  const double y = luma(r, g, b);
  return {y, Bt601::kUScale * (b - y), Bt601::kVScale * (r - y)};
}

constexpr void yuv_to_rgb(const Yuv& p, double& r, double& g, double& b) noexcept {
  r = p.y + p.v / Bt601::kVScale;
  b = p.y + p.u / Bt601::kUScale;
  g = (p.y - Bt601::kR * r - Bt601::kB * b) / Bt601::kG;
}

YuvImage rgb_to_yuv(const RgbImage& img);
RgbImage yuv_to_rgb(const YuvImage& img);

// IEC 61966-2-1 transfer function, encoded -> linear.
double srgb_to_linear(double v) noexcept;

// sRGB-encoded triple -> CIE Lab under a D65 reference white.
Lab srgb_to_lab(double r, double g, double b) noexcept;

LabImage rgb_to_lab(const RgbImage& img);

}  // namespace upisp
