#include "upisp/imgcore/color.hpp"

#include <cmath>

namespace upisp {

YuvImage rgb_to_yuv(const RgbImage& img) {
  YuvImage out(img.height(), img.width());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto y = out.plane(0), u = out.plane(1), v = out.plane(2);
  for (std::size_t i = 0; i < img.plane_size(); ++i) {
    const Yuv p = rgb_to_yuv(r[i], g[i], b[i]);
    y[i] = p.y;
    u[i] = p.u;
    v[i] = p.v;
  }
  return out;
}

RgbImage yuv_to_rgb(const YuvImage& img) {
  RgbImage out(img.height(), img.width());
  const auto y = img.plane(0), u = img.plane(1), v = img.plane(2);
  auto r = out.plane(0), g = out.plane(1), b = out.plane(2);
  for (std::size_t i = 0; i < img.plane_size(); ++i) {
    yuv_to_rgb({y[i], u[i], v[i]}, r[i], g[i], b[i]);
  }
  return out;
}

double srgb_to_linear(double v) noexcept {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

namespace {

// D65 reference white, Y normalized to 1.
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;

double lab_f(double t) noexcept {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

Lab srgb_to_lab(double r, double g, double b) noexcept {
  const double rl = srgb_to_linear(r);
  const double gl = srgb_to_linear(g);
  const double bl = srgb_to_linear(b);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage rgb_to_lab(const RgbImage& img) {
  LabImage out(img.height(), img.width());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto l = out.plane(0), a = out.plane(1), bb = out.plane(2);
  for (std::size_t i = 0; i < img.plane_size(); ++i) {
    const Lab p = srgb_to_lab(r[i], g[i], b[i]);
    l[i] = p.l;
    a[i] = p.a;
    bb[i] = p.b;
  }
  return out;
}

}  // namespace upisp
