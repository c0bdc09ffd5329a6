#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "upisp/imgcore/planes.hpp"

namespace upisp::testing {

inline std::filesystem::path data_dir() { return UPISP_TEST_DATA_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("upisp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

template <class Image>
Image random_image(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

inline RgbImage random_rgb(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return random_image<RgbImage>(h, w, rng, lo, hi);
}

// Gaussian-blurred white noise, rescaled to [0.05, 0.95] per channel.
inline RgbImage smoothed_noise(int h, int w, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  RgbImage out(h, w);
  std::vector<double> noise(static_cast<std::size_t>(h + 2 * r) * (w + 2 * r));
  std::vector<double> tmp(static_cast<std::size_t>(h + 2 * r) * w);
  const int pw = w + 2 * r;
  for (int c = 0; c < 3; ++c) {
    for (double& v : noise) v = n(rng);
    for (int y = 0; y < h + 2 * r; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = 0; i <= 2 * r; ++i) s += k[i] * noise[static_cast<std::size_t>(y) * pw + x + i];
        tmp[static_cast<std::size_t>(y) * w + x] = s;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = 0; i <= 2 * r; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * w + x];
        out(c, y, x) = s;
      }
    }
    auto p = out.plane(c);
    const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
    const double lo = *mn, span = std::max(*mx - *mn, 1e-12);
    for (double& v : p) v = 0.05 + 0.9 * (v - lo) / span;
  }
  return out;
}

// Octaves of smoothed noise with amplitude proportional to scale (1/f spectrum).
inline RgbImage natural_noise(int h, int w, std::mt19937_64& rng) {
  RgbImage out(h, w, 0.0);
  for (double s = 1.0; s <= std::max(h, w) / 2.0; s *= 2.0) {
    const RgbImage octave = smoothed_noise(h, w, s, rng);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(c, y, x) += s * (octave(c, y, x) - 0.5);
  }
  for (int c = 0; c < 3; ++c) {
    auto p = out.plane(c);
    const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
    const double lo = *mn, span = std::max(*mx - *mn, 1e-12);
    for (double& v : p) v = 0.05 + 0.9 * (v - lo) / span;
  }
  return out;
}

struct FdReport {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  int checked = 0;
  int skipped = 0;         // coordinates with a kink inside the stencil
};

// Central differences of f over the listed coordinates of x, at steps h and
// h/2, combined by Richardson extrapolation. A coordinate is skipped when the
// two estimates disagree by more than kink_tol relative to their magnitude:
// that only happens when a kink lies inside the stencil.
inline FdReport finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::vector<double> x, std::span<const double> analytic,
                                        std::span<const std::size_t> coords, double step = 1e-4,
                                        double kink_tol = 1e-6) {
  FdReport rep;
  const double f0 = f(x);
  const double floor = 1e-10 * (1.0 + std::abs(f0)) / step;
  double num2 = 0.0, diff2 = 0.0, ana2 = 0.0;
  auto central = [&](std::size_t k, double h) {
    const double keep = x[k];
    x[k] = keep + h;
    const double fp = f(x);
    x[k] = keep - h;
    const double fm = f(x);
    x[k] = keep;
    return (fp - fm) / (2.0 * h);
  };
  for (std::size_t k : coords) {
    const double wide = central(k, step), narrow = central(k, step / 2.0), fine = central(k, step / 4.0);
    const double scale = std::abs(wide) + std::abs(narrow) + std::abs(fine);
    if (std::abs(wide - narrow) > kink_tol * scale + floor || std::abs(narrow - fine) > kink_tol * scale + floor) {
      ++rep.skipped;
      continue;
    }
    const double numeric = (4.0 * narrow - wide) / 3.0;
    num2 += numeric * numeric;
    ana2 += analytic[k] * analytic[k];
    diff2 += (numeric - analytic[k]) * (numeric - analytic[k]);
    ++rep.checked;
  }
  const double denom = std::max({std::sqrt(num2), std::sqrt(ana2), 1e-300});
  rep.rel_error = std::sqrt(diff2) / denom;
  return rep;
}

inline std::vector<std::size_t> all_coords(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

inline std::vector<std::size_t> sample_coords(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  if (k >= n) return all_coords(n);
  std::vector<std::size_t> all = all_coords(n), out;
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

template <int C, class Tag>
Planes<C, Tag> from_vector(const Planes<C, Tag>& shape, std::span<const double> v) {
  return Planes<C, Tag>(shape.height(), shape.width(), std::vector<double>(v.begin(), v.end()));
}

template <class Image>
std::vector<double> to_vector(const Image& img) {
  return {img.data().begin(), img.data().end()};
}

}  // namespace upisp::testing
