#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "upisp/imgcore/color.hpp"
#include "upisp/imgcore/planes.hpp"

namespace upisp::quality {

// 10 log10(1 / MSE) over all channels; +infinity for identical images.
double psnr(const RgbImage& a, const RgbImage& b);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Single-scale SSIM on BT.601 luma, Gaussian window, mean over the valid
// (fully covered) positions.
double ssim(const RgbImage& a, const RgbImage& b, const SsimConfig& cfg = {});

// CIEDE2000 with kL = kC = kH = 1.
double ciede2000(const Lab& x, const Lab& y) noexcept;

// Per-pixel CIEDE2000 of the sRGB images, averaged.
double delta_e_2000(const RgbImage& a, const RgbImage& b);

struct ImageMetrics {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double delta_e = 0.0;
};

struct MetricReport {
  std::vector<ImageMetrics> images;
  double mean_psnr = 0.0;  // +inf if any image is identical to its reference
  double mean_ssim = 0.0;
  double mean_delta_e = 0.0;

  nlohmann::json to_json() const;
};

MetricReport evaluate(std::span<const std::string> names, std::span<const RgbImage> preds,
                      std::span<const RgbImage> refs, unsigned workers = 1);

void write_report_json(const MetricReport& report, const std::filesystem::path& path);
void write_report_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace upisp::quality
