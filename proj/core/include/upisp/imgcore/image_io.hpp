#pragma once

#include <filesystem>

#include "upisp/imgcore/planes.hpp"

namespace upisp {

// 8-bit PNG. Grayscale and alpha inputs are expanded/dropped to RGB.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const RgbImage& img, const std::filesystem::path& path);

RgbImage read_jpeg(const std::filesystem::path& path);

// Dispatches on extension: .png, .jpg/.jpeg.
RgbImage read_image(const std::filesystem::path& path);

}  // namespace upisp
