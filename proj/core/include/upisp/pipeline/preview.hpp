#pragma once

#include <optional>
#include <span>
#include <vector>

#include "upisp/imgcore/planes.hpp"

namespace upisp::pipeline {

inline constexpr double kMissingTileValue = 0.5;

struct Montage {
  RgbImage image;            // input pane | prediction pane
  std::vector<int> missing;  // grid indices with a gray placeholder in either pane
};

// Assembles both row-major grids and places them side by side. Missing
// tiles are filled with mid gray and listed in `missing`.
Montage build_montage(std::span<const std::optional<RgbImage>> inputs,
                      std::span<const std::optional<RgbImage>> preds, int rows, int cols);

}  // namespace upisp::pipeline
