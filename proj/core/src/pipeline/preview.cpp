#include "upisp/pipeline/preview.hpp"

#include <algorithm>
#include <string>

#include "upisp/errors.hpp"
#include "upisp/stitcher/stitcher.hpp"

namespace upisp::pipeline {

Montage build_montage(std::span<const std::optional<RgbImage>> inputs,
                      std::span<const std::optional<RgbImage>> preds, int rows, int cols) {
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  if (rows < 1 || cols < 1 || inputs.size() != n || preds.size() != n) {
    throw ShapeError("preview: tile count does not match the " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " grid");
  }
  const RgbImage* shape = nullptr;
  for (std::size_t i = 0; i < n && !shape; ++i) {
    if (inputs[i]) shape = &*inputs[i];
    else if (preds[i]) shape = &*preds[i];
  }
  if (!shape) throw ConfigError("preview: every tile is missing");
  const int h = shape->height(), w = shape->width();

  Montage m;
  auto fill = [&](std::span<const std::optional<RgbImage>> tiles) {
    std::vector<RgbImage> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (tiles[i]) {
        out.push_back(*tiles[i]);
      } else {
        out.emplace_back(h, w, kMissingTileValue);
        m.missing.push_back(static_cast<int>(i));
      }
    }
    return stitch::assemble<3, RgbTag>(out, rows, cols);
  };
  const RgbImage left = fill(inputs);
  const RgbImage right = fill(preds);
  std::sort(m.missing.begin(), m.missing.end());
  m.missing.erase(std::unique(m.missing.begin(), m.missing.end()), m.missing.end());

  m.image = RgbImage(left.height(), left.width() + right.width());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < left.height(); ++y) {
      for (int x = 0; x < left.width(); ++x) m.image(c, y, x) = left(c, y, x);
      for (int x = 0; x < right.width(); ++x) m.image(c, y, left.width() + x) = right(c, y, x);
    }
  }
  return m;
}

}  // namespace upisp::pipeline
