#pragma once

#include <span>
#include <string>
#include <vector>

#include "upisp/errors.hpp"
#include "upisp/imgcore/planes.hpp"
#include "upisp/imgcore/raw.hpp"
#include "upisp/rawproc/rawproc.hpp"

namespace upisp::stitch {

inline constexpr int kDefaultBorder = 4;

struct LayoutCandidate {
  int rows = 1;
  int cols = 1;
  double score = 0.0;
};

struct LayoutResult {
  LayoutCandidate best;
  std::vector<LayoutCandidate> candidates;  // every divisor pair, rows ascending
};

// RAW: green proxy (Gr + Gb) / 2 on normalized planes.
ScalarMap score_map(const RawPatch& raw, const rawproc::RawProcConfig& cfg = {});
// RGB: mean intensity (R + G + B) / 3.
ScalarMap score_map(const RgbImage& img);

// Mean absolute mismatch between facing b-wide border strips, averaged over
// all R(C-1) horizontal and (R-1)C vertical seams. A 1x1 layout scores 0.
double seam_score(std::span<const ScalarMap> maps, int rows, int cols,
                  int border = kDefaultBorder);

// Scores every (R, C) with R*C = N and returns the minimum. Equal scores go
// to the most square layout, then to fewer rows.
LayoutResult infer_layout(std::span<const ScalarMap> maps, int border = kDefaultBorder,
                          unsigned workers = 1);

std::vector<std::pair<int, int>> divisor_layouts(int n);

// Row-major concatenation of equally sized patches.
template <int C, class Tag>
Planes<C, Tag> assemble(std::span<const Planes<C, Tag>> patches, int rows, int cols) {
  if (rows < 1 || cols < 1 || patches.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("assemble: expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " patches, got " +
                     std::to_string(patches.size()));
  }
  const int ph = patches[0].height(), pw = patches[0].width();
  for (const auto& p : patches) {
    if (p.height() != ph || p.width() != pw) {
      throw ShapeError("assemble: patch sizes differ");
    }
  }
  Planes<C, Tag> out(rows * ph, cols * pw);
  for (int r = 0; r < rows; ++r) {
    for (int q = 0; q < cols; ++q) {
      const auto& p = patches[static_cast<std::size_t>(r) * cols + q];
      for (int c = 0; c < C; ++c) {
        for (int y = 0; y < ph; ++y) {
          for (int x = 0; x < pw; ++x) out(c, r * ph + y, q * pw + x) = p(c, y, x);
        }
      }
    }
  }
  return out;
}

// Inverse of assemble: cuts an image into a rows x cols grid, row-major.
template <int C, class Tag>
std::vector<Planes<C, Tag>> cut(const Planes<C, Tag>& img, int rows, int cols) {
  if (rows < 1 || cols < 1 || img.height() % rows != 0 || img.width() % cols != 0) {
    throw ShapeError("cut: image size is not divisible by the grid");
  }
  const int ph = img.height() / rows, pw = img.width() / cols;
  std::vector<Planes<C, Tag>> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int q = 0; q < cols; ++q) {
      Planes<C, Tag> p(ph, pw);
      for (int c = 0; c < C; ++c) {
        for (int y = 0; y < ph; ++y) {
          for (int x = 0; x < pw; ++x) p(c, y, x) = img(c, r * ph + y, q * pw + x);
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace upisp::stitch
