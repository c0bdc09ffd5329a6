#include "upisp/stitcher/stitcher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "upisp/util/numeric.hpp"
#include "upisp/util/parallel.hpp"

namespace upisp::stitch {

ScalarMap score_map(const RawPatch& raw, const rawproc::RawProcConfig& cfg) {
  const BayerPlanes p = rawproc::normalize(raw, cfg);
  ScalarMap m(p.height(), p.width());
  const auto gr = p.plane(static_cast<int>(RawChannel::kGr));
  const auto gb = p.plane(static_cast<int>(RawChannel::kGb));
  auto out = m.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (gr[i] + gb[i]);
  return m;
}

ScalarMap score_map(const RgbImage& img) {
  ScalarMap m(img.height(), img.width());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto out = m.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (r[i] + g[i] + b[i]) / 3.0;
  return m;
}

namespace {

double horizontal_cost(const ScalarMap& left, const ScalarMap& right, int b) {
  const int h = left.height(), w = left.width();
  CompensatedSum s;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < b; ++j) s += std::abs(left(0, i, w - b + j) - right(0, i, j));
  }
  return s.value() / (static_cast<double>(h) * b);
}

double vertical_cost(const ScalarMap& top, const ScalarMap& bottom, int b) {
  const int h = top.height(), w = top.width();
  CompensatedSum s;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < w; ++j) s += std::abs(top(0, h - b + i, j) - bottom(0, i, j));
  }
  return s.value() / (static_cast<double>(b) * w);
}

}  // namespace

double seam_score(std::span<const ScalarMap> maps, int rows, int cols, int border) {
  if (rows < 1 || cols < 1 || maps.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("seam_score: layout does not match the number of maps");
  }
  const int h = maps[0].height(), w = maps[0].width();
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) throw ShapeError("seam_score: map sizes differ");
  }
  if (border < 1 || border > std::min(h, w)) {
    throw ShapeError("seam_score: border width must lie in [1, min(H, W)]");
  }
  const long seams = static_cast<long>(rows) * (cols - 1) + static_cast<long>(rows - 1) * cols;
  if (seams == 0) return 0.0;

  auto at = [&](int r, int c) -> const ScalarMap& {
    return maps[static_cast<std::size_t>(r) * cols + c];
  };
  CompensatedSum total;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) total += horizontal_cost(at(r, c), at(r, c + 1), border);
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) total += vertical_cost(at(r, c), at(r + 1, c), border);
  }
  return total.value() / static_cast<double>(seams);
}

std::vector<std::pair<int, int>> divisor_layouts(int n) {
  std::vector<std::pair<int, int>> out;
  for (int r = 1; r <= n; ++r) {
    if (n % r == 0) out.emplace_back(r, n / r);
  }
  return out;
}

LayoutResult infer_layout(std::span<const ScalarMap> maps, int border, unsigned workers) {
  const int n = static_cast<int>(maps.size());
  if (n < 1) throw ShapeError("infer_layout: no patches");
  const auto layouts = divisor_layouts(n);
  LayoutResult result;
  result.candidates.resize(layouts.size());
  parallel_for(
      layouts.size(),
      [&](std::size_t i) {
        const auto [r, c] = layouts[i];
        result.candidates[i] = {r, c, seam_score(maps, r, c, border)};
      },
      workers);

  auto better = [](const LayoutCandidate& a, const LayoutCandidate& b) {
    if (a.score != b.score) return a.score < b.score;
    const int sa = std::abs(a.rows - a.cols), sb = std::abs(b.rows - b.cols);
    if (sa != sb) return sa < sb;
    return a.rows < b.rows;
  };
  result.best = *std::min_element(result.candidates.begin(), result.candidates.end(), better);
  return result;
}

}  // namespace upisp::stitch
