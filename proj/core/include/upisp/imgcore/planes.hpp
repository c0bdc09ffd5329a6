#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "upisp/errors.hpp"

namespace upisp {

struct RgbTag {};
struct YuvTag {};
struct LabTag {};
struct BayerTag {};
struct ScalarTag {};
struct GradTag {};

// Planar multi-channel image with double samples, laid out as
// data[c * H * W + y * W + x]. The tag keeps color spaces apart at compile
// time; use retag() for an explicit reinterpretation.
template <int Channels, class Tag>
class Planes {
 public:
  static constexpr int kChannels = Channels;
  using tag_type = Tag;

  Planes() = default;
  Planes(int height, int width, double fill = 0.0)
      : height_(height), width_(width) {
    if (height < 0 || width < 0) {
      throw ShapeError("negative image dimensions");
    }
    data_.assign(static_cast<std::size_t>(Channels) * height * width, fill);
  }
  Planes(int height, int width, std::vector<double> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(Channels) * height * width) {
      throw ShapeError("planar buffer size does not match dimensions");
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return Channels; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int c, int y, int x) noexcept {
    assert(c >= 0 && c < Channels && y >= 0 && y < height_ && x >= 0 && x < width_);
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double operator()(int c, int y, int x) const noexcept {
    assert(c >= 0 && c < Channels && y >= 0 && y < height_ && x >= 0 && x < width_);
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> plane(int c) noexcept {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }
  std::span<const double> plane(int c) const noexcept {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>&& release() && noexcept { return std::move(data_); }

  template <class OtherTag>
  bool same_shape(const Planes<Channels, OtherTag>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Planes&, const Planes&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

using RgbImage = Planes<3, RgbTag>;
using YuvImage = Planes<3, YuvTag>;
using LabImage = Planes<3, LabTag>;
using BayerPlanes = Planes<4, BayerTag>;
using ScalarMap = Planes<1, ScalarTag>;
using RgbGrad = Planes<3, GradTag>;

template <class To, class From>
To retag(From src) {
  static_assert(To::kChannels == From::kChannels);
  const int h = src.height();
  const int w = src.width();
  return To(h, w, std::move(src).release());
}

template <int C, class Tag>
void clamp_unit(Planes<C, Tag>& img) noexcept {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

template <int C, class Tag>
void require_same_shape(const Planes<C, Tag>& a, const Planes<C, Tag>& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": image sizes differ (" +
                     std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  }
}

}  // namespace upisp
