#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "upisp/imgcore/planes.hpp"

namespace upisp::mapper {

enum class HeadKind { kCcm, kLut3d, kResidualCnn, kComposed };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

// A colour-mapping head. Parameters live in one flat buffer owned by the
// head; forward and backward are pure functions of (parameters, input), so
// a composition can hand each child a slice of its own buffer.
class ColorHead {
 public:
  virtual ~ColorHead() = default;

  virtual HeadKind kind() const noexcept = 0;
  virtual std::unique_ptr<ColorHead> clone() const = 0;
  // Constructor arguments needed to rebuild the head from a checkpoint.
  virtual nlohmann::json shapes() const = 0;

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  RgbImage forward(const RgbImage& x) const { return forward_with(params_, x); }

  // Adds d loss / d theta into `param_grad` and returns d loss / d x, given
  // d loss / d forward(x).
  RgbGrad backward(const RgbImage& x, const RgbGrad& upstream,
                   std::span<double> param_grad) const {
    return backward_with(params_, x, upstream, param_grad);
  }

  // Re-imposes parameter constraints after an optimizer step.
  void project() { project_with(params_); }

  virtual RgbImage forward_with(std::span<const double> params, const RgbImage& x) const = 0;
  virtual RgbGrad backward_with(std::span<const double> params, const RgbImage& x,
                                const RgbGrad& upstream, std::span<double> param_grad) const = 0;
  virtual void project_with(std::span<double>) const {}

 protected:
  explicit ColorHead(std::size_t count) : params_(count, 0.0) {}
  ColorHead(const ColorHead&) = default;
  ColorHead& operator=(const ColorHead&) = default;

  std::vector<double> params_;
};

// out = clamp(M x + t). Parameters: M row-major (9), then t (3).
class CcmHead final : public ColorHead {
 public:
  static constexpr std::size_t kParams = 12;

  CcmHead();  // identity matrix, zero bias

  HeadKind kind() const noexcept override { return HeadKind::kCcm; }
  std::unique_ptr<ColorHead> clone() const override;
  nlohmann::json shapes() const override;

  double matrix(int row, int col) const noexcept { return params_[row * 3 + col]; }
  double bias(int row) const noexcept { return params_[9 + row]; }
  void set_matrix(int row, int col, double v) noexcept { params_[row * 3 + col] = v; }
  void set_bias(int row, double v) noexcept { params_[9 + row] = v; }

  RgbImage forward_with(std::span<const double> params, const RgbImage& x) const override;
  RgbGrad backward_with(std::span<const double> params, const RgbImage& x,
                        const RgbGrad& upstream, std::span<double> param_grad) const override;
};

// Trilinear lookup in an L x L x L lattice of RGB entries, indexed
// ((r * L + g) * L + b) * 3 + channel. Entries are kept in [0, 1].
class Lut3dHead final : public ColorHead {
 public:
  static constexpr int kDefaultLattice = 9;

  explicit Lut3dHead(int lattice = kDefaultLattice);  // identity field

  HeadKind kind() const noexcept override { return HeadKind::kLut3d; }
  std::unique_ptr<ColorHead> clone() const override;
  nlohmann::json shapes() const override;
  int lattice() const noexcept { return lattice_; }

  RgbImage forward_with(std::span<const double> params, const RgbImage& x) const override;
  RgbGrad backward_with(std::span<const double> params, const RgbImage& x,
                        const RgbGrad& upstream, std::span<double> param_grad) const override;
  void project_with(std::span<double> params) const override;

 private:
  int lattice_;
};

// conv3x3(3 -> hidden) + ReLU -> conv3x3(hidden -> 3), added to the input,
// then a 1x1 channel mix: out = clamp(P (x + residual) + q). Convolutions
// use replicate padding. Parameter layout: W1[o][i][ky][kx], b1, W2, b2,
// P (row-major 3x3), q.
class ResidualCnnHead final : public ColorHead {
 public:
  static constexpr int kDefaultHidden = 128;

  static constexpr std::size_t count_for(int hidden) noexcept {
    const std::size_t h = static_cast<std::size_t>(hidden);
    return (3 * h * 9 + h) + (h * 3 * 9 + 3) + (3 * 3 + 3);
  }

  // Kaiming-uniform conv weights, zero conv biases, identity 1x1 mix.
  explicit ResidualCnnHead(std::uint64_t seed = 0, int hidden = kDefaultHidden);

  HeadKind kind() const noexcept override { return HeadKind::kResidualCnn; }
  std::unique_ptr<ColorHead> clone() const override;
  nlohmann::json shapes() const override;
  int hidden() const noexcept { return hidden_; }

  RgbImage forward_with(std::span<const double> params, const RgbImage& x) const override;
  RgbGrad backward_with(std::span<const double> params, const RgbImage& x,
                        const RgbGrad& upstream, std::span<double> param_grad) const override;

 private:
  int hidden_;
  std::uint64_t seed_;
};

// second(first(x)); parameters are first's followed by second's.
class ComposedHead final : public ColorHead {
 public:
  ComposedHead(std::unique_ptr<ColorHead> first, std::unique_ptr<ColorHead> second);
  ComposedHead(const ComposedHead& other);

  HeadKind kind() const noexcept override { return HeadKind::kComposed; }
  std::unique_ptr<ColorHead> clone() const override;
  nlohmann::json shapes() const override;

  RgbImage forward_with(std::span<const double> params, const RgbImage& x) const override;
  RgbGrad backward_with(std::span<const double> params, const RgbImage& x,
                        const RgbGrad& upstream, std::span<double> param_grad) const override;
  void project_with(std::span<double> params) const override;

 private:
  std::unique_ptr<ColorHead> first_;
  std::unique_ptr<ColorHead> second_;
};

// Builds a freshly initialized head from a shapes() description:
// {"head_type": "ccm" | "lut3d" | "cnn" | "composed", ...}.
std::unique_ptr<ColorHead> make_head(const nlohmann::json& shapes);

}  // namespace upisp::mapper
