#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "upisp/imgcore/containers.hpp"
#include "upisp/imgcore/planes.hpp"

namespace upisp::objective {

struct LossWeights {
  double mom = 1.0;
  double luma = 1.0;
  double chroma = 1.5;
  double gram = 1.0;
  double tv = 0.05;

  static LossWeights stage1() { return {}; }
  static LossWeights stage2() { return {0.2, 1.0, 1.5, 1.0, 0.01}; }

  // Throws ConfigError for a negative or non-finite weight.
  void validate() const;
};

struct SoftHistogramSpec {
  int bins_y = 64;
  int bins_uv = 32;  // per axis; the joint histogram has bins_uv^2 cells

  void validate() const;
};

struct MomentStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};  // population
};

struct LossResult {
  double value = 0.0;
  RgbGrad grad;  // d value / d pred pixel
};

MomentStats moments(const RgbImage& img);

// sum_c |mu_c(pred) - mu_c(target)| + |sigma_c(pred) - sigma_c(target)|.
// sign(0) = 0, and d sigma / d x = 0 for a constant channel.
LossResult moment_loss(const RgbImage& pred, const RgbImage& target);

// Triangular-kernel soft histograms on bin midpoints. Values beyond the
// outermost centers are clamped onto them, so every pixel spreads exactly
// unit mass and the histogram sums to one.
std::vector<double> soft_histogram_y(const YuvImage& yuv, const SoftHistogramSpec& spec = {});
// Joint (U, V) histogram, flattened as u_bin * bins_uv + v_bin.
std::vector<double> soft_histogram_uv(const YuvImage& yuv, const SoftHistogramSpec& spec = {});

// ||h(pred) - h(target)||^2 with the gradient chained back through the YUV
// transform to RGB.
LossResult hist_loss_y(const RgbImage& pred, const RgbImage& target,
                       const SoftHistogramSpec& spec = {});
LossResult hist_loss_uv(const RgbImage& pred, const RgbImage& target,
                        const SoftHistogramSpec& spec = {});

// G = F F^T / (C H W) for the C x (H W) flattened activations.
Eigen::MatrixXd gram_matrix(const FeatureMap& map);

struct GramLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad;  // per pred map, same layout as values
};

// sum over layers of ||G(pred) - G(target)||_F^2. Maps are paired by
// position; layer ids and channel counts must agree, spatial sizes may not.
GramLossResult gram_loss(const FeatureMapSet& pred, const FeatureMapSet& target);

// Anisotropic L1 total variation divided by C H W.
LossResult tv_loss(const RgbImage& pred);

struct LossTerms {
  double mom = 0.0;
  double luma = 0.0;
  double chroma = 0.0;
  double gram = 0.0;
  double tv = 0.0;
};

struct TotalLoss {
  double value = 0.0;
  LossTerms terms;  // unweighted
  RgbGrad grad;
  std::vector<std::vector<double>> feature_grad;  // empty without features
};

struct FeaturePair {
  const FeatureMapSet* pred = nullptr;
  const FeatureMapSet* target = nullptr;
};

// Weighted sum of every term; the gram term is skipped unless both feature
// sets are supplied. Terms with zero weight are not evaluated.
TotalLoss total_loss(const RgbImage& pred, const RgbImage& target, const LossWeights& weights,
                     const SoftHistogramSpec& spec = {}, FeaturePair features = {});

// Mean of total_loss over the batch. Item gradients are scaled by 1 / B;
// the reduction order is fixed, so results do not depend on `workers`.
struct BatchLoss {
  double value = 0.0;
  LossTerms terms;  // batch means, unweighted
  std::vector<RgbGrad> grads;
};

BatchLoss batch_total_loss(std::span<const RgbImage> preds, std::span<const RgbImage> targets,
                           const LossWeights& weights, const SoftHistogramSpec& spec = {},
                           unsigned workers = 1);

// Y histogram followed by the joint UV histogram, used as the colour
// statistics block of image-level descriptors.
std::vector<float> histogram_descriptor(const RgbImage& img, const SoftHistogramSpec& spec = {});

}  // namespace upisp::objective
