#include "upisp/objective/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "upisp/errors.hpp"
#include "upisp/imgcore/color.hpp"
#include "upisp/util/numeric.hpp"
#include "upisp/util/parallel.hpp"

namespace upisp::objective {

void LossWeights::validate() const {
  for (double w : {mom, luma, chroma, gram, tv}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("loss weights must be finite and non-negative");
    }
  }
}

void SoftHistogramSpec::validate() const {
  if (bins_y < 2 || bins_uv < 2) throw ConfigError("soft histograms need at least 2 bins");
}

MomentStats moments(const RgbImage& img) {
  MomentStats s;
  const double n = static_cast<double>(img.plane_size());
  for (int c = 0; c < 3; ++c) {
    const auto p = img.plane(c);
    const double mu = compensated_sum(p) / n;
    CompensatedSum var;
    for (double v : p) var += (v - mu) * (v - mu);
    s.mean[c] = mu;
    s.stddev[c] = std::sqrt(var.value() / n);
  }
  return s;
}

LossResult moment_loss(const RgbImage& pred, const RgbImage& target) {
  if (pred.empty() || target.empty()) throw ShapeError("moment_loss: empty image");
  const MomentStats p = moments(pred);
  const MomentStats t = moments(target);
  LossResult out{0.0, RgbGrad(pred.height(), pred.width())};
  const double n = static_cast<double>(pred.plane_size());
  for (int c = 0; c < 3; ++c) {
    const double dmu = p.mean[c] - t.mean[c];
    const double dsigma = p.stddev[c] - t.stddev[c];
    out.value += std::abs(dmu) + std::abs(dsigma);
    const double g_mu = sign_or_zero(dmu) / n;
    const double g_sigma = p.stddev[c] > 0.0 ? sign_or_zero(dsigma) / (n * p.stddev[c]) : 0.0;
    const auto x = pred.plane(c);
    auto g = out.grad.plane(c);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = g_mu + g_sigma * (x[i] - p.mean[c]);
  }
  return out;
}

namespace {

// Linear-interpolation weights of value v over `bins` midpoint-centred bins
// covering [start, start + range].
struct TriWeights {
  int lo = 0;
  double w_lo = 1.0;
  double w_hi = 0.0;
  double slope = 0.0;  // d w_hi / dv; d w_lo / dv = -slope
};

TriWeights tri_weights(double v, double start, double range, int bins) noexcept {
  if (std::isnan(v)) return {0, v, v, 0.0};
  const double delta = range / bins;
  const double first = start + 0.5 * delta;
  const double last = start + range - 0.5 * delta;
  const double vc = std::clamp(v, first, last);
  const double pos = (vc - first) / delta;
  const int lo = std::min(static_cast<int>(std::floor(pos)), bins - 2);
  const double t = pos - lo;
  const bool inside = v > first && v < last;
  return {lo, 1.0 - t, t, inside ? 1.0 / delta : 0.0};
}

constexpr double kYStart = 0.0, kYRange = 1.0;
constexpr double kUvStart = -0.5, kUvRange = 1.0;

double squared_diff(const std::vector<double>& a, const std::vector<double>& b) {
  CompensatedSum s;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s.value();
}

}  // namespace

std::vector<double> soft_histogram_y(const YuvImage& yuv, const SoftHistogramSpec& spec) {
  spec.validate();
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(spec.bins_y));
  for (double y : yuv.plane(0)) {
    const TriWeights w = tri_weights(y, kYStart, kYRange, spec.bins_y);
    acc[w.lo] += w.w_lo;
    acc[w.lo + 1] += w.w_hi;
  }
  const double n = static_cast<double>(yuv.plane_size());
  std::vector<double> h(acc.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = acc[k].value() / n;
  return h;
}

std::vector<double> soft_histogram_uv(const YuvImage& yuv, const SoftHistogramSpec& spec) {
  spec.validate();
  const int b = spec.bins_uv;
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(b) * b);
  const auto u = yuv.plane(1), v = yuv.plane(2);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const TriWeights wu = tri_weights(u[i], kUvStart, kUvRange, b);
    const TriWeights wv = tri_weights(v[i], kUvStart, kUvRange, b);
    acc[wu.lo * b + wv.lo] += wu.w_lo * wv.w_lo;
    acc[wu.lo * b + wv.lo + 1] += wu.w_lo * wv.w_hi;
    acc[(wu.lo + 1) * b + wv.lo] += wu.w_hi * wv.w_lo;
    acc[(wu.lo + 1) * b + wv.lo + 1] += wu.w_hi * wv.w_hi;
  }
  const double n = static_cast<double>(yuv.plane_size());
  std::vector<double> h(acc.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = acc[k].value() / n;
  return h;
}

LossResult hist_loss_y(const RgbImage& pred, const RgbImage& target,
                       const SoftHistogramSpec& spec) {
  const YuvImage yp = rgb_to_yuv(pred);
  const auto hp = soft_histogram_y(yp, spec);
  const auto ht = soft_histogram_y(rgb_to_yuv(target), spec);
  LossResult out{squared_diff(hp, ht), RgbGrad(pred.height(), pred.width())};

  const double n = static_cast<double>(pred.plane_size());
  const auto y = yp.plane(0);
  auto gr = out.grad.plane(0), gg = out.grad.plane(1), gb = out.grad.plane(2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const TriWeights w = tri_weights(y[i], kYStart, kYRange, spec.bins_y);
    const double dy = 2.0 * w.slope / n * ((hp[w.lo + 1] - ht[w.lo + 1]) - (hp[w.lo] - ht[w.lo]));
    gr[i] = dy * Bt601::kR;
    gg[i] = dy * Bt601::kG;
    gb[i] = dy * Bt601::kB;
  }
  return out;
}

LossResult hist_loss_uv(const RgbImage& pred, const RgbImage& target,
                        const SoftHistogramSpec& spec) {
  const YuvImage yp = rgb_to_yuv(pred);
  const auto hp = soft_histogram_uv(yp, spec);
  const auto ht = soft_histogram_uv(rgb_to_yuv(target), spec);
  LossResult out{squared_diff(hp, ht), RgbGrad(pred.height(), pred.width())};

  // Partial derivatives of U and V with respect to R, G, B.
  constexpr double kUr = -Bt601::kUScale * Bt601::kR;
  constexpr double kUg = -Bt601::kUScale * Bt601::kG;
  constexpr double kUb = Bt601::kUScale * (1.0 - Bt601::kB);
  constexpr double kVr = Bt601::kVScale * (1.0 - Bt601::kR);
  constexpr double kVg = -Bt601::kVScale * Bt601::kG;
  constexpr double kVb = -Bt601::kVScale * Bt601::kB;

  const int b = spec.bins_uv;
  const double n = static_cast<double>(pred.plane_size());
  auto diff = [&](int iu, int iv) {
    const std::size_t k = static_cast<std::size_t>(iu) * b + iv;
    return hp[k] - ht[k];
  };
  const auto u = yp.plane(1), v = yp.plane(2);
  auto gr = out.grad.plane(0), gg = out.grad.plane(1), gb = out.grad.plane(2);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const TriWeights wu = tri_weights(u[i], kUvStart, kUvRange, b);
    const TriWeights wv = tri_weights(v[i], kUvStart, kUvRange, b);
    const double d00 = diff(wu.lo, wv.lo), d01 = diff(wu.lo, wv.lo + 1);
    const double d10 = diff(wu.lo + 1, wv.lo), d11 = diff(wu.lo + 1, wv.lo + 1);
    const double du = 2.0 / n * wu.slope *
                      (-(wv.w_lo * d00 + wv.w_hi * d01) + (wv.w_lo * d10 + wv.w_hi * d11));
    const double dv = 2.0 / n * wv.slope *
                      (-(wu.w_lo * d00 + wu.w_hi * d10) + (wu.w_lo * d01 + wu.w_hi * d11));
    gr[i] = du * kUr + dv * kVr;
    gg[i] = du * kUg + dv * kVg;
    gb[i] = du * kUb + dv * kVb;
  }
  return out;
}

namespace {

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
as_matrix(const FeatureMap& m) {
  return {m.values.data(), m.channels, static_cast<Eigen::Index>(m.spatial())};
}

}  // namespace

Eigen::MatrixXd gram_matrix(const FeatureMap& map) {
  const auto f = as_matrix(map);
  const double norm = static_cast<double>(map.channels) * static_cast<double>(map.spatial());
  return (f * f.transpose()) / norm;
}

GramLossResult gram_loss(const FeatureMapSet& pred, const FeatureMapSet& target) {
  if (pred.size() != target.size()) {
    throw ShapeError("gram_loss: " + std::to_string(pred.size()) + " pred layers vs " +
                     std::to_string(target.size()) + " target layers");
  }
  GramLossResult out;
  out.grad.resize(pred.size());
  CompensatedSum total;
  for (std::size_t l = 0; l < pred.size(); ++l) {
    const FeatureMap& p = pred[l];
    const FeatureMap& t = target[l];
    if (p.layer != t.layer || p.channels != t.channels) {
      throw ShapeError("gram_loss: layer " + std::to_string(p.layer) + " (C=" +
                       std::to_string(p.channels) + ") does not match target layer " +
                       std::to_string(t.layer) + " (C=" + std::to_string(t.channels) + ")");
    }
    const Eigen::MatrixXd diff = gram_matrix(p) - gram_matrix(t);
    total += diff.squaredNorm();
    const double norm = static_cast<double>(p.channels) * static_cast<double>(p.spatial());
    const Eigen::MatrixXd g = (4.0 / norm) * diff * as_matrix(p);
    auto& dst = out.grad[l];
    dst.resize(p.values.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        dst.data(), p.channels, static_cast<Eigen::Index>(p.spatial())) = g;
  }
  out.value = total.value();
  return out;
}

LossResult tv_loss(const RgbImage& pred) {
  const int h = pred.height(), w = pred.width();
  if (h < 2 || w < 2) throw ShapeError("tv_loss: image must be at least 2x2");
  LossResult out{0.0, RgbGrad(h, w)};
  const double norm = 3.0 * h * w;
  CompensatedSum total;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (y + 1 < h) {
          const double d = pred(c, y + 1, x) - pred(c, y, x);
          total += std::abs(d);
          const double s = sign_or_zero(d) / norm;
          out.grad(c, y + 1, x) += s;
          out.grad(c, y, x) -= s;
        }
        if (x + 1 < w) {
          const double d = pred(c, y, x + 1) - pred(c, y, x);
          total += std::abs(d);
          const double s = sign_or_zero(d) / norm;
          out.grad(c, y, x + 1) += s;
          out.grad(c, y, x) -= s;
        }
      }
    }
  }
  out.value = total.value() / norm;
  return out;
}

namespace {

void accumulate(RgbGrad& dst, const RgbGrad& src, double weight) {
  auto d = dst.data();
  const auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += weight * s[i];
}

}  // namespace

TotalLoss total_loss(const RgbImage& pred, const RgbImage& target, const LossWeights& weights,
                     const SoftHistogramSpec& spec, FeaturePair features) {
  weights.validate();
  TotalLoss out;
  out.grad = RgbGrad(pred.height(), pred.width());
  CompensatedSum value;
  if (weights.mom > 0.0) {
    const auto r = moment_loss(pred, target);
    out.terms.mom = r.value;
    value += weights.mom * r.value;
    accumulate(out.grad, r.grad, weights.mom);
  }
  if (weights.luma > 0.0) {
    const auto r = hist_loss_y(pred, target, spec);
    out.terms.luma = r.value;
    value += weights.luma * r.value;
    accumulate(out.grad, r.grad, weights.luma);
  }
  if (weights.chroma > 0.0) {
    const auto r = hist_loss_uv(pred, target, spec);
    out.terms.chroma = r.value;
    value += weights.chroma * r.value;
    accumulate(out.grad, r.grad, weights.chroma);
  }
  if (weights.gram > 0.0 && (features.pred || features.target)) {
    if (!features.pred || !features.target) {
      throw ShapeError("total_loss: gram term needs both pred and target features");
    }
    auto r = gram_loss(*features.pred, *features.target);
    out.terms.gram = r.value;
    value += weights.gram * r.value;
    for (auto& layer : r.grad) {
      for (double& g : layer) g *= weights.gram;
    }
    out.feature_grad = std::move(r.grad);
  }
  if (weights.tv > 0.0) {
    const auto r = tv_loss(pred);
    out.terms.tv = r.value;
    value += weights.tv * r.value;
    accumulate(out.grad, r.grad, weights.tv);
  }
  out.value = value.value();
  return out;
}

BatchLoss batch_total_loss(std::span<const RgbImage> preds, std::span<const RgbImage> targets,
                           const LossWeights& weights, const SoftHistogramSpec& spec,
                           unsigned workers) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw ShapeError("batch_total_loss: batch sizes differ or are empty");
  }
  std::vector<TotalLoss> items(preds.size());
  parallel_for(
      preds.size(), [&](std::size_t i) { items[i] = total_loss(preds[i], targets[i], weights, spec); },
      workers);

  const double inv = 1.0 / static_cast<double>(preds.size());
  BatchLoss out;
  CompensatedSum value, mom, luma, chroma, gram, tv;
  out.grads.reserve(items.size());
  for (auto& item : items) {
    value += item.value;
    mom += item.terms.mom;
    luma += item.terms.luma;
    chroma += item.terms.chroma;
    gram += item.terms.gram;
    tv += item.terms.tv;
    for (double& g : item.grad.data()) g *= inv;
    out.grads.push_back(std::move(item.grad));
  }
  out.value = value.value() * inv;
  out.terms = {mom.value() * inv, luma.value() * inv, chroma.value() * inv, gram.value() * inv,
               tv.value() * inv};
  return out;
}

std::vector<float> histogram_descriptor(const RgbImage& img, const SoftHistogramSpec& spec) {
  const YuvImage yuv = rgb_to_yuv(img);
  const auto hy = soft_histogram_y(yuv, spec);
  const auto huv = soft_histogram_uv(yuv, spec);
  std::vector<float> out;
  out.reserve(hy.size() + huv.size());
  for (double v : hy) out.push_back(static_cast<float>(v));
  for (double v : huv) out.push_back(static_cast<float>(v));
  return out;
}

}  // namespace upisp::objective
