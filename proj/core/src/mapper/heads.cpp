#include "upisp/mapper/heads.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "upisp/errors.hpp"

namespace upisp::mapper {

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kCcm: return "ccm";
    case HeadKind::kLut3d: return "lut3d";
    case HeadKind::kResidualCnn: return "cnn";
    case HeadKind::kComposed: return "composed";
  }
  return "unknown";
}

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "ccm") return HeadKind::kCcm;
  if (name == "lut3d") return HeadKind::kLut3d;
  if (name == "cnn") return HeadKind::kResidualCnn;
  if (name == "composed") return HeadKind::kComposed;
  throw ConfigError("unknown head type '" + name + "' (expected ccm, lut3d, cnn or composed)");
}

namespace {

void check_param_span(std::span<const double> params, std::size_t expected) {
  if (params.size() != expected) throw ShapeError("head parameter buffer has the wrong size");
}

void check_grad_shapes(const RgbImage& x, const RgbGrad& upstream, std::span<double> param_grad,
                       std::size_t expected) {
  if (x.height() != upstream.height() || x.width() != upstream.width()) {
    throw ShapeError("backward: upstream gradient does not match the input size");
  }
  if (param_grad.size() != expected) throw ShapeError("backward: parameter gradient has the wrong size");
}

// Output clamp: gradient passes for pre-clamp values inside [0, 1].
inline double clamp_out(double z) noexcept { return std::clamp(z, 0.0, 1.0); }
inline double clamp_pass(double z) noexcept { return (z >= 0.0 && z <= 1.0) ? 1.0 : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// CCM

CcmHead::CcmHead() : ColorHead(kParams) {
  for (int i = 0; i < 3; ++i) params_[i * 3 + i] = 1.0;
}

std::unique_ptr<ColorHead> CcmHead::clone() const { return std::make_unique<CcmHead>(*this); }

nlohmann::json CcmHead::shapes() const {
  return {{"head_type", "ccm"}, {"matrix", {3, 3}}, {"bias", {3}}};
}

RgbImage CcmHead::forward_with(std::span<const double> p, const RgbImage& x) const {
  check_param_span(p, kParams);
  RgbImage out(x.height(), x.width());
  const auto r = x.plane(0), g = x.plane(1), b = x.plane(2);
  for (int c = 0; c < 3; ++c) {
    auto o = out.plane(c);
    const double m0 = p[c * 3], m1 = p[c * 3 + 1], m2 = p[c * 3 + 2], t = p[9 + c];
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = clamp_out(m0 * r[i] + m1 * g[i] + m2 * b[i] + t);
  }
  return out;
}

RgbGrad CcmHead::backward_with(std::span<const double> p, const RgbImage& x,
                               const RgbGrad& upstream, std::span<double> grad) const {
  check_param_span(p, kParams);
  check_grad_shapes(x, upstream, grad, kParams);
  RgbGrad gx(x.height(), x.width());
  const auto in = [&](int k) { return x.plane(k); };
  for (int c = 0; c < 3; ++c) {
    const auto up = upstream.plane(c);
    const double m0 = p[c * 3], m1 = p[c * 3 + 1], m2 = p[c * 3 + 2], t = p[9 + c];
    double d0 = 0.0, d1 = 0.0, d2 = 0.0, dt = 0.0;
    auto g0 = gx.plane(0), g1 = gx.plane(1), g2 = gx.plane(2);
    const auto r = in(0), g = in(1), b = in(2);
    for (std::size_t i = 0; i < up.size(); ++i) {
      const double z = m0 * r[i] + m1 * g[i] + m2 * b[i] + t;
      const double gz = up[i] * clamp_pass(z);
      d0 += gz * r[i];
      d1 += gz * g[i];
      d2 += gz * b[i];
      dt += gz;
      g0[i] += gz * m0;
      g1[i] += gz * m1;
      g2[i] += gz * m2;
    }
    grad[c * 3] += d0;
    grad[c * 3 + 1] += d1;
    grad[c * 3 + 2] += d2;
    grad[9 + c] += dt;
  }
  return gx;
}

// ---------------------------------------------------------------------------
// 3D LUT

namespace {

struct LatticeCoord {
  int lo;
  double t;
};

LatticeCoord lattice_coord(double v, int lattice) noexcept {
  const double pos = std::clamp(v, 0.0, 1.0) * (lattice - 1);
  const int lo = std::min(static_cast<int>(std::floor(pos)), lattice - 2);
  return {lo, pos - lo};
}

}  // namespace

Lut3dHead::Lut3dHead(int lattice)
    : ColorHead(static_cast<std::size_t>(lattice > 0 ? lattice : 0) * lattice * lattice * 3),
      lattice_(lattice) {
  if (lattice < 2) throw ConfigError("3D LUT lattice must be at least 2");
  const double step = 1.0 / (lattice - 1);
  for (int i = 0; i < lattice; ++i) {
    for (int j = 0; j < lattice; ++j) {
      for (int k = 0; k < lattice; ++k) {
        const std::size_t base = ((static_cast<std::size_t>(i) * lattice + j) * lattice + k) * 3;
        params_[base] = i * step;
        params_[base + 1] = j * step;
        params_[base + 2] = k * step;
      }
    }
  }
}

std::unique_ptr<ColorHead> Lut3dHead::clone() const { return std::make_unique<Lut3dHead>(*this); }

nlohmann::json Lut3dHead::shapes() const {
  return {{"head_type", "lut3d"}, {"lattice", lattice_}};
}

RgbImage Lut3dHead::forward_with(std::span<const double> p, const RgbImage& x) const {
  check_param_span(p, parameter_count());
  const int L = lattice_;
  RgbImage out(x.height(), x.width());
  const auto r = x.plane(0), g = x.plane(1), b = x.plane(2);
  for (std::size_t n = 0; n < x.plane_size(); ++n) {
    const auto cr = lattice_coord(r[n], L), cg = lattice_coord(g[n], L), cb = lattice_coord(b[n], L);
    double acc[3] = {0.0, 0.0, 0.0};
    for (int di = 0; di < 2; ++di) {
      const double wi = di ? cr.t : 1.0 - cr.t;
      for (int dj = 0; dj < 2; ++dj) {
        const double wj = dj ? cg.t : 1.0 - cg.t;
        for (int dk = 0; dk < 2; ++dk) {
          const double w = wi * wj * (dk ? cb.t : 1.0 - cb.t);
          const std::size_t base =
              ((static_cast<std::size_t>(cr.lo + di) * L + cg.lo + dj) * L + cb.lo + dk) * 3;
          for (int c = 0; c < 3; ++c) acc[c] += w * p[base + c];
        }
      }
    }
    for (int c = 0; c < 3; ++c) out.plane(c)[n] = clamp_out(acc[c]);
  }
  return out;
}

RgbGrad Lut3dHead::backward_with(std::span<const double> p, const RgbImage& x,
                                 const RgbGrad& upstream, std::span<double> grad) const {
  check_param_span(p, parameter_count());
  check_grad_shapes(x, upstream, grad, parameter_count());
  const int L = lattice_;
  RgbGrad gx(x.height(), x.width());
  const auto r = x.plane(0), g = x.plane(1), b = x.plane(2);
  for (std::size_t n = 0; n < x.plane_size(); ++n) {
    const auto cr = lattice_coord(r[n], L), cg = lattice_coord(g[n], L), cb = lattice_coord(b[n], L);
    // Recompute the pre-clamp output for the clamp mask.
    double z[3] = {0.0, 0.0, 0.0};
    std::size_t corner[8];
    double weight[8], dwr[8], dwg[8], dwb[8];
    int idx = 0;
    for (int di = 0; di < 2; ++di) {
      const double wi = di ? cr.t : 1.0 - cr.t;
      const double si = di ? 1.0 : -1.0;
      for (int dj = 0; dj < 2; ++dj) {
        const double wj = dj ? cg.t : 1.0 - cg.t;
        const double sj = dj ? 1.0 : -1.0;
        for (int dk = 0; dk < 2; ++dk) {
          const double wk = dk ? cb.t : 1.0 - cb.t;
          const double sk = dk ? 1.0 : -1.0;
          corner[idx] = ((static_cast<std::size_t>(cr.lo + di) * L + cg.lo + dj) * L + cb.lo + dk) * 3;
          weight[idx] = wi * wj * wk;
          dwr[idx] = si * wj * wk;
          dwg[idx] = wi * sj * wk;
          dwb[idx] = wi * wj * sk;
          for (int c = 0; c < 3; ++c) z[c] += weight[idx] * p[corner[idx] + c];
          ++idx;
        }
      }
    }
    // d pos / d input is (L - 1) inside [0, 1]; the input clamp kills it outside.
    const double sr = (r[n] >= 0.0 && r[n] <= 1.0) ? L - 1.0 : 0.0;
    const double sg = (g[n] >= 0.0 && g[n] <= 1.0) ? L - 1.0 : 0.0;
    const double sb = (b[n] >= 0.0 && b[n] <= 1.0) ? L - 1.0 : 0.0;
    double gr = 0.0, gg = 0.0, gb = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double gz = upstream.plane(c)[n] * clamp_pass(z[c]);
      if (gz == 0.0) continue;
      for (int k = 0; k < 8; ++k) {
        grad[corner[k] + c] += gz * weight[k];
        const double e = p[corner[k] + c];
        gr += gz * dwr[k] * e;
        gg += gz * dwg[k] * e;
        gb += gz * dwb[k] * e;
      }
    }
    gx.plane(0)[n] = gr * sr;
    gx.plane(1)[n] = gg * sg;
    gx.plane(2)[n] = gb * sb;
  }
  return gx;
}

void Lut3dHead::project_with(std::span<double> p) const {
  for (double& v : p) v = std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Residual CNN

namespace {

struct CnnLayout {
  std::size_t w1, b1, w2, b2, mix, mix_bias, total;
};

CnnLayout cnn_layout(int hidden) {
  const std::size_t h = static_cast<std::size_t>(hidden);
  CnnLayout l{};
  l.w1 = 0;
  l.b1 = l.w1 + h * 3 * 9;
  l.w2 = l.b1 + h;
  l.b2 = l.w2 + 3 * h * 9;
  l.mix = l.b2 + 3;
  l.mix_bias = l.mix + 9;
  l.total = l.mix_bias + 3;
  return l;
}

// Replicate-padded copy of one plane, (H + 2) x (W + 2).
void pad_plane(std::span<const double> src, int h, int w, double* dst) {
  const int pw = w + 2;
  for (int y = 0; y < h + 2; ++y) {
    const int sy = std::clamp(y - 1, 0, h - 1);
    for (int x = 0; x < pw; ++x) dst[y * pw + x] = src[sy * w + std::clamp(x - 1, 0, w - 1)];
  }
}

// Adjoint of pad_plane: every padded cell folds back onto its source pixel.
void unpad_plane_adjoint(const double* padded, int h, int w, std::span<double> dst) {
  const int pw = w + 2;
  for (int y = 0; y < h + 2; ++y) {
    const int sy = std::clamp(y - 1, 0, h - 1);
    for (int x = 0; x < pw; ++x) dst[sy * w + std::clamp(x - 1, 0, w - 1)] += padded[y * pw + x];
  }
}

struct CnnForward {
  std::vector<double> xpad;    // 3 x (H+2)(W+2)
  std::vector<double> pre1;    // hidden x HW
  std::vector<double> a1pad;   // hidden x (H+2)(W+2)
  std::vector<double> res;     // 3 x HW, x + conv2
  std::vector<double> z;       // 3 x HW, pre-clamp output
};

CnnForward cnn_forward(std::span<const double> p, const RgbImage& x, int hidden) {
  const CnnLayout L = cnn_layout(hidden);
  const int h = x.height(), w = x.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t phw = static_cast<std::size_t>(h + 2) * (w + 2);
  const int pw = w + 2;
  CnnForward f;
  f.xpad.resize(3 * phw);
  for (int c = 0; c < 3; ++c) pad_plane(x.plane(c), h, w, f.xpad.data() + c * phw);

  f.pre1.assign(static_cast<std::size_t>(hidden) * hw, 0.0);
  f.a1pad.resize(static_cast<std::size_t>(hidden) * phw);
  std::vector<double> act(hw);
  for (int o = 0; o < hidden; ++o) {
    double* out = f.pre1.data() + o * hw;
    std::fill(out, out + hw, p[L.b1 + o]);
    for (int i = 0; i < 3; ++i) {
      const double* src = f.xpad.data() + i * phw;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wgt = p[L.w1 + ((static_cast<std::size_t>(o) * 3 + i) * 3 + ky) * 3 + kx];
          for (int y = 0; y < h; ++y) {
            const double* row = src + (y + ky) * pw + kx;
            double* dst = out + static_cast<std::size_t>(y) * w;
            for (int xx = 0; xx < w; ++xx) dst[xx] += wgt * row[xx];
          }
        }
      }
    }
    for (std::size_t n = 0; n < hw; ++n) act[n] = std::max(out[n], 0.0);
    pad_plane(act, h, w, f.a1pad.data() + o * phw);
  }

  f.res.resize(3 * hw);
  f.z.resize(3 * hw);
  for (int c = 0; c < 3; ++c) {
    double* out = f.res.data() + c * hw;
    const auto xc = x.plane(c);
    for (std::size_t n = 0; n < hw; ++n) out[n] = xc[n] + p[L.b2 + c];
    for (int o = 0; o < hidden; ++o) {
      const double* src = f.a1pad.data() + o * phw;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wgt = p[L.w2 + ((static_cast<std::size_t>(c) * hidden + o) * 3 + ky) * 3 + kx];
          for (int y = 0; y < h; ++y) {
            const double* row = src + (y + ky) * pw + kx;
            double* dst = out + static_cast<std::size_t>(y) * w;
            for (int xx = 0; xx < w; ++xx) dst[xx] += wgt * row[xx];
          }
        }
      }
    }
  }
  for (int c = 0; c < 3; ++c) {
    for (std::size_t n = 0; n < hw; ++n) {
      f.z[c * hw + n] = p[L.mix_bias + c] + p[L.mix + c * 3] * f.res[n] +
                        p[L.mix + c * 3 + 1] * f.res[hw + n] + p[L.mix + c * 3 + 2] * f.res[2 * hw + n];
    }
  }
  return f;
}

}  // namespace

ResidualCnnHead::ResidualCnnHead(std::uint64_t seed, int hidden)
    : ColorHead(count_for(hidden > 0 ? hidden : 1)), hidden_(hidden), seed_(seed) {
  if (hidden < 1) throw ConfigError("residual CNN needs at least one hidden channel");
  const CnnLayout L = cnn_layout(hidden);
  std::mt19937_64 rng(seed);
  // He-uniform bounds. The second conv is scaled down so the residual starts
  // close to zero and the untrained head is close to the identity.
  const double bound1 = std::sqrt(6.0 / 27.0);
  const double bound2 = 0.01 * std::sqrt(6.0 / (9.0 * hidden));
  std::uniform_real_distribution<double> u1(-bound1, bound1), u2(-bound2, bound2);
  for (std::size_t i = L.w1; i < L.b1; ++i) params_[i] = u1(rng);
  for (std::size_t i = L.w2; i < L.b2; ++i) params_[i] = u2(rng);
  for (int c = 0; c < 3; ++c) params_[L.mix + c * 3 + c] = 1.0;
}

std::unique_ptr<ColorHead> ResidualCnnHead::clone() const {
  return std::make_unique<ResidualCnnHead>(*this);
}

nlohmann::json ResidualCnnHead::shapes() const {
  return {{"head_type", "cnn"},
          {"hidden", hidden_},
          {"conv1", {hidden_, 3, 3, 3}},
          {"conv2", {3, hidden_, 3, 3}},
          {"mix", {3, 3}},
          {"init_seed", seed_}};
}

RgbImage ResidualCnnHead::forward_with(std::span<const double> p, const RgbImage& x) const {
  check_param_span(p, parameter_count());
  const CnnForward f = cnn_forward(p, x, hidden_);
  RgbImage out(x.height(), x.width());
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = clamp_out(f.z[i]);
  return out;
}

RgbGrad ResidualCnnHead::backward_with(std::span<const double> p, const RgbImage& x,
                                       const RgbGrad& upstream, std::span<double> grad) const {
  check_param_span(p, parameter_count());
  check_grad_shapes(x, upstream, grad, parameter_count());
  const CnnLayout L = cnn_layout(hidden_);
  const int h = x.height(), w = x.width(), pw = w + 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t phw = static_cast<std::size_t>(h + 2) * (w + 2);
  const CnnForward f = cnn_forward(p, x, hidden_);

  // 1x1 mix.
  std::vector<double> gz(3 * hw);
  const auto up = upstream.data();
  for (std::size_t i = 0; i < gz.size(); ++i) gz[i] = up[i] * clamp_pass(f.z[i]);
  std::vector<double> gres(3 * hw, 0.0);
  for (int c = 0; c < 3; ++c) {
    double db = 0.0;
    double dm[3] = {0.0, 0.0, 0.0};
    for (std::size_t n = 0; n < hw; ++n) {
      const double g = gz[c * hw + n];
      db += g;
      for (int k = 0; k < 3; ++k) {
        dm[k] += g * f.res[k * hw + n];
        gres[k * hw + n] += g * p[L.mix + c * 3 + k];
      }
    }
    grad[L.mix_bias + c] += db;
    for (int k = 0; k < 3; ++k) grad[L.mix + c * 3 + k] += dm[k];
  }

  // conv2 and the residual path.
  RgbGrad gx(h, w);
  for (int c = 0; c < 3; ++c) {
    auto gxc = gx.plane(c);
    double db = 0.0;
    for (std::size_t n = 0; n < hw; ++n) {
      gxc[n] = gres[c * hw + n];
      db += gres[c * hw + n];
    }
    grad[L.b2 + c] += db;
  }
  std::vector<double> ga1pad(static_cast<std::size_t>(hidden_) * phw, 0.0);
  for (int c = 0; c < 3; ++c) {
    const double* g = gres.data() + c * hw;
    for (int o = 0; o < hidden_; ++o) {
      const double* src = f.a1pad.data() + o * phw;
      double* gsrc = ga1pad.data() + o * phw;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t wi = L.w2 + ((static_cast<std::size_t>(c) * hidden_ + o) * 3 + ky) * 3 + kx;
          const double wgt = p[wi];
          double dw = 0.0;
          for (int y = 0; y < h; ++y) {
            const double* row = src + (y + ky) * pw + kx;
            double* grow = gsrc + (y + ky) * pw + kx;
            const double* gy = g + static_cast<std::size_t>(y) * w;
            for (int xx = 0; xx < w; ++xx) {
              dw += gy[xx] * row[xx];
              grow[xx] += wgt * gy[xx];
            }
          }
          grad[wi] += dw;
        }
      }
    }
  }

  // ReLU and conv1.
  std::vector<double> gpre(hw);
  std::vector<double> gxpad(3 * phw, 0.0);
  for (int o = 0; o < hidden_; ++o) {
    std::fill(gpre.begin(), gpre.end(), 0.0);
    unpad_plane_adjoint(ga1pad.data() + o * phw, h, w, gpre);
    const double* pre = f.pre1.data() + o * hw;
    double db = 0.0;
    for (std::size_t n = 0; n < hw; ++n) {
      if (pre[n] <= 0.0) gpre[n] = 0.0;
      db += gpre[n];
    }
    grad[L.b1 + o] += db;
    for (int i = 0; i < 3; ++i) {
      const double* src = f.xpad.data() + i * phw;
      double* gsrc = gxpad.data() + i * phw;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t wi = L.w1 + ((static_cast<std::size_t>(o) * 3 + i) * 3 + ky) * 3 + kx;
          const double wgt = p[wi];
          double dw = 0.0;
          for (int y = 0; y < h; ++y) {
            const double* row = src + (y + ky) * pw + kx;
            double* grow = gsrc + (y + ky) * pw + kx;
            const double* gy = gpre.data() + static_cast<std::size_t>(y) * w;
            for (int xx = 0; xx < w; ++xx) {
              dw += gy[xx] * row[xx];
              grow[xx] += wgt * gy[xx];
            }
          }
          grad[wi] += dw;
        }
      }
    }
  }
  for (int c = 0; c < 3; ++c) unpad_plane_adjoint(gxpad.data() + c * phw, h, w, gx.plane(c));
  return gx;
}

// ---------------------------------------------------------------------------
// Composition

ComposedHead::ComposedHead(std::unique_ptr<ColorHead> first, std::unique_ptr<ColorHead> second)
    : ColorHead((first ? first->parameter_count() : 0) + (second ? second->parameter_count() : 0)),
      first_(std::move(first)),
      second_(std::move(second)) {
  if (!first_ || !second_) throw ConfigError("composed head needs two heads");
  std::copy(first_->parameters().begin(), first_->parameters().end(), params_.begin());
  std::copy(second_->parameters().begin(), second_->parameters().end(),
            params_.begin() + static_cast<std::ptrdiff_t>(first_->parameter_count()));
}

ComposedHead::ComposedHead(const ComposedHead& other)
    : ColorHead(other), first_(other.first_->clone()), second_(other.second_->clone()) {}

std::unique_ptr<ColorHead> ComposedHead::clone() const {
  return std::make_unique<ComposedHead>(*this);
}

nlohmann::json ComposedHead::shapes() const {
  return {{"head_type", "composed"}, {"children", {first_->shapes(), second_->shapes()}}};
}

RgbImage ComposedHead::forward_with(std::span<const double> p, const RgbImage& x) const {
  check_param_span(p, parameter_count());
  const std::size_t n1 = first_->parameter_count();
  return second_->forward_with(p.subspan(n1), first_->forward_with(p.first(n1), x));
}

RgbGrad ComposedHead::backward_with(std::span<const double> p, const RgbImage& x,
                                    const RgbGrad& upstream, std::span<double> grad) const {
  check_param_span(p, parameter_count());
  check_grad_shapes(x, upstream, grad, parameter_count());
  const std::size_t n1 = first_->parameter_count();
  const RgbImage mid = first_->forward_with(p.first(n1), x);
  const RgbGrad gmid = second_->backward_with(p.subspan(n1), mid, upstream, grad.subspan(n1));
  return first_->backward_with(p.first(n1), x, gmid, grad.first(n1));
}

void ComposedHead::project_with(std::span<double> p) const {
  const std::size_t n1 = first_->parameter_count();
  first_->project_with(p.first(n1));
  second_->project_with(p.subspan(n1));
}

std::unique_ptr<ColorHead> make_head(const nlohmann::json& shapes) {
  try {
    switch (head_kind_from_string(shapes.at("head_type").get<std::string>())) {
      case HeadKind::kCcm: return std::make_unique<CcmHead>();
      case HeadKind::kLut3d:
        return std::make_unique<Lut3dHead>(shapes.value("lattice", Lut3dHead::kDefaultLattice));
      case HeadKind::kResidualCnn:
        return std::make_unique<ResidualCnnHead>(shapes.value("init_seed", std::uint64_t{0}),
                                                 shapes.value("hidden", ResidualCnnHead::kDefaultHidden));
      case HeadKind::kComposed: {
        const auto& children = shapes.at("children");
        if (children.size() != 2) throw ConfigError("composed head needs exactly two children");
        return std::make_unique<ComposedHead>(make_head(children[0]), make_head(children[1]));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad head description: ") + e.what());
  }
  throw ConfigError("unreachable head kind");
}

}  // namespace upisp::mapper
