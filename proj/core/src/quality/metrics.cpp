#include "upisp/quality/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

#include "upisp/errors.hpp"
#include "upisp/util/numeric.hpp"
#include "upisp/util/parallel.hpp"

namespace upisp::quality {

double psnr(const RgbImage& a, const RgbImage& b) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw ShapeError("psnr: empty images");
  CompensatedSum sse;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse.add(d * d);
  }
  const double mse = sse.value() / static_cast<double>(da.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> luma_plane(const RgbImage& img) {
  std::vector<double> y(img.plane_size());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = luma(r[i], g[i], b[i]);
  return y;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-mode filtering: (h - n + 1) x (w - n + 1).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const RgbImage& a, const RgbImage& b, const SsimConfig& cfg) {
  require_same_shape(a, b, "ssim");
  if (cfg.window < 1 || cfg.window % 2 == 0 || !(cfg.sigma > 0.0)) {
    throw ConfigError("ssim: window must be odd and positive, sigma positive");
  }
  const int h = a.height(), w = a.width();
  if (h < cfg.window || w < cfg.window) {
    throw ShapeError("ssim: images must be at least " + std::to_string(cfg.window) + " pixels on each side");
  }
  const std::vector<double> ya = luma_plane(a), yb = luma_plane(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto k = gaussian_kernel(cfg.window, cfg.sigma);
  const auto mu_a = filter_valid(ya, h, w, k), mu_b = filter_valid(yb, h, w, k);
  const auto e_aa = filter_valid(aa, h, w, k), e_bb = filter_valid(bb, h, w, k);
  const auto e_ab = filter_valid(ab, h, w, k);
  const double c1 = cfg.k1 * cfg.k1, c2 = cfg.k2 * cfg.k2;
  CompensatedSum total;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total.add(((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2)));
  }
  return total.value() / static_cast<double>(mu_a.size());
}

double ciede2000(const Lab& x, const Lab& y) noexcept {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double pow25_7 = std::pow(25.0, 7.0);

  const double c1 = std::hypot(x.a, x.b), c2 = std::hypot(y.a, y.b);
  const double cbar7 = std::pow((c1 + c2) / 2.0, 7.0);
  const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + pow25_7)));
  const double a1 = (1.0 + g) * x.a, a2 = (1.0 + g) * y.a;
  const double cp1 = std::hypot(a1, x.b), cp2 = std::hypot(a2, y.b);
  const auto hue = [&](double b, double a) {
    if (a == 0.0 && b == 0.0) return 0.0;
    const double h = std::atan2(b, a) * kDeg;
    return h < 0.0 ? h + 360.0 : h;
  };
  const double h1 = hue(x.b, a1), h2 = hue(y.b, a2);

  const double dl = y.l - x.l;
  const double dc = cp2 - cp1;
  double dh = 0.0;
  if (cp1 * cp2 != 0.0) {
    dh = h2 - h1;
    if (dh > 180.0) dh -= 360.0;
    else if (dh < -180.0) dh += 360.0;
  }
  const double dH = 2.0 * std::sqrt(cp1 * cp2) * std::sin(dh * kRad / 2.0);

  const double lbar = (x.l + y.l) / 2.0;
  const double cbar_p = (cp1 + cp2) / 2.0;
  double hbar = h1 + h2;
  if (cp1 * cp2 != 0.0) {
    if (std::abs(h1 - h2) <= 180.0) hbar = (h1 + h2) / 2.0;
    else if (h1 + h2 < 360.0) hbar = (h1 + h2 + 360.0) / 2.0;
    else hbar = (h1 + h2 - 360.0) / 2.0;
  }
  const double t = 1.0 - 0.17 * std::cos((hbar - 30.0) * kRad) + 0.24 * std::cos(2.0 * hbar * kRad) +
                   0.32 * std::cos((3.0 * hbar + 6.0) * kRad) - 0.20 * std::cos((4.0 * hbar - 63.0) * kRad);
  const double dtheta = 30.0 * std::exp(-std::pow((hbar - 275.0) / 25.0, 2.0));
  const double cbar_p7 = std::pow(cbar_p, 7.0);
  const double rc = 2.0 * std::sqrt(cbar_p7 / (cbar_p7 + pow25_7));
  const double lm = (lbar - 50.0) * (lbar - 50.0);
  const double sl = 1.0 + 0.015 * lm / std::sqrt(20.0 + lm);
  const double sc = 1.0 + 0.045 * cbar_p;
  const double sh = 1.0 + 0.015 * cbar_p * t;
  const double rt = -std::sin(2.0 * dtheta * kRad) * rc;

  const double tl = dl / sl, tc = dc / sc, th = dH / sh;
  return std::sqrt(std::max(0.0, tl * tl + tc * tc + th * th + rt * tc * th));
}

double delta_e_2000(const RgbImage& a, const RgbImage& b) {
  require_same_shape(a, b, "delta_e_2000");
  if (a.empty()) throw ShapeError("delta_e_2000: empty images");
  CompensatedSum total;
  for (std::size_t i = 0; i < a.plane_size(); ++i) {
    const Lab la = srgb_to_lab(a.plane(0)[i], a.plane(1)[i], a.plane(2)[i]);
    const Lab lb = srgb_to_lab(b.plane(0)[i], b.plane(1)[i], b.plane(2)[i]);
    total.add(ciede2000(la, lb));
  }
  return total.value() / static_cast<double>(a.plane_size());
}

namespace {

nlohmann::json finite_or_flag(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : images) {
    per.push_back({{"name", m.name},
                   {"psnr", finite_or_flag(m.psnr)},
                   {"psnr_infinite", std::isinf(m.psnr)},
                   {"ssim", m.ssim},
                   {"delta_e", m.delta_e}});
  }
  return {{"count", images.size()},
          {"mean", {{"psnr", finite_or_flag(mean_psnr)},
                    {"psnr_infinite", std::isinf(mean_psnr)},
                    {"ssim", mean_ssim},
                    {"delta_e", mean_delta_e}}},
          {"images", per}};
}

MetricReport evaluate(std::span<const std::string> names, std::span<const RgbImage> preds,
                      std::span<const RgbImage> refs, unsigned workers) {
  if (names.size() != preds.size() || preds.size() != refs.size()) {
    throw ShapeError("evaluate: names, predictions and references differ in count");
  }
  MetricReport report;
  report.images.resize(preds.size());
  parallel_for(
      preds.size(),
      [&](std::size_t i) {
        report.images[i] = {names[i], psnr(preds[i], refs[i]), ssim(preds[i], refs[i]),
                            delta_e_2000(preds[i], refs[i])};
      },
      workers);
  if (report.images.empty()) return report;
  CompensatedSum p, s, d;
  bool infinite = false;
  for (const auto& m : report.images) {
    if (std::isinf(m.psnr)) infinite = true;
    else p.add(m.psnr);
    s.add(m.ssim);
    d.add(m.delta_e);
  }
  const double n = static_cast<double>(report.images.size());
  report.mean_psnr = infinite ? std::numeric_limits<double>::infinity() : p.value() / n;
  report.mean_ssim = s.value() / n;
  report.mean_delta_e = d.value() / n;
  return report;
}

void write_report_json(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << report.to_json().dump(2) << '\n';
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "name,psnr,ssim,delta_e\n" << std::setprecision(12);
  for (const auto& m : report.images) {
    out << m.name << ',';
    if (std::isinf(m.psnr)) out << "inf";
    else out << m.psnr;
    out << ',' << m.ssim << ',' << m.delta_e << '\n';
  }
}

}  // namespace upisp::quality
