#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "support.hpp"
#include "upisp/errors.hpp"
#include "upisp/rawproc/rawproc.hpp"

using namespace upisp;
using namespace upisp::rawproc;

namespace {

RawPatch constant_raw(int h, int w, std::uint16_t v) {
  return RawPatch(h, w, std::vector<std::uint16_t>(static_cast<std::size_t>(h) * w * 4, v));
}

RawPatch random_raw(int h, int w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> s(0, 1023);
  std::vector<std::uint16_t> v(static_cast<std::size_t>(h) * w * 4);
  for (auto& x : v) x = static_cast<std::uint16_t>(s(rng));
  return RawPatch(h, w, v);
}

// Per-lattice bilinear interpolation on the unpacked mosaic: R at (even,
// even), Gr (even, odd), Gb (odd, even), B (odd, odd); green at red/blue
// sites is the mean of its four mosaic neighbours. Lattice indices clamp.
RgbImage reference_demosaic(const BayerPlanes& p) {
  const int h = p.height(), w = p.width();
  const std::array<std::array<int, 2>, 4> off{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  auto lat = [&](int c, int i, int j) {
    return p(c, std::clamp(i, 0, h - 1), std::clamp(j, 0, w - 1));
  };
  auto bilinear = [&](int c, int Y, int X) {
    const double u = (Y - off[c][0]) / 2.0, v = (X - off[c][1]) / 2.0;
    const int i0 = static_cast<int>(std::floor(u)), j0 = static_cast<int>(std::floor(v));
    const double fu = u - i0, fv = v - j0;
    return (1 - fu) * (1 - fv) * lat(c, i0, j0) + (1 - fu) * fv * lat(c, i0, j0 + 1) +
           fu * (1 - fv) * lat(c, i0 + 1, j0) + fu * fv * lat(c, i0 + 1, j0 + 1);
  };
  auto site = [](int Y, int X) { return (Y & 1) * 2 + (X & 1); };
  RgbImage out(2 * h, 2 * w);
  for (int Y = 0; Y < 2 * h; ++Y) {
    for (int X = 0; X < 2 * w; ++X) {
      out(0, Y, X) = bilinear(0, Y, X);
      out(2, Y, X) = bilinear(3, Y, X);
      const int s = site(Y, X);
      if (s == 1 || s == 2) {
        out(1, Y, X) = p(s, (Y - off[s][0]) / 2, (X - off[s][1]) / 2);
      } else {
        double acc = 0.0;
        const int d[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
        for (const auto& dd : d) {
          const int yy = Y + dd[0], xx = X + dd[1], n = site(yy + 2, xx + 2);
          acc += lat(n, (yy - off[n][0]) >> 1, (xx - off[n][1]) >> 1);
        }
        out(1, Y, X) = acc / 4.0;
      }
    }
  }
  return out;
}

BayerPlanes fixture_planes() {
  return BayerPlanes(2, 2, {0.1, 0.3, 0.5, 0.7, 0.2, 0.4, 0.6, 0.8,
                            0.15, 0.35, 0.55, 0.75, 0.25, 0.45, 0.65, 0.95});
}

// 2x2 patch with distinct channel values, demosaiced by hand.
const std::array<double, 48> kDemosaicGolden = {
    0.1,   0.2,   0.3,   0.3,   0.3,   0.4,   0.5,   0.5,   0.5,   0.6,   0.7,   0.7,
    0.5,   0.6,   0.7,   0.7,   0.175, 0.2,   0.325, 0.4,   0.15,  0.325, 0.35,  0.475,
    0.475, 0.6,   0.625, 0.8,   0.55,  0.625, 0.75,  0.775, 0.25,  0.25,  0.35,  0.45,
    0.25,  0.25,  0.35,  0.45,  0.45,  0.45,  0.575, 0.7,   0.65,  0.65,  0.8,   0.95};

// normalize(black 64) -> demosaic -> gamma 2.2 of the raw fixture below.
const std::array<double, 48> kPreprocessGolden = {
    0.2249252093916105,  0.41154593725312955, 0.5287182127722561,  0.5287182127722561,
    0.5287182127722561,  0.6208174862997325,  0.6988669323807477,  0.6988669323807477,
    0.6988669323807477,  0.7676395738894219,  0.8297105164925977,  0.8297105164925977,
    0.6988669323807477,  0.7676395738894219,  0.8297105164925977,  0.8297105164925977,
    0.37524954032922136, 0.41154593725312955, 0.5534786381986908,  0.6208174862997325,
    0.3341530147187265,  0.5534786381986908,  0.5769762289759657,  0.6803585154909024,
    0.6803585154909024,  0.7676395738894219,  0.7837119684266955,  0.8866540151397231,
    0.7342199993596825,  0.7837119684266955,  0.8587487941685782,  0.8728352351469373,
    0.47448741575405795, 0.47448741575405795, 0.5769762289759657,  0.6612252172239709,
    0.47448741575405795, 0.47448741575405795, 0.5769762289759657,  0.6612252172239709,
    0.6612252172239709,  0.6612252172239709,  0.7632302457286854,  0.8510255178078271,
    0.7993982364690004,  0.7993982364690004,  0.9063773346302593,  1.0};

}  // namespace

TEST(RawProcConfig, Validation) {
  RawProcConfig c;
  EXPECT_NO_THROW(c.validate());
  c.black_level = 1023;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.wb_gains[2] = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Normalize, ClosedForms) {
  RawProcConfig c;
  EXPECT_DOUBLE_EQ(normalize(constant_raw(2, 2, 1023), c)(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(normalize(constant_raw(2, 2, 0), c)(3, 1, 1), 0.0);
  c.black_level = 64;
  EXPECT_NEAR(normalize(constant_raw(2, 2, 512), c)(1, 0, 1), 0.46715328467153283, 1e-15);
  EXPECT_DOUBLE_EQ(normalize(constant_raw(2, 2, 10), c)(2, 1, 0), 0.0);
  c = {};
  c.wb_gains = {2.0, 1.0, 1.0, 0.5};
  const auto p = normalize(constant_raw(2, 2, 800), c);
  EXPECT_DOUBLE_EQ(p(0, 0, 0), 1.0);
  EXPECT_NEAR(p(3, 0, 0), 400.0 / 1023.0, 1e-15);
}

TEST(Demosaic, ConstantAndZero) {
  const BayerPlanes c(3, 4, 0.37);
  const RgbImage out = demosaic(c);
  EXPECT_EQ(out.height(), 6);
  EXPECT_EQ(out.width(), 8);
  for (double v : out.data()) EXPECT_NEAR(v, 0.37, 1e-15);
  for (double v : upisp::testing::to_vector(demosaic(BayerPlanes(2, 2)))) EXPECT_EQ(v, 0.0);
}

TEST(Demosaic, HandComputedStencils) {
  const BayerPlanes p = fixture_planes();
  const RgbImage ref = reference_demosaic(p);
  const RgbImage out = demosaic(p);
  for (std::size_t i = 0; i < kDemosaicGolden.size(); ++i) {
    EXPECT_NEAR(ref.data()[i], kDemosaicGolden[i], 1e-15) << i;
    EXPECT_NEAR(out.data()[i], kDemosaicGolden[i], 1e-15) << i;
  }
}

TEST(Demosaic, MatchesReferenceOnRandomPlanes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    BayerPlanes p(2 + t % 5, 2 + t % 7);
    for (double& v : p.data()) v = u(rng);
    const RgbImage a = demosaic(p), b = reference_demosaic(p);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.data()[i], b.data()[i], 1e-14);
  }
}

TEST(GammaEncode, FixedPointsAndClosedForm) {
  RgbImage img(1, 3);
  img(0, 0, 0) = 0.0;
  img(0, 0, 1) = 1.0;
  img(0, 0, 2) = 0.25;
  const RgbImage out = gamma_encode(img, 2.2);
  EXPECT_EQ(out(0, 0, 0), 0.0);
  EXPECT_EQ(out(0, 0, 1), 1.0);
  EXPECT_NEAR(out(0, 0, 2), 0.5325205447199813, 1e-15);
  EXPECT_EQ(gamma_encode(img, 1.0), img);
}

TEST(BoxDenoise, ConstantIsFixedPointAndMeanOfNine) {
  RgbImage c(4, 4, 0.3);
  for (double v : upisp::testing::to_vector(box3_denoise(c))) EXPECT_NEAR(v, 0.3, 1e-15);
  RgbImage d(3, 3);
  d(1, 1, 1) = 0.9;
  const RgbImage out = box3_denoise(d);
  EXPECT_NEAR(out(1, 1, 1), 0.1, 1e-15);
  EXPECT_NEAR(out(1, 0, 0), 0.1, 1e-15);
  EXPECT_EQ(out(0, 1, 1), 0.0);
}

TEST(Preprocess, ZeroAndWhite) {
  for (double v : upisp::testing::to_vector(preprocess(constant_raw(3, 2, 0), {}))) EXPECT_EQ(v, 0.0);
  for (double v : upisp::testing::to_vector(preprocess(constant_raw(3, 2, 1023), {}))) EXPECT_EQ(v, 1.0);
}

TEST(Preprocess, GoldenFixture) {
  const RawPatch raw(2, 2, {100, 200, 150, 250, 300, 400, 350, 450,
                            500, 600, 550, 650, 700, 800, 750, 1023});
  RawProcConfig c;
  c.black_level = 64;
  const RgbImage out = preprocess(raw, c);
  ASSERT_EQ(out.height(), 4);
  ASSERT_EQ(out.width(), 4);
  for (std::size_t i = 0; i < kPreprocessGolden.size(); ++i) {
    EXPECT_NEAR(out.data()[i], kPreprocessGolden[i], 1e-12) << i;
  }
  c.denoise = Denoise::kBox3;
  const RgbImage smooth = preprocess(raw, c);
  EXPECT_NE(smooth, out);
}

TEST(Preprocess, SizeRangeAndMonotoneUnderScaling) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> k(0.05, 1.0);
  for (int t = 0; t < 100; ++t) {
    const RawPatch raw = random_raw(2 + t % 4, 2 + t % 6, rng);
    RawProcConfig c;
    c.black_level = t % 3 == 0 ? 64 : 0;
    c.denoise = t % 2 == 0 ? Denoise::kBox3 : Denoise::kOff;
    c.wb_gains = {1.9, 1.0, 1.0, 1.6};
    const RgbImage out = preprocess(raw, c);
    ASSERT_EQ(out.height(), 2 * raw.height());
    ASSERT_EQ(out.width(), 2 * raw.width());
    for (double v : out.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);

    const double f = k(rng);
    std::vector<std::uint16_t> scaled(raw.samples().begin(), raw.samples().end());
    for (auto& s : scaled) s = static_cast<std::uint16_t>(std::floor(s * f));
    const RgbImage lower = preprocess(RawPatch(raw.height(), raw.width(), scaled), c);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_LE(lower.data()[i], out.data()[i] + 1e-15);
  }
}
