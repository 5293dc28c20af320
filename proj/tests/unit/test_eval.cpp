#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fglr/error.hpp"
#include "fglr/eval.hpp"
#include "support.hpp"

namespace fglr {
namespace {

TEST(Psnr, KnownValues) {
  const PlanarImage a = test::constant_planar(8, 8, 0.5, 0.5, 0.5);
  const ValidityMask all(8, 8, true);
  EXPECT_TRUE(std::isinf(psnr(a, a, all)));
  EXPECT_GT(psnr(a, a, all), 0.0);

  const double q = 1.0 / 255.0;
  const PlanarImage b = test::constant_planar(8, 8, 0.5 + q, 0.5 - q, 0.5 + q);
  EXPECT_NEAR(psnr(a, b, all), 48.1308, 1e-4);
  EXPECT_NEAR(psnr(a, b, all), psnr(b, a, all), 1e-12);

  // Error 2/255 on half the pixels: MSE = 2 / 255^2.
  PlanarImage c = a;
  for (int y = 0; y < 8; y += 2)
    for (int x = 0; x < 8; ++x)
      for (Channel ch : kChannels) c.at(ch, x, y) += 2.0 * q;
  EXPECT_NEAR(psnr(a, c, all), 45.1205, 1e-4);
}

TEST(Psnr, IgnoresMaskedPixelsAndChecksInput) {
  const PlanarImage a = test::constant_planar(6, 6, 0.2, 0.2, 0.2);
  PlanarImage b = a;
  b.at(Channel::red, 0, 0) = 1.0;
  ValidityMask mask(6, 6, true);
  mask.set(0, 0, false);
  EXPECT_TRUE(std::isinf(psnr(a, b, mask)));
  EXPECT_THROW(psnr(a, PlanarImage(6, 4), mask), DimensionError);
  EXPECT_THROW(psnr(a, b, ValidityMask(6, 6, false)), DimensionError);
}

TEST(Ssim, SelfIsOneAndInversionIsLow) {
  std::mt19937_64 rng(1);
  const PlanarImage a = test::random_planar(24, 20, rng);
  const ValidityMask all(24, 20, true);
  EXPECT_NEAR(ssim(a, a, all), 1.0, 1e-12);
  PlanarImage inv = a;
  for (Channel c : kChannels)
    for (double& v : inv.plane(c)) v = 1.0 - v;
  EXPECT_LT(ssim(a, inv, all), 0.5);
  EXPECT_NEAR(ssim(a, inv, all), ssim(inv, a, all), 1e-12);
}

TEST(Ssim, ConstantImagesMatchTheLuminanceTerm) {
  const PlanarImage a = test::constant_planar(16, 16, 0.5, 0.5, 0.5);
  const PlanarImage b = test::constant_planar(16, 16, 0.6, 0.6, 0.6);
  const double c1 = 1e-4;
  const double expected = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  EXPECT_NEAR(ssim(a, b, ValidityMask(16, 16, true)), expected, 1e-9);
}

TEST(Ssim, SkipsWindowsTouchingInvalidPixels) {
  std::mt19937_64 rng(2);
  const PlanarImage a = test::random_planar(22, 11, rng);
  PlanarImage b = a;
  // Corrupt the right half; only windows on the left half remain.
  ValidityMask mask(22, 11, true);
  for (int y = 0; y < 11; ++y)
    for (int x = 11; x < 22; ++x) {
      mask.set(x, y, false);
      b.at(Channel::green, x, y) = 0.0;
    }
  EXPECT_NEAR(ssim(a, b, mask), 1.0, 1e-12);
  EXPECT_THROW(ssim(PlanarImage(10, 20), PlanarImage(10, 20), ValidityMask(10, 20)), DimensionError);
  ValidityMask holes(22, 11, true);
  for (int x = 5; x < 22; x += 6) holes.set(x, 5, false);
  EXPECT_THROW(ssim(a, b, holes), DimensionError);
}

TEST(Scenes, DeterministicAndSeedDependent) {
  const Calibration cal = synthetic_calibration(24, 24);
  for (const std::string& name : scene_names()) {
    const SceneSpec spec{parse_scene_kind(name), 0.1, 7};
    EXPECT_EQ(scene_name(spec.kind), name);
    const SceneRender r1 = render_scene(spec, cal);
    const SceneRender r2 = render_scene(spec, cal);
    EXPECT_EQ(r1.reference, r2.reference);
    EXPECT_EQ(r1.fisheye, r2.fisheye);
    const SceneRender r3 = render_scene({spec.kind, 0.1, 8}, cal);
    EXPECT_FALSE(r1.reference == r3.reference) << name;
  }
  EXPECT_THROW(parse_scene_kind("noise"), ConfigError);
}

TEST(Scenes, CheckerIsPiecewiseConstant) {
  const SceneSpec spec{SceneKind::checker, 0.25, 3};
  const auto c00 = scene_color(spec, 0.1, 0.1);
  const auto c10 = scene_color(spec, 0.35, 0.1);
  const auto c11 = scene_color(spec, 0.35, 0.4);
  EXPECT_EQ(c00, c11);
  EXPECT_NE(c00, c10);
  EXPECT_EQ(scene_color(spec, -0.1, 0.1), c10);
  for (int k = 0; k < 3; ++k) EXPECT_GE(std::abs(c00[k] - c10[k]), 0.3 - 1e-12);
  EXPECT_EQ(scene_color(spec, Vec3{0.1, 0.1, 1.0}), c00);
  EXPECT_EQ(scene_color(spec, Vec3{0.2, 0.2, 2.0}), c00);
  EXPECT_EQ(scene_color(spec, Vec3{0.1, 0.1, -1.0}), (std::array<double, 3>{0, 0, 0}));
}

TEST(Scenes, RampIsAffineInsideTheUnitRange) {
  const SceneSpec spec{SceneKind::ramp, 0.1, 4};
  const auto p = scene_color(spec, 0.0, 0.0);
  const auto pu = scene_color(spec, 0.2, 0.0);
  const auto pv = scene_color(spec, 0.0, 0.2);
  const auto puv = scene_color(spec, 0.2, 0.2);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(puv[k] - pu[k], pv[k] - p[k], 1e-12);
}

TEST(Scenes, RenderSamplesTheRays) {
  const Calibration cal = synthetic_calibration(16, 16);
  const SceneSpec spec{SceneKind::texture, 0.1, 5};
  const SceneRender r = render_scene(spec, cal);
  for (int y = 0; y < 16; y += 5)
    for (int x = 0; x < 16; x += 3) {
      const auto c = scene_color(spec, rectified_ray(cal, x, y));
      for (Channel ch : kChannels) EXPECT_EQ(r.reference.at(ch, x, y), c[static_cast<int>(ch)]);
    }
  for (int y = 0; y < 32; y += 7)
    for (int x = 0; x < 32; x += 5) {
      const auto ray = unproject_from_fisheye(cal, {double(x), double(y)});
      const auto c = ray ? scene_color(spec, *ray) : std::array<double, 3>{};
      for (Channel ch : kChannels) EXPECT_EQ(r.fisheye.at(ch, x, y), c[static_cast<int>(ch)]);
    }
}

TEST(Cases, NoiseMomentsAndMaskedReference) {
  const Calibration cal = synthetic_calibration(32, 32);
  const SceneSpec spec{SceneKind::constant, 0.1, 9};
  const TestCase clean = make_case(spec, cal, {0.0, 0});
  const TestCase noisy = make_case(spec, cal, {15.0, 11});
  EXPECT_EQ(clean.reference, noisy.reference);
  EXPECT_EQ(clean.mask, build_mapping_table(cal).mask());
  // Only mid-range samples are unaffected by clamping.
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < clean.input.samples().size(); ++k) {
    const double v = clean.input.samples()[k];
    if (v < 0.3 || v > 0.7) continue;
    const double d = noisy.input.samples()[k] - v;
    sum += d;
    sq += d * d;
    ++n;
  }
  ASSERT_GT(n, 1000u);
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd * 255.0, 15.0, 0.05 * 15.0);
  EXPECT_LT(std::abs(mean) * 255.0, 1.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!clean.mask(x, y)) {
        EXPECT_EQ(clean.reference.at(Channel::red, x, y), 0.0);
      }
}

TEST(SyntheticCalibration, CentersTheFisheye) {
  const Calibration cal = synthetic_calibration(64, 48);
  EXPECT_EQ(cal.fisheye_width, 128);
  EXPECT_EQ(cal.fisheye_height, 96);
  EXPECT_DOUBLE_EQ(cal.cx, 63.5);
  EXPECT_DOUBLE_EQ(cal.cy, 47.5);
  EXPECT_DOUBLE_EQ(cal.rect_focal, 0.7 * 64);
  EXPECT_NO_THROW(cal.validate());
}

TEST(Csv, RoundTripAndSummary) {
  std::vector<MetricReport> rows = {
      {"a", "joint", 30.25, 0.9, 100, ""},
      {"a", "hql", std::numeric_limits<double>::infinity(), 1.0, 100, ""},
      {"b", "joint", 20.75, 0.7, 90, "cg_nonconverged"},
      {"b", "hql", 25.0, 0.8, 90, ""},
  };
  std::string text = metrics_csv_header() + "\n";
  for (const auto& r : rows) text += metrics_csv_row(r) + "\n";
  EXPECT_NE(text.find(",inf,"), std::string::npos);
  const auto back = parse_metrics_csv(text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(back[k].scene, rows[k].scene);
    EXPECT_EQ(back[k].method, rows[k].method);
    EXPECT_EQ(back[k].psnr_db, rows[k].psnr_db);
    EXPECT_EQ(back[k].ssim, rows[k].ssim);
    EXPECT_EQ(back[k].valid_pixels, rows[k].valid_pixels);
    EXPECT_EQ(back[k].flags, rows[k].flags);
  }
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].method, "joint");
  EXPECT_DOUBLE_EQ(s[0].mean_psnr, 25.5);
  EXPECT_DOUBLE_EQ(s[0].mean_ssim, 0.8);
  EXPECT_EQ(s[1].infinite_psnr, 1u);
  EXPECT_DOUBLE_EQ(s[1].mean_psnr, 25.0);
  EXPECT_THROW(parse_metrics_csv("scene,method\nx,y\n"), IoError);
}

TEST(Csv, TableListsScenesAndAverages) {
  std::vector<MetricReport> rows = {{"a", "joint", 30.0, 0.9, 10, ""},
                                    {"b", "joint", 20.0, 0.7, 10, ""}};
  const std::string t = format_table(rows);
  EXPECT_NE(t.find("joint"), std::string::npos);
  EXPECT_NE(t.find("0.900 / 30.000"), std::string::npos);
  EXPECT_NE(t.find("average"), std::string::npos);
  EXPECT_NE(t.find("0.800 / 25.000"), std::string::npos);
}

}  // namespace
}  // namespace fglr
