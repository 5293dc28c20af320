#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "fglr/error.hpp"
#include "fglr/interp.hpp"
#include "support.hpp"

namespace fglr {
namespace {

double stencil_sum(const std::vector<StencilTap>& taps) {
  double s = 0.0;
  for (const auto& t : taps) s += t.weight;
  return s;
}

TEST(Stencil, OnARedSiteIsASingleTap) {
  const auto taps = interpolation_stencil({4.0, 6.0}, Channel::red, 16, 16, {});
  ASSERT_EQ(taps.size(), 1u);
  EXPECT_EQ(taps[0].x, 4);
  EXPECT_EQ(taps[0].y, 6);
  EXPECT_EQ(taps[0].weight, 1.0);
}

TEST(Stencil, RedCellCenterIsFourQuarters) {
  const auto taps = interpolation_stencil({5.0, 7.0}, Channel::red, 16, 16, {});
  ASSERT_EQ(taps.size(), 4u);
  std::map<std::pair<int, int>, double> w;
  for (const auto& t : taps) w[{t.x, t.y}] = t.weight;
  EXPECT_DOUBLE_EQ(w[std::make_pair(4, 6)], 0.25);
  EXPECT_DOUBLE_EQ(w[std::make_pair(6, 6)], 0.25);
  EXPECT_DOUBLE_EQ(w[std::make_pair(4, 8)], 0.25);
  EXPECT_DOUBLE_EQ(w[std::make_pair(6, 8)], 0.25);
}

TEST(Stencil, BlueMatchesBilinearOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(2.0, 12.0);
  for (int k = 0; k < 200; ++k) {
    const Vec2 p{u(rng), u(rng)};
    // blue lattice: odd x, odd y
    const double x0 = 1 + 2 * std::floor((p.x - 1) / 2);
    const double y0 = 1 + 2 * std::floor((p.y - 1) / 2);
    const double fx = (p.x - x0) / 2;
    const double fy = (p.y - y0) / 2;
    std::map<std::pair<int, int>, double> expected{
        {{int(x0), int(y0)}, (1 - fx) * (1 - fy)},
        {{int(x0) + 2, int(y0)}, fx * (1 - fy)},
        {{int(x0), int(y0) + 2}, (1 - fx) * fy},
        {{int(x0) + 2, int(y0) + 2}, fx * fy}};
    std::map<std::pair<int, int>, double> got;
    for (const auto& t : interpolation_stencil(p, Channel::blue, 16, 16, {})) got[{t.x, t.y}] += t.weight;
    for (const auto& [key, w] : expected) EXPECT_NEAR(got[key], w, 1e-12);
  }
}

TEST(Stencil, GreenIsInverseSquaredDistanceOverFourNearest) {
  const Vec2 p{6.3, 5.6};
  const auto taps = interpolation_stencil(p, Channel::green, 16, 16, {});
  ASSERT_EQ(taps.size(), 4u);
  // Nearest greens by brute force.
  std::vector<std::tuple<double, int, int>> all;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if ((x + y) % 2 == 1) all.emplace_back((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y), y, x);
  std::sort(all.begin(), all.end());
  double total = 0.0;
  for (int k = 0; k < 4; ++k) total += 1.0 / std::get<0>(all[k]);
  for (int k = 0; k < 4; ++k) {
    const auto& [d, y, x] = all[k];
    bool found = false;
    for (const auto& t : taps)
      if (t.x == x && t.y == y) {
        found = true;
        EXPECT_NEAR(t.weight, (1.0 / d) / total, 1e-12);
      }
    EXPECT_TRUE(found);
  }
}

TEST(Stencil, PartitionOfUnityAndChannelOfTaps) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 11.0);
  for (const CfaLayout layout : {CfaLayout{0, 0}, CfaLayout{1, 0}, CfaLayout{0, 1}})
    for (int k = 0; k < 300; ++k) {
      const Vec2 p{u(rng), u(rng)};
      for (Channel c : kChannels) {
        const auto taps = interpolation_stencil(p, c, 12, 12, layout);
        ASSERT_FALSE(taps.empty());
        EXPECT_NEAR(stencil_sum(taps), 1.0, 1e-12);
        for (const auto& t : taps) {
          EXPECT_TRUE(t.x >= 0 && t.y >= 0 && t.x < 12 && t.y < 12);
          EXPECT_EQ(layout.channel_at(t.x, t.y), c);
          EXPECT_GE(t.weight, 0.0);
          EXPECT_LE(std::max(std::abs(t.x - p.x), std::abs(t.y - p.y)), 3.0);
        }
      }
    }
}

TEST(Stencil, BorderFallsBackToNearestSample) {
  // Blue lattice starts at (1, 1): a point left of it has no complete cell.
  const auto taps = interpolation_stencil({0.2, 0.4}, Channel::blue, 8, 8, {});
  ASSERT_EQ(taps.size(), 1u);
  EXPECT_EQ(taps[0].x, 1);
  EXPECT_EQ(taps[0].y, 1);
}

TEST(Window, AlignedEvenAndCoveringTheStencils) {
  const MappingTable t = test::affine_table(16, 16, 40, 40, 1.7, {3.3, 2.9});
  const Rect patch{4, 4, 8, 8};
  const Rect w = neighborhood_window(t, patch);
  EXPECT_EQ(w.x % 2, 0);
  EXPECT_EQ(w.y % 2, 0);
  EXPECT_EQ(w.width % 2, 0);
  EXPECT_EQ(w.height % 2, 0);
  for (Channel c : kChannels) EXPECT_NO_THROW(build_H(t, patch, w, c));
  const MappingTable none = make_mapping_table(2, 2, 4, 4, {}, std::vector<Vec2>(4),
                                               std::vector<std::uint8_t>(4, 0));
  EXPECT_EQ(neighborhood_window(none, {0, 0, 2, 2}).area(), 0);
}

TEST(BuildH, ConstantPlaneGivesConstantRows) {
  const MappingTable t = test::affine_table(20, 20, 48, 48, 2.1, {1.2, 0.7});
  const BayerImage b(48, 48, {}, 0.7);
  for (Channel c : kChannels) {
    const Rect patch{2, 3, 12, 10};
    const InterpOperator h = build_H(t, b, patch, c);
    const auto out = h.apply(gather_window(b, h.window()));
    for (int k = 0; k < patch.area(); ++k) {
      const int x = patch.x + k % patch.width;
      const int y = patch.y + k / patch.width;
      if (t.valid(x, y)) {
        EXPECT_NEAR(out[k], 0.7, 1e-12);
      } else {
        EXPECT_EQ(out[k], 0.0);
      }
    }
  }
}

TEST(BuildH, MatchesDenseOracle) {
  std::mt19937_64 rng(3);
  const MappingTable t = test::affine_table(10, 10, 24, 24, 1.9, {2.1, 1.4});
  const BayerImage b = test::random_bayer(24, 24, rng);
  const Rect patch{1, 1, 8, 8};
  for (Channel c : kChannels) {
    const InterpOperator h = build_H(t, b, patch, c);
    const Rect w = h.window();
    // Dense matrix from the stencils, window-local columns.
    std::vector<double> dense(static_cast<std::size_t>(patch.area()) * w.area(), 0.0);
    for (int k = 0; k < patch.area(); ++k) {
      const int x = patch.x + k % patch.width;
      const int y = patch.y + k / patch.width;
      for (const auto& tap : interpolation_stencil(t.location(x, y), c, 24, 24, {}))
        dense[k * w.area() + (tap.y - w.y) * w.width + (tap.x - w.x)] += tap.weight;
    }
    const auto y = gather_window(b, w);
    const auto got = apply_H(h, y);
    for (int k = 0; k < patch.area(); ++k) {
      double ref = 0.0;
      for (int j = 0; j < w.area(); ++j) ref += dense[k * w.area() + j] * y[j];
      EXPECT_NEAR(got[k], ref, 1e-12);
    }
    // every column references the interpolated channel
    for (int col : h.col_index()) {
      const int cx = w.x + col % w.width;
      const int cy = w.y + col / w.width;
      EXPECT_EQ(b.channel_at(cx, cy), c);
    }
  }
}

TEST(BuildH, LinearAndZeroPreserving) {
  std::mt19937_64 rng(4);
  const MappingTable t = test::affine_table(8, 8, 20, 20, 1.5, {2.5, 2.5});
  const Rect patch{0, 0, 8, 8};
  const InterpOperator h = build_H(t, patch, neighborhood_window(t, patch), Channel::green);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> y1(h.cols()), y2(h.cols()), mix(h.cols()), zero(h.cols(), 0.0);
  for (int k = 0; k < h.cols(); ++k) {
    y1[k] = u(rng);
    y2[k] = u(rng);
    mix[k] = 0.3 * y1[k] - 1.7 * y2[k];
  }
  const auto a = h.apply(y1);
  const auto b = h.apply(y2);
  const auto m = h.apply(mix);
  for (int k = 0; k < h.rows(); ++k) EXPECT_NEAR(m[k], 0.3 * a[k] - 1.7 * b[k], 1e-12);
  for (double v : h.apply(zero)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(h.apply(std::vector<double>(h.cols() + 1)), DimensionError);
}

TEST(BuildH, IdentityTableGathersSamples) {
  std::mt19937_64 rng(5);
  const MappingTable t = identity_mapping_table(12, 12);
  const BayerImage b = test::random_bayer(12, 12, rng);
  const Rect patch{2, 2, 6, 6};
  for (Channel c : kChannels) {
    const InterpOperator h = build_H(t, b, patch, c);
    const auto out = h.apply(gather_window(b, h.window()));
    for (int k = 0; k < patch.area(); ++k) {
      const int x = patch.x + k % patch.width;
      const int y = patch.y + k / patch.width;
      if (b.channel_at(x, y) == c) {
        EXPECT_EQ(out[k], b.at(x, y));
      }
    }
  }
}

TEST(BuildH, MismatchedBayerIsAnError) {
  const MappingTable t = identity_mapping_table(8, 8);
  EXPECT_THROW(build_H(t, BayerImage(10, 8), {0, 0, 4, 4}, Channel::red), DimensionError);
  EXPECT_THROW(build_H(t, BayerImage(8, 8), {6, 6, 4, 4}, Channel::red), DimensionError);
}

}  // namespace
}  // namespace fglr
