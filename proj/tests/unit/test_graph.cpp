#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fglr/error.hpp"
#include "fglr/graph.hpp"
#include "support.hpp"

namespace fglr {
namespace {

// Sub-plane of the quad offset (ox, oy) relative to the patch origin.
std::vector<double> subplane(const BayerImage& b, int ox, int oy) {
  std::vector<double> out;
  for (int y = oy; y < b.height(); y += 2)
    for (int x = ox; x < b.width(); x += 2) out.push_back(b.at(x, y));
  return out;
}

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  long double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const long double ma = sa / a.size(), mb = sb / b.size();
  long double cab = 0, caa = 0, cbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cab += (a[i] - ma) * (b[i] - mb);
    caa += (a[i] - ma) * (a[i] - ma);
    cbb += (b[i] - mb) * (b[i] - mb);
  }
  if (caa == 0 || cbb == 0) return 0.0;
  return static_cast<double>(cab / std::sqrt(caa * cbb));
}

TEST(Correlation, MatchesBruteForcePearson) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> side(4, 16);
  for (int k = 0; k < 100; ++k) {
    const int w = 2 * side(rng);
    const int h = 2 * side(rng);
    const BayerImage b = test::random_bayer(w, h, rng);
    const auto r = subplane(b, 0, 0), g1 = subplane(b, 1, 0), g2 = subplane(b, 0, 1),
               bl = subplane(b, 1, 1);
    const ChannelCorrelation c = compute_correlation(b);
    auto c01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    EXPECT_NEAR(c.rb, c01(pearson_oracle(r, bl)), 1e-12);
    EXPECT_NEAR(c.rg, c01(std::max(pearson_oracle(r, g1), pearson_oracle(r, g2))), 1e-12);
    EXPECT_NEAR(c.bg, c01(std::max(pearson_oracle(bl, g1), pearson_oracle(bl, g2))), 1e-12);
  }
}

TEST(Correlation, IdenticalSubplanesAreFullyCorrelated) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BayerImage b(8, 8);
  for (int qy = 0; qy < 8; qy += 2)
    for (int qx = 0; qx < 8; qx += 2) {
      const double v = u(rng);
      b.at(qx, qy) = b.at(qx + 1, qy) = b.at(qx, qy + 1) = b.at(qx + 1, qy + 1) = v;
    }
  const ChannelCorrelation c = compute_correlation(b);
  EXPECT_NEAR(c.rb, 1.0, 1e-12);
  EXPECT_NEAR(c.rg, 1.0, 1e-12);
  EXPECT_NEAR(c.bg, 1.0, 1e-12);
}

TEST(Correlation, AntiCorrelatedIsClampedToZero) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  BayerImage b(8, 8);
  for (int qy = 0; qy < 8; qy += 2)
    for (int qx = 0; qx < 8; qx += 2) {
      const double d = u(rng);
      b.at(qx, qy) = 0.5 + d;
      b.at(qx + 1, qy + 1) = 0.5 - d;
      b.at(qx + 1, qy) = 0.5 + u(rng);
      b.at(qx, qy + 1) = 0.5 + u(rng);
    }
  EXPECT_EQ(compute_correlation(b).rb, 0.0);
}

TEST(Correlation, ConstantsAndBoundsAndFactors) {
  const ChannelCorrelation c = compute_correlation(BayerImage(8, 8, {}, 0.4));
  EXPECT_EQ(c.rb, 0.0);
  EXPECT_EQ(c.rg, 0.0);
  EXPECT_EQ(c.bg, 0.0);
  for (Channel ch : kChannels) EXPECT_EQ(c.factor(ch, ch), 1.0);
  const ChannelCorrelation k{0.1, 0.2, 0.3};
  EXPECT_EQ(k.factor(Channel::red, Channel::blue), 0.1);
  EXPECT_EQ(k.factor(Channel::blue, Channel::red), 0.1);
  EXPECT_EQ(k.factor(Channel::green, Channel::red), 0.2);
  EXPECT_EQ(k.factor(Channel::green, Channel::blue), 0.3);
  EXPECT_THROW(compute_correlation(BayerImage(2, 4)), DimensionError);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto r = compute_correlation(test::random_bayer(10, 10, rng));
    for (double v : {r.rb, r.rg, r.bg}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Observation, CoincidentEndpointGivesUnitKernel) {
  const ObservationOptions opts{};
  const auto o = make_observation({0.0, 0.0}, {1.0, 0.0}, {0, 0}, {2, 0}, CfaColor::red, 0.5, 0.3,
                                  Pairing::direct, 1.0, opts);
  ASSERT_TRUE(o);
  EXPECT_DOUBLE_EQ(o->weight, 1.0);
  EXPECT_DOUBLE_EQ(o->cos_theta, 1.0);
  EXPECT_DOUBLE_EQ(o->delta, 0.2);
}

TEST(Observation, PerpendicularPairIsDropped) {
  const auto o = make_observation({0.5, 0.5}, {1.5, 0.5}, {1, 0}, {1, 2}, CfaColor::red, 0.5, 0.3,
                                  Pairing::direct, 1.0, {});
  EXPECT_FALSE(o);
}

TEST(Observation, OppositeOrientationIsFlipped) {
  ObservationOptions opts;
  opts.kernel = DistanceKernel::sum;
  const auto o = make_observation({2.0, 0.0}, {0.5, 0.0}, {0, 0}, {2, 0}, CfaColor::red, 0.5, 0.3,
                                  Pairing::swapped, 0.5, opts);
  ASSERT_TRUE(o);
  EXPECT_DOUBLE_EQ(o->cos_theta, 1.0);
  EXPECT_DOUBLE_EQ(o->delta, 0.3 - 0.5);
  EXPECT_EQ(o->m, (Pixel{2, 0}));
  // swapped pairing: |ls - ln|^2 = 0, |lt - lm|^2 = 0.25
  EXPECT_NEAR(o->weight, std::exp(-0.25 / (1.5 * 1.5)) * 0.5, 1e-15);
}

TEST(Observation, ProductKernelAndNormalization) {
  ObservationOptions opts;
  opts.sigma_v = 2.0;
  opts.normalize_distance = true;
  const auto o = make_observation({0.5, 0.0}, {1.5, 0.0}, {0, 0}, {2, 0}, CfaColor::red, 0.6, 0.2,
                                  Pairing::direct, 1.0, opts);
  ASSERT_TRUE(o);
  EXPECT_NEAR(o->weight, std::exp(-0.25 * 0.25 / 4.0), 1e-15);
  EXPECT_NEAR(o->delta, 0.4 * 1.0 / 2.0, 1e-15);
}

TEST(Observation, RampOnTheRedLattice) {
  // y(x, .) = 0.1 x; identity mapping; horizontal pair (s, t) = (2,2)-(3,2)
  BayerImage b(12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) b.at(x, y) = 0.1 * x;
  const MappingTable t = identity_mapping_table(12, 12);
  const auto obs = collect_geometric_observations(t, b, {4, 4}, {5, 4}, {});
  bool saw_red = false;
  for (const auto& o : obs) {
    if (o.color != CfaColor::red || o.m.y != o.n.y) continue;
    saw_red = true;
    // m -> n runs along s -> t, so delta = y_m - y_n = -0.2.
    EXPECT_EQ(o.n.x - o.m.x, 2);
    EXPECT_NEAR(o.delta, b.at(o.m.x, o.m.y) - b.at(o.n.x, o.n.y), 1e-15);
    EXPECT_NEAR(std::abs(o.delta), 0.2, 1e-12);
  }
  EXPECT_TRUE(saw_red);
}

TEST(Observation, CollectedWeightsUseTheCorrelationOfTheTarget) {
  std::mt19937_64 rng(5);
  const BayerImage b = test::random_bayer(16, 16, rng);
  const MappingTable t = test::affine_table(8, 8, 16, 16, 1.3, {2.2, 2.6});
  const ChannelCorrelation corr{0.25, 0.5, 0.75};
  const auto geo = collect_geometric_observations(t, b, {3, 3}, {4, 4}, {});
  const auto red = collect_observations(t, b, {3, 3}, {4, 4}, Channel::red, corr, {});
  std::size_t k = 0;
  for (const auto& g : geo) {
    const double f = corr.factor(Channel::red, channel_of(g.color));
    if (!(g.weight * f > kMinObservationWeight)) continue;
    ASSERT_LT(k, red.size());
    EXPECT_NEAR(red[k].weight, g.weight * f, 1e-15);
    EXPECT_EQ(red[k].delta, g.delta);
    ++k;
  }
  EXPECT_EQ(k, red.size());
  EXPECT_THROW(collect_geometric_observations(t, b, {3, 3}, {5, 5}, {}), DimensionError);
}

TEST(Observation, CachedPairingMatchesUncached) {
  std::mt19937_64 rng(6);
  const BayerImage b = test::random_bayer(20, 20, rng);
  const MappingTable t = test::affine_table(10, 10, 20, 20, 1.6, {1.7, 2.3});
  ObservationOptions other;
  other.radius = 3.0000001;  // bypasses the cache
  for (int dir = 0; dir < 4; ++dir) {
    const Pixel i{4, 4};
    const Pixel j{i.x + kEdgeOffsets[dir].x, i.y + kEdgeOffsets[dir].y};
    const auto a = collect_geometric_observations(t, b, i, j, {});
    const auto c = collect_geometric_observations(t, b, i, j, other);
    ASSERT_EQ(a.size(), c.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].delta, c[k].delta);
      EXPECT_EQ(a[k].weight, c[k].weight);
    }
  }
}

std::vector<GradientObservation> obs_of(std::vector<double> v, std::vector<double> d) {
  std::vector<GradientObservation> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    out[k].weight = v[k];
    out[k].delta = d[k];
  }
  return out;
}

TEST(Mle, Examples) {
  EXPECT_EQ(*mle_gradient(obs_of({0.8}, {0.3})), 0.3);
  EXPECT_DOUBLE_EQ(*mle_gradient(obs_of({1, 1}, {0.1, 0.3})), 0.2);
  EXPECT_DOUBLE_EQ(*mle_gradient(obs_of({1, 3}, {0.4, 0.0})), 0.1);
  EXPECT_FALSE(mle_gradient(obs_of({}, {})));
  EXPECT_FALSE(mle_gradient(obs_of({0.0}, {1.0})));
}

TEST(Mle, HomogeneityAndWeightScaleInvariance) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.01, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + t % 9), d(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = pos(rng);
      d[k] = u(rng);
    }
    const double c = 5.0 * u(rng);
    const double s = 10.0 * pos(rng);
    const double base = *mle_gradient(obs_of(v, d));
    auto dc = d;
    for (double& x : dc) x *= c;
    auto vs = v;
    for (double& x : vs) x *= s;
    EXPECT_NEAR(*mle_gradient(obs_of(v, dc)), c * base, 1e-12);
    EXPECT_NEAR(*mle_gradient(obs_of(vs, d)), base, 1e-12);
  }
}

TEST(Mle, InvariantToTheStoredOrderOfEachPair) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  std::uniform_real_distribution<double> val(0.0, 1.0);
  const ObservationOptions opts{};
  for (int t = 0; t < 200; ++t) {
    const Vec2 ls{u(rng), u(rng)};
    const Vec2 lt{ls.x + val(rng) - 0.5, ls.y + val(rng) - 0.5};
    std::vector<GradientObservation> forward, reversed;
    for (int k = 0; k < 4; ++k) {
      const Pixel m{int(u(rng)), int(u(rng))};
      const Pixel n{m.x + (k % 2 ? 2 : 0), m.y + (k % 2 ? 0 : 2)};
      const double ym = val(rng), yn = val(rng);
      const Pairing p = pair_endpoints(ls, lt, {double(m.x), double(m.y)}, {double(n.x), double(n.y)});
      const Pairing q = p == Pairing::direct ? Pairing::swapped : Pairing::direct;
      const auto a = make_observation(ls, lt, m, n, CfaColor::red, ym, yn, p, 1.0, opts);
      const auto b = make_observation(ls, lt, n, m, CfaColor::red, yn, ym, q, 1.0, opts);
      ASSERT_EQ(bool(a), bool(b));
      if (!a) continue;
      EXPECT_EQ(a->delta, b->delta);
      EXPECT_NEAR(a->weight, b->weight, 1e-15);
      forward.push_back(*a);
      reversed.push_back(*b);
    }
    const auto fa = mle_gradient(forward);
    const auto fb = mle_gradient(reversed);
    ASSERT_EQ(bool(fa), bool(fb));
    if (fa) {
      EXPECT_NEAR(*fa, *fb, 1e-15);
    }
  }
}

TEST(EdgeWeight, ClosedForms) {
  EXPECT_EQ(edge_weight(0.0, 0.02), 1.0);
  EXPECT_NEAR(edge_weight(0.02, 0.02), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(edge_weight(0.06, 0.02), std::exp(-9.0), 1e-15);
  EXPECT_THROW(edge_weight(0.1, 0.0), ConfigError);
}

TEST(Laplacian, TwoNodes) {
  const PatchGraph g = build_laplacian(2, {{0, 1, 1.0}});
  EXPECT_EQ(g.dense(), (std::vector<double>{1, -1, -1, 1}));
}

TEST(Laplacian, EmptyIsZero) {
  const PatchGraph g = build_laplacian(3, {});
  for (double v : g.dense()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.quadratic_form(std::vector<double>{1, 2, 3}), 0.0);
}

TEST(Laplacian, PropertiesOnRandomGraphs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t;
    std::vector<GraphEdge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (u(rng) < 0.2) edges.push_back({i, j, u(rng)});
    const PatchGraph g = build_laplacian(n, edges);
    const auto d = g.dense();
    Eigen::MatrixXd L(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) L(i, j) = d[i * n + j];
    EXPECT_LE((L - L.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE(L.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    double direct = 0.0;
    for (const auto& e : edges) direct += e.w * (x[e.i] - x[e.j]) * (x[e.i] - x[e.j]);
    EXPECT_NEAR(g.quadratic_form(x), direct, 1e-10);
    EXPECT_NEAR(g.smoothness(x), direct, 1e-10);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(g.degree(i), L(i, i), 1e-15);
  }
}

TEST(Laplacian, InvalidEdges) {
  EXPECT_THROW(build_laplacian(2, {{0, 0, 1.0}}), DimensionError);
  EXPECT_THROW(build_laplacian(2, {{0, 2, 1.0}}), DimensionError);
  EXPECT_ANY_THROW(build_laplacian(2, {{0, 1, 1.5}}));
  EXPECT_ANY_THROW(build_laplacian(2, {{0, 1, -0.1}}));
  const PatchGraph g = build_laplacian(2, {{0, 1, 0.2}, {1, 0, 0.7}});
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.edges()[0].w, 0.7);
}

TEST(GridTopology, EightConnectedOverValidNodes) {
  std::vector<std::uint8_t> valid(5 * 4, 1);
  EXPECT_EQ(grid_topology(5, 4, valid).size(), 4u * 4 + 5 * 3 + 2u * 4 * 3);
  valid[7] = 0;
  for (const auto& e : grid_topology(5, 4, valid)) {
    EXPECT_NE(e.i, 7);
    EXPECT_NE(e.j, 7);
    EXPECT_EQ(std::max(std::abs(e.i % 5 - e.j % 5), std::abs(e.i / 5 - e.j / 5)), 1);
  }
}

TEST(Rebuild, WeightsFromTheSignal) {
  std::vector<std::uint8_t> valid(4 * 4, 1);
  const PatchGraph base = build_laplacian(16, grid_topology(4, 4, valid));
  const PatchGraph flat = rebuild_from_signal(base, std::vector<double>(16, 0.3), 0.02);
  for (const auto& e : flat.edges()) EXPECT_EQ(e.w, 1.0);
  std::vector<double> step(16);
  for (int k = 0; k < 16; ++k) step[k] = (k % 4) >= 2 ? 0.05 : 0.0;
  const PatchGraph stepped = rebuild_from_signal(base, step, 0.02);
  for (const auto& e : stepped.edges()) {
    const bool across = (e.i % 4 >= 2) != (e.j % 4 >= 2);
    EXPECT_NEAR(e.w, across ? std::exp(-0.0025 / 0.0004) : 1.0, 1e-15);
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(16);
  for (double& v : x) v = u(rng);
  const PatchGraph random = rebuild_from_signal(base, x, 0.3);
  for (const auto& e : random.edges())
    EXPECT_NEAR(e.w, std::exp(-(x[e.i] - x[e.j]) * (x[e.i] - x[e.j]) / 0.09), 1e-15);
}

}  // namespace
}  // namespace fglr
