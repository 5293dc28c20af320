#include "fglr/graph.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

#include "fglr/error.hpp"

namespace fglr {

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  if (*amin == *amax || *bmin == *bmax) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - ma;
    const double db = b[k] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double den = std::sqrt(saa * sbb);
  return den > 0.0 ? sab / den : 0.0;
}

int edge_direction(Pixel i, Pixel j) {
  for (int d = 0; d < 4; ++d)
    if (j.x - i.x == kEdgeOffsets[d].x && j.y - i.y == kEdgeOffsets[d].y) return d;
  return -1;
}

}  // namespace

double ChannelCorrelation::factor(Channel target, Channel observed) const {
  if (target == observed) return 1.0;
  const bool has_red = target == Channel::red || observed == Channel::red;
  const bool has_blue = target == Channel::blue || observed == Channel::blue;
  if (has_red && has_blue) return rb;
  return has_red ? rg : bg;
}

ChannelCorrelation compute_correlation(const BayerImage& patch) {
  if (patch.width() < 4 || patch.height() < 4)
    throw DimensionError("correlation patch must be at least 4x4");
  const std::size_t quads = static_cast<std::size_t>(patch.width() / 2) * (patch.height() / 2);
  std::array<std::vector<double>, 4> planes;
  for (auto& p : planes) p.reserve(quads);
  for (int qy = 0; qy < patch.height(); qy += 2)
    for (int qx = 0; qx < patch.width(); qx += 2)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          planes[static_cast<int>(patch.color_at(qx + dx, qy + dy))].push_back(
              patch.at(qx + dx, qy + dy));
  const auto& r = planes[static_cast<int>(CfaColor::red)];
  const auto& g1 = planes[static_cast<int>(CfaColor::green1)];
  const auto& g2 = planes[static_cast<int>(CfaColor::green2)];
  const auto& b = planes[static_cast<int>(CfaColor::blue)];
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  ChannelCorrelation out;
  out.rb = clamp01(pearson(r, b));
  out.rg = clamp01(std::max(pearson(r, g1), pearson(r, g2)));
  out.bg = clamp01(std::max(pearson(b, g1), pearson(b, g2)));
  return out;
}

std::optional<GradientObservation> make_observation(Vec2 ls, Vec2 lt, Pixel m, Pixel n,
                                                    CfaColor color, double ym, double yn,
                                                    Pairing pairing, double rho,
                                                    const ObservationOptions& opts) {
  const Vec2 lm{double(m.x), double(m.y)};
  const Vec2 ln{double(n.x), double(n.y)};
  const Vec2 st = lt - ls;
  const Vec2 mn = ln - lm;
  const double st_len = std::sqrt(squared_norm(st));
  const double mn_len = std::sqrt(squared_norm(mn));
  if (!(st_len > 0.0) || !(mn_len > 0.0)) return std::nullopt;

  const bool direct = pairing == Pairing::direct;
  const double ds = squared_norm(ls - (direct ? lm : ln));
  const double dt = squared_norm(lt - (direct ? ln : lm));
  const double s2 = opts.sigma_v * opts.sigma_v;
  const double kernel =
      opts.kernel == DistanceKernel::product ? std::exp(-ds * dt / s2) : std::exp(-(ds + dt) / s2);

  GradientObservation obs;
  obs.m = m;
  obs.n = n;
  obs.color = color;
  obs.cos_theta = dot(st, mn) / (st_len * mn_len);
  obs.delta = ym - yn;
  if (obs.cos_theta < 0.0) {
    obs.cos_theta = -obs.cos_theta;
    obs.delta = -obs.delta;
    std::swap(obs.m, obs.n);
  }
  obs.cos_theta = std::min(obs.cos_theta, 1.0);
  if (opts.normalize_distance) obs.delta *= st_len / mn_len;
  obs.weight = kernel * obs.cos_theta * rho;
  if (!(obs.weight > kMinObservationWeight)) return std::nullopt;
  return obs;
}

namespace {

template <typename RhoFn>
std::vector<GradientObservation> collect_impl(const MappingTable& table, const BayerImage& bayer,
                                              Pixel i, Pixel j, const ObservationOptions& opts,
                                              RhoFn rho_of) {
  if (bayer.width() != table.bayer_width() || bayer.height() != table.bayer_height())
    throw DimensionError("Bayer image size does not match the mapping table");
  if (std::max(std::abs(i.x - j.x), std::abs(i.y - j.y)) != 1)
    throw DimensionError("collect_observations needs 8-connected neighbors");
  if (!table.valid(i.x, i.y) || !table.valid(j.x, j.y))
    throw DimensionError("collect_observations needs two valid pixels");

  const Vec2 ls = table.location(i.x, i.y);
  const Vec2 lt = table.location(j.x, j.y);
  const auto pairs = enumerate_same_color_pairs(0.5 * (ls + lt), opts.radius, bayer.width(),
                                                bayer.height(), bayer.layout());
  const int dir = edge_direction(i, j);
  const bool cached = dir >= 0 && opts.radius == table.pairing_radius() &&
                      table.candidate_count(i.x, i.y, dir) == pairs.size();

  std::vector<GradientObservation> out;
  out.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const BayerPair& p = pairs[k];
    const Pairing pairing =
        cached ? table.pairing(i.x, i.y, dir, k)
               : pair_endpoints(ls, lt, {double(p.m.x), double(p.m.y)},
                                {double(p.n.x), double(p.n.y)});
    if (auto obs = make_observation(ls, lt, p.m, p.n, p.color, bayer.at(p.m.x, p.m.y),
                                    bayer.at(p.n.x, p.n.y), pairing,
                                    rho_of(channel_of(p.color)), opts))
      out.push_back(*obs);
  }
  return out;
}

}  // namespace

std::vector<GradientObservation> collect_observations(const MappingTable& table,
                                                      const BayerImage& bayer, Pixel i,
                                                      Pixel j, Channel target,
                                                      const ChannelCorrelation& corr,
                                                      const ObservationOptions& opts) {
  return collect_impl(table, bayer, i, j, opts,
                      [&](Channel observed) { return corr.factor(target, observed); });
}

std::vector<GradientObservation> collect_geometric_observations(const MappingTable& table,
                                                                const BayerImage& bayer,
                                                                Pixel i, Pixel j,
                                                                const ObservationOptions& opts) {
  return collect_impl(table, bayer, i, j, opts, [](Channel) { return 1.0; });
}

std::optional<double> mle_gradient(std::span<const GradientObservation> obs) {
  double total = 0.0;
  double acc = 0.0;
  for (const auto& o : obs) {
    total += o.weight;
    acc += o.weight * o.delta;
  }
  if (!(total > 0.0)) return std::nullopt;
  return acc / total;
}

double edge_weight(double delta, double sigma_w) {
  if (!(sigma_w > 0.0)) throw ConfigError("sigma_w must be positive");
  return std::exp(-(delta * delta) / (sigma_w * sigma_w));
}

// ---- Laplacian ------------------------------------------------------------------

PatchGraph build_laplacian(int nodes, std::vector<GraphEdge> edges) {
  if (nodes < 0) throw DimensionError("negative node count");
  std::map<std::pair<int, int>, std::size_t> seen;
  std::vector<GraphEdge> unique;
  unique.reserve(edges.size());
  for (const GraphEdge& e : edges) {
    if (e.i == e.j) throw DimensionError("self loop at node " + std::to_string(e.i));
    if (e.i < 0 || e.j < 0 || e.i >= nodes || e.j >= nodes)
      throw DimensionError("edge references a node outside the graph");
    if (!(e.w >= 0.0 && e.w <= 1.0)) throw ConfigError("edge weight outside [0, 1]");
    const auto key = std::minmax(e.i, e.j);
    if (const auto it = seen.find(key); it != seen.end()) {
      spdlog::warn("duplicate edge ({}, {}); keeping the last weight", key.first, key.second);
      unique[it->second].w = e.w;
      continue;
    }
    seen.emplace(key, unique.size());
    unique.push_back(e);
  }

  PatchGraph g;
  g.nodes_ = nodes;
  g.edges_ = std::move(unique);
  g.degree_.assign(static_cast<std::size_t>(nodes), 0.0);
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(nodes));
  for (const GraphEdge& e : g.edges_) {
    rows[e.i].emplace_back(e.j, -e.w);
    rows[e.j].emplace_back(e.i, -e.w);
    g.degree_[e.i] += e.w;
    g.degree_[e.j] += e.w;
  }
  g.row_ptr_.assign(1, 0);
  g.row_ptr_.reserve(static_cast<std::size_t>(nodes) + 1);
  for (int r = 0; r < nodes; ++r) {
    auto& row = rows[r];
    row.emplace_back(r, g.degree_[r]);
    std::sort(row.begin(), row.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [c, v] : row) {
      g.col_index_.push_back(c);
      g.values_.push_back(v);
    }
    g.row_ptr_.push_back(static_cast<int>(g.col_index_.size()));
  }
  return g;
}

double PatchGraph::max_degree() const {
  return degree_.empty() ? 0.0 : *std::max_element(degree_.begin(), degree_.end());
}

void PatchGraph::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != static_cast<std::size_t>(nodes_) || out.size() != x.size())
    throw DimensionError("Laplacian apply: dimension mismatch");
  for (int r = 0; r < nodes_; ++r) {
    double acc = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * x[col_index_[k]];
    out[r] = acc;
  }
}

std::vector<double> PatchGraph::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  apply(x, out);
  return out;
}

double PatchGraph::quadratic_form(std::span<const double> x) const {
  const auto lx = apply(x);
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * lx[k];
  return acc;
}

double PatchGraph::smoothness(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(nodes_))
    throw DimensionError("smoothness: dimension mismatch");
  double acc = 0.0;
  for (const GraphEdge& e : edges_) {
    const double d = x[e.i] - x[e.j];
    acc += e.w * d * d;
  }
  return acc;
}

std::vector<double> PatchGraph::dense() const {
  std::vector<double> out(static_cast<std::size_t>(nodes_) * nodes_, 0.0);
  for (int r = 0; r < nodes_; ++r)
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      out[static_cast<std::size_t>(r) * nodes_ + col_index_[k]] = values_[k];
  return out;
}

std::vector<GraphEdge> grid_topology(int width, int height, std::span<const std::uint8_t> valid) {
  if (valid.size() != static_cast<std::size_t>(width) * height)
    throw DimensionError("grid_topology: mask size mismatch");
  std::vector<GraphEdge> edges;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int i = y * width + x;
      if (!valid[i]) continue;
      for (const Pixel& d : kEdgeOffsets) {
        const int jx = x + d.x;
        const int jy = y + d.y;
        if (jx < 0 || jy < 0 || jx >= width || jy >= height) continue;
        const int j = jy * width + jx;
        if (valid[j]) edges.push_back({i, j, 1.0});
      }
    }
  return edges;
}

PatchGraph rebuild_from_signal(const PatchGraph& graph, std::span<const double> x,
                               double sigma_w) {
  if (x.size() != static_cast<std::size_t>(graph.nodes()))
    throw DimensionError("rebuild_from_signal: dimension mismatch");
  std::vector<GraphEdge> edges = graph.edges();
  for (GraphEdge& e : edges) e.w = edge_weight(x[e.i] - x[e.j], sigma_w);
  return build_laplacian(graph.nodes(), std::move(edges));
}

void write_edge_csv(const PatchGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "i,j,w\n" << std::setprecision(17);
  for (const GraphEdge& e : graph.edges()) out << e.i << ',' << e.j << ',' << e.w << '\n';
}

}  // namespace fglr
