#include "fglr/interp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <tuple>

#include "fglr/error.hpp"

namespace fglr {

namespace {

Pixel lattice_origin(Channel channel, CfaLayout layout) {
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      if (layout.channel_at(x, y) == channel) return {x, y};
  return {0, 0};
}

double floor_to_lattice(double v, int origin) {
  return origin + 2.0 * std::floor((v - origin) / 2.0);
}

std::vector<StencilTap> nearest_sample(Vec2 p, Channel channel, int width, int height,
                                       CfaLayout layout) {
  const int cx = static_cast<int>(std::lround(std::clamp(p.x, 0.0, width - 1.0)));
  const int cy = static_cast<int>(std::lround(std::clamp(p.y, 0.0, height - 1.0)));
  double best = std::numeric_limits<double>::infinity();
  StencilTap tap{-1, -1, 1.0};
  for (int y = std::max(0, cy - 2); y <= std::min(height - 1, cy + 2); ++y)
    for (int x = std::max(0, cx - 2); x <= std::min(width - 1, cx + 2); ++x) {
      if (layout.channel_at(x, y) != channel) continue;
      const double d = squared_norm(Vec2{double(x), double(y)} - p);
      if (d < best) {
        best = d;
        tap.x = x;
        tap.y = y;
      }
    }
  if (tap.x < 0) return {};
  return {tap};
}

bool all_in_bounds(const std::vector<StencilTap>& taps, int width, int height) {
  return std::all_of(taps.begin(), taps.end(), [&](const StencilTap& t) {
    return t.x >= 0 && t.y >= 0 && t.x < width && t.y < height;
  });
}

}  // namespace

std::vector<StencilTap> interpolation_stencil(Vec2 p, Channel channel, int width, int height,
                                              CfaLayout layout) {
  std::vector<StencilTap> taps;
  if (channel == Channel::green) {
    const int bx = static_cast<int>(std::floor(p.x));
    const int by = static_cast<int>(std::floor(p.y));
    std::vector<std::tuple<double, int, int>> sites;
    for (int y = by - 2; y <= by + 3; ++y)
      for (int x = bx - 2; x <= bx + 3; ++x)
        if (layout.channel_at(x, y) == Channel::green)
          sites.emplace_back(squared_norm(Vec2{double(x), double(y)} - p), y, x);
    std::sort(sites.begin(), sites.end());
    sites.resize(4);
    const auto& [d0, y0, x0] = sites.front();
    if (d0 == 0.0) {
      taps.push_back({x0, y0, 1.0});
    } else {
      double total = 0.0;
      for (const auto& [d, y, x] : sites) {
        taps.push_back({x, y, 1.0 / d});
        total += 1.0 / d;
      }
      for (auto& t : taps) t.weight /= total;
    }
  } else {
    const Pixel o = lattice_origin(channel, layout);
    const double x0 = floor_to_lattice(p.x, o.x);
    const double y0 = floor_to_lattice(p.y, o.y);
    const double fx = (p.x - x0) / 2.0;
    const double fy = (p.y - y0) / 2.0;
    const int ix = static_cast<int>(x0);
    const int iy = static_cast<int>(y0);
    const std::array<StencilTap, 4> corners{
        StencilTap{ix, iy, (1.0 - fx) * (1.0 - fy)}, StencilTap{ix + 2, iy, fx * (1.0 - fy)},
        StencilTap{ix, iy + 2, (1.0 - fx) * fy}, StencilTap{ix + 2, iy + 2, fx * fy}};
    for (const auto& c : corners)
      if (c.weight > 0.0) taps.push_back(c);
  }
  if (!all_in_bounds(taps, width, height)) return nearest_sample(p, channel, width, height, layout);
  return taps;
}

InterpOperator::InterpOperator(int rows, int cols, std::vector<int> row_ptr,
                               std::vector<int> col_index, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)),
      col_index_(std::move(col_index)), values_(std::move(values)) {
  if (rows < 0 || cols < 0 || row_ptr_.size() != static_cast<std::size_t>(rows) + 1 ||
      col_index_.size() != values_.size() ||
      static_cast<std::size_t>(row_ptr_.back()) != values_.size())
    throw DimensionError("inconsistent sparse operator storage");
  for (int c : col_index_)
    if (c < 0 || c >= cols) throw DimensionError("operator column index out of range");
}

std::vector<double> InterpOperator::apply(std::span<const double> y) const {
  if (y.size() != static_cast<std::size_t>(cols_))
    throw DimensionError("apply_H: expected " + std::to_string(cols_) + " samples, got " +
                         std::to_string(y.size()));
  std::vector<double> out(static_cast<std::size_t>(rows_), 0.0);
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * y[col_index_[k]];
    out[r] = acc;
  }
  return out;
}

std::vector<double> apply_H(const InterpOperator& h, std::span<const double> y) {
  return h.apply(y);
}

Rect neighborhood_window(const MappingTable& table, const Rect& patch, int margin) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  for (int y = patch.y; y < patch.y + patch.height; ++y)
    for (int x = patch.x; x < patch.x + patch.width; ++x) {
      if (!table.valid(x, y)) continue;
      const Vec2 p = table.location(x, y);
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  if (!(min_x <= max_x)) return {};
  auto span = [margin](double lo, double hi, int limit) {
    int a = std::max(0, static_cast<int>(std::floor(lo)) - margin);
    int b = std::min(limit - 1, static_cast<int>(std::ceil(hi)) + margin);
    a &= ~1;
    if ((b - a + 1) % 2 != 0) ++b;
    return std::pair{a, b - a + 1};
  };
  const auto [x0, w] = span(min_x, max_x, table.bayer_width());
  const auto [y0, h] = span(min_y, max_y, table.bayer_height());
  return {x0, y0, w, h};
}

std::vector<double> gather_window(const BayerImage& bayer, const Rect& window) {
  if (window.x < 0 || window.y < 0 || window.x + window.width > bayer.width() ||
      window.y + window.height > bayer.height())
    throw DimensionError("window outside the Bayer image");
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(window.area()));
  for (int r = window.y; r < window.y + window.height; ++r)
    for (int c = window.x; c < window.x + window.width; ++c) y.push_back(bayer.at(c, r));
  return y;
}

InterpOperator build_H(const MappingTable& table, const Rect& patch, const Rect& window,
                       Channel channel) {
  if (patch.x < 0 || patch.y < 0 || patch.x + patch.width > table.width() ||
      patch.y + patch.height > table.height())
    throw DimensionError("patch outside the rectified grid");
  std::vector<int> row_ptr{0};
  std::vector<int> cols;
  std::vector<double> vals;
  row_ptr.reserve(static_cast<std::size_t>(patch.area()) + 1);
  std::vector<std::pair<int, double>> row;
  for (int y = patch.y; y < patch.y + patch.height; ++y)
    for (int x = patch.x; x < patch.x + patch.width; ++x) {
      row.clear();
      if (table.valid(x, y)) {
        for (const StencilTap& t :
             interpolation_stencil(table.location(x, y), channel, table.bayer_width(),
                                   table.bayer_height(), table.layout())) {
          if (!window.contains(t.x, t.y))
            throw DimensionError("interpolation stencil leaves the neighborhood window");
          row.emplace_back((t.y - window.y) * window.width + (t.x - window.x), t.weight);
        }
        std::sort(row.begin(), row.end());
      }
      for (const auto& [c, w] : row) {
        cols.push_back(c);
        vals.push_back(w);
      }
      row_ptr.push_back(static_cast<int>(cols.size()));
    }
  InterpOperator h(patch.area(), window.area(), std::move(row_ptr), std::move(cols),
                   std::move(vals));
  h.channel_ = channel;
  h.patch_ = patch;
  h.window_ = window;
  return h;
}

InterpOperator build_H(const MappingTable& table, const BayerImage& bayer, const Rect& patch,
                       Channel channel) {
  if (bayer.width() != table.bayer_width() || bayer.height() != table.bayer_height())
    throw DimensionError("Bayer image size does not match the mapping table");
  return build_H(table, patch, neighborhood_window(table, patch), channel);
}

void write_matrix_market(const InterpOperator& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << h.rows() << ' ' << h.cols() << ' ' << h.nonzeros() << '\n';
  out << std::setprecision(17);
  const auto rp = h.row_ptr();
  for (int r = 0; r < h.rows(); ++r)
    for (int k = rp[r]; k < rp[r + 1]; ++k)
      out << r + 1 << ' ' << h.col_index()[k] + 1 << ' ' << h.values()[k] << '\n';
}

}  // namespace fglr
