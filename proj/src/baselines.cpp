#include "fglr/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "fglr/error.hpp"

namespace fglr {

namespace {

using Kernel = std::array<double, 25>;

constexpr Kernel scaled(Kernel k) {
  for (double& v : k) v /= 8.0;
  return k;
}

constexpr Kernel transposed(Kernel k) {
  Kernel t{};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) t[c * 5 + r] = k[r * 5 + c];
  return t;
}

// Green at a red or blue site.
constexpr Kernel kGreenAtRb = scaled({
    0, 0, -1, 0, 0,
    0, 0, 2, 0, 0,
    -1, 2, 4, 2, -1,
    0, 0, 2, 0, 0,
    0, 0, -1, 0, 0,
});

// Red (blue) at a green site whose row neighbors are red (blue).
constexpr Kernel kRowNeighbors = scaled({
    0, 0, 0.5, 0, 0,
    0, -1, 0, -1, 0,
    -1, 4, 5, 4, -1,
    0, -1, 0, -1, 0,
    0, 0, 0.5, 0, 0,
});

constexpr Kernel kColumnNeighbors = transposed(kRowNeighbors);

// Red at blue and blue at red.
constexpr Kernel kDiagonal = scaled({
    0, 0, -1.5, 0, 0,
    0, 2, 0, 2, 0,
    -1.5, 0, 6, 0, -1.5,
    0, 2, 0, 2, 0,
    0, 0, -1.5, 0, 0,
});

constexpr Kernel kIdentity = [] {
  Kernel k{};
  k[12] = 1.0;
  return k;
}();

int reflect101(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

double sample_bilinear(std::span<const double> plane, int width, int height, Vec2 p) {
  const double fx = std::clamp(p.x, 0.0, width - 1.0);
  const double fy = std::clamp(p.y, 0.0, height - 1.0);
  const int x0 = std::min(static_cast<int>(fx), width - 1);
  const int y0 = std::min(static_cast<int>(fy), height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  auto at = [&](int x, int y) { return plane[static_cast<std::size_t>(y) * width + x]; };
  return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x1, y0)) +
         ay * ((1 - ax) * at(x0, y1) + ax * at(x1, y1));
}

}  // namespace

BaselineKind parse_baseline_kind(std::string_view name) {
  if (name == "bilinear") return BaselineKind::bilinear;
  if (name == "hql") return BaselineKind::hql;
  throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

const char* baseline_name(BaselineKind kind) {
  return kind == BaselineKind::bilinear ? "bilinear" : "hql";
}

PlanarImage demosaic_bilinear(const BayerImage& b) {
  const int w = b.width();
  const int h = b.height();
  PlanarImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Channel own = b.channel_at(x, y);
      for (Channel c : kChannels) {
        if (c == own) {
          out.at(c, x, y) = b.at(x, y);
          continue;
        }
        double sum = 0.0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if ((dx == 0 && dy == 0) || !b.in_bounds(nx, ny) || b.channel_at(nx, ny) != c)
              continue;
            sum += b.at(nx, ny);
            ++count;
          }
        out.at(c, x, y) = count > 0 ? sum / count : 0.0;
      }
    }
  return out;
}

std::array<double, 25> hql_kernel(Channel target, CfaColor site) {
  if (target == channel_of(site)) return kIdentity;
  if (target == Channel::green) return kGreenAtRb;
  switch (site) {
    case CfaColor::green1:  // red row
      return target == Channel::red ? kRowNeighbors : kColumnNeighbors;
    case CfaColor::green2:  // blue row
      return target == Channel::blue ? kRowNeighbors : kColumnNeighbors;
    default:
      return kDiagonal;
  }
}

PlanarImage demosaic_hql(const BayerImage& b, bool clamp_output) {
  const int w = b.width();
  const int h = b.height();
  if (w < 5 || h < 5) throw DimensionError("HQL demosaicking needs an image of at least 5x5");
  PlanarImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const CfaColor site = b.color_at(x, y);
      for (Channel c : kChannels) {
        if (c == channel_of(site)) {
          out.at(c, x, y) = b.at(x, y);
          continue;
        }
        // Taps sum to 1, so filtering differences from the center keeps
        // constant regions exact.
        const Kernel k = hql_kernel(c, site);
        const double center = b.at(x, y);
        double acc = 0.0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            const double tap = k[(dy + 2) * 5 + dx + 2];
            if (tap != 0.0 && (dx != 0 || dy != 0))
              acc += tap * (b.at(reflect101(x + dx, w), reflect101(y + dy, h)) - center);
          }
        out.at(c, x, y) = center + acc;
      }
    }
  if (clamp_output) out.clamp();
  return out;
}

PlanarImage rectify_bilinear(const PlanarImage& img, const MappingTable& table) {
  if (img.width() != table.bayer_width() || img.height() != table.bayer_height())
    throw DimensionError("rectify_bilinear: image size does not match the mapping table");
  PlanarImage out(table.width(), table.height(), 0.0);
  for (int y = 0; y < table.height(); ++y)
    for (int x = 0; x < table.width(); ++x) {
      if (!table.valid(x, y)) continue;
      const Vec2 p = table.location(x, y);
      for (Channel c : kChannels)
        out.at(c, x, y) = sample_bilinear(img.plane(c), img.width(), img.height(), p);
    }
  return out;
}

PlanarImage run_baseline(const BayerImage& b, const MappingTable& table, BaselineKind kind) {
  const PlanarImage rgb = kind == BaselineKind::bilinear ? demosaic_bilinear(b) : demosaic_hql(b);
  return rectify_bilinear(rgb, table);
}

}  // namespace fglr
