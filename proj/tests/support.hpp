#pragma once

#include <random>
#include <vector>

#include "fglr/camera.hpp"
#include "fglr/imgcore.hpp"

namespace fglr::test {

inline BayerImage random_bayer(int w, int h, std::mt19937_64& rng, CfaLayout layout = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BayerImage b(w, h, layout);
  for (double& v : b.samples()) v = u(rng);
  return b;
}

inline PlanarImage random_planar(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlanarImage img(w, h);
  for (Channel c : kChannels)
    for (double& v : img.plane(c)) v = u(rng);
  return img;
}

inline PlanarImage constant_planar(int w, int h, double r, double g, double b) {
  PlanarImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(Channel::red, x, y) = r;
      img.at(Channel::green, x, y) = g;
      img.at(Channel::blue, x, y) = b;
    }
  return img;
}

/// Output grid mapped onto a Bayer grid by a scale and offset; every
/// location is kept inside the grid.
inline MappingTable affine_table(int w, int h, int bw, int bh, double scale, Vec2 offset,
                                 CfaLayout layout = {}) {
  std::vector<Vec2> loc;
  std::vector<std::uint8_t> valid;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec2 p{offset.x + scale * x, offset.y + scale * y};
      const bool ok = p.x >= 0 && p.y >= 0 && p.x <= bw - 1 && p.y <= bh - 1;
      loc.push_back(ok ? p : Vec2{});
      valid.push_back(ok ? 1 : 0);
    }
  return make_mapping_table(w, h, bw, bh, layout, std::move(loc), std::move(valid));
}

}  // namespace fglr::test
