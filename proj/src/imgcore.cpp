#include "fglr/imgcore.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "fglr/error.hpp"

namespace fglr {

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::red:
      return "R";
    case Channel::green:
      return "G";
    case Channel::blue:
      return "B";
  }
  return "?";
}

PlanarImage::PlanarImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw DimensionError("negative image size");
  for (auto& p : planes_) p.assign(pixel_count(), fill);
}

void PlanarImage::clamp() {
  for (auto& p : planes_)
    for (double& v : p) v = std::clamp(v, 0.0, 1.0);
}

BayerImage::BayerImage(int width, int height, CfaLayout layout, double fill)
    : BayerImage(width, height, layout,
                 std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                         static_cast<std::size_t>(std::max(height, 0)),
                                     fill)) {}

BayerImage::BayerImage(int width, int height, CfaLayout layout,
                       std::vector<double> samples)
    : width_(width), height_(height), layout_(layout), data_(std::move(samples)) {
  if (width < 0 || height < 0 || width % 2 != 0 || height % 2 != 0)
    throw DimensionError("Bayer image must have even dimensions, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw DimensionError("Bayer sample count does not match dimensions");
}

BayerImage BayerImage::crop(const Rect& r) const {
  if (r.x < 0 || r.y < 0 || r.width < 0 || r.height < 0 || r.x + r.width > width_ ||
      r.y + r.height > height_)
    throw DimensionError("crop rectangle out of bounds");
  BayerImage out(r.width, r.height, layout_.shifted(r.x, r.y));
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) out.at(x, y) = at(r.x + x, r.y + y);
  return out;
}

void BayerImage::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

ValidityMask::ValidityMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
            fill ? 1 : 0) {}

std::size_t ValidityMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BayerImage mosaic(const PlanarImage& img, CfaLayout layout) {
  if (img.width() % 2 != 0 || img.height() % 2 != 0)
    throw DimensionError("mosaic requires even dimensions, got " +
                         std::to_string(img.width()) + "x" + std::to_string(img.height()));
  BayerImage out(img.width(), img.height(), layout);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(x, y) = std::clamp(img.at(layout.channel_at(x, y), x, y), 0.0, 1.0);
  return out;
}

BayerImage add_noise(const BayerImage& img, const NoiseSpec& spec) {
  if (spec.sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  BayerImage out = img;
  if (spec.sigma == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, spec.sigma);
  for (double& v : out.samples()) v = std::clamp(v + gauss(rng) / 255.0, 0.0, 1.0);
  return out;
}

void apply_mask(PlanarImage& img, const ValidityMask& mask) {
  if (mask.width() != img.width() || mask.height() != img.height())
    throw DimensionError("mask size does not match image");
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!mask(x, y))
        for (Channel c : kChannels) img.at(c, x, y) = 0.0;
}

}  // namespace fglr
