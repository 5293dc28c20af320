#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fglr {

enum class Channel : int { red = 0, green = 1, blue = 2 };

inline constexpr std::array<Channel, 3> kChannels{Channel::red, Channel::green,
                                                   Channel::blue};

/// Color of one CFA site. The two greens of an RGGB quad are kept apart
/// because the channel correlation treats them as separate sub-planes.
enum class CfaColor : int { red = 0, green1 = 1, green2 = 2, blue = 3 };

constexpr Channel channel_of(CfaColor c) {
  switch (c) {
    case CfaColor::red:
      return Channel::red;
    case CfaColor::blue:
      return Channel::blue;
    default:
      return Channel::green;
  }
}

const char* channel_name(Channel c);

/// RGGB color filter array with a phase offset. With phase (0,0) the quad
/// origin (even x, even y) is red, (odd, even) green1, (even, odd) green2 and
/// (odd, odd) blue.
struct CfaLayout {
  int phase_x = 0;
  int phase_y = 0;

  constexpr CfaColor color_at(int x, int y) const {
    const int px = (x + phase_x) & 1;
    const int py = (y + phase_y) & 1;
    if (py == 0) return px == 0 ? CfaColor::red : CfaColor::green1;
    return px == 0 ? CfaColor::green2 : CfaColor::blue;
  }
  constexpr Channel channel_at(int x, int y) const {
    return channel_of(color_at(x, y));
  }
  /// Layout of a crop whose origin sits at (x, y) of this one.
  constexpr CfaLayout shifted(int x, int y) const {
    return {(phase_x + x) & 1, (phase_y + y) & 1};
  }

  friend constexpr bool operator==(const CfaLayout&, const CfaLayout&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  int area() const { return width * height; }
  bool contains(int px, int py) const {
    return px >= x && py >= y && px < x + width && py < y + height;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Three-plane RGB image with real samples, nominally in [0, 1].
class PlanarImage {
 public:
  PlanarImage() = default;
  PlanarImage(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  double& at(Channel c, int x, int y) {
    return planes_[static_cast<int>(c)][index(x, y)];
  }
  double at(Channel c, int x, int y) const {
    return planes_[static_cast<int>(c)][index(x, y)];
  }

  std::span<double> plane(Channel c) { return planes_[static_cast<int>(c)]; }
  std::span<const double> plane(Channel c) const {
    return planes_[static_cast<int>(c)];
  }

  void clamp();

  friend bool operator==(const PlanarImage&, const PlanarImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::array<std::vector<double>, 3> planes_;
};

/// Single-plane raw capture. Width and height are always even.
class BayerImage {
 public:
  BayerImage() = default;
  BayerImage(int width, int height, CfaLayout layout = {}, double fill = 0.0);
  BayerImage(int width, int height, CfaLayout layout, std::vector<double> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  const CfaLayout& layout() const { return layout_; }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }
  CfaColor color_at(int x, int y) const { return layout_.color_at(x, y); }
  Channel channel_at(int x, int y) const { return layout_.channel_at(x, y); }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<double> samples() { return data_; }
  std::span<const double> samples() const { return data_; }

  /// Copy of the sub-rectangle r; r must have even size and lie in bounds.
  BayerImage crop(const Rect& r) const;

  void clamp();

  friend bool operator==(const BayerImage&, const BayerImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  CfaLayout layout_{};
  std::vector<double> data_;
};

/// Per-pixel validity of the rectified grid.
class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int width, int height, bool fill = true);

  int width() const { return width_; }
  int height() const { return height_; }
  bool operator()(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  std::size_t count() const;

  friend bool operator==(const ValidityMask&, const ValidityMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Additive Gaussian noise. sigma is a standard deviation on the 8-bit scale.
struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

BayerImage mosaic(const PlanarImage& img, CfaLayout layout = {});
BayerImage add_noise(const BayerImage& img, const NoiseSpec& spec);

/// Zeroes every pixel outside the mask.
void apply_mask(PlanarImage& img, const ValidityMask& mask);

// ---- file I/O -------------------------------------------------------------
//
// Formats are chosen by extension: .png (8/16-bit gray or RGB), .ppm/.pgm
// (binary P6/P5, maxval 255 or 65535) and .fglr (little-endian float dump:
// "FGLR", u32 width, u32 height, u32 channels, f32 samples interleaved
// row-major).

struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> samples;  // interleaved, row-major
};

Raster read_raster(const std::filesystem::path& path);
void write_raster(const Raster& raster, const std::filesystem::path& path,
                  int bit_depth = 16);

/// Gray files are expanded to three identical planes.
PlanarImage read_image(const std::filesystem::path& path);
void write_image(const PlanarImage& img, const std::filesystem::path& path,
                 int bit_depth = 16);

BayerImage read_bayer(const std::filesystem::path& path, CfaLayout layout = {});
void write_bayer(const BayerImage& img, const std::filesystem::path& path,
                 int bit_depth = 16);

/// Masks are stored as 8-bit gray, 255 = valid.
ValidityMask read_mask(const std::filesystem::path& path);
void write_mask(const ValidityMask& mask, const std::filesystem::path& path);

}  // namespace fglr
