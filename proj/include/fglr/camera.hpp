#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fglr/imgcore.hpp"

namespace fglr {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double squared_norm(Vec2 a) { return dot(a, a); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

using Mat3 = std::array<double, 9>;  // row-major

inline constexpr Mat3 kIdentity3{1, 0, 0, 0, 1, 0, 0, 0, 1};

/// Radial projection of the fisheye lens.
///   equidistant: r = fc * theta
///   polynomial:  r = a0 + a2 theta^2 + a3 theta^3 + a4 theta^4
///   pinhole:     r = fc * tan(theta)   (undistorted, used for identity checks)
enum class CameraModel { equidistant, polynomial, pinhole };

/// Fisheye intrinsics plus the virtual pinhole camera that defines the
/// rectified grid. The rectified principal point is the image center.
struct Calibration {
  CameraModel model = CameraModel::equidistant;
  double fc = 1.0;
  std::array<double, 4> poly{0.0, 0.0, 0.0, 0.0};  // a0, a2, a3, a4
  double cx = 0.0;
  double cy = 0.0;
  int fisheye_width = 0;
  int fisheye_height = 0;
  double fov_deg = 180.0;

  int rect_width = 0;
  int rect_height = 0;
  double rect_focal = 1.0;
  Mat3 rotation = kIdentity3;

  double max_theta() const;
  /// Throws ConfigError on inconsistent parameters or a non-monotone r(theta).
  void validate() const;
};

double radius_of_angle(const Calibration& cal, double theta);
/// Inverse of radius_of_angle on [0, max_theta]; nullopt when out of range.
std::optional<double> angle_of_radius(const Calibration& cal, double radius);

/// Direction of the rectified pixel (ix, iy) in the fisheye camera frame.
Vec3 rectified_ray(const Calibration& cal, double ix, double iy);

/// Fisheye sensor coordinate of a ray, or nullopt outside the field of view
/// or the sensor.
std::optional<Vec2> project_to_fisheye(const Calibration& cal, const Vec3& ray);
/// Ray through a fisheye pixel, or nullopt beyond the field of view.
std::optional<Vec3> unproject_from_fisheye(const Calibration& cal, Vec2 pixel);

/// Reverse mapping from an integer rectified coordinate to a real fisheye
/// (Bayer grid) coordinate.
std::optional<Vec2> map_pixel(const Calibration& cal, int ix, int iy);

Calibration parse_calibration(std::string_view text);
Calibration load_calibration(const std::filesystem::path& path);
std::string format_calibration(const Calibration& cal);
void save_calibration(const Calibration& cal, const std::filesystem::path& path);

// ---- endpoint pairing ---------------------------------------------------------

enum class Pairing : std::uint8_t {
  direct,   // s <-> m, t <-> n
  swapped,  // s <-> n, t <-> m
};

/// Assignment minimizing |l_s - l_m|^2 + |l_t - l_n|^2; ties resolve to direct.
Pairing pair_endpoints(Vec2 ls, Vec2 lt, Vec2 lm, Vec2 ln);

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Adjacent pair of same-colored Bayer sites: red/blue neighbors two apart
/// along an axis, green neighbors one apart along a diagonal.
struct BayerPair {
  Pixel m;
  Pixel n;
  CfaColor color = CfaColor::red;
};

/// All same-color pairs whose midpoint lies within Chebyshev distance `radius`
/// of `center`, in a fixed scan order (row, column, offset).
std::vector<BayerPair> enumerate_same_color_pairs(Vec2 center, double radius, int width,
                                                  int height, CfaLayout layout);

/// Forward 8-neighborhood offsets; each undirected edge appears once.
inline constexpr std::array<Pixel, 4> kEdgeOffsets{Pixel{1, 0}, Pixel{0, 1}, Pixel{1, 1},
                                                   Pixel{-1, 1}};

/// Per-pixel reverse mapping plus the pre-computed endpoint pairing for every
/// 8-connected rectified pair with both ends valid.
class MappingTable {
 public:
  MappingTable() = default;

  int width() const { return width_; }
  int height() const { return height_; }
  int bayer_width() const { return bayer_width_; }
  int bayer_height() const { return bayer_height_; }
  const CfaLayout& layout() const { return layout_; }
  double pairing_radius() const { return pairing_radius_; }

  bool valid(int ix, int iy) const {
    return valid_[static_cast<std::size_t>(iy) * width_ + ix] != 0;
  }
  Vec2 location(int ix, int iy) const {
    return locations_[static_cast<std::size_t>(iy) * width_ + ix];
  }
  const ValidityMask& mask() const { return mask_; }
  std::size_t valid_count() const { return mask_.count(); }

  /// Pairings of the candidates of edge (i, i + kEdgeOffsets[dir]), in
  /// enumerate_same_color_pairs order; empty when the edge is not valid.
  std::vector<Pairing> pairings(int ix, int iy, int dir) const;
  /// Bit k of the cached pairing of edge (ix, iy, dir).
  Pairing pairing(int ix, int iy, int dir, std::size_t k) const;
  std::size_t candidate_count(int ix, int iy, int dir) const;

  friend bool operator==(const MappingTable&, const MappingTable&) = default;

 private:
  friend MappingTable build_mapping_table(const Calibration&, CfaLayout, double);
  friend MappingTable make_mapping_table(int, int, int, int, CfaLayout, std::vector<Vec2>,
                                         std::vector<std::uint8_t>, double);

  std::size_t edge_index(int ix, int iy, int dir) const {
    return (static_cast<std::size_t>(iy) * width_ + ix) * 4 + static_cast<std::size_t>(dir);
  }
  void build_pairing_cache();

  int width_ = 0;
  int height_ = 0;
  int bayer_width_ = 0;
  int bayer_height_ = 0;
  CfaLayout layout_{};
  double pairing_radius_ = 3.0;
  std::vector<Vec2> locations_;
  std::vector<std::uint8_t> valid_;
  ValidityMask mask_;
  std::vector<std::uint32_t> edge_offset_;  // bit offset per edge, size edges + 1
  std::vector<std::uint64_t> swap_bits_;
};

inline constexpr double kDefaultPairingRadius = 3.0;

MappingTable build_mapping_table(const Calibration& cal, CfaLayout layout = {},
                                 double pairing_radius = kDefaultPairingRadius);

/// Table from explicit locations; used for synthetic tests. Locations marked
/// valid must lie inside the Bayer grid.
MappingTable make_mapping_table(int width, int height, int bayer_width, int bayer_height,
                                CfaLayout layout, std::vector<Vec2> locations,
                                std::vector<std::uint8_t> valid,
                                double pairing_radius = kDefaultPairingRadius);

/// Identity mapping of a width x height grid onto a Bayer grid of the same size.
MappingTable identity_mapping_table(int width, int height, CfaLayout layout = {},
                                    double pairing_radius = kDefaultPairingRadius);

}  // namespace fglr
