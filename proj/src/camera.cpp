#include "fglr/camera.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "fglr/error.hpp"
#include "keyvalue.hpp"

namespace fglr {

namespace {

constexpr double kAngleSlack = 1e-12;

Vec3 rotate(const Mat3& r, const Vec3& v) {
  return {r[0] * v.x + r[1] * v.y + r[2] * v.z, r[3] * v.x + r[4] * v.y + r[5] * v.z,
          r[6] * v.x + r[7] * v.y + r[8] * v.z};
}

bool on_sensor(const Calibration& cal, Vec2 p) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= cal.fisheye_width - 1 &&
         p.y <= cal.fisheye_height - 1;
}

}  // namespace

double Calibration::max_theta() const { return fov_deg * std::numbers::pi / 360.0; }

double radius_of_angle(const Calibration& cal, double theta) {
  switch (cal.model) {
    case CameraModel::equidistant:
      return cal.fc * theta;
    case CameraModel::pinhole:
      return cal.fc * std::tan(theta);
    case CameraModel::polynomial: {
      const auto& a = cal.poly;
      const double t2 = theta * theta;
      return a[0] + t2 * (a[1] + theta * (a[2] + theta * a[3]));
    }
  }
  return 0.0;
}

std::optional<double> angle_of_radius(const Calibration& cal, double radius) {
  const double theta_max = cal.max_theta();
  double theta = 0.0;
  switch (cal.model) {
    case CameraModel::equidistant:
      theta = radius / cal.fc;
      break;
    case CameraModel::pinhole:
      theta = std::atan(radius / cal.fc);
      break;
    case CameraModel::polynomial: {
      double lo = 0.0;
      double hi = theta_max;
      if (radius < radius_of_angle(cal, lo) || radius > radius_of_angle(cal, hi))
        return std::nullopt;
      // r(theta) is validated monotone, so bisection converges to the unique root.
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (radius_of_angle(cal, mid) < radius ? lo : hi) = mid;
      }
      theta = std::abs(radius_of_angle(cal, lo) - radius) <=
                      std::abs(radius_of_angle(cal, hi) - radius)
                  ? lo
                  : hi;
      break;
    }
  }
  if (theta < 0.0 || theta > theta_max + kAngleSlack) return std::nullopt;
  return theta;
}

void Calibration::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("calibration: " + msg); };
  if (fisheye_width <= 0 || fisheye_height <= 0) fail("fisheye size must be positive");
  if (fisheye_width % 2 != 0 || fisheye_height % 2 != 0)
    fail("fisheye size must be even (whole RGGB quads)");
  if (rect_width <= 0 || rect_height <= 0) fail("rectified size must be positive");
  if (!(rect_focal > 0.0)) fail("rect_focal must be positive");
  if (!(fov_deg > 0.0 && fov_deg <= 360.0)) fail("fov_deg must be in (0, 360]");
  if (!(cx >= 0.0 && cy >= 0.0 && cx <= fisheye_width - 1 && cy <= fisheye_height - 1))
    fail("principal point lies outside the fisheye image");
  if (model != CameraModel::polynomial && !(fc > 0.0)) fail("fc must be positive");
  if (model == CameraModel::pinhole && !(fov_deg < 180.0))
    fail("pinhole model requires fov_deg < 180");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += rotation[3 * k + r] * rotation[3 * k + c];
      if (std::abs(d - (r == c ? 1.0 : 0.0)) > 1e-6) fail("rotation is not orthonormal");
    }
  if (model == CameraModel::polynomial) {
    constexpr int kSamples = 4096;
    const double theta_max = max_theta();
    double prev = radius_of_angle(*this, 0.0);
    if (prev < 0.0) fail("polynomial radius must be non-negative at theta = 0");
    for (int k = 1; k <= kSamples; ++k) {
      const double r = radius_of_angle(*this, theta_max * k / kSamples);
      if (!(r > prev)) fail("polynomial r(theta) is not increasing on [0, fov/2]");
      prev = r;
    }
  }
}

Vec3 rectified_ray(const Calibration& cal, double ix, double iy) {
  const double ccx = 0.5 * (cal.rect_width - 1);
  const double ccy = 0.5 * (cal.rect_height - 1);
  return rotate(cal.rotation, {(ix - ccx) / cal.rect_focal, (iy - ccy) / cal.rect_focal, 1.0});
}

std::optional<Vec2> project_to_fisheye(const Calibration& cal, const Vec3& ray) {
  const double rho = std::hypot(ray.x, ray.y);
  const double theta = std::atan2(rho, ray.z);
  if (theta > cal.max_theta() + kAngleSlack) return std::nullopt;
  Vec2 p{cal.cx, cal.cy};
  if (cal.model == CameraModel::pinhole) {
    if (!(ray.z > 0.0)) return std::nullopt;
    p = {cal.cx + cal.fc * ray.x / ray.z, cal.cy + cal.fc * ray.y / ray.z};
  } else if (rho > 0.0) {
    const double r = radius_of_angle(cal, theta);
    p = {cal.cx + r * ray.x / rho, cal.cy + r * ray.y / rho};
  } else if (ray.z <= 0.0) {
    return std::nullopt;
  }
  if (!on_sensor(cal, p)) return std::nullopt;
  return p;
}

std::optional<Vec3> unproject_from_fisheye(const Calibration& cal, Vec2 pixel) {
  const double dx = pixel.x - cal.cx;
  const double dy = pixel.y - cal.cy;
  if (cal.model == CameraModel::pinhole) return Vec3{dx / cal.fc, dy / cal.fc, 1.0};
  const double r = std::hypot(dx, dy);
  const auto theta = angle_of_radius(cal, r);
  if (!theta) return std::nullopt;
  if (r == 0.0) return Vec3{0.0, 0.0, 1.0};
  const double s = std::sin(*theta) / r;
  return Vec3{s * dx, s * dy, std::cos(*theta)};
}

std::optional<Vec2> map_pixel(const Calibration& cal, int ix, int iy) {
  if (ix < 0 || iy < 0 || ix >= cal.rect_width || iy >= cal.rect_height) return std::nullopt;
  return project_to_fisheye(cal, rectified_ray(cal, ix, iy));
}

Calibration parse_calibration(std::string_view text) {
  const auto kv = detail::parse_key_values(text, "calibration");

  static const std::array<std::string_view, 12> kKnown{
      "model", "fisheye_width", "fisheye_height", "cx",         "cy",         "fc",
      "poly",  "fov_deg",       "rect_width",     "rect_height", "rect_focal", "rot"};
  for (const auto& [key, value] : kv)
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end())
      throw ConfigError("calibration: unknown key '" + key + "'");

  auto require = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("calibration: missing key '" + std::string(key) + "'");
    return it->second;
  };

  Calibration cal;
  const std::string& model = require("model");
  if (model == "equidistant") {
    cal.model = CameraModel::equidistant;
  } else if (model == "polynomial") {
    cal.model = CameraModel::polynomial;
  } else if (model == "pinhole") {
    cal.model = CameraModel::pinhole;
  } else {
    throw ConfigError("calibration: unknown model '" + model + "'");
  }
  using detail::parse_double;
  using detail::parse_int;
  auto parse_list = [](std::string_view key, std::string_view v, std::size_t expected) {
    auto out = detail::parse_list(key, v);
    if (out.size() != expected)
      throw ConfigError("calibration key '" + std::string(key) + "' expects " +
                        std::to_string(expected) + " values");
    return out;
  };
  cal.fisheye_width = parse_int("fisheye_width", require("fisheye_width"));
  cal.fisheye_height = parse_int("fisheye_height", require("fisheye_height"));
  cal.cx = parse_double("cx", require("cx"));
  cal.cy = parse_double("cy", require("cy"));
  if (cal.model == CameraModel::polynomial) {
    if (kv.contains("fc")) throw ConfigError("calibration: 'fc' is not used by the polynomial model");
    const auto a = parse_list("poly", require("poly"), 4);
    std::copy(a.begin(), a.end(), cal.poly.begin());
  } else {
    if (kv.contains("poly"))
      throw ConfigError("calibration: 'poly' requires model = polynomial");
    cal.fc = parse_double("fc", require("fc"));
  }
  cal.fov_deg = parse_double("fov_deg", require("fov_deg"));
  cal.rect_width = parse_int("rect_width", require("rect_width"));
  cal.rect_height = parse_int("rect_height", require("rect_height"));
  cal.rect_focal = parse_double("rect_focal", require("rect_focal"));
  if (const auto it = kv.find("rot"); it != kv.end()) {
    const auto r = parse_list("rot", it->second, 9);
    std::copy(r.begin(), r.end(), cal.rotation.begin());
  }
  cal.validate();
  return cal;
}

Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_calibration(ss.str());
}

std::string format_calibration(const Calibration& cal) {
  std::ostringstream out;
  out << std::setprecision(17);
  switch (cal.model) {
    case CameraModel::equidistant:
      out << "model = equidistant\n";
      break;
    case CameraModel::polynomial:
      out << "model = polynomial\n";
      break;
    case CameraModel::pinhole:
      out << "model = pinhole\n";
      break;
  }
  out << "fisheye_width = " << cal.fisheye_width << '\n'
      << "fisheye_height = " << cal.fisheye_height << '\n'
      << "cx = " << cal.cx << '\n'
      << "cy = " << cal.cy << '\n';
  if (cal.model == CameraModel::polynomial) {
    out << "poly = " << cal.poly[0] << ',' << cal.poly[1] << ',' << cal.poly[2] << ','
        << cal.poly[3] << '\n';
  } else {
    out << "fc = " << cal.fc << '\n';
  }
  out << "fov_deg = " << cal.fov_deg << '\n'
      << "rect_width = " << cal.rect_width << '\n'
      << "rect_height = " << cal.rect_height << '\n'
      << "rect_focal = " << cal.rect_focal << '\n';
  if (cal.rotation != kIdentity3) {
    out << "rot = ";
    for (std::size_t k = 0; k < 9; ++k) out << (k ? "," : "") << cal.rotation[k];
    out << '\n';
  }
  return out.str();
}

void save_calibration(const Calibration& cal, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write calibration '" + path.string() + "'");
  out << format_calibration(cal);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---- pairing ------------------------------------------------------------------

Pairing pair_endpoints(Vec2 ls, Vec2 lt, Vec2 lm, Vec2 ln) {
  const double direct = squared_norm(ls - lm) + squared_norm(lt - ln);
  const double swapped = squared_norm(ls - ln) + squared_norm(lt - lm);
  return swapped < direct ? Pairing::swapped : Pairing::direct;
}

std::vector<BayerPair> enumerate_same_color_pairs(Vec2 center, double radius, int width,
                                                  int height, CfaLayout layout) {
  static constexpr std::array<Pixel, 2> kAxisSteps{Pixel{2, 0}, Pixel{0, 2}};
  static constexpr std::array<Pixel, 2> kDiagonalSteps{Pixel{1, 1}, Pixel{1, -1}};

  std::vector<BayerPair> out;
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - radius)) - 2);
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(center.x + radius)) + 2);
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - radius)) - 2);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(center.y + radius)) + 2);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const CfaColor color = layout.color_at(x, y);
      const auto& steps =
          channel_of(color) == Channel::green ? kDiagonalSteps : kAxisSteps;
      for (const Pixel& d : steps) {
        const Pixel n{x + d.x, y + d.y};
        if (n.x < 0 || n.y < 0 || n.x >= width || n.y >= height) continue;
        const double mx = x + 0.5 * d.x;
        const double my = y + 0.5 * d.y;
        if (std::abs(mx - center.x) <= radius && std::abs(my - center.y) <= radius)
          out.push_back({{x, y}, n, color});
      }
    }
  return out;
}

// ---- mapping table --------------------------------------------------------------

void MappingTable::build_pairing_cache() {
  const std::size_t edges = static_cast<std::size_t>(width_) * height_ * 4;
  edge_offset_.assign(edges + 1, 0);
  std::vector<bool> bits;
  std::uint64_t offset = 0;
  for (int iy = 0; iy < height_; ++iy)
    for (int ix = 0; ix < width_; ++ix)
      for (int dir = 0; dir < 4; ++dir) {
        const std::size_t e = edge_index(ix, iy, dir);
        edge_offset_[e] = static_cast<std::uint32_t>(offset);
        const int jx = ix + kEdgeOffsets[dir].x;
        const int jy = iy + kEdgeOffsets[dir].y;
        if (jx < 0 || jy < 0 || jx >= width_ || jy >= height_ || !valid(ix, iy) ||
            !valid(jx, jy))
          continue;
        const Vec2 ls = location(ix, iy);
        const Vec2 lt = location(jx, jy);
        for (const BayerPair& p : enumerate_same_color_pairs(
                 0.5 * (ls + lt), pairing_radius_, bayer_width_, bayer_height_, layout_)) {
          bits.push_back(pair_endpoints(ls, lt, {double(p.m.x), double(p.m.y)},
                                        {double(p.n.x), double(p.n.y)}) == Pairing::swapped);
          ++offset;
        }
        if (offset > 0xffffffffULL) throw DimensionError("pairing cache exceeds 2^32 entries");
      }
  edge_offset_[edges] = static_cast<std::uint32_t>(offset);
  swap_bits_.assign((bits.size() + 63) / 64, 0);
  for (std::size_t k = 0; k < bits.size(); ++k)
    if (bits[k]) swap_bits_[k / 64] |= std::uint64_t{1} << (k % 64);
}

std::size_t MappingTable::candidate_count(int ix, int iy, int dir) const {
  const std::size_t e = edge_index(ix, iy, dir);
  return edge_offset_[e + 1] - edge_offset_[e];
}

Pairing MappingTable::pairing(int ix, int iy, int dir, std::size_t k) const {
  const std::size_t bit = edge_offset_[edge_index(ix, iy, dir)] + k;
  return (swap_bits_[bit / 64] >> (bit % 64)) & 1U ? Pairing::swapped : Pairing::direct;
}

std::vector<Pairing> MappingTable::pairings(int ix, int iy, int dir) const {
  std::vector<Pairing> out(candidate_count(ix, iy, dir));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = pairing(ix, iy, dir, k);
  return out;
}

MappingTable make_mapping_table(int width, int height, int bayer_width, int bayer_height,
                                CfaLayout layout, std::vector<Vec2> locations,
                                std::vector<std::uint8_t> valid, double pairing_radius) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width <= 0 || height <= 0 || locations.size() != n || valid.size() != n)
    throw DimensionError("mapping table storage does not match its size");
  if (bayer_width <= 0 || bayer_height <= 0 || bayer_width % 2 || bayer_height % 2)
    throw DimensionError("Bayer grid must have even positive size");
  if (!(pairing_radius > 0.0)) throw ConfigError("pairing radius must be positive");
  MappingTable t;
  t.width_ = width;
  t.height_ = height;
  t.bayer_width_ = bayer_width;
  t.bayer_height_ = bayer_height;
  t.layout_ = layout;
  t.pairing_radius_ = pairing_radius;
  t.locations_ = std::move(locations);
  t.valid_ = std::move(valid);
  t.mask_ = ValidityMask(width, height, false);
  for (int iy = 0; iy < height; ++iy)
    for (int ix = 0; ix < width; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * width + ix;
      if (!t.valid_[i]) {
        t.locations_[i] = {};
        continue;
      }
      const Vec2 p = t.locations_[i];
      if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= bayer_width - 1 && p.y <= bayer_height - 1))
        throw DimensionError("valid mapping location outside the Bayer grid");
      t.valid_[i] = 1;
      t.mask_.set(ix, iy, true);
    }
  t.build_pairing_cache();
  return t;
}

MappingTable build_mapping_table(const Calibration& cal, CfaLayout layout,
                                 double pairing_radius) {
  cal.validate();
  const std::size_t n = static_cast<std::size_t>(cal.rect_width) * cal.rect_height;
  std::vector<Vec2> locations(n);
  std::vector<std::uint8_t> valid(n, 0);
  for (int iy = 0; iy < cal.rect_height; ++iy)
    for (int ix = 0; ix < cal.rect_width; ++ix)
      if (const auto p = map_pixel(cal, ix, iy)) {
        const std::size_t i = static_cast<std::size_t>(iy) * cal.rect_width + ix;
        locations[i] = *p;
        valid[i] = 1;
      }
  return make_mapping_table(cal.rect_width, cal.rect_height, cal.fisheye_width,
                            cal.fisheye_height, layout, std::move(locations), std::move(valid),
                            pairing_radius);
}

MappingTable identity_mapping_table(int width, int height, CfaLayout layout,
                                    double pairing_radius) {
  std::vector<Vec2> locations;
  locations.reserve(static_cast<std::size_t>(width) * height);
  for (int iy = 0; iy < height; ++iy)
    for (int ix = 0; ix < width; ++ix) locations.push_back({double(ix), double(iy)});
  std::vector<std::uint8_t> valid(locations.size(), 1);
  return make_mapping_table(width, height, width, height, layout, std::move(locations),
                            std::move(valid), pairing_radius);
}

}  // namespace fglr
