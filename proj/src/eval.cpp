#include "fglr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "fglr/error.hpp"
#include "keyvalue.hpp"

namespace fglr {

namespace {

void check_sizes(const PlanarImage& a, const PlanarImage& b, const ValidityMask& mask,
                 const char* what) {
  if (a.width() != b.width() || a.height() != b.height() || a.width() != mask.width() ||
      a.height() != mask.height())
    throw DimensionError(std::string(what) + ": image and mask sizes differ");
}

std::array<double, kSsimWindow * kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow * kSsimWindow> w{};
  constexpr int half = kSsimWindow / 2;
  double total = 0.0;
  for (int y = 0; y < kSsimWindow; ++y)
    for (int x = 0; x < kSsimWindow; ++x) {
      const double d2 = double((x - half) * (x - half) + (y - half) * (y - half));
      w[y * kSsimWindow + x] = std::exp(-d2 / (2.0 * kSsimSigma * kSsimSigma));
      total += w[y * kSsimWindow + x];
    }
  for (double& v : w) v /= total;
  return w;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = line.find(',');
    out.emplace_back(detail::trim(line.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

// ---- metrics ----------------------------------------------------------------------

double psnr(const PlanarImage& a, const PlanarImage& b, const ValidityMask& mask) {
  check_sizes(a, b, mask, "psnr");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!mask(x, y)) continue;
      for (Channel c : kChannels) {
        const double d = a.at(c, x, y) - b.at(c, x, y);
        sum += d * d;
      }
      n += 3;
    }
  if (n == 0) throw DimensionError("psnr: empty mask");
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const PlanarImage& a, const PlanarImage& b, const ValidityMask& mask) {
  check_sizes(a, b, mask, "ssim");
  const int w = a.width();
  const int h = a.height();
  if (w < kSsimWindow || h < kSsimWindow)
    throw DimensionError("ssim: image smaller than the 11x11 window");
  static const auto window = gaussian_window();
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;

  // Summed-area table of invalid pixels to skip windows touching them.
  std::vector<int> bad(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      bad[(y + 1) * (w + 1) + x + 1] = bad[y * (w + 1) + x + 1] + bad[(y + 1) * (w + 1) + x] -
                                       bad[y * (w + 1) + x] + (mask(x, y) ? 0 : 1);
  auto invalid_in = [&](int x0, int y0) {
    const int x1 = x0 + kSsimWindow;
    const int y1 = y0 + kSsimWindow;
    return bad[y1 * (w + 1) + x1] - bad[y0 * (w + 1) + x1] - bad[y1 * (w + 1) + x0] +
           bad[y0 * (w + 1) + x0];
  };

  double total = 0.0;
  std::size_t windows = 0;
  for (Channel c : kChannels) {
    const auto pa = a.plane(c);
    const auto pb = b.plane(c);
    for (int y0 = 0; y0 + kSsimWindow <= h; ++y0)
      for (int x0 = 0; x0 + kSsimWindow <= w; ++x0) {
        if (invalid_in(x0, y0) != 0) continue;
        double ma = 0.0;
        double mb = 0.0;
        for (int dy = 0; dy < kSsimWindow; ++dy)
          for (int dx = 0; dx < kSsimWindow; ++dx) {
            const std::size_t k = static_cast<std::size_t>(y0 + dy) * w + x0 + dx;
            const double g = window[dy * kSsimWindow + dx];
            ma += g * pa[k];
            mb += g * pb[k];
          }
        double va = 0.0;
        double vb = 0.0;
        double cov = 0.0;
        for (int dy = 0; dy < kSsimWindow; ++dy)
          for (int dx = 0; dx < kSsimWindow; ++dx) {
            const std::size_t k = static_cast<std::size_t>(y0 + dy) * w + x0 + dx;
            const double g = window[dy * kSsimWindow + dx];
            const double da = pa[k] - ma;
            const double db = pb[k] - mb;
            va += g * da * da;
            vb += g * db * db;
            cov += g * da * db;
          }
        total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
  }
  if (windows == 0) throw DimensionError("ssim: no window lies fully inside the mask");
  return total / static_cast<double>(windows);
}

MetricReport evaluate(const PlanarImage& output, const PlanarImage& reference,
                      const ValidityMask& mask, std::string scene, std::string method) {
  MetricReport r;
  r.scene = std::move(scene);
  r.method = std::move(method);
  r.psnr_db = psnr(output, reference, mask);
  r.ssim = ssim(output, reference, mask);
  r.valid_pixels = mask.count();
  return r;
}

std::string format_psnr(double db) { return std::isinf(db) ? "inf" : fixed(db, 4); }

std::string metrics_csv_header() { return "scene,method,psnr_db,ssim,valid_pixels,flags"; }

std::string metrics_csv_row(const MetricReport& r) {
  return r.scene + ',' + r.method + ',' + format_psnr(r.psnr_db) + ',' + fixed(r.ssim, 6) + ',' +
         std::to_string(r.valid_pixels) + ',' + r.flags;
}

std::vector<MetricReport> parse_metrics_csv(std::string_view text) {
  std::vector<MetricReport> out;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.starts_with("scene,")) continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 5) throw IoError("metrics CSV: expected at least 5 fields");
    MetricReport r;
    r.scene = f[0];
    r.method = f[1];
    r.psnr_db = f[2] == "inf" ? std::numeric_limits<double>::infinity()
                              : detail::parse_double("psnr_db", f[2]);
    r.ssim = detail::parse_double("ssim", f[3]);
    r.valid_pixels = static_cast<std::size_t>(detail::parse_int("valid_pixels", f[4]));
    if (f.size() > 5) r.flags = f[5];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MethodSummary> summarize(std::span<const MetricReport> reports) {
  std::vector<MethodSummary> out;
  std::vector<std::size_t> finite;
  for (const MetricReport& r : reports) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const MethodSummary& s) { return s.method == r.method; });
    if (it == out.end()) {
      out.push_back({r.method});
      finite.push_back(0);
      it = out.end() - 1;
    }
    const std::size_t k = static_cast<std::size_t>(it - out.begin());
    ++it->images;
    it->mean_ssim += r.ssim;
    if (std::isinf(r.psnr_db)) {
      ++it->infinite_psnr;
    } else {
      it->mean_psnr += r.psnr_db;
      ++finite[k];
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].mean_ssim /= static_cast<double>(out[k].images);
    out[k].mean_psnr = finite[k] > 0 ? out[k].mean_psnr / static_cast<double>(finite[k])
                                     : std::numeric_limits<double>::infinity();
  }
  return out;
}

std::string format_table(std::span<const MetricReport> reports) {
  const std::vector<MethodSummary> methods = summarize(reports);
  std::vector<std::string> scenes;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> cell;
  std::map<std::pair<std::string, std::string>, int> count;
  for (const MetricReport& r : reports) {
    if (std::find(scenes.begin(), scenes.end(), r.scene) == scenes.end())
      scenes.push_back(r.scene);
    auto& c = cell[{r.scene, r.method}];
    c.first += r.psnr_db;
    c.second += r.ssim;
    ++count[{r.scene, r.method}];
  }
  std::ostringstream out;
  out << std::left << std::setw(16) << "scene";
  for (const auto& m : methods) out << std::right << std::setw(18) << m.method;
  out << '\n' << std::left << std::setw(16) << "";
  for (std::size_t k = 0; k < methods.size(); ++k) out << std::right << std::setw(18) << "SSIM / PSNR";
  out << '\n';
  for (const std::string& s : scenes) {
    out << std::left << std::setw(16) << s;
    for (const auto& m : methods) {
      const auto key = std::make_pair(s, m.method);
      if (!cell.contains(key)) {
        out << std::right << std::setw(18) << "-";
        continue;
      }
      const double n = count[key];
      out << std::right << std::setw(18)
          << (fixed(cell[key].second / n, 3) + " / " + format_psnr(cell[key].first / n).substr(0, 6));
    }
    out << '\n';
  }
  out << std::left << std::setw(16) << "average";
  for (const auto& m : methods)
    out << std::right << std::setw(18)
        << (fixed(m.mean_ssim, 3) + " / " + format_psnr(m.mean_psnr).substr(0, 6));
  out << '\n';
  return out.str();
}

// ---- synthetic scenes --------------------------------------------------------------

SceneKind parse_scene_kind(std::string_view name) {
  if (name == "checker") return SceneKind::checker;
  if (name == "ramp") return SceneKind::ramp;
  if (name == "texture") return SceneKind::texture;
  if (name == "edges") return SceneKind::edges;
  if (name == "constant") return SceneKind::constant;
  throw ConfigError("unknown scene '" + std::string(name) + "'");
}

const char* scene_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::checker:
      return "checker";
    case SceneKind::ramp:
      return "ramp";
    case SceneKind::texture:
      return "texture";
    case SceneKind::edges:
      return "edges";
    case SceneKind::constant:
      return "constant";
  }
  return "?";
}

std::vector<std::string> scene_names() {
  return {"checker", "ramp", "texture", "edges", "constant"};
}

namespace {

struct SceneParams {
  std::array<std::array<double, 3>, 2> checker;
  std::array<double, 3> base;
  std::array<double, 3> grad_u;
  std::array<double, 3> grad_v;
  struct Wave {
    double fu, fv, phase, amp;
  };
  std::array<Wave, 5> luma;
  std::array<std::array<Wave, 2>, 3> chroma;
  std::array<double, 3> gain;
  struct Line {
    double nu, nv, offset;
  };
  std::array<Line, 5> lines;
  std::array<std::array<double, 3>, 32> palette;
};

SceneParams make_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SceneParams p{};
  for (auto& col : p.checker)
    for (double& v : col) v = 0.1 + 0.8 * unit(rng);
  // Keep the two checker colors apart in every channel.
  for (int c = 0; c < 3; ++c)
    if (std::abs(p.checker[0][c] - p.checker[1][c]) < 0.3)
      p.checker[1][c] = p.checker[0][c] > 0.5 ? p.checker[0][c] - 0.45 : p.checker[0][c] + 0.45;
  for (int c = 0; c < 3; ++c) {
    p.base[c] = 0.35 + 0.3 * unit(rng);
    p.grad_u[c] = 0.3 * (unit(rng) - 0.5);
    p.grad_v[c] = 0.3 * (unit(rng) - 0.5);
    p.gain[c] = 0.7 + 0.3 * unit(rng);
  }
  for (auto& w : p.luma) {
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double freq = 0.5 + 1.5 * unit(rng);
    w = {freq * std::cos(angle), freq * std::sin(angle), 2.0 * std::numbers::pi * unit(rng),
         0.06 + 0.04 * unit(rng)};
  }
  for (auto& ch : p.chroma)
    for (auto& w : ch) {
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double freq = 0.3 + 0.7 * unit(rng);
      w = {freq * std::cos(angle), freq * std::sin(angle), 2.0 * std::numbers::pi * unit(rng),
           0.03 * unit(rng)};
    }
  for (auto& l : p.lines) {
    const double angle = std::numbers::pi * unit(rng);
    l = {std::cos(angle), std::sin(angle), 0.8 * (unit(rng) - 0.5)};
  }
  for (auto& col : p.palette)
    for (double& v : col) v = 0.1 + 0.8 * unit(rng);
  return p;
}

double wave(const SceneParams::Wave& w, double u, double v, double scale) {
  return w.amp * std::sin(2.0 * std::numbers::pi * (w.fu * u + w.fv * v) / scale + w.phase);
}

std::array<double, 3> clamp01(std::array<double, 3> c) {
  for (double& v : c) v = std::clamp(v, 0.0, 1.0);
  return c;
}

std::array<double, 3> color_at(const SceneSpec& spec, const SceneParams& p, double u,
                               double v) {
  const double s = spec.scale > 0.0 ? spec.scale : 0.1;
  switch (spec.kind) {
    case SceneKind::checker: {
      const auto parity = static_cast<long long>(std::floor(u / s) + std::floor(v / s));
      return p.checker[static_cast<std::size_t>(parity & 1)];
    }
    case SceneKind::ramp: {
      std::array<double, 3> c{};
      for (int k = 0; k < 3; ++k) c[k] = p.base[k] + p.grad_u[k] * u + p.grad_v[k] * v;
      return clamp01(c);
    }
    case SceneKind::texture: {
      double luma = 0.0;
      for (const auto& w : p.luma) luma += wave(w, u, v, s);
      std::array<double, 3> c{};
      for (int k = 0; k < 3; ++k) {
        c[k] = p.base[k] + p.gain[k] * luma;
        for (const auto& w : p.chroma[k]) c[k] += wave(w, u, v, s);
      }
      return clamp01(c);
    }
    case SceneKind::edges: {
      std::size_t code = 0;
      for (std::size_t k = 0; k < p.lines.size(); ++k) {
        const auto& l = p.lines[k];
        if (l.nu * u + l.nv * v > l.offset * s * 10.0) code |= std::size_t{1} << k;
      }
      return p.palette[code];
    }
    case SceneKind::constant:
      return p.base;
  }
  return {0.0, 0.0, 0.0};
}

std::array<double, 3> color_of_ray(const SceneSpec& spec, const SceneParams& p, const Vec3& ray) {
  if (!(ray.z > 0.0)) return {0.0, 0.0, 0.0};
  return color_at(spec, p, ray.x / ray.z, ray.y / ray.z);
}

}  // namespace

std::array<double, 3> scene_color(const SceneSpec& spec, double u, double v) {
  return color_at(spec, make_params(spec.seed), u, v);
}

std::array<double, 3> scene_color(const SceneSpec& spec, const Vec3& ray) {
  return color_of_ray(spec, make_params(spec.seed), ray);
}

SceneRender render_scene(const SceneSpec& spec, const Calibration& cal) {
  cal.validate();
  const SceneParams params = make_params(spec.seed);
  SceneRender out{PlanarImage(cal.rect_width, cal.rect_height),
                  PlanarImage(cal.fisheye_width, cal.fisheye_height)};
  auto put = [](PlanarImage& img, int x, int y, const std::array<double, 3>& c) {
    for (Channel ch : kChannels) img.at(ch, x, y) = c[static_cast<int>(ch)];
  };
  for (int y = 0; y < cal.rect_height; ++y)
    for (int x = 0; x < cal.rect_width; ++x)
      put(out.reference, x, y, color_of_ray(spec, params, rectified_ray(cal, x, y)));
  for (int y = 0; y < cal.fisheye_height; ++y)
    for (int x = 0; x < cal.fisheye_width; ++x) {
      const auto ray = unproject_from_fisheye(cal, {double(x), double(y)});
      put(out.fisheye, x, y, ray ? color_of_ray(spec, params, *ray) : std::array<double, 3>{});
    }
  return out;
}

TestCase make_case(const SceneSpec& spec, const Calibration& cal, const NoiseSpec& noise,
                   CfaLayout layout) {
  SceneRender render = render_scene(spec, cal);
  const MappingTable table = build_mapping_table(cal, layout);
  TestCase tc;
  tc.input = add_noise(mosaic(render.fisheye, layout), noise);
  tc.reference = std::move(render.reference);
  tc.mask = table.mask();
  apply_mask(tc.reference, tc.mask);
  return tc;
}

Calibration synthetic_calibration(int rect_width, int rect_height) {
  Calibration cal;
  cal.model = CameraModel::equidistant;
  cal.rect_width = rect_width;
  cal.rect_height = rect_height;
  cal.rect_focal = 0.7 * std::max(rect_width, rect_height);
  cal.fisheye_width = 2 * rect_width;
  cal.fisheye_height = 2 * rect_height;
  cal.fc = std::min(cal.fisheye_width, cal.fisheye_height) / 3.2;
  cal.cx = 0.5 * (cal.fisheye_width - 1);
  cal.cy = 0.5 * (cal.fisheye_height - 1);
  cal.fov_deg = 180.0;
  return cal;
}

}  // namespace fglr
