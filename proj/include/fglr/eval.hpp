#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fglr/camera.hpp"
#include "fglr/imgcore.hpp"

namespace fglr {

// ---- metrics ----------------------------------------------------------------------

/// 10 log10(1 / MSE) over the masked samples of all three channels. +inf for
/// identical images. Throws on a size mismatch or an empty mask.
double psnr(const PlanarImage& a, const PlanarImage& b, const ValidityMask& mask);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean SSIM (Gaussian 11x11 window, sigma 1.5, K1 0.01, K2 0.03, range 1)
/// over windows lying fully on valid pixels, averaged over R, G and B.
double ssim(const PlanarImage& a, const PlanarImage& b, const ValidityMask& mask);

struct MetricReport {
  std::string scene;
  std::string method;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::size_t valid_pixels = 0;
  std::string flags;  // e.g. "cg_nonconverged"
};

MetricReport evaluate(const PlanarImage& output, const PlanarImage& reference,
                      const ValidityMask& mask, std::string scene, std::string method);

/// "inf" for the identical-image sentinel, fixed precision otherwise.
std::string format_psnr(double db);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricReport& r);
std::vector<MetricReport> parse_metrics_csv(std::string_view text);

struct MethodSummary {
  std::string method;
  double mean_psnr = 0.0;  // finite values only
  double mean_ssim = 0.0;
  std::size_t images = 0;
  std::size_t infinite_psnr = 0;
};

/// Per-method means, methods in order of first appearance.
std::vector<MethodSummary> summarize(std::span<const MetricReport> reports);
/// Per-scene rows with one PSNR/SSIM column pair per method, plus an average row.
std::string format_table(std::span<const MetricReport> reports);

// ---- synthetic scenes --------------------------------------------------------------

enum class SceneKind { checker, ramp, texture, edges, constant };

SceneKind parse_scene_kind(std::string_view name);
const char* scene_name(SceneKind kind);
std::vector<std::string> scene_names();

/// Procedural scene on the plane z = 1 of the fisheye camera frame. Rays with
/// z <= 0 see black.
struct SceneSpec {
  SceneKind kind = SceneKind::checker;
  double scale = 0.1;  // feature size in plane units
  std::uint64_t seed = 0;
};

/// RGB radiance of the scene at plane point (u, v).
std::array<double, 3> scene_color(const SceneSpec& spec, double u, double v);
std::array<double, 3> scene_color(const SceneSpec& spec, const Vec3& ray);

struct SceneRender {
  PlanarImage reference;  // rectified grid, point samples of rectified rays
  PlanarImage fisheye;    // fisheye grid, point samples of fisheye rays
};

SceneRender render_scene(const SceneSpec& spec, const Calibration& cal);

struct TestCase {
  BayerImage input;
  PlanarImage reference;  // zero outside the mask
  ValidityMask mask;
};

TestCase make_case(const SceneSpec& spec, const Calibration& cal, const NoiseSpec& noise,
                   CfaLayout layout = {});

/// Equidistant fisheye of twice the output size viewed by a centered virtual
/// pinhole camera of the given output size.
Calibration synthetic_calibration(int rect_width, int rect_height);

}  // namespace fglr
