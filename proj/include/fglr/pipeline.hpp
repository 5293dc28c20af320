#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fglr/camera.hpp"
#include "fglr/graph.hpp"
#include "fglr/imgcore.hpp"
#include "fglr/solver.hpp"

namespace fglr {

struct PipelineConfig {
  int patch_size = 32;
  int stride = 28;
  double mu = 1.0;
  int iterations = 5;
  /// sigma_w of the gradient-based initial graph, then of each rebuilt graph;
  /// the last entry repeats.
  std::vector<double> sigma_w{0.01, 0.02};
  double sigma_v = 1.5;
  double radius = kDefaultPairingRadius;
  double convergence_threshold = 1e-4;  // relative change of x between iterations
  DistanceKernel kernel = DistanceKernel::product;
  bool normalize_distance = false;
  CgOptions cg{};
  int threads = 1;

  double sigma_w_at(int iteration) const;
  ObservationOptions observation_options() const;
  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// "multifov" or "inhouse"; throws ConfigError for other names.
PipelineConfig pipeline_preset(std::string_view name);
std::vector<std::string> pipeline_preset_names();

/// Applies "key = value" settings on top of `base`. Keys: preset, patch,
/// stride, mu, iters, sigma_w, sigma_v, radius, threshold, kernel,
/// normalize_distance, cg_tol, cg_max_iter, threads.
PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {});
std::string format_pipeline_config(const PipelineConfig& cfg);

/// Patch rectangles covering a width x height frame; the last row and column
/// are shifted inward to stay in bounds.
std::vector<Rect> tile(int width, int height, int patch, int stride);

/// One inner solve of one channel.
struct SolveRecord {
  Channel channel = Channel::red;
  int iteration = 0;
  double objective_solution = 0.0;  // objective(x*)
  double objective_seed = 0.0;      // objective(Hy)
  int cg_iterations = 0;
  bool converged = false;
};

struct PatchResult {
  Rect patch{};
  std::array<std::vector<double>, 3> x;  // row-major over the patch
  std::array<bool, 3> converged{true, true, true};
  std::array<int, 3> iterations{0, 0, 0};
  std::vector<SolveRecord> log;
  int fallback_edges = 0;  // channel-edges without observations
  bool skipped = false;    // no valid pixel
};

struct StageTimings {
  double mapping = 0.0;
  double graph = 0.0;
  double solve = 0.0;
  double aggregate = 0.0;
  double total = 0.0;
};

struct ReconstructionReport {
  PlanarImage image;
  std::vector<PatchResult> patches;
  StageTimings timings;

  bool all_converged() const;
  /// Inner solves whose objective exceeds the objective of the seed Hy.
  std::size_t objective_violations() const;
  std::size_t solve_count() const;
};

/// Joint solve of every channel for one patch. Accumulates stage times into
/// `timings` when given.
PatchResult reconstruct_patch(const BayerImage& bayer, const MappingTable& table,
                              const Rect& patch, const PipelineConfig& cfg,
                              StageTimings* timings = nullptr);

/// Per-pixel mean over every covering patch, clamped to [0, 1].
PlanarImage aggregate(std::span<const PatchResult> results, int width, int height);

ReconstructionReport reconstruct_detailed(const BayerImage& bayer, const MappingTable& table,
                                          const PipelineConfig& cfg);
PlanarImage reconstruct(const BayerImage& bayer, const MappingTable& table,
                        const PipelineConfig& cfg);

}  // namespace fglr
