#include "fglr/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fglr/error.hpp"
#include "fglr/interp.hpp"
#include "keyvalue.hpp"

namespace fglr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

std::vector<int> axis_origins(int size, int patch, int stride) {
  std::vector<int> out;
  for (int o = 0; o + patch <= size; o += stride) out.push_back(o);
  if (out.back() + patch < size) out.push_back(size - patch);
  return out;
}

}  // namespace

// ---- configuration ----------------------------------------------------------------

double PipelineConfig::sigma_w_at(int iteration) const {
  const std::size_t k = std::min(static_cast<std::size_t>(std::max(iteration, 0)),
                                 sigma_w.size() - 1);
  return sigma_w[k];
}

ObservationOptions PipelineConfig::observation_options() const {
  return {sigma_v, radius, kernel, normalize_distance};
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("pipeline config: " + msg); };
  if (patch_size <= 0) fail("patch size must be positive");
  if (stride <= 0 || stride > patch_size) fail("stride must be in (0, patch]");
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(mu > 0.0)) fail("mu must be positive");
  if (sigma_w.empty()) fail("sigma_w schedule is empty");
  for (double s : sigma_w)
    if (!(s > 0.0)) fail("sigma_w values must be positive");
  if (!(sigma_v > 0.0)) fail("sigma_v must be positive");
  if (!(radius > 0.0)) fail("radius must be positive");
  if (!(convergence_threshold >= 0.0)) fail("convergence threshold must be >= 0");
  if (!(cg.tolerance > 0.0)) fail("cg tolerance must be positive");
  if (cg.max_iterations < 1) fail("cg max iterations must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
}

PipelineConfig pipeline_preset(std::string_view name) {
  PipelineConfig cfg;
  if (name == "multifov") {
    cfg.iterations = 5;
    cfg.sigma_w = {0.01, 0.02};
    cfg.sigma_v = 1.5;
  } else if (name == "inhouse") {
    cfg.iterations = 8;
    cfg.sigma_w = {0.035, 0.028};
    cfg.sigma_v = 6.0;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  cfg.mu = 1.0;
  cfg.patch_size = 32;
  cfg.stride = 28;
  return cfg;
}

std::vector<std::string> pipeline_preset_names() { return {"multifov", "inhouse"}; }

PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base) {
  using namespace detail;
  const auto kv = parse_key_values(text, "pipeline config");
  PipelineConfig cfg = base;
  if (const auto it = kv.find("preset"); it != kv.end()) {
    const int threads = cfg.threads;
    cfg = pipeline_preset(it->second);
    cfg.threads = threads;
  }
  for (const auto& [key, value] : kv) {
    if (key == "preset") continue;
    if (key == "patch") {
      cfg.patch_size = parse_int(key, value);
    } else if (key == "stride") {
      cfg.stride = parse_int(key, value);
    } else if (key == "mu") {
      cfg.mu = parse_double(key, value);
    } else if (key == "iters") {
      cfg.iterations = parse_int(key, value);
    } else if (key == "sigma_w") {
      cfg.sigma_w = parse_list(key, value);
    } else if (key == "sigma_v") {
      cfg.sigma_v = parse_double(key, value);
    } else if (key == "radius") {
      cfg.radius = parse_double(key, value);
    } else if (key == "threshold") {
      cfg.convergence_threshold = parse_double(key, value);
    } else if (key == "kernel") {
      if (value == "product") {
        cfg.kernel = DistanceKernel::product;
      } else if (value == "sum") {
        cfg.kernel = DistanceKernel::sum;
      } else {
        throw ConfigError("kernel must be 'product' or 'sum'");
      }
    } else if (key == "normalize_distance") {
      cfg.normalize_distance = parse_bool(key, value);
    } else if (key == "cg_tol") {
      cfg.cg.tolerance = parse_double(key, value);
    } else if (key == "cg_max_iter") {
      cfg.cg.max_iterations = parse_int(key, value);
    } else if (key == "threads") {
      cfg.threads = parse_int(key, value);
    } else {
      throw ConfigError("pipeline config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str(), std::move(base));
}

std::string format_pipeline_config(const PipelineConfig& cfg) {
  // Shortest text that parses back to the same double.
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::string sw;
  for (std::size_t k = 0; k < cfg.sigma_w.size(); ++k) sw += (k ? "," : "") + num(cfg.sigma_w[k]);
  std::ostringstream out;
  out << "patch = " << cfg.patch_size << '\n'
      << "stride = " << cfg.stride << '\n'
      << "mu = " << num(cfg.mu) << '\n'
      << "iters = " << cfg.iterations << '\n'
      << "sigma_w = " << sw << '\n'
      << "sigma_v = " << num(cfg.sigma_v) << '\n'
      << "radius = " << num(cfg.radius) << '\n'
      << "threshold = " << num(cfg.convergence_threshold) << '\n'
      << "kernel = " << (cfg.kernel == DistanceKernel::product ? "product" : "sum") << '\n'
      << "normalize_distance = " << (cfg.normalize_distance ? "true" : "false") << '\n'
      << "cg_tol = " << num(cfg.cg.tolerance) << '\n'
      << "cg_max_iter = " << cfg.cg.max_iterations << '\n';
  return out.str();
}

// ---- tiling and aggregation --------------------------------------------------------

std::vector<Rect> tile(int width, int height, int patch, int stride) {
  if (patch <= 0 || stride <= 0 || stride > patch)
    throw ConfigError("tile: need 0 < stride <= patch");
  if (patch > width || patch > height)
    throw DimensionError("tile: patch " + std::to_string(patch) + " exceeds the frame " +
                         std::to_string(width) + "x" + std::to_string(height));
  std::vector<Rect> out;
  for (int y : axis_origins(height, patch, stride))
    for (int x : axis_origins(width, patch, stride)) out.push_back({x, y, patch, patch});
  return out;
}

PlanarImage aggregate(std::span<const PatchResult> results, int width, int height) {
  PlanarImage sum(width, height, 0.0);
  std::vector<int> count(static_cast<std::size_t>(width) * height, 0);
  for (const PatchResult& r : results) {
    const Rect& p = r.patch;
    if (p.x < 0 || p.y < 0 || p.x + p.width > width || p.y + p.height > height)
      throw DimensionError("aggregate: patch outside the frame");
    for (Channel c : kChannels)
      if (r.x[static_cast<int>(c)].size() != static_cast<std::size_t>(p.area()))
        throw DimensionError("aggregate: patch result has the wrong size");
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const std::size_t local = static_cast<std::size_t>(y) * p.width + x;
        for (Channel c : kChannels) sum.at(c, p.x + x, p.y + y) += r.x[static_cast<int>(c)][local];
        ++count[static_cast<std::size_t>(p.y + y) * width + p.x + x];
      }
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int n = count[static_cast<std::size_t>(y) * width + x];
      if (n == 0)
        throw std::logic_error("aggregate: pixel (" + std::to_string(x) + ", " +
                               std::to_string(y) + ") is not covered by any patch");
      for (Channel c : kChannels) sum.at(c, x, y) /= n;
    }
  sum.clamp();
  return sum;
}

// ---- per-patch joint solve ---------------------------------------------------------

PatchResult reconstruct_patch(const BayerImage& bayer, const MappingTable& table,
                              const Rect& patch, const PipelineConfig& cfg,
                              StageTimings* timings) {
  const auto t_graph = Clock::now();
  PatchResult res;
  res.patch = patch;
  const int n = patch.area();
  for (auto& x : res.x) x.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<std::uint8_t> valid(static_cast<std::size_t>(n), 0);
  bool any_valid = false;
  for (int y = 0; y < patch.height; ++y)
    for (int x = 0; x < patch.width; ++x)
      if (table.valid(patch.x + x, patch.y + y)) {
        valid[static_cast<std::size_t>(y) * patch.width + x] = 1;
        any_valid = true;
      }
  if (!any_valid) {
    res.skipped = true;
    return res;
  }

  const Rect window = neighborhood_window(table, patch);
  const std::vector<double> y = gather_window(bayer, window);
  ChannelCorrelation corr{0.0, 0.0, 0.0};
  if (window.width >= 4 && window.height >= 4) corr = compute_correlation(bayer.crop(window));

  std::array<std::vector<double>, 3> seeds;
  for (Channel c : kChannels)
    seeds[static_cast<int>(c)] = build_H(table, patch, window, c).apply(y);

  // Gradient evidence is gathered once per rectified pair and reweighted by
  // the correlation factor of each target channel.
  const ObservationOptions opts = cfg.observation_options();
  std::vector<GraphEdge> topology = grid_topology(patch.width, patch.height, valid);
  std::array<std::vector<GraphEdge>, 3> edges;
  for (auto& e : edges) e = topology;
  for (std::size_t k = 0; k < topology.size(); ++k) {
    const GraphEdge& e = topology[k];
    const Pixel pi{patch.x + e.i % patch.width, patch.y + e.i / patch.width};
    const Pixel pj{patch.x + e.j % patch.width, patch.y + e.j / patch.width};
    const auto obs = collect_geometric_observations(table, bayer, pi, pj, opts);
    for (Channel c : kChannels) {
      double total = 0.0;
      double acc = 0.0;
      for (const GradientObservation& o : obs) {
        const double v = o.weight * corr.factor(c, channel_of(o.color));
        if (!(v > kMinObservationWeight)) continue;
        total += v;
        acc += v * o.delta;
      }
      double w = 1.0;
      if (total > 0.0) {
        w = edge_weight(acc / total, cfg.sigma_w_at(0));
      } else {
        ++res.fallback_edges;
      }
      edges[static_cast<int>(c)][k].w = w;
    }
  }
  if (res.fallback_edges > 0)
    spdlog::debug("patch ({}, {}): {} channel-edges without observations, weight 1", patch.x,
                  patch.y, res.fallback_edges);

  std::array<PatchGraph, 3> graphs;
  for (Channel c : kChannels)
    graphs[static_cast<int>(c)] = build_laplacian(n, std::move(edges[static_cast<int>(c)]));
  double graph_seconds = seconds_since(t_graph);
  double solve_seconds = 0.0;

  for (Channel c : kChannels) {
    const int ci = static_cast<int>(c);
    const std::vector<double>& b = seeds[ci];
    PatchGraph graph = std::move(graphs[ci]);
    std::vector<double> x = b;
    bool converged = true;
    int it = 0;
    while (it < cfg.iterations) {
      const auto t_solve = Clock::now();
      SolveResult sol = solve({b, &graph, cfg.mu, cfg.cg}, x);
      SolveRecord rec;
      rec.channel = c;
      rec.iteration = it;
      rec.objective_solution = objective(sol.x, b, graph, cfg.mu);
      rec.objective_seed = objective(b, b, graph, cfg.mu);
      rec.cg_iterations = sol.iterations;
      rec.converged = sol.converged;
      res.log.push_back(rec);
      converged = converged && sol.converged;

      std::vector<double> diff(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) diff[k] = sol.x[k] - x[k];
      const double prev_norm = norm(x);
      const double change = prev_norm > 0.0 ? norm(diff) / prev_norm : norm(diff);
      x = std::move(sol.x);
      ++it;
      solve_seconds += seconds_since(t_solve);
      if (change < cfg.convergence_threshold || it >= cfg.iterations) break;

      const auto t_rebuild = Clock::now();
      graph = rebuild_from_signal(graph, x, cfg.sigma_w_at(it));
      graph_seconds += seconds_since(t_rebuild);
    }
    res.x[ci] = std::move(x);
    res.converged[ci] = converged;
    res.iterations[ci] = it;
  }
  if (timings) {
    timings->graph += graph_seconds;
    timings->solve += solve_seconds;
  }
  return res;
}

// ---- whole frame -------------------------------------------------------------------

bool ReconstructionReport::all_converged() const {
  for (const auto& p : patches)
    for (bool c : p.converged)
      if (!c) return false;
  return true;
}

std::size_t ReconstructionReport::objective_violations() const {
  std::size_t n = 0;
  for (const auto& p : patches)
    for (const auto& r : p.log)
      if (r.objective_solution > r.objective_seed) ++n;
  return n;
}

std::size_t ReconstructionReport::solve_count() const {
  std::size_t n = 0;
  for (const auto& p : patches) n += p.log.size();
  return n;
}

ReconstructionReport reconstruct_detailed(const BayerImage& bayer, const MappingTable& table,
                                          const PipelineConfig& cfg) {
  cfg.validate();
  if (bayer.width() != table.bayer_width() || bayer.height() != table.bayer_height())
    throw DimensionError("Bayer image size does not match the mapping table");
  if (bayer.layout() != table.layout())
    throw DimensionError("Bayer CFA layout does not match the mapping table");
  const auto t0 = Clock::now();

  const int patch = std::min({cfg.patch_size, table.width(), table.height()});
  const int stride = std::min(cfg.stride, patch);
  const std::vector<Rect> rects = tile(table.width(), table.height(), patch, stride);

  ReconstructionReport report;
  report.patches.resize(rects.size());
  const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(rects.size())));
  std::vector<StageTimings> per_worker(static_cast<std::size_t>(workers));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&](int w) {
    for (std::size_t k = next++; k < rects.size(); k = next++) {
      try {
        report.patches[k] = reconstruct_patch(bayer, table, rects[k], cfg, &per_worker[w]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = rects.size();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& t : per_worker) {
    report.timings.graph += t.graph;
    report.timings.solve += t.solve;
  }
  const auto t_agg = Clock::now();
  report.image = aggregate(report.patches, table.width(), table.height());
  apply_mask(report.image, table.mask());
  report.timings.aggregate = seconds_since(t_agg);
  report.timings.total = seconds_since(t0);

  std::size_t fallbacks = 0;
  for (const auto& p : report.patches) fallbacks += static_cast<std::size_t>(p.fallback_edges);
  if (fallbacks > 0)
    spdlog::info("{} channel-edges had no gradient observations and used weight 1", fallbacks);
  if (!report.all_converged()) spdlog::warn("conjugate gradient did not converge on some patches");
  return report;
}

PlanarImage reconstruct(const BayerImage& bayer, const MappingTable& table,
                        const PipelineConfig& cfg) {
  return reconstruct_detailed(bayer, table, cfg).image;
}

}  // namespace fglr
