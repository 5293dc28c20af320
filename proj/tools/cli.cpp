#include "cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fglr/baselines.hpp"
#include "fglr/error.hpp"
#include "fglr/pipeline.hpp"
#include "keyvalue.hpp"

namespace fglr::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

void configure_logging() {
  static const bool done = [] {
    auto logger = spdlog::stderr_color_mt("fglr");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("FGLR_LOG")) {
      const std::string v = env;
      if (v == "error") {
        spdlog::set_level(spdlog::level::err);
      } else if (v == "warn") {
        spdlog::set_level(spdlog::level::warn);
      } else if (v == "info") {
        spdlog::set_level(spdlog::level::info);
      } else if (v == "debug") {
        spdlog::set_level(spdlog::level::debug);
      } else {
        spdlog::warn("FGLR_LOG='{}' not recognized; using warn", v);
      }
    }
    return true;
  }();
  (void)done;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create directory '" + dir.string() + "'");
}

/// Pipeline overrides shared by run, compare and bench.
struct PipelineFlags {
  std::string preset = "multifov";
  std::string config;
  double mu = 0.0;
  int iters = 0;
  std::string sigma_w;
  double sigma_v = 0.0;
  int patch = 0;
  int stride = 0;
  double radius = 0.0;
  int threads = 1;
  CLI::Option* mu_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
  CLI::Option* sigma_w_opt = nullptr;
  CLI::Option* sigma_v_opt = nullptr;
  CLI::Option* patch_opt = nullptr;
  CLI::Option* stride_opt = nullptr;
  CLI::Option* radius_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Parameter preset (multifov, inhouse)")
        ->check(CLI::IsMember(pipeline_preset_names()));
    app->add_option("--config", config, "Key-value pipeline config file");
    mu_opt = app->add_option("--mu", mu, "Regularization weight");
    iters_opt = app->add_option("--iters", iters, "Outer iterations");
    sigma_w_opt = app->add_option("--sigma-w", sigma_w, "Edge weight scale, first,rest");
    sigma_v_opt = app->add_option("--sigma-v", sigma_v, "Observation distance scale");
    patch_opt = app->add_option("--patch", patch, "Patch size in pixels");
    stride_opt = app->add_option("--stride", stride, "Patch stride in pixels");
    radius_opt = app->add_option("--radius", radius, "Observation neighborhood radius");
    threads_opt = app->add_option("--threads", threads, "Worker threads");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = pipeline_preset(preset);
    if (!config.empty()) cfg = load_pipeline_config(config, cfg);
    if (mu_opt->count()) cfg.mu = mu;
    if (iters_opt->count()) cfg.iterations = iters;
    if (sigma_w_opt->count()) cfg.sigma_w = detail::parse_list("--sigma-w", sigma_w);
    if (sigma_v_opt->count()) cfg.sigma_v = sigma_v;
    if (patch_opt->count()) cfg.patch_size = patch;
    if (stride_opt->count()) cfg.stride = stride;
    if (radius_opt->count()) cfg.radius = radius;
    if (threads_opt->count()) cfg.threads = threads;
    cfg.validate();
    return cfg;
  }
};

struct MethodOutput {
  PlanarImage image;
  std::string flags;
  StageTimings timings;
};

MethodOutput run_method(const LoadedCase& c, const MappingTable& table, const std::string& method,
                        const PipelineConfig& cfg) {
  MethodOutput out;
  if (method == "joint") {
    ReconstructionReport rep = reconstruct_detailed(c.input, table, cfg);
    if (!rep.all_converged()) out.flags = "cg_nonconverged";
    out.image = std::move(rep.image);
    out.timings = rep.timings;
  } else {
    out.image = run_baseline(c.input, table, parse_baseline_kind(method));
    apply_mask(out.image, c.mask);
  }
  return out;
}

void append_csv(const fs::path& path, const MetricReport& r) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (fresh) out << metrics_csv_header() << '\n';
  out << metrics_csv_row(r) << '\n';
}

std::vector<std::string> split_methods(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = std::string(detail::trim(item));
    if (item.empty()) continue;
    if (item != "joint" && item != "bilinear" && item != "hql")
      throw ConfigError("unknown method '" + item + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("no method given");
  return out;
}

// ---- subcommands -------------------------------------------------------------------

struct GenArgs {
  std::string scene = "checker";
  double sigma = 15.0;
  std::uint64_t seed = 0;
  int size = 128;
  double scale = 0.1;
  std::string name;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const SceneSpec spec{parse_scene_kind(a.scene), a.scale, a.seed};
  if (a.size < 16 || a.size % 2 != 0) throw ConfigError("--size must be even and >= 16");
  if (!(a.sigma >= 0.0)) throw ConfigError("--sigma-noise must be >= 0");
  const Calibration cal = synthetic_calibration(a.size, a.size);
  const TestCase tc = make_case(spec, cal, {a.sigma, a.seed});
  const fs::path dir = a.out;
  ensure_dir(dir);
  write_bayer(tc.input, dir / CaseFiles::input, 16);
  write_image(tc.reference, dir / CaseFiles::reference, 16);
  write_mask(tc.mask, dir / CaseFiles::mask);
  save_calibration(cal, dir / CaseFiles::calibration);
  std::ostringstream m;
  m << std::setprecision(17);
  m << "name = " << (a.name.empty() ? a.scene + "_" + std::to_string(a.seed) : a.name) << '\n'
    << "scene = " << a.scene << '\n'
    << "scale = " << a.scale << '\n'
    << "seed = " << a.seed << '\n'
    << "sigma_noise = " << a.sigma << '\n'
    << "size = " << a.size << '\n'
    << "cfa_phase_x = 0\n"
    << "cfa_phase_y = 0\n"
    << "input = " << CaseFiles::input << '\n'
    << "reference = " << CaseFiles::reference << '\n'
    << "mask = " << CaseFiles::mask << '\n'
    << "calibration = " << CaseFiles::calibration << '\n';
  write_text(dir / CaseFiles::manifest, m.str());
  out << "wrote case '" << dir.string() << "' (" << a.scene << ", seed " << a.seed << ", sigma "
      << a.sigma << ")\n";
  return kExitOk;
}

struct RunArgs {
  std::string case_dir;
  std::string method = "joint";
  std::string out_dir;
  std::string csv;
  PipelineFlags pipeline;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  const std::vector<std::string> methods = split_methods(a.method);
  if (methods.size() != 1) throw ConfigError("run takes a single --method");
  const PipelineConfig cfg = a.pipeline.resolve();
  const LoadedCase c = load_case(a.case_dir);
  const MappingTable table = build_mapping_table(c.calibration, c.layout, cfg.radius);
  if (!(table.mask() == c.mask)) throw DimensionError("case mask does not match its calibration");
  const MethodOutput res = run_method(c, table, methods[0], cfg);
  const fs::path dir = a.out_dir.empty() ? fs::path(a.case_dir) : fs::path(a.out_dir);
  ensure_dir(dir);
  write_image(res.image, dir / (methods[0] + ".png"), 16);
  MetricReport r = evaluate(res.image, c.reference, c.mask, c.label, methods[0]);
  r.flags = res.flags;
  const fs::path csv = a.csv.empty() ? dir / "metrics.csv" : fs::path(a.csv);
  append_csv(csv, r);
  if (!res.flags.empty()) spdlog::warn("{}: {}", methods[0], res.flags);
  out << metrics_csv_row(r) << '\n';
  return kExitOk;
}

struct CompareArgs {
  std::vector<std::string> cases;
  std::string methods = "joint,bilinear,hql";
  std::string out_dir;
  std::string csv;
  PipelineFlags pipeline;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (a.cases.empty()) throw ConfigError("compare needs at least one case directory");
  const std::vector<std::string> methods = split_methods(a.methods);
  const PipelineConfig cfg = a.pipeline.resolve();
  std::vector<MetricReport> reports;
  int width = -1;
  int height = -1;
  for (const std::string& dir : a.cases) {
    const LoadedCase c = load_case(dir);
    if (width < 0) {
      width = c.reference.width();
      height = c.reference.height();
    } else if (c.reference.width() != width || c.reference.height() != height) {
      throw DimensionError("case '" + dir + "' has output size " +
                           std::to_string(c.reference.width()) + "x" +
                           std::to_string(c.reference.height()) + ", expected " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
    const MappingTable table = build_mapping_table(c.calibration, c.layout, cfg.radius);
    for (const std::string& m : methods) {
      const MethodOutput res = run_method(c, table, m, cfg);
      MetricReport r = evaluate(res.image, c.reference, c.mask, c.label, m);
      r.flags = res.flags;
      if (!a.out_dir.empty()) {
        const fs::path d = fs::path(a.out_dir) / c.label;
        ensure_dir(d);
        write_image(res.image, d / (m + ".png"), 16);
      }
      reports.push_back(std::move(r));
    }
  }
  if (!a.csv.empty()) {
    std::string text = metrics_csv_header() + '\n';
    for (const MetricReport& r : reports) text += metrics_csv_row(r) + '\n';
    write_text(a.csv, text);
  }
  out << format_table(reports);
  return kExitOk;
}

struct BenchArgs {
  std::string case_dir;
  int repeat = 1;
  PipelineFlags pipeline;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.repeat < 1) throw ConfigError("--repeat must be >= 1");
  const PipelineConfig cfg = a.pipeline.resolve();
  const LoadedCase c = load_case(a.case_dir);
  out << std::fixed << std::setprecision(4);
  out << "run  mapping_s  graph_s  solve_s  aggregate_s  total_s\n";
  for (int k = 0; k < a.repeat; ++k) {
    const auto t0 = Clock::now();
    const MappingTable table = build_mapping_table(c.calibration, c.layout, cfg.radius);
    const double mapping = std::chrono::duration<double>(Clock::now() - t0).count();
    ReconstructionReport rep = reconstruct_detailed(c.input, table, cfg);
    const double total = std::chrono::duration<double>(Clock::now() - t0).count();
    out << std::setw(3) << k << std::setw(11) << mapping << std::setw(9) << rep.timings.graph
        << std::setw(9) << rep.timings.solve << std::setw(13) << rep.timings.aggregate
        << std::setw(9) << total << '\n';
  }
  if (cfg.threads > 1) out << "graph and solve times are summed over " << cfg.threads << " workers\n";
  return kExitOk;
}

}  // namespace

LoadedCase load_case(const std::filesystem::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("case directory '" + dir.string() + "' not found");
  for (const char* f : {CaseFiles::input, CaseFiles::reference, CaseFiles::mask,
                        CaseFiles::calibration, CaseFiles::manifest})
    if (!fs::exists(dir / f)) throw IoError("case '" + dir.string() + "' is missing " + f);
  const auto manifest = detail::parse_key_values(read_text(dir / CaseFiles::manifest), "manifest");
  LoadedCase c;
  const auto name = manifest.find("name");
  c.label = name != manifest.end() ? name->second : dir.filename().string();
  auto phase = [&](const char* key) {
    const auto it = manifest.find(key);
    return it == manifest.end() ? 0 : detail::parse_int(key, it->second) & 1;
  };
  c.layout = {phase("cfa_phase_x"), phase("cfa_phase_y")};
  c.calibration = load_calibration(dir / CaseFiles::calibration);
  c.input = read_bayer(dir / CaseFiles::input, c.layout);
  c.reference = read_image(dir / CaseFiles::reference);
  c.mask = read_mask(dir / CaseFiles::mask);
  const Calibration& cal = c.calibration;
  if (c.input.width() != cal.fisheye_width || c.input.height() != cal.fisheye_height)
    throw DimensionError("case '" + dir.string() + "': input size does not match calibration");
  if (c.reference.width() != cal.rect_width || c.reference.height() != cal.rect_height ||
      c.mask.width() != cal.rect_width || c.mask.height() != cal.rect_height)
    throw DimensionError("case '" + dir.string() + "': reference or mask size does not match calibration");
  return c;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Joint demosaicking and rectification of fisheye Bayer captures"};
  app.name("fglr");
  app.require_subcommand(1, 1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic case directory");
  gen_cmd->add_option("--scene", gen.scene, "Scene kind")->check(CLI::IsMember(scene_names()));
  gen_cmd->add_option("--sigma-noise,--sigma", gen.sigma, "Noise std-dev on the 8-bit scale");
  gen_cmd->add_option("--seed", gen.seed, "Scene and noise seed");
  gen_cmd->add_option("--size", gen.size, "Rectified output side in pixels");
  gen_cmd->add_option("--scale", gen.scale, "Scene feature size in plane units");
  gen_cmd->add_option("--name", gen.name, "Scene label used in reports");
  gen_cmd->add_option("-o,--out", gen.out, "Output case directory")->required();

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Reconstruct one case and record its metrics");
  run_cmd->add_option("case", run.case_dir, "Case directory")->required();
  run_cmd->add_option("--method", run.method, "joint, bilinear or hql");
  run_cmd->add_option("-o,--out", run.out_dir, "Output directory (default: the case)");
  run_cmd->add_option("--csv", run.csv, "Metrics CSV to append to");
  run.pipeline.attach(run_cmd);

  CompareArgs cmp;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "Run several methods over several cases");
  cmp_cmd->add_option("cases", cmp.cases, "Case directories");
  cmp_cmd->add_option("--methods,--method", cmp.methods, "Comma-separated methods");
  cmp_cmd->add_option("-o,--out", cmp.out_dir, "Directory for reconstructed images");
  cmp_cmd->add_option("--csv", cmp.csv, "Write all metric rows to this CSV");
  cmp.pipeline.attach(cmp_cmd);

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Time the joint pipeline stages");
  bench_cmd->add_option("case", bench.case_dir, "Case directory")->required();
  bench_cmd->add_option("--repeat", bench.repeat, "Number of timed runs");
  bench.pipeline.attach(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fglr: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (run_cmd->parsed()) return cmd_run(run, out);
    if (cmp_cmd->parsed()) return cmd_compare(cmp, out);
    if (bench_cmd->parsed()) return cmd_bench(bench, out);
  } catch (const Error& e) {
    err << "fglr: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "fglr: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

int main(int argc, const char* const* argv) { return main(argc, argv, std::cout, std::cerr); }

}  // namespace fglr::cli
