#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>

#include "fglr/baselines.hpp"
#include "fglr/camera.hpp"
#include "fglr/error.hpp"
#include "fglr/eval.hpp"
#include "fglr/graph.hpp"
#include "fglr/imgcore.hpp"
#include "fglr/interp.hpp"
#include "fglr/pipeline.hpp"
#include "fglr/solver.hpp"

namespace py = pybind11;
using namespace fglr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

PlanarImage to_planar(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionError("expected an (H, W, 3) array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  PlanarImage img(w, h);
  const auto r = a.unchecked<3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (Channel c : kChannels) img.at(c, x, y) = r(y, x, static_cast<int>(c));
  return img;
}

Array from_planar(const PlanarImage& img) {
  Array a({img.height(), img.width(), 3});
  auto r = a.mutable_unchecked<3>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (Channel c : kChannels) r(y, x, static_cast<int>(c)) = img.at(c, x, y);
  return a;
}

BayerImage to_bayer(const Array& a, CfaLayout layout) {
  if (a.ndim() != 2) throw DimensionError("expected an (H, W) Bayer array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  return BayerImage(w, h, layout, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_bayer(const BayerImage& b) {
  Array a({b.height(), b.width()});
  std::copy(b.samples().begin(), b.samples().end(), a.mutable_data());
  return a;
}

ValidityMask to_mask(const MaskArray& a) {
  if (a.ndim() != 2) throw DimensionError("expected an (H, W) mask");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  ValidityMask m(w, h, false);
  const auto r = a.unchecked<2>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, r(y, x));
  return m;
}

MaskArray from_mask(const ValidityMask& m) {
  MaskArray a({m.height(), m.width()});
  auto r = a.mutable_unchecked<2>();
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) r(y, x) = m(x, y);
  return a;
}

PatchGraph graph_from(int nodes, const std::vector<std::tuple<int, int, double>>& edges) {
  std::vector<GraphEdge> e;
  e.reserve(edges.size());
  for (const auto& [i, j, w] : edges) e.push_back({i, j, w});
  return build_laplacian(nodes, std::move(e));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint demosaicking and rectification of fisheye Bayer images";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<CfaLayout>(m, "CfaLayout")
      .def(py::init<>())
      .def(py::init([](int px, int py_) { return CfaLayout{px & 1, py_ & 1}; }),
           py::arg("phase_x"), py::arg("phase_y"))
      .def_readwrite("phase_x", &CfaLayout::phase_x)
      .def_readwrite("phase_y", &CfaLayout::phase_y);

  py::enum_<CameraModel>(m, "CameraModel")
      .value("equidistant", CameraModel::equidistant)
      .value("polynomial", CameraModel::polynomial)
      .value("pinhole", CameraModel::pinhole);

  py::class_<Calibration>(m, "Calibration")
      .def(py::init<>())
      .def_readwrite("model", &Calibration::model)
      .def_readwrite("fc", &Calibration::fc)
      .def_readwrite("poly", &Calibration::poly)
      .def_readwrite("cx", &Calibration::cx)
      .def_readwrite("cy", &Calibration::cy)
      .def_readwrite("fisheye_width", &Calibration::fisheye_width)
      .def_readwrite("fisheye_height", &Calibration::fisheye_height)
      .def_readwrite("fov_deg", &Calibration::fov_deg)
      .def_readwrite("rect_width", &Calibration::rect_width)
      .def_readwrite("rect_height", &Calibration::rect_height)
      .def_readwrite("rect_focal", &Calibration::rect_focal)
      .def_readwrite("rotation", &Calibration::rotation)
      .def("validate", &Calibration::validate)
      .def("__str__", &format_calibration);

  m.def("synthetic_calibration", &synthetic_calibration, py::arg("rect_width"),
        py::arg("rect_height"));
  m.def("parse_calibration", &parse_calibration, py::arg("text"));
  m.def("map_pixel", &map_pixel, py::arg("calibration"), py::arg("ix"), py::arg("iy"));
  py::class_<Vec2>(m, "Vec2")
      .def_readonly("x", &Vec2::x)
      .def_readonly("y", &Vec2::y)
      .def("__repr__", [](const Vec2& v) {
        return "Vec2(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ")";
      });

  py::class_<MappingTable>(m, "MappingTable")
      .def_property_readonly("width", &MappingTable::width)
      .def_property_readonly("height", &MappingTable::height)
      .def_property_readonly("bayer_width", &MappingTable::bayer_width)
      .def_property_readonly("bayer_height", &MappingTable::bayer_height)
      .def_property_readonly("valid_count", &MappingTable::valid_count)
      .def("mask", [](const MappingTable& t) { return from_mask(t.mask()); })
      .def("location", &MappingTable::location, py::arg("ix"), py::arg("iy"));
  m.def("build_mapping_table", &build_mapping_table, py::arg("calibration"),
        py::arg("layout") = CfaLayout{}, py::arg("radius") = kDefaultPairingRadius);
  m.def("identity_mapping_table", &identity_mapping_table, py::arg("width"), py::arg("height"),
        py::arg("layout") = CfaLayout{}, py::arg("radius") = kDefaultPairingRadius);

  py::enum_<DistanceKernel>(m, "DistanceKernel")
      .value("product", DistanceKernel::product)
      .value("sum", DistanceKernel::sum);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("patch_size", &PipelineConfig::patch_size)
      .def_readwrite("stride", &PipelineConfig::stride)
      .def_readwrite("mu", &PipelineConfig::mu)
      .def_readwrite("iterations", &PipelineConfig::iterations)
      .def_readwrite("sigma_w", &PipelineConfig::sigma_w)
      .def_readwrite("sigma_v", &PipelineConfig::sigma_v)
      .def_readwrite("radius", &PipelineConfig::radius)
      .def_readwrite("convergence_threshold", &PipelineConfig::convergence_threshold)
      .def_readwrite("kernel", &PipelineConfig::kernel)
      .def_readwrite("normalize_distance", &PipelineConfig::normalize_distance)
      .def_readwrite("threads", &PipelineConfig::threads)
      .def("validate", &PipelineConfig::validate)
      .def("__str__", &format_pipeline_config);
  m.def("pipeline_preset", [](const std::string& name) { return pipeline_preset(name); },
        py::arg("name"));
  m.def("parse_pipeline_config",
        [](const std::string& text, const PipelineConfig& base) {
          return parse_pipeline_config(text, base);
        },
        py::arg("text"), py::arg("base") = PipelineConfig{});

  m.def("mosaic",
        [](const Array& rgb, const CfaLayout& layout) {
          return from_bayer(mosaic(to_planar(rgb), layout));
        },
        py::arg("rgb"), py::arg("layout") = CfaLayout{});
  m.def("add_noise",
        [](const Array& bayer, double sigma, std::uint64_t seed) {
          return from_bayer(add_noise(to_bayer(bayer, {}), {sigma, seed}));
        },
        py::arg("bayer"), py::arg("sigma"), py::arg("seed") = 0);

  m.def("reconstruct",
        [](const Array& bayer, const MappingTable& table, const PipelineConfig& cfg) {
          const BayerImage b = to_bayer(bayer, table.layout());
          PlanarImage img;
          {
            py::gil_scoped_release release;
            img = reconstruct(b, table, cfg);
          }
          return from_planar(img);
        },
        py::arg("bayer"), py::arg("table"), py::arg("config") = PipelineConfig{});
  m.def("reconstruct_report",
        [](const Array& bayer, const MappingTable& table, const PipelineConfig& cfg) {
          const BayerImage b = to_bayer(bayer, table.layout());
          ReconstructionReport rep;
          {
            py::gil_scoped_release release;
            rep = reconstruct_detailed(b, table, cfg);
          }
          py::dict d;
          d["image"] = from_planar(rep.image);
          d["patches"] = rep.patches.size();
          d["solves"] = rep.solve_count();
          d["objective_violations"] = rep.objective_violations();
          d["all_converged"] = rep.all_converged();
          d["graph_seconds"] = rep.timings.graph;
          d["solve_seconds"] = rep.timings.solve;
          d["total_seconds"] = rep.timings.total;
          return d;
        },
        py::arg("bayer"), py::arg("table"), py::arg("config") = PipelineConfig{});
  m.def("tile",
        [](int w, int h, int patch, int stride) {
          std::vector<std::tuple<int, int, int, int>> out;
          for (const Rect& r : tile(w, h, patch, stride))
            out.emplace_back(r.x, r.y, r.width, r.height);
          return out;
        },
        py::arg("width"), py::arg("height"), py::arg("patch"), py::arg("stride"));

  m.def("demosaic_bilinear",
        [](const Array& bayer, const CfaLayout& layout) {
          return from_planar(demosaic_bilinear(to_bayer(bayer, layout)));
        },
        py::arg("bayer"), py::arg("layout") = CfaLayout{});
  m.def("demosaic_hql",
        [](const Array& bayer, const CfaLayout& layout, bool clamp) {
          return from_planar(demosaic_hql(to_bayer(bayer, layout), clamp));
        },
        py::arg("bayer"), py::arg("layout") = CfaLayout{}, py::arg("clamp") = true);
  m.def("rectify_bilinear",
        [](const Array& rgb, const MappingTable& table) {
          return from_planar(rectify_bilinear(to_planar(rgb), table));
        },
        py::arg("rgb"), py::arg("table"));
  m.def("run_baseline",
        [](const Array& bayer, const MappingTable& table, const std::string& kind) {
          return from_planar(
              run_baseline(to_bayer(bayer, table.layout()), table, parse_baseline_kind(kind)));
        },
        py::arg("bayer"), py::arg("table"), py::arg("kind") = "bilinear");

  m.def("psnr",
        [](const Array& a, const Array& b, const MaskArray& mask) {
          return psnr(to_planar(a), to_planar(b), to_mask(mask));
        },
        py::arg("a"), py::arg("b"), py::arg("mask"));
  m.def("ssim",
        [](const Array& a, const Array& b, const MaskArray& mask) {
          return ssim(to_planar(a), to_planar(b), to_mask(mask));
        },
        py::arg("a"), py::arg("b"), py::arg("mask"));

  m.def("scene_names", &scene_names);
  m.def("make_case",
        [](const std::string& scene, const Calibration& cal, double sigma, std::uint64_t seed,
           double scale) {
          const TestCase tc =
              make_case({parse_scene_kind(scene), scale, seed}, cal, {sigma, seed});
          return py::make_tuple(from_bayer(tc.input), from_planar(tc.reference),
                                from_mask(tc.mask));
        },
        py::arg("scene"), py::arg("calibration"), py::arg("sigma") = 15.0, py::arg("seed") = 0,
        py::arg("scale") = 0.1);

  m.def("mle_gradient",
        [](const std::vector<double>& deltas, const std::vector<double>& weights) {
          if (deltas.size() != weights.size())
            throw DimensionError("deltas and weights differ in length");
          std::vector<GradientObservation> obs(deltas.size());
          for (std::size_t k = 0; k < obs.size(); ++k) {
            obs[k].delta = deltas[k];
            obs[k].weight = weights[k];
          }
          return mle_gradient(obs);
        },
        py::arg("deltas"), py::arg("weights"));
  m.def("laplacian",
        [](int nodes, const std::vector<std::tuple<int, int, double>>& edges) {
          const PatchGraph g = graph_from(nodes, edges);
          Array a({nodes, nodes});
          const auto d = g.dense();
          std::copy(d.begin(), d.end(), a.mutable_data());
          return a;
        },
        py::arg("nodes"), py::arg("edges"));
  m.def("solve_glr",
        [](const std::vector<double>& b, const std::vector<std::tuple<int, int, double>>& edges,
           double mu) {
          const PatchGraph g = graph_from(static_cast<int>(b.size()), edges);
          const SolveResult r = solve({b, &g, mu, {}});
          return py::make_tuple(r.x, r.iterations, r.converged);
        },
        py::arg("b"), py::arg("edges"), py::arg("mu") = 1.0);
}
