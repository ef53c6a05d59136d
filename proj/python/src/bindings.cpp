// Python entry points for the loss and landmark kernels. Arrays are copied
// into the native types before the GIL is released, so caller buffers are
// never written and need not stay alive after the call returns.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "thermoloss/error.hpp"
#include "thermoloss/label_adaptation.hpp"
#include "thermoloss/landmark_nll.hpp"
#include "thermoloss/ot.hpp"
#include "thermoloss/patch_wasserstein.hpp"
#include "thermoloss/region_regularizer.hpp"

namespace py = pybind11;
using namespace thermoloss;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

void require_ndim(const py::array& a, py::ssize_t ndim, const char* name) {
  if (a.ndim() != ndim) {
    throw DimensionMismatch(std::string(name) + ": expected " + std::to_string(ndim) +
                            "-d array, got " + std::to_string(a.ndim()) + "-d");
  }
}

std::vector<double> to_vector(const DArray& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

EmpiricalMeasure to_measure(const DArray& a, const char* name) {
  require_ndim(a, 2, name);
  if (a.shape(0) == 0 || a.shape(1) == 0) throw InvalidArgument(std::string(name) + ": empty");
  return EmpiricalMeasure(static_cast<std::size_t>(a.shape(1)), to_vector(a));
}

Grid to_grid(const DArray& a, const char* name) {
  require_ndim(a, 2, name);
  Grid g(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  g.values = to_vector(a);
  return g;
}

SegmentationMask to_mask(const U8Array& a, const char* name) {
  require_ndim(a, 2, name);
  SegmentationMask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  m.labels.assign(a.data(), a.data() + a.size());
  return m;
}

LandmarkSet to_landmarks(const DArray& a, const char* name) {
  require_ndim(a, 2, name);
  if (a.shape(1) != 2) throw DimensionMismatch(std::string(name) + ": expected shape (L, 2)");
  LandmarkSet s;
  const double* p = a.data();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) s.points.push_back({p[2 * i], p[2 * i + 1]});
  return s;
}

DArray from_grid(const Grid& g) {
  DArray out({static_cast<py::ssize_t>(g.height), static_cast<py::ssize_t>(g.width)});
  std::copy(g.values.begin(), g.values.end(), out.mutable_data());
  return out;
}

DArray from_flat(const std::vector<double>& v, py::ssize_t rows, py::ssize_t cols) {
  DArray out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

DArray from_points(const std::vector<Point2>& pts) {
  DArray out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  double* d = out.mutable_data();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d[2 * i] = pts[i].x;
    d[2 * i + 1] = pts[i].y;
  }
  return out;
}

ReferenceTemperatureProfile to_profile(const py::object& profile) {
  if (py::isinstance<ReferenceTemperatureProfile>(profile)) {
    return profile.cast<ReferenceTemperatureProfile>();
  }
  const auto s = profile.cast<std::string>();
  if (s == "cold" || s == "warm") return ReferenceTemperatureProfile::by_name(s);
  return ReferenceTemperatureProfile::load(s);
}

py::dict bound_sinkhorn(const DArray& mu, const DArray& nu, double lambda_e, double tol,
                        std::size_t max_iters, bool anneal) {
  const auto m = to_measure(mu, "mu");
  const auto n = to_measure(nu, "nu");
  if (m.dim() != n.dim()) throw DimensionMismatch("nu: point dimension differs from mu");
  SinkhornConfig cfg;
  cfg.lambda_e = lambda_e;
  cfg.tolerance = tol;
  cfg.max_iters = max_iters;
  cfg.anneal = anneal;
  SinkhornResult res;
  std::vector<double> grad;
  {
    py::gil_scoped_release release;
    res = sinkhorn(m, n, cfg);
    grad = sinkhorn_grad_source(m, n, res.plan);
  }
  py::dict out;
  out["cost"] = res.cost;
  out["transport_cost"] = res.transport_cost;
  out["plan"] = from_flat(res.plan.entries, static_cast<py::ssize_t>(res.plan.rows),
                          static_cast<py::ssize_t>(res.plan.cols));
  out["grad_mu"] = from_flat(grad, mu.shape(0), mu.shape(1));
  out["converged"] = res.converged;
  out["iterations"] = res.iterations;
  return out;
}

py::tuple bound_patch_w_loss(const std::vector<DArray>& gen, const std::vector<U8Array>& masks,
                             const std::vector<DArray>& real, std::size_t patch_size,
                             std::size_t stride, std::size_t scales, double scale_factor,
                             std::size_t max_patches, std::uint64_t seed, double lambda_e,
                             const std::string& backend) {
  if (masks.size() != gen.size()) throw DimensionMismatch("masks: one mask per generated image");
  std::vector<GeneratedImage> g;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    g.push_back({ThermalImage(to_grid(gen[i], "gen")), to_mask(masks[i], "masks")});
  }
  std::vector<ThermalImage> r;
  for (const auto& a : real) r.emplace_back(to_grid(a, "real"));
  PatchConfig pc;
  pc.patch_size = patch_size;
  pc.stride = stride;
  pc.scales = scales;
  pc.scale_factor = scale_factor;
  pc.max_patches_per_side = max_patches;
  pc.seed = seed;
  SinkhornConfig sc;
  sc.lambda_e = lambda_e;
  OtBackend be;
  if (backend == "sinkhorn") {
    be = OtBackend::kSinkhorn;
  } else if (backend == "exact") {
    be = OtBackend::kExact;
  } else {
    throw InvalidArgument("backend: expected 'sinkhorn' or 'exact'");
  }
  PatchLossResult res;
  {
    py::gil_scoped_release release;
    res = patch_w_loss(g, r, pc, sc, be);
  }
  py::list grads;
  for (const auto& gr : res.grads) grads.append(from_grid(gr));
  return py::make_tuple(res.value, grads);
}

py::tuple bound_region_reg(const DArray& img, const U8Array& mask, const py::object& profile,
                           bool include_background) {
  const ThermalImage im(to_grid(img, "img"));
  const auto m = to_mask(mask, "mask");
  const auto prof = to_profile(profile);
  RegionRegResult res;
  {
    py::gil_scoped_release release;
    res = region_reg(im, m, prof, include_background);
  }
  return py::make_tuple(res.value, from_grid(res.grad));
}

py::tuple bound_gaussian_nll(const DArray& mu, const DArray& sigma2, const DArray& gt,
                             double epsilon) {
  const auto m = to_landmarks(mu, "mu");
  const auto y = to_landmarks(gt, "gt");
  require_ndim(sigma2, 1, "sigma2");
  const auto s2 = to_vector(sigma2);
  NllConfig cfg;
  cfg.epsilon = epsilon;
  NllResult res;
  {
    py::gil_scoped_release release;
    res = gaussian_nll(m, s2, y, cfg);
  }
  DArray gs({static_cast<py::ssize_t>(res.grad_sigma2.size())});
  std::copy(res.grad_sigma2.begin(), res.grad_sigma2.end(), gs.mutable_data());
  return py::make_tuple(res.value, from_points(res.grad_mu), gs);
}

DArray bound_adapter_forward(const AdapterMLP& mlp, const DArray& x) {
  require_ndim(x, 1, "x");
  const auto in = to_vector(x);
  std::vector<double> out;
  {
    py::gil_scoped_release release;
    out = adapter_forward(mlp, in);
  }
  DArray a({static_cast<py::ssize_t>(out.size())});
  std::copy(out.begin(), out.end(), a.mutable_data());
  return a;
}

DArray bound_adapter_apply(const AdapterMLP& mlp, const DArray& pred, double resize) {
  const auto p = to_landmarks(pred, "pred");
  LandmarkSet out;
  {
    py::gil_scoped_release release;
    out = adapter_apply(mlp, p, resize);
  }
  return from_points(out.points);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native kernels for thermal losses and landmark utilities";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<ReferenceTemperatureProfile>(m, "Profile")
      .def_static("cold", &ReferenceTemperatureProfile::cold)
      .def_static("warm", &ReferenceTemperatureProfile::warm)
      .def_static("load", [](const std::string& p) { return ReferenceTemperatureProfile::load(p); })
      .def_readonly("name", &ReferenceTemperatureProfile::name)
      .def_property_readonly("targets", [](const ReferenceTemperatureProfile& p) {
        return std::vector<double>(p.targets.begin(), p.targets.end());
      });

  py::class_<AdapterMLP>(m, "Adapter")
      .def_static("load", [](const std::string& p) { return load_adapter(p); })
      .def_property_readonly("widths", [](const AdapterMLP& a) { return a.widths; })
      .def("forward", &bound_adapter_forward, py::arg("x"))
      .def("apply", &bound_adapter_apply, py::arg("pred"), py::arg("resize") = 1.0);

  m.def("sinkhorn", &bound_sinkhorn, py::arg("mu"), py::arg("nu"), py::arg("lambda_e") = 1e-6,
        py::arg("tol") = 1e-9, py::arg("max_iters") = 10000, py::arg("anneal") = true,
        "Entropic OT between uniform point clouds (K x d, L x d).");
  m.def("patch_w_loss", &bound_patch_w_loss, py::arg("gen"), py::arg("masks"), py::arg("real"),
        py::arg("patch_size") = 8, py::arg("stride") = 4, py::arg("scales") = 5,
        py::arg("scale_factor") = 0.5, py::arg("max_patches") = 1024, py::arg("seed") = 0,
        py::arg("lambda_e") = 1e-6, py::arg("backend") = "sinkhorn",
        "Multiscale patch Wasserstein loss; returns (value, per-image gradients).");
  m.def("region_reg", &bound_region_reg, py::arg("img"), py::arg("mask"),
        py::arg("profile") = "cold", py::arg("include_background") = true,
        "Region temperature regularizer; returns (value, gradient).");
  m.def("gaussian_nll", &bound_gaussian_nll, py::arg("mu"), py::arg("sigma2"), py::arg("gt"),
        py::arg("epsilon") = 1e-6, "Gaussian NLL; returns (value, grad_mu, grad_sigma2).");
  m.def("adapter_apply",
        [](const std::string& model, const DArray& pred, double resize) {
          return bound_adapter_apply(load_adapter(model), pred, resize);
        },
        py::arg("model"), py::arg("pred"), py::arg("resize") = 1.0,
        "Map (L, 2) landmarks through the adapter stored at `model`.");
}
