#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semcom/config.hpp"
#include "semcom/digital.hpp"
#include "semcom/error.hpp"
#include "semcom/experiment.hpp"
#include "semcom/retrieval.hpp"
#include "semcom/selfcheck.hpp"

namespace py = pybind11;
using namespace semcom;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  Tensor t({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.values.begin());
  return t;
}

py::array_t<float> view_array(const std::vector<float>& v, std::size_t rows, std::size_t cols) {
  py::array_t<float> out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict pair_set(const data::PairSet& s) {
  py::dict d;
  d["s1"] = view_array(s.s1, s.n, s.p);
  d["s2"] = view_array(s.s2, s.n, s.p);
  py::array_t<int> labels(s.n);
  for (std::size_t i = 0; i < s.n; ++i) labels.mutable_at(i) = s.label(i);
  d["labels"] = labels;
  return d;
}

config::ExperimentConfig parse_config(const std::string& text) {
  return config::from_json(text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collaborative semantic communication simulator";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  m.def(
      "mac_equal_rate_capacity",
      [](std::size_t q, double power, double sigma2, std::complex<double> h1, std::complex<double> h2) {
        const auto b = digital::mac_equal_rate_capacity(q, power, sigma2, h1, h2);
        return py::make_tuple(b.r1, b.r2);
      },
      py::arg("q"), py::arg("power"), py::arg("sigma2"), py::arg("h1") = std::complex<double>(1, 0),
      py::arg("h2") = std::complex<double>(1, 0), "Per-user equal-rate bound in bits over q channel uses.");

  m.def("coordinate_bits", &digital::coordinate_bits, py::arg("value"), py::arg("mean"), py::arg("scale"),
        "Code length in bits of one integer under a discretized Gaussian.");

  m.def("snr_to_sigma2", &channel::snr_to_sigma2, py::arg("snr_db"), py::arg("received_power") = 1.0);

  m.def(
      "transmit_noma",
      [](const std::vector<double>& x1, const std::vector<double>& x2, std::complex<double> h1,
         std::complex<double> h2, double sigma2, std::uint64_t seed) {
        Rng rng(seed, Stream::Channel);
        channel::FadingState st{h1, h2, sigma2};
        return channel::transmit_noma({x1, 1.0}, {x2, 1.0}, st, rng);
      },
      py::arg("x1"), py::arg("x2"), py::arg("h1") = std::complex<double>(1, 0),
      py::arg("h2") = std::complex<double>(1, 0), py::arg("sigma2") = 0.0, py::arg("seed") = 1,
      "Superposition of two interleaved complex codewords plus noise.");

  m.def(
      "top1_accuracy",
      [](const Array& queries, const std::vector<int>& query_labels, const Array& gallery,
         const std::vector<int>& gallery_labels) {
        const retrieval::GalleryIndex index(to_tensor(gallery), gallery_labels);
        return retrieval::top1_accuracy(to_tensor(queries), query_labels, index);
      },
      py::arg("queries"), py::arg("query_labels"), py::arg("gallery"), py::arg("gallery_labels"));

  m.def(
      "default_config", [] { return config::to_json(config::ExperimentConfig{}).dump(); },
      "Default experiment config as a JSON string.");
  m.def(
      "validate_config", [](const std::string& text) { return config::to_json(parse_config(text)).dump(); },
      py::arg("json"), "Validates a config document and returns it with defaults filled in.");

  m.def(
      "generate_dataset",
      [](const std::string& config_json) {
        const auto ds = data::generate(parse_config(config_json).dataset);
        py::dict d;
        d["train"] = pair_set(ds.train);
        d["query"] = pair_set(ds.query);
        d["gallery"] = pair_set(ds.gallery);
        return d;
      },
      py::arg("config_json") = "");

  m.def(
      "sweep",
      [](const std::string& config_json, const std::string& axis, const std::vector<std::string>& schemes,
         const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
        const auto cfg = parse_config(config_json);
        experiment::SweepOptions o;
        o.axis = experiment::parse_axis(axis);
        for (const auto& s : schemes) o.schemes.push_back(model::parse_scheme(s));
        if (o.schemes.empty()) o.schemes = cfg.eval.schemes;
        o.seeds = seeds.empty() ? cfg.eval.seeds : seeds;
        o.jobs = jobs;
        std::vector<experiment::ResultRow> rows;
        {
          py::gil_scoped_release release;
          experiment::Workspace ws(cfg, data::generate(cfg.dataset));
          rows = experiment::run_sweep(ws, o);
        }
        return experiment::to_csv(rows);
      },
      py::arg("config_json"), py::arg("axis"), py::arg("schemes") = std::vector<std::string>{},
      py::arg("seeds") = std::vector<std::uint64_t>{}, py::arg("jobs") = 1, "Runs one sweep; returns CSV text.");

  m.def(
      "selfcheck",
      [](bool inject_fault) {
        selfcheck::Options o;
        o.inject_fault = inject_fault;
        py::list out;
        for (const auto& r : selfcheck::run(o)) {
          py::dict d;
          d["name"] = r.name;
          d["max_error"] = r.max_error;
          d["tolerance"] = r.tolerance;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("inject_fault") = false);
}
