// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wmattr/app/run.hpp"
#include "wmattr/baseline/logistic.hpp"
#include "wmattr/error.hpp"
#include "wmattr/eval/metrics.hpp"
#include "wmattr/explain/shap.hpp"
#include "wmattr/synth/generator.hpp"

namespace py = pybind11;
using namespace wmattr;

namespace {

using Groups = std::vector<std::vector<std::size_t>>;

Groups singletons(std::size_t d) {
  Groups g(d);
  for (std::size_t i = 0; i < d; ++i) g[i] = {i};
  return g;
}

explain::MarginalGame make_game(const py::function& f, const std::vector<double>& x, const explain::Matrix& background,
                                std::optional<Groups> groups) {
  auto model = [f](const explain::Matrix& rows) {
    py::gil_scoped_acquire gil;
    return f(rows).cast<std::vector<double>>();
  };
  return explain::MarginalGame(model, 1, x, background, groups ? *groups : singletons(x.size()));
}

py::dict attribution_dict(const explain::Attribution& a) {
  py::dict d;
  d["phi"] = a.phi;
  d["base"] = a.base;
  d["prediction"] = a.prediction;
  return d;
}

}  // namespace

PYBIND11_MODULE(_wmattr, m) {
  m.doc() = "Native core of wmattr.";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "run",
      [](const std::string& command, const std::string& config_json) {
        const app::RunConfig config = app::load_config(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        return app::run_command(app::parse_command(command), config).string();
      },
      py::arg("command"), py::arg("config_json"));
  m.def(
      "resolve_config",
      [](const std::string& config_json) {
        return app::config_to_json(app::load_config(nlohmann::json::parse(config_json))).dump();
      },
      py::arg("config_json"));
  m.def(
      "run_id",
      [](const std::string& config_json) { return app::run_id(app::load_config(nlohmann::json::parse(config_json))); },
      py::arg("config_json"));
  m.def("config_keys", &app::config_keys);

  m.def(
      "generate_cohort",
      [](std::size_t size, std::uint64_t seed) {
        synth::GeneratorConfig g;
        g.size = size;
        g.seed = seed;
        const synth::Cohort c = synth::generate_cohort(g);
        std::ostringstream out;
        data::write_cohort(out, c.patients);
        return py::make_tuple(out.str(), synth::summary_to_json(synth::cohort_summary(c.patients)).dump());
      },
      py::arg("size"), py::arg("seed"));

  m.def(
      "auroc",
      [](const std::vector<double>& s, const std::vector<int>& y) { return eval::auroc(s, y); }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "auprc", [](const std::vector<double>& s, const std::vector<int>& y) { return eval::auprc(s, y); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "baseline_auprc", [](const std::vector<int>& y) { return eval::baseline_auprc(y); }, py::arg("labels"));

  m.def(
      "fit_logistic",
      [](const baseline::Matrix& x, const baseline::Vector& y, double inverse_strength) {
        const auto model =
            baseline::train_logistic(x, y, baseline::lambda_for(inverse_strength, static_cast<std::size_t>(x.rows())));
        py::dict d;
        d["weights"] = model.weights;
        d["converged"] = model.converged;
        d["iterations"] = model.iterations;
        d["gradient_norm"] = model.gradient_norm;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("inverse_strength") = 1.0);

  m.def(
      "exact_shap",
      [](const py::function& f, const std::vector<double>& x, const explain::Matrix& background,
         std::optional<Groups> groups) {
        auto game = make_game(f, x, background, std::move(groups));
        return attribution_dict(explain::exact_shap(game).front());
      },
      py::arg("model"), py::arg("x"), py::arg("background"), py::arg("groups") = py::none());
  m.def(
      "kernel_shap",
      [](const py::function& f, const std::vector<double>& x, const explain::Matrix& background,
         std::optional<Groups> groups, std::size_t budget, std::uint64_t seed) {
        auto game = make_game(f, x, background, std::move(groups));
        return attribution_dict(explain::kernel_shap(game, {budget, seed}).front());
      },
      py::arg("model"), py::arg("x"), py::arg("background"), py::arg("groups") = py::none(), py::arg("budget") = 512,
      py::arg("seed") = 0);
}
