// Copyright 2026 The cgl Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "cgl/checks.hpp"
#include "cgl/error.hpp"
#include "cgl/evaluator.hpp"
#include "cgl/gcn.hpp"
#include "cgl/graph.hpp"
#include "cgl/io.hpp"
#include "cgl/trainer.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

cgl::Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw cgl::DimensionError("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return cgl::Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const cgl::Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

// JSON values cross the boundary as Python objects via their text form.
py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict report_dict(const cgl::RetrievalReport& r) { return to_python(r.to_json()); }

cgl::ComposerSpec spec_for(const std::string& kind, char variant, const cgl::Dataset& ds) {
  if (kind == "tirg") return cgl::ComposerSpec::tirg(ds.config.image_dim, ds.config.text_dim);
  if (kind != "rtic") throw cgl::UsageError("composer must be rtic or tirg");
  return cgl::ComposerSpec::rtic(variant, ds.config.image_dim, ds.config.text_dim);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Composed image retrieval with a graph-convolutional training stream";

  py::register_exception<cgl::UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<cgl::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<cgl::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<cgl::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<cgl::Dataset>(m, "Dataset")
      .def_property_readonly("items", [](const cgl::Dataset& d) { return d.items.size(); })
      .def_property_readonly("train_triplets", [](const cgl::Dataset& d) { return d.train.size(); })
      .def_property_readonly("eval_triplets", [](const cgl::Dataset& d) { return d.eval.size(); })
      .def_property_readonly("image_dim", [](const cgl::Dataset& d) { return d.config.image_dim; })
      .def_property_readonly("text_dim", [](const cgl::Dataset& d) { return d.config.text_dim; })
      .def("item_features", [](const cgl::Dataset& d) { return to_array(cgl::encode_items(d)); })
      .def("triplets", [](const cgl::Dataset& d, const std::string& split) {
        const auto& list = split == "train" ? d.train : d.eval;
        std::vector<std::tuple<std::size_t, std::size_t, std::vector<std::string>>> out;
        for (const auto& t : list) out.emplace_back(t.source_id, t.target_id, t.text.tokens);
        return out;
      }, py::arg("split") = "eval")
      .def("write", [](const cgl::Dataset& d, const std::filesystem::path& dir) { cgl::write_dataset(d, dir); });

  m.def(
      "generate_dataset",
      [](std::size_t items, std::size_t train, std::size_t eval, std::size_t changes, std::size_t image_dim,
         std::size_t text_dim, double noise, std::uint64_t seed) {
        cgl::DatasetConfig c;
        c.items = items;
        c.train_triplets = train;
        c.eval_triplets = eval;
        c.changes_per_text = changes;
        c.image_dim = image_dim;
        c.text_dim = text_dim;
        c.noise_scale = noise;
        c.seed = seed;
        return cgl::generate_dataset(c);
      },
      py::arg("items") = 256, py::arg("train_triplets") = 2048, py::arg("eval_triplets") = 512,
      py::arg("changes") = 1, py::arg("image_dim") = 64, py::arg("text_dim") = 32, py::arg("noise") = 0.05,
      py::arg("seed") = 0);
  m.def("read_dataset", [](const std::filesystem::path& dir) { return cgl::read_dataset(dir); });

  py::class_<cgl::GraphBundle>(m, "Graph")
      .def_readonly("n", &cgl::GraphBundle::n)
      .def_readonly("tau", &cgl::GraphBundle::tau)
      .def_readonly("density", &cgl::GraphBundle::density)
      .def_readonly("mean_degree", &cgl::GraphBundle::mean_degree)
      .def_readonly("fingerprint", &cgl::GraphBundle::fingerprint)
      .def_readonly("warnings", &cgl::GraphBundle::warnings)
      .def("write", [](const cgl::GraphBundle& g, const std::filesystem::path& p) { cgl::write_graph(g, p); });

  m.def(
      "build_graph",
      [](const cgl::Dataset& d, const std::string& checkpoint_hash, double density, const std::string& norm) {
        cgl::GraphOptions o;
        o.density = density;
        o.normalization = cgl::normalization_from_string(norm);
        return cgl::build_graph(d, checkpoint_hash, o);
      },
      py::arg("dataset"), py::arg("checkpoint_hash") = "", py::arg("density") = 0.15,
      py::arg("normalization") = "symmetric");
  m.def("read_graph", [](const std::filesystem::path& p) { return cgl::read_graph(p); });

  m.def(
      "train",
      [](const cgl::Dataset& d, const std::string& mode, const std::string& composer, char variant,
         std::size_t epochs, std::size_t batch_size, double lr, std::uint64_t seed, const cgl::GraphBundle* graph,
         std::optional<std::filesystem::path> init_checkpoint, std::optional<std::filesystem::path> out) {
        cgl::TrainConfig c;
        c.mode = cgl::train_mode_from_string(mode);
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.lr = lr;
        c.seed = seed;
        std::optional<cgl::LoadedCheckpoint> source;
        if (init_checkpoint) {
          c.init_from = cgl::InitFrom::kTransfer;
          source = cgl::load_checkpoint(*init_checkpoint);
        }
        cgl::Session s;
        cgl::TrainResult r;
        {
          py::gil_scoped_release release;
          s = cgl::make_session(c, d, spec_for(composer, variant, d), graph, source ? source->main.get() : nullptr);
          r = cgl::train(s, d);
        }
        py::list log;
        for (const auto& rec : r.log) log.append(to_python(rec.to_json()));
        if (out) cgl::write_checkpoint(s, *out);
        py::dict result;
        result["log"] = log;
        result["swapped"] = s.swapped;
        result["warnings"] = s.warnings;
        return result;
      },
      py::arg("dataset"), py::arg("mode") = "stage1", py::arg("composer") = "rtic", py::arg("variant") = 'd',
      py::arg("epochs") = 30, py::arg("batch_size") = 32, py::arg("lr") = 0.01, py::arg("seed") = 0,
      py::arg("graph") = nullptr, py::arg("init_checkpoint") = std::nullopt, py::arg("out") = std::nullopt);

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const cgl::Dataset& d, const std::string& split) {
        cgl::LoadedCheckpoint ck = cgl::load_checkpoint(checkpoint);
        const auto& list = split == "train" ? d.train : d.eval;
        return report_dict(cgl::evaluate(*ck.main, d, list, cgl::build_index(d)));
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("split") = "eval");

  m.def(
      "evaluate_features",
      [](const Array& queries, const std::vector<std::size_t>& targets, const Array& gallery,
         const std::vector<std::size_t>& ks) {
        return report_dict(cgl::evaluate_features(to_tensor(queries), targets, cgl::build_index(to_tensor(gallery)), ks));
      },
      py::arg("queries"), py::arg("targets"), py::arg("gallery"), py::arg("ks") = std::vector<std::size_t>{});

  m.def("correlations", [](const Array& f) { return to_array(cgl::target_correlations(to_tensor(f)).matrix.values()); });
  m.def(
      "choose_tau",
      [](const Array& raw, double density) {
        const cgl::TauChoice t =
            cgl::choose_tau(cgl::CorrelationMatrix(cgl::MatrixState::kRaw, to_tensor(raw)), density);
        return py::make_tuple(t.tau, t.mean_degree);
      },
      py::arg("raw"), py::arg("density") = 0.15);
  m.def("reweight", [](const Array& binary) {
    return to_array(cgl::reweight(cgl::CorrelationMatrix(cgl::MatrixState::kBinarized, to_tensor(binary))).values());
  });
  m.def(
      "dml_loss",
      [](const Array& composed, const Array& targets, double temperature) {
        return cgl::dml_loss(cgl::Var(to_tensor(composed)), cgl::Var(to_tensor(targets)), temperature).value()[0];
      },
      py::arg("composed"), py::arg("targets"), py::arg("temperature") = 10.0);

  m.def(
      "gradcheck",
      [](const std::string& target, char variant, std::uint64_t seed) {
        cgl::GradcheckOptions o;
        o.seed = seed;
        const cgl::GradcheckReport r =
            target == "gcn" ? cgl::gcn_gradcheck(seed, o) : cgl::composer_gradcheck(target, variant, seed, o);
        return py::make_tuple(r.passed(), r.max_rel_error());
      },
      py::arg("target") = "rtic", py::arg("variant") = 'd', py::arg("seed") = 0);
}
