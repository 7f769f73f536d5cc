// Python bindings: encodings, ranking metrics, dataset IO and model forward.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gpio/encodings.hpp"
#include "gpio/errors.hpp"
#include "gpio/experiment.hpp"
#include "gpio/io.hpp"
#include "gpio/metrics.hpp"
#include "gpio/model.hpp"

namespace py = pybind11;
using namespace gpio;
using nlohmann::json;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I64 = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const F64& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + " dimensions");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

std::vector<Edge> to_edges(const I64& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || a.shape(1) != 2) throw ShapeError("edges must have shape (E, 2)");
  std::vector<Edge> e;
  const auto* p = a.data();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    if (p[2 * i] < 0 || p[2 * i + 1] < 0) throw ShapeError("edges must be non-negative node ids");
    const auto u = static_cast<std::uint32_t>(p[2 * i]), v = static_cast<std::uint32_t>(p[2 * i + 1]);
    e.push_back({std::min(u, v), std::max(u, v)});
  }
  return e;
}

py::array_t<std::int64_t> from_edges(std::span<const Edge> edges) {
  py::array_t<std::int64_t> out({edges.size(), std::size_t{2}});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    p[2 * i] = edges[i].u;
    p[2 * i + 1] = edges[i].v;
  }
  return out;
}

Graph make_graph(std::size_t num_nodes, const I64& edges) { return Graph(num_nodes, to_edges(edges)); }

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

template <class T>
py::array_t<T> vec_array(const std::vector<T>& v) {
  py::array_t<T> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict portable_to_dict(const PortableDataset& ds) {
  py::dict d;
  d["meta"] = py::dict(py::arg("name") = ds.meta.name, py::arg("num_nodes") = ds.meta.num_nodes,
                       py::arg("num_features") = ds.meta.num_features, py::arg("num_classes") = ds.meta.num_classes,
                       py::arg("task") = ds.meta.task);
  d["edges"] = from_edges(ds.graph.edges());
  d["features"] = ds.graph.features() ? py::object(to_array(*ds.graph.features())) : py::none();
  if (ds.graph.node_labels()) {
    std::vector<std::int64_t> labels(ds.graph.node_labels()->begin(), ds.graph.node_labels()->end());
    d["labels"] = vec_array(labels);
  } else {
    d["labels"] = py::none();
  }
  if (ds.fixed_split) {
    auto as_i64 = [](const std::vector<std::size_t>& v) {
      return vec_array(std::vector<std::int64_t>(v.begin(), v.end()));
    };
    d["split"] = py::dict(py::arg("train") = as_i64(ds.fixed_split->train), py::arg("val") = as_i64(ds.fixed_split->val),
                          py::arg("test") = as_i64(ds.fixed_split->test));
  } else {
    d["split"] = py::none();
  }
  return d;
}

std::vector<std::size_t> index_list(const py::object& o) {
  auto a = o.cast<I64>();
  std::vector<std::size_t> out;
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] < 0) throw ShapeError("split indices must be non-negative");
    out.push_back(static_cast<std::size_t>(a.data()[i]));
  }
  return out;
}

void save_portable_py(const std::filesystem::path& dir, const std::string& name, std::size_t num_nodes,
                      const I64& edges, const std::optional<F64>& features, const std::optional<I64>& labels,
                      const std::optional<py::dict>& split, const std::string& task) {
  // Raw sources list both directions and the odd self-loop.
  auto e = to_edges(edges);
  std::erase_if(e, [](const Edge& x) { return x.u == x.v; });
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  PortableDataset ds;
  ds.graph = Graph(num_nodes, std::move(e));
  ds.meta.name = name;
  ds.meta.num_nodes = num_nodes;
  ds.meta.task = task;
  if (features) {
    auto x = to_matrix(*features);
    ds.meta.num_features = x.cols;
    ds.graph.set_features(std::move(x));
  }
  if (labels) {
    std::vector<int> y(labels->data(), labels->data() + labels->size());
    int top = -1;
    for (int v : y) top = std::max(top, v);
    ds.meta.num_classes = static_cast<std::size_t>(top + 1);
    ds.graph.set_node_labels(std::move(y));
  }
  if (split) {
    NodeSplit s;
    s.train = index_list((*split)["train"]);
    s.val = index_list((*split)["val"]);
    s.test = index_list((*split)["test"]);
    ds.fixed_split = std::move(s);
  }
  save_portable(dir, ds);
}

struct PyModel {
  std::shared_ptr<GraphPerceiver> model;

  py::dict forward(const F64& input, const std::optional<F64>& query, const std::vector<std::size_t>& offsets,
                   bool capture_attention) const {
    ForwardOptions fo;
    fo.input_offsets = offsets;
    fo.capture_attention = capture_attention;
    NoGradGuard ng;
    auto out = model->forward(Tensor::from(to_matrix(input)), query ? Tensor::from(to_matrix(*query)) : Tensor(), fo);
    py::dict d;
    d["decoded"] = to_array(out.decoded.to_matrix());
    d["logits"] = out.logits ? py::object(to_array(out.logits->to_matrix())) : py::none();
    py::list att;
    for (const auto& a : out.encoder_attention) att.append(to_array(a));
    d["attention"] = att;
    return d;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph Perceiver IO core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def("format_double", &format_double, "Shortest decimal string that reads back to the same double.");

  m.def(
      "compute_rwpe",
      [](std::size_t n, const I64& edges, std::size_t t) { return to_array(compute_rwpe(make_graph(n, edges), t)); },
      py::arg("num_nodes"), py::arg("edges"), py::arg("t"));
  m.def(
      "fourier_pe",
      [](std::size_t n, const I64& edges, std::size_t t) { return to_array(fourier_pe(make_graph(n, edges), t)); },
      py::arg("num_nodes"), py::arg("edges"), py::arg("t"));
  m.def(
      "sgc_smooth",
      [](const F64& x, const I64& edges, std::size_t L) {
        const auto xm = to_matrix(x);
        return to_array(sgc_smooth(xm, make_graph(xm.rows, edges), L));
      },
      py::arg("x"), py::arg("edges"), py::arg("L"));
  m.def(
      "appnp_smooth",
      [](const F64& x, const I64& edges, std::size_t L, double alpha) {
        const auto xm = to_matrix(x);
        return to_array(appnp_smooth(xm, make_graph(xm.rows, edges), L, alpha));
      },
      py::arg("x"), py::arg("edges"), py::arg("L"), py::arg("alpha"));

  m.def(
      "roc_auc",
      [](std::vector<double> scores, std::vector<int> labels) { return roc_auc(scores, labels); }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "average_precision",
      [](std::vector<double> scores, std::vector<int> labels) { return average_precision(scores, labels); },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "load_portable", [](const std::filesystem::path& dir) { return portable_to_dict(load_portable(dir)); },
      py::arg("path"), "Read a portable dataset directory into a dict of numpy arrays.");
  m.def("save_portable", &save_portable_py, py::arg("path"), py::arg("name"), py::arg("num_nodes"), py::arg("edges"),
        py::arg("features") = py::none(), py::arg("labels") = py::none(), py::arg("split") = py::none(),
        py::arg("task") = "node", "Write a portable dataset directory. Edges are stored once as u < v; self-loops are dropped.");
  m.def(
      "check_dataset",
      [](const std::string& path, const std::string& format) {
        const auto name = std::filesystem::path(path).lexically_normal().filename().string();
        return to_py(check_dataset(resolve_dataset(name, path, format)).json);
      },
      py::arg("path"), py::arg("format") = "", "Validate a dataset directory and return its counts.");

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const py::dict& config, std::uint64_t seed) {
             return PyModel{std::make_shared<GraphPerceiver>(ModelConfig::from_json(from_py(config)), seed)};
           }),
           py::arg("config"), py::arg("seed") = 0)
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            auto ck = load_checkpoint(path);
            return py::make_tuple(PyModel{std::make_shared<GraphPerceiver>(std::move(ck.model))}, to_py(ck.extra));
          },
          py::arg("path"), "Load a checkpoint; returns (model, extra).")
      .def(
          "save",
          [](const PyModel& self, const std::filesystem::path& path, const py::object& extra) {
            save_checkpoint(path, *self.model, extra.is_none() ? json::object() : from_py(extra));
          },
          py::arg("path"), py::arg("extra") = py::none())
      .def_property_readonly("config", [](const PyModel& self) { return to_py(self.model->config().to_json()); })
      .def_property_readonly("num_parameters",
                             [](const PyModel& self) { return self.model->parameters().num_scalars(); })
      .def("forward", &PyModel::forward, py::arg("input"), py::arg("query") = py::none(),
           py::arg("offsets") = std::vector<std::size_t>{}, py::arg("capture_attention") = false);
}
