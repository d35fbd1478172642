#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "etsbm/check.hpp"
#include "etsbm/config.hpp"
#include "etsbm/eval.hpp"
#include "etsbm/runtime.hpp"
#include "etsbm/simulator.hpp"

namespace py = pybind11;
using namespace etsbm;

namespace {

// Keyword arguments use the config keys with '_' for '-'.
RunConfig config_from(const py::kwargs& kwargs) {
  RunConfig c;
  for (const auto& [k, v] : kwargs) {
    auto key = py::str(k).cast<std::string>();
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value;
    if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "true" : "false";
    else value = py::str(v).cast<std::string>();
    set_config_value(c, key, value);
  }
  return c;
}

FitResult run_fit(const TextGraph& graph, int q, const py::kwargs& kwargs) {
  RunConfig c = config_from(kwargs);
  if (q < 1) throw std::invalid_argument("q must be at least 1");
  auto so = selection_options(c, {q}, std::nullopt);
  so.restarts = c.restarts > 0 ? c.restarts : 1;
  py::gil_scoped_release release;
  auto report = select_q(graph, so);
  return std::move(*report.best_fit.front());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  tune_allocator();
  m.doc() = "Embedded topics in a stochastic block model";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<TextGraph>(m, "TextGraph")
      .def_property_readonly("num_nodes", &TextGraph::num_nodes)
      .def_property_readonly("num_edges", &TextGraph::num_edges)
      .def_property_readonly("vocab", [](const TextGraph& g) { return g.vocab().words(); })
      .def("adjacency", &TextGraph::adjacency)
      .def("count_matrix", &TextGraph::count_matrix)
      .def("edges", [](const TextGraph& g) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& e : g.edges()) out.emplace_back(e.src, e.dst);
        return out;
      });

  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); });
  m.def("save_dataset", [](const TextGraph& g, const std::filesystem::path& p) { save_dataset(g, p); });

  m.def(
      "simulate",
      [](const std::string& scenario, const std::string& difficulty, std::size_t nodes, std::uint64_t seed) {
        const auto sim = simulate(parse_scenario(scenario), parse_difficulty(difficulty), nodes, seed);
        py::dict truth;
        truth["node_labels"] = sim.truth.node_labels;
        truth["edge_topics"] = sim.truth.edge_topic_vector(sim.graph);
        return py::make_tuple(sim.graph, truth);
      },
      py::arg("scenario"), py::arg("difficulty") = "easy", py::arg("nodes") = 100, py::arg("seed") = 0,
      "Samples a scenario network; returns (graph, truth).");

  py::class_<ElboRecord>(m, "ElboRecord")
      .def_readonly("net", &ElboRecord::net)
      .def_readonly("text", &ElboRecord::text)
      .def_readonly("total", &ElboRecord::total);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_readonly("labels", &FitResult::labels)
      .def_readonly("num_clusters", &FitResult::num_clusters)
      .def_readonly("final_elbo", &FitResult::final_elbo)
      .def_property_readonly("tau", [](const FitResult& f) { return f.clusters.tau(); })
      .def_property_readonly("pi_hat", [](const FitResult& f) { return posterior_means(f).pi_hat; })
      .def_property_readonly("gamma_hat", [](const FitResult& f) { return posterior_means(f).gamma_hat; })
      .def_property_readonly("elbo_trace",
                             [](const FitResult& f) {
                               std::vector<double> t;
                               for (const auto& r : f.elbo_trace) t.push_back(r.total);
                               return t;
                             })
      .def_property_readonly("beta",
                             [](const FitResult& f) -> std::optional<Matrix> {
                               if (!f.topics) return std::nullopt;
                               return beta_from_embeddings(*f.topics);
                             })
      .def("save", [](const FitResult& f, const std::filesystem::path& p) { save_fit(f, p); });
  m.def("load_fit", [](const std::filesystem::path& p) { return load_fit(p); });

  m.def("fit", &run_fit, py::arg("graph"), py::arg("q"),
        "Fits ETSBM (model='etsbm') or the SBM baseline (model='sbm'). Other keyword arguments are "
        "config keys with '_' for '-', e.g. k=3, restarts=2, max_iter=100, seed=1.");

  m.def(
      "select",
      [](const TextGraph& graph, std::vector<int> q_range, const py::kwargs& kwargs) {
        const auto c = config_from(kwargs);
        auto so = selection_options(c, std::move(q_range), std::nullopt);
        SelectionReport r;
        {
          py::gil_scoped_release release;
          r = select_q(graph, so);
        }
        py::list runs;
        for (const auto& run : r.runs) {
          py::dict d;
          d["q"] = run.q;
          d["restart"] = run.restart;
          d["ok"] = run.ok;
          d["elbo"] = run.elbo.total;
          d["error"] = run.error;
          runs.append(d);
        }
        py::dict out;
        out["chosen_q"] = r.chosen_q;
        out["q_values"] = r.q_values;
        out["best_elbo"] = r.best_elbo;
        out["runs"] = runs;
        return out;
      },
      py::arg("graph"), py::arg("q_range"), "Chooses Q by the best frozen ELBO over restarts.");

  m.def("ari", [](const std::vector<int>& a, const std::vector<int>& b) { return ari(a, b); });
  m.def(
      "edge_topic_labels",
      [](const FitResult& f, const TextGraph& g) { return edge_topic_labels(f, PreparedGraph::from(g)); },
      py::arg("fit"), py::arg("graph"));
  m.def(
      "top_words",
      [](const FitResult& f, const TextGraph& g, std::size_t n) {
        if (!f.topics) throw std::invalid_argument("fit has no topic model");
        return top_words(beta_from_embeddings(*f.topics), g.vocab(), n);
      },
      py::arg("fit"), py::arg("graph"), py::arg("n") = 10);

  m.def(
      "run_checks",
      [](std::uint64_t seed, bool corrupt) {
        CheckOptions o;
        o.seed = seed;
        o.corrupt = corrupt;
        py::list out;
        for (const auto& it : run_checks(o)) {
          py::dict d;
          d["name"] = it.name;
          d["error"] = it.error;
          d["tolerance"] = it.tolerance;
          d["passed"] = it.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("corrupt") = false);
}
