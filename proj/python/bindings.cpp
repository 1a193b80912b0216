#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graphdpo/baselines.hpp"
#include "graphdpo/errors.hpp"
#include "graphdpo/gradients.hpp"
#include "graphdpo/io.hpp"
#include "graphdpo/objective.hpp"
#include "graphdpo/pref_graph.hpp"
#include "graphdpo/synth_lab.hpp"

namespace py = pybind11;
using namespace graphdpo;

namespace {

ScoreSet scores_of(const std::vector<double>& raw, std::optional<double> gt) {
  return center(raw, gt);
}

py::dict metrics_dict(const synth::Metrics& m) {
  py::dict d;
  d["step"] = m.step;
  d["objective"] = m.objective;
  d["loss"] = m.loss;
  d["top1"] = m.top1_accuracy;
  d["tau"] = m.kendall_tau;
  d["kl"] = m.kl_to_reference;
  return d;
}

}  // namespace

PYBIND11_MODULE(_graphdpo, m) {
  m.doc() = "Graph-structured preference optimization";

  auto base = py::register_exception<Error>(m, "GraphDPOError", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<InvalidConfig>(m, "InvalidConfig", base.ptr());
  py::register_exception<CyclicPreference>(m, "CyclicPreference", base.ptr());
  py::register_exception<NonLayerable>(m, "NonLayerable", base.ptr());
  py::register_exception<Divergence>(m, "Divergence", base.ptr());

  py::class_<PreferenceGraph>(m, "PreferenceGraph")
      .def(py::init<std::size_t, std::vector<NodeSet>>(), py::arg("num_nodes"),
           py::arg("classes"))
      .def_property_readonly("num_nodes", &PreferenceGraph::num_nodes)
      .def_property_readonly("num_classes", &PreferenceGraph::num_classes)
      .def_property_readonly("classes", &PreferenceGraph::classes)
      .def("edge", &PreferenceGraph::edge)
      .def("edges",
           [](const PreferenceGraph& g) {
             std::vector<std::pair<NodeIndex, NodeIndex>> out;
             for (const Edge& e : g.edges()) out.emplace_back(e.better, e.worse);
             return out;
           })
      .def("edge_count", &PreferenceGraph::edge_count)
      .def("class_of", &PreferenceGraph::class_of)
      .def("dominated_set", [](const PreferenceGraph& g, NodeIndex i) { return dominated_set(g, i); })
      .def("violations", [](const PreferenceGraph& g) { return validate(g).violations; })
      .def("__repr__", [](const PreferenceGraph& g) {
        return "<PreferenceGraph K=" + std::to_string(g.num_nodes()) +
               " classes=" + std::to_string(g.num_classes()) + ">";
      });

  m.def(
      "build_from_labels",
      [](std::vector<double> labels, double tol) {
        return build_from_labels({std::move(labels), tol});
      },
      py::arg("labels"), py::arg("tie_tolerance") = 0.0);
  m.def(
      "build_from_edges",
      [](std::size_t k, const std::vector<std::pair<NodeIndex, NodeIndex>>& pairs,
         bool approximate) {
        EdgeList edges;
        for (const auto& [a, b] : pairs) edges.push_back({a, b});
        auto r = build_from_edges(k, edges,
                                  approximate ? LayeringPolicy::kApproximate
                                              : LayeringPolicy::kReject);
        return py::make_tuple(std::move(r.graph), std::move(r.warnings));
      },
      py::arg("num_nodes"), py::arg("edges"), py::arg("approximate") = false);

  m.def(
      "graph_loss",
      [](const std::vector<double>& scores, const PreferenceGraph& g) {
        return graph_loss_layered(center(scores), g).loss;
      },
      py::arg("scores"), py::arg("graph"));
  m.def(
      "graph_loss_naive",
      [](const std::vector<double>& scores, const PreferenceGraph& g) {
        return graph_loss_naive(center(scores), g).loss;
      },
      py::arg("scores"), py::arg("graph"));
  m.def(
      "anchor_loss",
      [](const std::vector<double>& scores, double gt_score, const PreferenceGraph& g,
         std::size_t worse_from_class) {
        return anchor_loss(center(scores, gt_score), g, worse_from_class);
      },
      py::arg("scores"), py::arg("gt_score"), py::arg("graph"), py::arg("worse_from_class"));
  m.def(
      "total_loss",
      [](const std::vector<double>& scores, const PreferenceGraph& g, std::optional<double> gt,
         std::optional<std::size_t> anchor_from_class, double lambda_gt) {
        return total_loss(scores_of(scores, gt), g, anchor_from_class, std::nullopt,
                          LossWeights{lambda_gt, 0.0})
            .total;
      },
      py::arg("scores"), py::arg("graph"), py::arg("gt_score") = py::none(),
      py::arg("anchor_from_class") = py::none(), py::arg("lambda_gt") = 0.0);
  m.def(
      "grad_total",
      [](const std::vector<double>& scores, const PreferenceGraph& g, std::optional<double> gt,
         std::optional<std::size_t> anchor_from_class, double lambda_gt) {
        const auto v = grad_total(scores_of(scores, gt), g, anchor_from_class, {},
                                  LossWeights{lambda_gt, 0.0});
        return py::make_tuple(v.scores, v.gt);
      },
      py::arg("scores"), py::arg("graph"), py::arg("gt_score") = py::none(),
      py::arg("anchor_from_class") = py::none(), py::arg("lambda_gt") = 0.0,
      "Raw-score gradient and the gradient on the ground-truth score (or None).");
  m.def(
      "node_influence",
      [](const std::vector<double>& scores, const PreferenceGraph& g) {
        return node_influence(center(scores), g);
      },
      py::arg("scores"), py::arg("graph"));
  m.def(
      "finite_diff_check",
      [](const std::function<double(std::vector<double>)>& f, const std::vector<double>& point,
         const std::vector<double>& analytic, double h) {
        return finite_diff_check(
                   [&](std::span<const double> x) {
                     return f(std::vector<double>(x.begin(), x.end()));
                   },
                   point, analytic, h)
            .max_rel_error;
      },
      py::arg("f"), py::arg("point"), py::arg("analytic"), py::arg("h") = 1e-6);

  m.def("lambda_gt",
        [](std::int64_t step, std::int64_t total, double init, double final_) {
          ScheduleParams p;
          p.total_steps = total;
          p.gt_init = init;
          p.gt_final = final_;
          return lambda_gt(step, p);
        },
        py::arg("step"), py::arg("total_steps"), py::arg("init") = 2.5, py::arg("final") = 1.0);

  m.def(
      "pairwise_dpo",
      [](const std::vector<double>& s, const PreferenceGraph& g) { return pairwise_dpo(s, g).loss; },
      py::arg("scores"), py::arg("graph"));
  m.def(
      "pro_listmle",
      [](const std::vector<double>& s, const std::vector<double>& labels) {
        const auto v = pro_listmle(s, labels);
        return py::make_tuple(v.loss, v.grad);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "multi_negative",
      [](const std::vector<double>& s, const std::vector<double>& labels) {
        return multi_negative(s, labels).loss;
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "prompt_losses",
      [](const std::string& path, double beta, double tie_tolerance) {
        const auto in = io::ingest(std::filesystem::path(path));
        py::list out;
        for (const auto& rec : in.records) {
          const auto p = io::prepare(rec, beta, tie_tolerance);
          ScheduleParams sched = ScheduleParams::for_rollouts(p.scores.size(), 1);
          const auto b = total_loss(p.scores, p.graph, p.anchor_from_class, p.kl(), 0, sched);
          py::dict d;
          d["prompt_id"] = p.prompt_id;
          d["k"] = p.scores.size();
          d["classes"] = p.graph.num_classes();
          d["graph_loss"] = b.graph_loss;
          d["anchor_loss"] = b.anchor_loss;
          d["total"] = b.total;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("path"), py::arg("beta") = 0.05, py::arg("tie_tolerance") = 0.0,
      "Per-prompt loss breakdown of a JSONL rollout file at step 0.");

  m.def(
      "train_synthetic",
      [](const std::string& objective, std::size_t prompts, std::size_t responses,
         std::size_t levels, std::size_t k, std::int64_t steps, std::size_t batch, double lr,
         std::uint64_t seed, std::int64_t eval_every) {
        const auto task = synth::gen_task(seed, prompts, responses, levels);
        synth::TrainConfig c;
        c.objective = synth::parse_objective(objective);
        c.k = k;
        c.steps = steps;
        c.batch_prompts = batch;
        c.learning_rate = lr;
        c.seed = seed;
        c.eval_every = eval_every;
        std::optional<synth::TrainResult> r;
        {
          py::gil_scoped_release release;
          r = synth::train(task, c);
        }
        py::list out;
        for (const auto& mt : r->trajectory) out.append(metrics_dict(mt));
        return out;
      },
      py::arg("objective") = "graphdpo", py::arg("prompts") = 200, py::arg("responses") = 16,
      py::arg("levels") = 4, py::arg("k") = 8, py::arg("steps") = 600, py::arg("batch") = 32,
      py::arg("lr") = 0.1, py::arg("seed") = 0, py::arg("eval_every") = 10,
      "Train on a noiseless synthetic task; returns the metric trajectory.");
}
