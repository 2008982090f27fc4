#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "clusterless/experiment.hpp"

namespace py = pybind11;
using namespace clusterless;

namespace {

Time secs(double s) { return Time::seconds(s); }

py::dict workflow_row(const WorkflowRow& r) {
    py::dict d;
    d["id"] = r.id;
    d["template_index"] = r.template_index;
    d["workflow"] = r.workflow;
    d["size_class"] = r.size_class;
    d["deadline_class"] = r.deadline_class;
    d["origin"] = r.origin;
    d["arrival_s"] = r.arrival_s;
    d["deadline_s"] = r.deadline_s;
    d["completion_s"] = r.completion_s;
    d["status"] = std::string(to_string(r.status));
    d["deadline_met"] = r.deadline_met;
    d["violation_s"] = r.violation_s;
    d["offloaded"] = r.offloaded;
    return d;
}

std::vector<std::tuple<double, int, int>> entries_of(const ArrivalSchedule& s) {
    std::vector<std::tuple<double, int, int>> out;
    for (const auto& e : s.entries) out.emplace_back(e.time.to_seconds(), e.cluster, e.template_index);
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Deterministic multi-cluster serverless workflow simulator";
    m.attr("__version__") = kVersion;
    py::register_exception<Error>(m, "ClusterlessError", PyExc_ValueError);

    py::class_<ExperimentConfig>(m, "Config")
        .def_static("defaults", &ExperimentConfig::defaults)
        .def_static("from_json", [](const std::string& text) { return parse_config(text); }, py::arg("text"))
        .def_static("load", &load_config, py::arg("path"))
        .def_property(
            "strategy", [](const ExperimentConfig& c) { return std::string(to_string(c.strategy)); },
            [](ExperimentConfig& c, const std::string& s) { c.strategy = parse_strategy(s); })
        .def_readwrite("regime", &ExperimentConfig::regime)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("horizon_s", &ExperimentConfig::horizon_s)
        .def_readwrite("prewarm", &ExperimentConfig::prewarm)
        .def_readwrite("load_threshold", &ExperimentConfig::load_threshold)
        .def_property_readonly("clusters",
                               [](const ExperimentConfig& c) {
                                   std::vector<std::string> names;
                                   for (const auto& p : c.clusters) names.push_back(p.name);
                                   return names;
                               })
        .def("validate", &ExperimentConfig::validate)
        .def("to_json", [](const ExperimentConfig& c) { return config_to_json(c); });

    py::class_<ArrivalSchedule>(m, "Schedule")
        .def_readonly("regime", &ArrivalSchedule::regime)
        .def_readonly("seed", &ArrivalSchedule::seed)
        .def_property_readonly("entries", &entries_of)
        .def("__len__", [](const ArrivalSchedule& s) { return s.entries.size(); })
        .def("text", &schedule_text)
        .def("save", [](const ArrivalSchedule& s, const std::filesystem::path& p) { save_schedule(s, p); });

    m.def("make_schedule", &make_schedule, py::arg("config"));
    m.def("load_schedule", &load_schedule, py::arg("path"), py::arg("clusters"));

    py::class_<RunOutput>(m, "Run")
        .def_property_readonly("strategy", [](const RunOutput& r) { return r.metrics.strategy; })
        .def("summary", [](const RunOutput& r) { return scalar_metrics(r.metrics); })
        .def("workflows",
             [](const RunOutput& r) {
                 py::list rows;
                 for (const auto& w : r.metrics.workflows) rows.append(workflow_row(w));
                 return rows;
             })
        .def("workflows_csv", [](const RunOutput& r) { return workflows_csv(r.metrics); })
        .def("functions_csv", [](const RunOutput& r) { return functions_csv(r.metrics); })
        .def("aggregate_json", [](const RunOutput& r) { return aggregate_json(r.metrics); })
        .def_property_readonly("events", [](const RunOutput& r) { return r.report.events; });

    m.def(
        "run",
        [](const ExperimentConfig& c, const ArrivalSchedule* schedule) {
            c.validate();
            const auto sched = schedule ? *schedule : make_schedule(c);
            py::gil_scoped_release unlocked;
            return run_single(c, sched);
        },
        py::arg("config"), py::arg("schedule") = nullptr);
    m.def("export_run", &export_run, py::arg("run"), py::arg("config"), py::arg("schedule"), py::arg("out"));
    m.def(
        "run_experiment",
        [](const ExperimentConfig& c, const std::string& sweep, const std::filesystem::path& out) {
            auto summary = run_experiment(c, parse_sweep(sweep), out);
            std::vector<std::pair<std::string, std::map<std::string, double>>> cells;
            for (std::size_t i = 0; i < summary.metrics.size(); ++i)
                cells.emplace_back(summary.cells[i], scalar_metrics(summary.metrics[i]));
            return cells;
        },
        py::arg("config"), py::arg("sweep") = "", py::arg("out"));

    // Calculators, in seconds.
    m.def("is_alive", [](double t, double hb, double timeout) { return is_alive(secs(t), secs(hb), secs(timeout)); });
    m.def("serving_time", [](const std::string& mode, double q, double ws, double cs, double exec) {
        ExecutionMode em;
        if (mode == "warm") em = ExecutionMode::WarmExecution;
        else if (mode == "warm_scaling") em = ExecutionMode::WarmScaling;
        else if (mode == "cold_scaling") em = ExecutionMode::ColdScaling;
        else throw Error("unknown mode " + mode);
        return serving_time(em, secs(q), secs(ws), secs(cs), secs(exec)).to_seconds();
    });
    m.def("remote_completion", [](double te, double start, double delay, double serving) {
        return remote_completion(secs(te), secs(start), secs(delay), secs(serving)).to_seconds();
    });
    m.def("transfer_delay", [](double mb, bool same, double bw) { return transfer_delay(mb, same, bw).to_seconds(); });
    m.def("zipf_pmf", [](std::size_t k, double alpha) { return ZipfSampler(k, alpha).pmf(); }, py::arg("k") = 18,
          py::arg("alpha") = 0.75);
}
