#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clusterless/simkernel.hpp"

namespace clusterless {

struct WorkflowRow {
    std::uint64_t id = 0;
    int template_index = 0;
    std::string workflow;
    std::string size_class;
    std::string deadline_class;
    int origin = 0;
    double arrival_s = 0;
    double deadline_s = 0; // relative budget
    std::optional<double> completion_s; // C_w - A_w, absent when never completed
    WorkflowStatus status = WorkflowStatus::Infeasible;
    bool deadline_met = false;
    std::optional<double> violation_s;  // max(0, C_w - A_w - D_w)
    std::size_t functions = 0;
    std::size_t offloaded = 0;
    bool internal = true;
    std::uint64_t candidate_evaluations = 0;
    std::uint64_t mode_evaluations = 0;
    std::uint64_t remote_evaluations = 0;
    std::uint64_t deferrals = 0;
};

struct FunctionRow {
    std::uint64_t workflow_id = 0;
    std::size_t function = 0;
    std::string function_id;
    int origin = 0;
    int cluster = -1;
    int worker = -1;
    ExecutionMode mode = ExecutionMode::WarmExecution;
    ExecutionMode executed_mode = ExecutionMode::WarmExecution;
    double enqueue_s = 0, run_start_s = 0, start_exec_s = 0, finish_s = 0;
    bool offloaded = false;
    bool lost = false;
};

struct RateStat {
    std::size_t count = 0;
    std::size_t met = 0;
    double rate() const { return count ? static_cast<double>(met) / static_cast<double>(count) : 0.0; }
};

// Aggregate over a set of workflows and the functions they own.
struct Summary {
    std::size_t workflows = 0;
    std::size_t completed = 0;
    std::size_t met = 0;
    std::size_t late = 0;
    std::size_t lost = 0;
    std::size_t infeasible = 0;
    double satisfaction = 0;
    double mean_completion_s = 0;
    double sd_completion_s = 0;
    double mean_violation_s = 0; // over late workflows
    double max_violation_s = 0;
    std::size_t functions = 0;           // executed (not lost)
    std::size_t internal_functions = 0;
    double internal_share = 0;           // functions run in the origin cluster
    double workflow_internal_share = 0;  // workflows with no offloaded function
    std::array<double, 4> mode_share{};  // warm, warm scaling, cold scaling, offloading
    // Work proxy for decision latency: evaluations per planned workflow.
    double candidate_evaluations_per_decision = 0;
    double remote_evaluations_per_decision = 0;
};

struct Handover {
    std::size_t epoch = 0;
    double time_s = 0;
    std::optional<int> from;
    std::optional<int> to;
};

struct Metrics {
    std::string strategy;
    std::vector<std::string> cluster_names;
    std::vector<WorkflowRow> workflows;
    std::vector<FunctionRow> functions;
    Summary overall;
    std::vector<Summary> per_cluster; // by origin
    std::map<std::string, Summary> per_workflow_type;
    std::map<std::string, RateStat> by_deadline_class;
    std::map<std::string, RateStat> by_size_class;
    std::vector<double> violations; // late workflows, ascending
    double utilization_window_s = 10;
    std::vector<std::vector<double>> utilization; // per cluster, per window
    std::vector<double> mean_utilization;
    std::vector<std::vector<double>> load_series;   // per cluster, per epoch
    std::vector<std::optional<int>> holder;         // per epoch
    std::vector<double> epoch_time_s;
    std::vector<Handover> handovers;
};

Metrics compute_metrics(const SimulationReport& report, Time utilization_window = Time::seconds(10.0));

double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v); // sample standard deviation

// Deterministic fixed-point text for exports.
std::string fmt(double v);

std::string workflows_csv(const Metrics& m);
std::string functions_csv(const Metrics& m);
std::string timeseries_csv(const Metrics& m);
std::string super_master_csv(const Metrics& m);
// Flat scalar view of the aggregates, used for JSON and sweep statistics.
std::map<std::string, double> scalar_metrics(const Metrics& m);
std::string aggregate_json(const Metrics& m);
// Plot-data files keyed by figure, as (file name, contents).
std::vector<std::pair<std::string, std::string>> plot_data(const Metrics& m);

} // namespace clusterless
