#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clusterless/inter.hpp"
#include "clusterless/intra.hpp"
#include "clusterless/model.hpp"

namespace clusterless {

// Step-wise bandwidth trace in MB/s. Lookups before the first sample use the
// first rate and past the last sample keep the last rate.
class BandwidthTrace {
public:
    BandwidthTrace() = default;
    BandwidthTrace(std::vector<std::pair<double, double>> samples, double phase_shift = 0.0);

    static BandwidthTrace constant(double rate);
    static BandwidthTrace load(const std::filesystem::path& path, double phase_shift = 0.0);
    void save(const std::filesystem::path& path) const;

    double rate_at(Time t) const;
    // First instant strictly after t at which the rate may change.
    std::optional<Time> next_change(Time t) const;

    BandwidthTrace shifted(double phase) const;
    BandwidthTrace scaled(double factor) const;

    const std::vector<std::pair<double, double>>& samples() const { return samples_; }
    double phase_shift() const { return phase_; }
    bool empty() const { return samples_.empty(); }

private:
    std::vector<std::pair<double, double>> samples_;
    double phase_ = 0.0;
};

// Completion instant of moving `output_mb` over an otherwise idle link.
Time transfer(double output_mb, const BandwidthTrace& link, Time t0);

enum class EventKind : std::uint8_t {
    // Declaration order is the tie-break order at equal time.
    ClusterFail,
    ClusterRecover,
    EpochTick,
    HeartbeatEmit,
    FunctionFinish,
    TransferFinish,
    ScaleReady,
    FunctionStart,
    TransferStart,
    WorkflowArrival,
};

std::string_view to_string(EventKind kind);

struct SimEvent {
    Time time;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::EpochTick;
    int cluster = -1;
    int worker = -1;
    std::uint64_t ref = 0; // reservation tag, workflow index, flow or link id
    std::uint64_t aux = 0; // link generation
};

bool event_before(const SimEvent& a, const SimEvent& b);

struct ExecutionRecord {
    std::uint64_t workflow_id = 0;
    std::string function_id;
    std::size_t function = 0;
    int cluster = -1;
    int worker = -1;
    ExecutionMode mode = ExecutionMode::WarmExecution;          // Offloading when dispatched remotely
    ExecutionMode executed_mode = ExecutionMode::WarmExecution; // mode used where it ran
    Time enqueue;    // inputs present and release reached
    Time run_start;  // core acquired
    Time start_exec; // setup done, code running
    Time finish;
    bool was_offloaded = false;
    bool lost = false;
};

enum class WorkflowStatus : std::uint8_t { OnTime, Late, Infeasible, Lost };
std::string_view to_string(WorkflowStatus s);

struct WorkflowResult {
    std::uint64_t id = 0;
    WorkflowTag tag;
    int origin = 0;
    Time arrival;
    Time deadline_abs;
    Time planned_at = Time::infinity();
    Time planned_finish = Time::infinity();
    Time completion = Time::infinity();
    WorkflowStatus status = WorkflowStatus::Infeasible;
    std::size_t functions = 0;
    std::size_t offloaded = 0;
    std::uint64_t candidate_evaluations = 0;
    std::uint64_t mode_evaluations = 0;
    std::uint64_t remote_evaluations = 0;
    std::uint64_t deferrals = 0;
};

struct PlanEnv {
    Time now;
    FederationState* federation = nullptr;
    const SuperMasterRecord* super_master = nullptr;
    // True when the super-master can arbitrate offloads right now.
    bool channel_up = false;
    InterStats* inter = nullptr;
};

struct PlanResult {
    LocalPlan plan;
    bool deadline_met = false;
    // Nothing was committed; try again at the next epoch.
    bool defer = false;
    IntraStats intra;
    std::uint64_t remote_evaluations = 0;
};

// Orchestration strategy plugged into the kernel.
class Planner {
public:
    virtual ~Planner() = default;
    virtual std::string name() const = 0;
    // Plan at arrival instead of batching at the next epoch.
    virtual bool plans_at_arrival() const { return false; }
    // Must leave the federation's books holding exactly the returned plan's
    // reservations (or none when deferring).
    virtual PlanResult plan(const WorkflowInstance& w, PlanEnv& env) = 0;
};

struct WorkerSpec {
    std::string node_class;
    int cores = 1;
    double mem_bytes = 1.0;
    double speed_factor = 1.0;
    Time warm_scale_delay = Time::zero();
    Time cold_start_delay = Time::zero();
    Time image_pull_delay = Time::zero();
};

struct ClusterSpec {
    std::string name;
    std::string master_class;
    std::vector<WorkerSpec> workers;
    BandwidthTrace trace; // cluster trace before scaling
};

struct FailureWindow {
    int cluster = 0;
    Time down_at;
    Time up_at;
};

// One idle replica of an image present on a worker at t = 0.
struct Deployment {
    int cluster = 0;
    int worker = 0;
    std::string image;
};

struct SimConfig {
    std::vector<ClusterSpec> clusters;
    Time epoch_len = Time::seconds(1.0);
    Time fail_timeout = Time::seconds(5.0);
    double load_threshold = 0.75;
    std::vector<std::vector<Time>> inter_delay;
    double intra_scale = 1.0;       // intra-cluster rate = trace * scale
    double inter_scale = 1.0;       // inter-cluster rate = sender trace * scale
    double intra_phase_step = 0.0;  // seconds of phase shift per destination worker
    Time status_delay = Time::zero();
    std::optional<Time> warm_ttl;
    bool fair_share = true;         // false gives every transfer the full link rate
    Time horizon = Time::seconds(600.0);
    std::vector<WorkflowInstance> workload; // sorted by arrival
    std::vector<FailureWindow> failures;
    // Images present on every worker at t = 0, each with one idle replica.
    std::vector<std::string> prewarmed_images;
    std::vector<Deployment> deployments;
};

struct SimulationReport {
    std::string strategy;
    std::vector<ExecutionRecord> records;
    std::vector<WorkflowResult> workflows;
    std::vector<SuperMasterRecord> super_master;
    // Per cluster, normalized load sampled at every epoch tick.
    std::vector<std::vector<double>> load_series;
    std::vector<int> cluster_cores;
    std::vector<std::string> cluster_names;
    Time horizon;
    Time end_time;
    Time epoch_len;
    std::uint64_t events = 0;
    InterStats inter;
};

// Builds the initial federation state from a configuration.
FederationState build_federation(const SimConfig& config);

class Simulator {
public:
    Simulator(SimConfig config, std::shared_ptr<Planner> planner);
    ~Simulator();

    // Registers a failure window; overlapping windows on one cluster throw.
    void inject_failure(int cluster, Time down_at, Time up_at);

    SimulationReport run();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SimulationReport run(const SimConfig& config, std::shared_ptr<Planner> planner);

// Busy core time over total core time per window for one cluster.
std::vector<double> cpu_utilization_series(const SimulationReport& report, int cluster, Time window);

} // namespace clusterless
