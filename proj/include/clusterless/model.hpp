#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clusterless/time.hpp"

namespace clusterless {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Ordered: each mode is an escalation of the previous one.
enum class ExecutionMode : std::uint8_t {
    WarmExecution = 0,
    WarmScaling = 1,
    ColdScaling = 2,
    Offloading = 3,
};

std::string_view to_string(ExecutionMode mode);
ExecutionMode parse_execution_mode(std::string_view text);

struct FunctionSpec {
    std::string id;
    // Function type; warm pools and pulled images are keyed by it.
    std::string image;
    double cpu_demand = 1.0;  // CPU-seconds on a unit-speed core
    double mem_demand = 1.0;  // bytes
    double input_size = 0.0;  // MB
    double output_size = 0.0; // MB

    void validate() const;
};

// Category of a workflow request; used for reporting and by the
// category-mapped offloading baseline.
struct WorkflowTag {
    int template_index = 0; // 1-based
    std::string workflow;
    std::string size_class;
    std::string deadline_class;
};

using Edge = std::pair<std::size_t, std::size_t>;

class WorkflowInstance {
public:
    WorkflowInstance(std::uint64_t id, std::vector<FunctionSpec> functions, std::vector<Edge> edges,
                     Time arrival, Time deadline, int origin_cluster, WorkflowTag tag = {});

    std::uint64_t id() const { return id_; }
    std::size_t size() const { return functions_.size(); }
    const std::vector<FunctionSpec>& functions() const { return functions_; }
    const FunctionSpec& function(std::size_t f) const { return functions_.at(f); }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::size_t>& predecessors(std::size_t f) const { return preds_.at(f); }
    const std::vector<std::size_t>& successors(std::size_t f) const { return succs_.at(f); }
    const std::vector<std::size_t>& topological_order() const { return topo_; }
    // Every function reachable from f, excluding f, in topological order.
    std::vector<std::size_t> descendants(std::size_t f) const;
    std::optional<std::size_t> index_of(std::string_view function_id) const;

    Time arrival() const { return arrival_; }
    Time deadline() const { return deadline_; }
    Time deadline_abs() const { return arrival_ + deadline_; }
    int origin_cluster() const { return origin_; }
    const WorkflowTag& tag() const { return tag_; }

private:
    std::uint64_t id_;
    std::vector<FunctionSpec> functions_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> preds_;
    std::vector<std::vector<std::size_t>> succs_;
    std::vector<std::size_t> topo_;
    Time arrival_;
    Time deadline_;
    int origin_;
    WorkflowTag tag_;
};

// A reserved interval on a core or replica timeline.
struct Interval {
    Time begin;
    Time end;
    std::uint64_t tag = 0;
    double mem = 0.0;
};

// Non-overlapping-by-construction list of reservations, sorted by begin.
// The kernel may stretch an interval when execution deviates from plan, so
// overlap is tolerated by every query.
class Timeline {
public:
    void insert(Interval iv);
    bool erase(std::uint64_t tag);
    bool contains(std::uint64_t tag) const;
    // Replaces the bounds of the interval carrying tag.
    bool update(std::uint64_t tag, Time begin, Time end);
    bool free_over(Time begin, Time end) const;
    // Drops intervals that ended at or before now.
    void prune(Time now);
    bool empty() const { return intervals_.empty(); }
    Time last_end() const;
    const std::vector<Interval>& intervals() const { return intervals_; }

private:
    std::vector<Interval> intervals_;
};

// One function replica on a worker. A replica serves one request at a time.
struct Replica {
    Timeline timeline;
    std::uint64_t creator = 0;             // spawning reservation, 0 once it has run
    bool retired = false;                  // withdrawn or expired; never reused
    Time available_from = Time::zero();    // usable for warm execution from here
    Time last_used = Time::zero();
};

struct WorkerState {
    int id = 0;
    std::string node_class;
    double cpu_capacity_total = 1.0; // cores
    double cpu_available = 1.0;      // cores free at the snapshot instant
    double mem_total = 1.0;          // bytes
    double mem_available = 1.0;      // bytes free at the snapshot instant
    double speed_factor = 1.0;
    int concurrency_cap = 1;
    int active_instances = 0;
    Time warm_scale_delay = Time::zero();
    Time cold_start_delay = Time::zero();
    Time image_pull_delay = Time::zero(); // added to cold starts when the image is absent

    // Run queue: reserved slots per core.
    std::vector<Timeline> cores;
    // Warm pool: replicas per function image.
    std::map<std::string, std::vector<Replica>> replicas;
    // Present images; the value is the reservation that pulls it, 0 once pulled.
    std::map<std::string, std::uint64_t> images;

    Time exec_time(const FunctionSpec& f) const;
    bool is_warm(const std::string& image) const;
    bool has_image(const std::string& image) const { return images.count(image) != 0; }
    std::set<std::string> warm_pool() const;
    void validate() const;
};

WorkerState make_worker(int id, std::string node_class, int cores, double mem_bytes, double speed_factor,
                        Time warm_scale_delay, Time cold_start_delay, Time image_pull_delay);

// Bandwidth in MB/s between two workers of a cluster; worker index -1
// denotes the cluster's ingress point (where workflow inputs arrive).
using IntraBandwidth = std::function<double(int from_worker, int to_worker, Time t)>;
// Bandwidth in MB/s between two clusters.
using InterBandwidth = std::function<double(int from_cluster, int to_cluster, Time t)>;

inline constexpr int kIngress = -1;

struct ClusterState {
    int id = 0;
    std::string name;
    std::string master_id;
    std::vector<WorkerState> workers;
    Time last_heartbeat = Time::zero();
    IntraBandwidth intra_bandwidth;

    void validate(Time now) const;
};

struct PlanEntry {
    std::uint64_t workflow_id = 0;
    std::size_t function = 0;
    bool external = false;
    std::optional<int> worker;
    ExecutionMode mode = ExecutionMode::WarmExecution;
    Time start = Time::infinity();  // inputs available (earliest start)
    Time finish = Time::infinity();

    // Placement detail kept for execution.
    int cluster = -1;               // executing cluster
    Time release = Time::zero();    // not executable before this instant
    Time slot_begin = Time::infinity(); // core acquired (start + queueing delay)
    int replica = -1;               // replica index on the worker
    ExecutionMode executed_mode = ExecutionMode::WarmExecution; // local mode used where it runs

    bool planned() const { return finish.is_finite(); }
};

using LocalPlan = std::vector<PlanEntry>;

struct FederationState {
    std::vector<ClusterState> clusters;
    std::optional<int> super_master;
    Time epoch_len = Time::seconds(1.0);
    Time fail_timeout = Time::seconds(5.0);
    double load_threshold = 0.75;
    InterBandwidth inter_bandwidth;
    std::vector<std::vector<Time>> inter_delay;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Timing and feasibility calculators.

// Mean of active/cap over the cluster's workers.
double normalized_load(const ClusterState& cluster);

bool is_alive(Time t_e, Time last_heartbeat, Time fail_timeout);

Time serving_time(ExecutionMode mode, Time queue_delay, Time warm_scale_delay, Time cold_start_delay,
                  Time exec_time);

// Zero on the same worker, otherwise output / bandwidth rounded up to the
// next microsecond. Throws on a dead cross-worker link.
Time transfer_delay(double pred_output_mb, bool same_worker, double bandwidth_mbps);

// pred_finishes and pred_transfer are keyed by predecessor index.
Time earliest_start(std::size_t f, const WorkflowInstance& workflow, const std::map<std::size_t, Time>& pred_finishes,
                    const std::map<std::size_t, Time>& pred_transfer);

Time completion(Time start, Time serving);

Time remote_completion(Time t_e, Time remote_start, Time inter_delay, Time remote_serving);

// Literal capacity check: cpu_demand <= cpu_available and mem <= mem_available.
bool resource_feasible(double cpu_demand, double mem_demand, const WorkerState& worker);
bool resource_feasible(const FunctionSpec& f, const WorkerState& worker);

// The transfer must complete within one window at the given bandwidth.
bool bandwidth_feasible(double pred_output_mb, double available_bw, Time window);

Time effective_completion(const PlanEntry& entry, std::optional<Time> global_override = std::nullopt);

struct WorkflowFinish {
    Time completion;
    bool deadline_met;
};

// Throws when some function has no effective completion.
WorkflowFinish workflow_finish(const WorkflowInstance& workflow, const LocalPlan& plan,
                               const std::map<std::size_t, Time>& overrides = {});

// ---------------------------------------------------------------------------
// Placement: where and when a function can run on a worker given its
// predecessors. Each candidate is evaluated with the calculators above.

struct PredecessorState {
    std::size_t function = 0;
    Time finish = Time::infinity();
    double output_mb = 0.0;
    int cluster = -1;
    int worker = kIngress; // kIngress marks the workflow input
};

struct PlacementContext {
    Time now;            // decision instant; bandwidth is sampled here
    Time window;         // bandwidth-feasibility window (one control epoch)
    Time release;        // the function never starts before this
    int cluster = 0;     // cluster being evaluated
    const InterBandwidth* inter_bandwidth = nullptr;
    const std::vector<std::vector<Time>>* inter_delay = nullptr;
};

struct Candidate {
    int worker = -1;
    int replica = -1; // existing replica for warm execution, -1 spawns a new one
    ExecutionMode mode = ExecutionMode::WarmExecution;
    Time start = Time::infinity();
    Time slot_begin = Time::infinity();
    Time finish = Time::infinity();
};

// Readiness of a worker for a mode, ignoring time: warm execution needs a
// live replica, warm scaling a present image, cold scaling nothing. All
// modes require the function to fit the worker's capacity.
bool mode_ready(const WorkerState& worker, const FunctionSpec& f, ExecutionMode mode);

// Earliest input-availability time of f on a worker (transfer plus start rule, with the
// ingress and cross-cluster extensions), or nullopt when some dependency
// fails the bandwidth-feasibility check.
std::optional<Time> ready_time_on(const ClusterState& cluster, int worker, const FunctionSpec& f,
                                  std::span<const PredecessorState> preds, const PlacementContext& ctx);

// Best slot for f on one worker under a local mode, or nullopt.
std::optional<Candidate> evaluate_worker(const ClusterState& cluster, int worker, const FunctionSpec& f,
                                         ExecutionMode mode, std::span<const PredecessorState> preds,
                                         const PlacementContext& ctx);

// Minimum-finish candidate over the given workers; ties go to the lowest
// worker id. Counts evaluations when a counter is supplied.
std::optional<Candidate> best_candidate(const ClusterState& cluster, std::span<const int> workers,
                                        const FunctionSpec& f, ExecutionMode mode,
                                        std::span<const PredecessorState> preds, const PlacementContext& ctx,
                                        std::uint64_t* evaluations = nullptr);

// Best over every worker and every local mode.
std::optional<Candidate> best_any_mode(const ClusterState& cluster, const FunctionSpec& f,
                                       std::span<const PredecessorState> preds, const PlacementContext& ctx,
                                       std::uint64_t* evaluations = nullptr);

std::uint64_t reservation_tag(std::uint64_t workflow_id, std::size_t function);

// Commits a candidate into the worker's book. Returns the replica index used.
int reserve(WorkerState& worker, const Candidate& c, const FunctionSpec& f, std::uint64_t tag);
// Withdraws a reservation; a replica spawned by it disappears when idle.
void withdraw(WorkerState& worker, std::uint64_t tag);

// Marks the spawned replica and pulled image of a reservation as real.
void settle(WorkerState& worker, std::uint64_t tag);

// Drops past intervals and expires idle replicas older than ttl.
void prune_worker(WorkerState& worker, Time now, std::optional<Time> warm_ttl);

} // namespace clusterless
