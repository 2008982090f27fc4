#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "clusterless/model.hpp"

namespace clusterless {

// Inputs the super-master needs to place one offloaded function.
struct OffloadRequest {
    std::uint64_t workflow_id = 0;
    std::size_t function = 0;
    std::string function_id;
    int origin = 0;
    Time local_finish = Time::infinity();
    Time arrival = Time::zero();
    Time deadline_abs = Time::zero();
    FunctionSpec spec;
    // Predecessors as planned so far, plus an ingress entry for entry functions.
    std::vector<PredecessorState> preds;
};

// One inter-cluster decision: a dispatch to another cluster or retention at
// the origin.
struct GlobalPlacement {
    std::uint64_t workflow_id = 0;
    std::size_t function = 0;
    int destination = 0;
    Time projected_finish = Time::infinity();
    bool retained = true;
    Candidate assignment; // worker-level placement at the destination
    Time release = Time::zero();
};

// Request/acknowledge exchange with whoever arbitrates offloads. An empty
// result means no acknowledgement.
using OffloadChannel = std::function<std::optional<GlobalPlacement>(const OffloadRequest&)>;

// Upper bound on ApplyMode calls per function during one refinement.
inline constexpr std::uint64_t kModeBudgetPerFunction = 4;

struct IntraStats {
    std::uint64_t refinement_iterations = 0;
    std::uint64_t mode_evaluations = 0;      // ApplyMode calls
    std::uint64_t candidate_evaluations = 0; // worker slot evaluations
    std::uint64_t offload_requests = 0;
    std::uint64_t offload_acks = 0;
};

struct BottleneckResult {
    std::vector<std::size_t> committed;
    std::optional<std::size_t> bottleneck;
    std::vector<std::size_t> pending;
};

struct AvailabilitySet {
    ExecutionMode mode = ExecutionMode::WarmExecution;
    std::vector<int> candidates; // worker ids, ascending
};

struct IntraOutcome {
    LocalPlan plan;
    Time finish = Time::infinity();
    bool deadline_met = false;
    IntraStats stats;
};

// Successor in the escalation order; throws on Offloading.
ExecutionMode next_mode(ExecutionMode mode);

// Selects the non-external, non-exhausted function with the largest current
// finish among those whose predecessors are all settled (offloaded or
// exhausted). Ties go to the lexicographically smallest function id.
BottleneckResult identify_bottleneck(const WorkflowInstance& w, const LocalPlan& plan,
                                     const std::set<std::size_t>& exhausted);

AvailabilitySet get_available(const FunctionSpec& f, ExecutionMode mode, const ClusterState& cluster);

// Predecessor view of f under the plan; entry functions get an ingress
// predecessor at the origin finishing at ingress_time.
std::vector<PredecessorState> predecessor_states(const WorkflowInstance& w, const LocalPlan& plan, std::size_t f,
                                                 int origin, Time ingress_time);

struct IntraContext {
    Time now;
    Time epoch_len;
    const InterBandwidth* inter_bandwidth = nullptr;
    const std::vector<std::vector<Time>>* inter_delay = nullptr;
};

// Re-places an entry under its current mode against the cluster's book;
// the entry's own reservation must already be withdrawn. Infinite times
// when nothing is available.
PlanEntry func_orch(const WorkflowInstance& w, const LocalPlan& plan, const PlanEntry& entry,
                    const AvailabilitySet& avail, const ClusterState& cluster, const IntraContext& ctx,
                    IntraStats* stats = nullptr);

struct ApplyResult {
    bool success = false;
    PlanEntry entry;
};

// Evaluates the bottleneck under one mode. Local modes succeed when the best
// candidate strictly beats the current finish; offloading succeeds when the
// channel acknowledges. On success the cluster book reflects the new entry.
ApplyResult apply_mode(const WorkflowInstance& w, std::size_t f, ExecutionMode mode, LocalPlan& plan,
                       ClusterState& cluster, const IntraContext& ctx, const OffloadChannel* channel,
                       IntraStats* stats = nullptr);

// Full bottleneck-refinement loop for one workflow at its origin cluster.
// Reservations of the returned plan are committed to the cluster.
IntraOutcome orchestrate_workflow(const WorkflowInstance& w, ClusterState& cluster, const IntraContext& ctx,
                                  const OffloadChannel* channel);

// Commits a placement into the worker book and fills the entry.
void commit_local(const WorkflowInstance& w, PlanEntry& entry, const Candidate& c, ClusterState& cluster,
                  Time release);

// Removes every local reservation of the plan from the cluster.
void withdraw_plan(const WorkflowInstance& w, const LocalPlan& plan, ClusterState& cluster);

} // namespace clusterless
