#include "clusterless/intra.hpp"

#include <algorithm>

namespace clusterless {

ExecutionMode next_mode(ExecutionMode mode) {
    switch (mode) {
    case ExecutionMode::WarmExecution: return ExecutionMode::WarmScaling;
    case ExecutionMode::WarmScaling: return ExecutionMode::ColdScaling;
    case ExecutionMode::ColdScaling: return ExecutionMode::Offloading;
    case ExecutionMode::Offloading: break;
    }
    throw Error("offloading has no successor mode");
}

BottleneckResult identify_bottleneck(const WorkflowInstance& w, const LocalPlan& plan,
                                     const std::set<std::size_t>& exhausted) {
    BottleneckResult out;
    for (std::size_t f = 0; f < w.size(); ++f) {
        const auto& e = plan.at(f);
        if (e.external || exhausted.count(f)) continue;
        // Eligible once every predecessor is settled: offloaded, or tried in
        // all modes. Lateness inherited from upstream is resolved first.
        const auto& preds = w.predecessors(f);
        const bool preds_settled = std::all_of(preds.begin(), preds.end(), [&](std::size_t g) {
            return plan.at(g).external || exhausted.count(g);
        });
        if (!preds_settled) continue;
        if (!out.bottleneck) {
            out.bottleneck = f;
            continue;
        }
        const auto& b = plan.at(*out.bottleneck);
        if (e.finish > b.finish || (e.finish == b.finish && w.function(f).id < w.function(*out.bottleneck).id)) {
            out.bottleneck = f;
        }
    }
    if (!out.bottleneck) {
        for (std::size_t f = 0; f < w.size(); ++f) out.committed.push_back(f);
        return out;
    }
    std::vector<bool> pending(w.size(), false);
    for (auto d : w.descendants(*out.bottleneck)) pending[d] = true;
    for (std::size_t f = 0; f < w.size(); ++f) {
        if (!plan[f].planned() && !plan[f].external) pending[f] = true;
    }
    pending[*out.bottleneck] = false;
    for (auto f : w.topological_order()) {
        if (f == *out.bottleneck) continue;
        (pending[f] ? out.pending : out.committed).push_back(f);
    }
    return out;
}

AvailabilitySet get_available(const FunctionSpec& f, ExecutionMode mode, const ClusterState& cluster) {
    if (mode == ExecutionMode::Offloading) throw Error("no local availability for offloading");
    AvailabilitySet out;
    out.mode = mode;
    for (const auto& w : cluster.workers) {
        if (!mode_ready(w, f, mode)) continue;
        // Capacity view only; the time-resolved check happens per slot.
        if (!(1.0 <= w.cpu_capacity_total && f.mem_demand <= w.mem_total)) continue;
        out.candidates.push_back(w.id);
    }
    return out;
}

std::vector<PredecessorState> predecessor_states(const WorkflowInstance& w, const LocalPlan& plan, std::size_t f,
                                                 int origin, Time ingress_time) {
    std::vector<PredecessorState> out;
    const auto& preds = w.predecessors(f);
    if (preds.empty()) {
        out.push_back({f, ingress_time, w.function(f).input_size, origin, kIngress});
        return out;
    }
    for (auto g : preds) {
        const auto& e = plan.at(g);
        out.push_back({g, e.finish, w.function(g).output_size, e.cluster, e.worker.value_or(kIngress)});
    }
    return out;
}

namespace {

PlacementContext placement_context(const ClusterState& cluster, const IntraContext& ctx) {
    PlacementContext p;
    p.now = ctx.now;
    p.window = ctx.epoch_len;
    p.release = ctx.now;
    p.cluster = cluster.id;
    p.inter_bandwidth = ctx.inter_bandwidth;
    p.inter_delay = ctx.inter_delay;
    return p;
}

Candidate candidate_of(const PlanEntry& e) {
    Candidate c;
    c.worker = e.worker.value_or(-1);
    c.mode = e.executed_mode;
    c.replica = e.executed_mode == ExecutionMode::WarmExecution ? e.replica : -1;
    c.start = e.start;
    c.slot_begin = e.slot_begin;
    c.finish = e.finish;
    return c;
}

void withdraw_entry(const WorkflowInstance& w, const PlanEntry& e, ClusterState& cluster) {
    if (e.external || !e.planned() || !e.worker) return;
    withdraw(cluster.workers.at(static_cast<std::size_t>(*e.worker)), reservation_tag(w.id(), e.function));
}

Time plan_finish(const LocalPlan& plan) {
    Time c = Time::zero();
    for (const auto& e : plan) c = max(c, e.finish);
    return c;
}

} // namespace

void commit_local(const WorkflowInstance& w, PlanEntry& entry, const Candidate& c, ClusterState& cluster,
                  Time release) {
    auto& worker = cluster.workers.at(static_cast<std::size_t>(c.worker));
    entry.replica = reserve(worker, c, w.function(entry.function), reservation_tag(w.id(), entry.function));
    entry.external = false;
    entry.worker = c.worker;
    entry.cluster = cluster.id;
    entry.mode = c.mode;
    entry.executed_mode = c.mode;
    entry.start = c.start;
    entry.slot_begin = c.slot_begin;
    entry.finish = c.finish;
    entry.release = release;
}

void withdraw_plan(const WorkflowInstance& w, const LocalPlan& plan, ClusterState& cluster) {
    for (const auto& e : plan) withdraw_entry(w, e, cluster);
}

PlanEntry func_orch(const WorkflowInstance& w, const LocalPlan& plan, const PlanEntry& entry,
                    const AvailabilitySet& avail, const ClusterState& cluster, const IntraContext& ctx,
                    IntraStats* stats) {
    PlanEntry out = entry;
    out.worker.reset();
    out.start = out.finish = out.slot_begin = Time::infinity();
    out.mode = avail.mode;
    const auto preds = predecessor_states(w, plan, entry.function, cluster.id, ctx.now);
    const auto pctx = placement_context(cluster, ctx);
    std::uint64_t evals = 0;
    auto best = best_candidate(cluster, avail.candidates, w.function(entry.function), avail.mode, preds, pctx, &evals);
    if (stats) stats->candidate_evaluations += evals;
    if (!best) return out;
    out.worker = best->worker;
    out.cluster = cluster.id;
    out.executed_mode = best->mode;
    out.replica = best->replica;
    out.start = best->start;
    out.slot_begin = best->slot_begin;
    out.finish = best->finish;
    out.release = ctx.now;
    return out;
}

ApplyResult apply_mode(const WorkflowInstance& w, std::size_t f, ExecutionMode mode, LocalPlan& plan,
                       ClusterState& cluster, const IntraContext& ctx, const OffloadChannel* channel,
                       IntraStats* stats) {
    if (stats) ++stats->mode_evaluations;
    const PlanEntry current = plan.at(f);
    ApplyResult result;
    result.entry = current;

    if (mode == ExecutionMode::Offloading) {
        if (!channel || !*channel) return result;
        OffloadRequest req;
        req.workflow_id = w.id();
        req.function = f;
        req.function_id = w.function(f).id;
        req.origin = cluster.id;
        req.local_finish = current.finish;
        req.arrival = w.arrival();
        req.deadline_abs = w.deadline_abs();
        req.spec = w.function(f);
        req.preds = predecessor_states(w, plan, f, cluster.id, ctx.now);
        if (stats) ++stats->offload_requests;
        auto ack = (*channel)(req);
        if (!ack || ack->retained || ack->destination == cluster.id) return result;
        if (stats) ++stats->offload_acks;
        withdraw_entry(w, current, cluster);
        PlanEntry e = current;
        e.external = true;
        e.mode = ExecutionMode::Offloading;
        e.cluster = ack->destination;
        e.worker = ack->assignment.worker;
        e.executed_mode = ack->assignment.mode;
        e.replica = ack->assignment.replica;
        e.start = ack->assignment.start;
        e.slot_begin = ack->assignment.slot_begin;
        e.finish = ack->projected_finish;
        e.release = ack->release;
        plan[f] = e;
        result.success = true;
        result.entry = e;
        return result;
    }

    withdraw_entry(w, current, cluster);
    PlanEntry probe = current;
    probe.mode = mode;
    auto avail = get_available(w.function(f), mode, cluster);
    PlanEntry next = func_orch(w, plan, probe, avail, cluster, ctx, stats);
    if (next.planned() && next.finish < current.finish) {
        Candidate c;
        c.worker = *next.worker;
        c.replica = next.replica;
        c.mode = next.executed_mode;
        c.start = next.start;
        c.slot_begin = next.slot_begin;
        c.finish = next.finish;
        commit_local(w, next, c, cluster, ctx.now);
        plan[f] = next;
        result.success = true;
        result.entry = next;
        return result;
    }
    // Probe was side-effect free: put the previous reservation back.
    if (current.planned() && !current.external) {
        PlanEntry restored = current;
        commit_local(w, restored, candidate_of(current), cluster, current.release);
        plan[f] = restored;
        result.entry = restored;
    }
    return result;
}

IntraOutcome orchestrate_workflow(const WorkflowInstance& w, ClusterState& cluster, const IntraContext& ctx,
                                  const OffloadChannel* channel) {
    IntraOutcome out;
    auto& plan = out.plan;
    plan.resize(w.size());
    for (std::size_t f = 0; f < w.size(); ++f) {
        plan[f].workflow_id = w.id();
        plan[f].function = f;
        plan[f].mode = ExecutionMode::WarmExecution;
        plan[f].release = ctx.now;
    }

    auto replan = [&](std::size_t f) {
        auto avail = get_available(w.function(f), plan[f].mode, cluster);
        PlanEntry e = func_orch(w, plan, plan[f], avail, cluster, ctx, &out.stats);
        if (e.planned()) {
            Candidate c;
            c.worker = *e.worker;
            c.replica = e.replica;
            c.mode = e.executed_mode;
            c.start = e.start;
            c.slot_begin = e.slot_begin;
            c.finish = e.finish;
            commit_local(w, e, c, cluster, ctx.now);
        }
        plan[f] = e;
    };

    // Every function starts in warm execution; place them in dependency order.
    for (auto f : w.topological_order()) replan(f);

    std::set<std::size_t> exhausted;
    // Refinement work is linear in the workflow size.
    const std::uint64_t budget = kModeBudgetPerFunction * w.size();

    while (plan_finish(plan) > w.deadline_abs()) {
        if (out.stats.mode_evaluations >= budget) break;
        ++out.stats.refinement_iterations;
        auto ib = identify_bottleneck(w, plan, exhausted);
        if (!ib.bottleneck) break;
        const auto bn = *ib.bottleneck;

        // Escalate from the committed mode; failed probes commit nothing.
        bool success = false;
        ExecutionMode em = plan[bn].mode;
        while (!success && em != ExecutionMode::Offloading && out.stats.mode_evaluations < budget) {
            em = next_mode(em);
            success = apply_mode(w, bn, em, plan, cluster, ctx, channel, &out.stats).success;
        }
        if (!success) {
            exhausted.insert(bn);
            continue;
        }

        // Re-place the affected functions under their current modes.
        for (auto f : ib.pending) {
            if (!plan[f].external) withdraw_entry(w, plan[f], cluster);
        }
        for (auto f : ib.pending) {
            if (plan[f].external) continue;
            replan(f);
        }
    }

    out.finish = plan_finish(plan);
    out.deadline_met = out.finish <= w.deadline_abs();
    return out;
}

} // namespace clusterless
