#include "clusterless/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>

namespace clusterless {

// ---------------------------------------------------------------------------
// Time

Time Time::seconds(double s) {
    if (std::isinf(s) && s > 0) return infinity();
    return Time(static_cast<rep>(std::llround(s * 1e6)));
}

Time Time::seconds_ceil(double s) {
    if (std::isinf(s) && s > 0) return infinity();
    // The 1e-6 us slack absorbs binary representation noise, e.g. 10/2.
    return Time(static_cast<rep>(std::ceil(s * 1e6 - 1e-6)));
}

double Time::to_seconds() const {
    if (is_infinite()) return std::numeric_limits<double>::infinity();
    return static_cast<double>(us_) / 1e6;
}

std::string format_seconds(Time t) {
    if (t.is_infinite()) return "inf";
    const auto us = t.count();
    const auto whole = us / 1000000;
    auto frac = us % 1000000;
    char buf[48];
    if (us < 0 && frac != 0) {
        std::snprintf(buf, sizeof buf, "-%lld.%06lld", static_cast<long long>(-(us / 1000000)),
                      static_cast<long long>(-frac));
    } else {
        std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(whole),
                      static_cast<long long>(frac < 0 ? -frac : frac));
    }
    return buf;
}

// ---------------------------------------------------------------------------
// ExecutionMode

std::string_view to_string(ExecutionMode mode) {
    switch (mode) {
    case ExecutionMode::WarmExecution: return "warm_execution";
    case ExecutionMode::WarmScaling: return "warm_scaling";
    case ExecutionMode::ColdScaling: return "cold_scaling";
    case ExecutionMode::Offloading: return "offloading";
    }
    return "unknown";
}

ExecutionMode parse_execution_mode(std::string_view text) {
    for (auto m : {ExecutionMode::WarmExecution, ExecutionMode::WarmScaling, ExecutionMode::ColdScaling,
                   ExecutionMode::Offloading}) {
        if (to_string(m) == text) return m;
    }
    throw Error("unknown execution mode: " + std::string(text));
}

// ---------------------------------------------------------------------------
// Workflow

void FunctionSpec::validate() const {
    if (!(cpu_demand > 0)) throw Error("function " + id + ": cpu_demand must be positive");
    if (!(mem_demand > 0)) throw Error("function " + id + ": mem_demand must be positive");
    if (!(input_size >= 0)) throw Error("function " + id + ": input_size must be non-negative");
    if (!(output_size >= 0)) throw Error("function " + id + ": output_size must be non-negative");
}

WorkflowInstance::WorkflowInstance(std::uint64_t id, std::vector<FunctionSpec> functions, std::vector<Edge> edges,
                                   Time arrival, Time deadline, int origin_cluster, WorkflowTag tag)
    : id_(id),
      functions_(std::move(functions)),
      edges_(std::move(edges)),
      preds_(functions_.size()),
      succs_(functions_.size()),
      arrival_(arrival),
      deadline_(deadline),
      origin_(origin_cluster),
      tag_(std::move(tag)) {
    if (functions_.empty()) throw Error("workflow has no functions");
    if (deadline_ <= Time::zero()) throw Error("workflow deadline must be positive");
    if (arrival_ < Time::zero()) throw Error("workflow arrival must be non-negative");
    for (const auto& f : functions_) f.validate();
    for (std::size_t i = 0; i < functions_.size(); ++i) {
        for (std::size_t j = i + 1; j < functions_.size(); ++j) {
            if (functions_[i].id == functions_[j].id) throw Error("duplicate function id: " + functions_[i].id);
        }
    }
    for (const auto& [g, f] : edges_) {
        if (g >= functions_.size() || f >= functions_.size()) throw Error("edge references unknown function");
        if (g == f) throw Error("self-loop on function " + functions_[g].id);
        preds_[f].push_back(g);
        succs_[g].push_back(f);
    }
    for (auto& p : preds_) std::sort(p.begin(), p.end());
    for (auto& s : succs_) std::sort(s.begin(), s.end());

    // Kahn with a min-heap: deterministic order, lowest index first.
    std::vector<std::size_t> indeg(functions_.size());
    for (std::size_t f = 0; f < functions_.size(); ++f) indeg[f] = preds_[f].size();
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t f = 0; f < functions_.size(); ++f) {
        if (indeg[f] == 0) ready.push(f);
    }
    while (!ready.empty()) {
        auto f = ready.top();
        ready.pop();
        topo_.push_back(f);
        for (auto s : succs_[f]) {
            if (--indeg[s] == 0) ready.push(s);
        }
    }
    if (topo_.size() != functions_.size()) throw Error("workflow graph has a cycle");
}

std::vector<std::size_t> WorkflowInstance::descendants(std::size_t f) const {
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack(succs_.at(f).begin(), succs_.at(f).end());
    while (!stack.empty()) {
        auto g = stack.back();
        stack.pop_back();
        if (seen[g]) continue;
        seen[g] = true;
        for (auto s : succs_[g]) stack.push_back(s);
    }
    std::vector<std::size_t> out;
    for (auto g : topo_) {
        if (seen[g]) out.push_back(g);
    }
    return out;
}

std::optional<std::size_t> WorkflowInstance::index_of(std::string_view function_id) const {
    for (std::size_t i = 0; i < functions_.size(); ++i) {
        if (functions_[i].id == function_id) return i;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Timeline

void Timeline::insert(Interval iv) {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), iv.begin,
                               [](Time b, const Interval& x) { return b < x.begin; });
    intervals_.insert(it, iv);
}

bool Timeline::erase(std::uint64_t tag) {
    auto it = std::find_if(intervals_.begin(), intervals_.end(), [&](const Interval& x) { return x.tag == tag; });
    if (it == intervals_.end()) return false;
    intervals_.erase(it);
    return true;
}

bool Timeline::contains(std::uint64_t tag) const {
    return std::any_of(intervals_.begin(), intervals_.end(), [&](const Interval& x) { return x.tag == tag; });
}

bool Timeline::update(std::uint64_t tag, Time begin, Time end) {
    auto it = std::find_if(intervals_.begin(), intervals_.end(), [&](const Interval& x) { return x.tag == tag; });
    if (it == intervals_.end()) return false;
    Interval iv = *it;
    intervals_.erase(it);
    iv.begin = begin;
    iv.end = end;
    insert(iv);
    return true;
}

bool Timeline::free_over(Time begin, Time end) const {
    for (const auto& iv : intervals_) {
        if (iv.begin >= end) break;
        if (iv.end > begin) return false;
    }
    return true;
}

void Timeline::prune(Time now) {
    std::erase_if(intervals_, [&](const Interval& x) { return x.end <= now; });
}

Time Timeline::last_end() const {
    Time t = Time::zero();
    for (const auto& iv : intervals_) t = max(t, iv.end);
    return t;
}

// ---------------------------------------------------------------------------
// Workers and clusters

Time WorkerState::exec_time(const FunctionSpec& f) const { return Time::seconds_ceil(f.cpu_demand * speed_factor); }

bool WorkerState::is_warm(const std::string& image) const {
    auto it = replicas.find(image);
    if (it == replicas.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [](const Replica& r) { return !r.retired; });
}

std::set<std::string> WorkerState::warm_pool() const {
    std::set<std::string> out;
    for (const auto& [image, _] : replicas) {
        if (is_warm(image)) out.insert(image);
    }
    return out;
}

void WorkerState::validate() const {
    if (concurrency_cap < 1) throw Error("worker concurrency cap must be at least 1");
    if (active_instances < 0 || active_instances > concurrency_cap) throw Error("worker active instances out of range");
    if (cpu_available < 0 || cpu_available > cpu_capacity_total) throw Error("worker cpu_available out of range");
    if (mem_available < 0 || mem_available > mem_total) throw Error("worker mem_available out of range");
    if (!(speed_factor > 0)) throw Error("worker speed factor must be positive");
    if (static_cast<int>(cores.size()) != concurrency_cap) throw Error("worker core timelines do not match cap");
}

WorkerState make_worker(int id, std::string node_class, int cores, double mem_bytes, double speed_factor,
                        Time warm_scale_delay, Time cold_start_delay, Time image_pull_delay) {
    WorkerState w;
    w.id = id;
    w.node_class = std::move(node_class);
    w.cpu_capacity_total = cores;
    w.cpu_available = cores;
    w.mem_total = mem_bytes;
    w.mem_available = mem_bytes;
    w.speed_factor = speed_factor;
    w.concurrency_cap = cores;
    w.warm_scale_delay = warm_scale_delay;
    w.cold_start_delay = cold_start_delay;
    w.image_pull_delay = image_pull_delay;
    w.cores.resize(static_cast<std::size_t>(cores));
    w.validate();
    return w;
}

void ClusterState::validate(Time now) const {
    if (workers.empty()) throw Error("cluster " + name + " has no workers");
    if (last_heartbeat > now) throw Error("cluster " + name + " heartbeat lies in the future");
    for (const auto& w : workers) w.validate();
}

void FederationState::validate() const {
    if (clusters.empty()) throw Error("federation has no clusters");
    if (!(load_threshold > 0 && load_threshold <= 1)) throw Error("load threshold must lie in (0, 1]");
    if (epoch_len <= Time::zero()) throw Error("epoch length must be positive");
    if (fail_timeout < epoch_len) throw Error("failure timeout must be at least one epoch");
    const auto n = clusters.size();
    if (inter_delay.size() != n) throw Error("inter-cluster delay matrix has wrong size");
    for (std::size_t i = 0; i < n; ++i) {
        if (inter_delay[i].size() != n) throw Error("inter-cluster delay matrix has wrong size");
        if (inter_delay[i][i] != Time::zero()) throw Error("inter-cluster delay must be zero on the diagonal");
        for (std::size_t j = 0; j < n; ++j) {
            if (inter_delay[i][j] < Time::zero()) throw Error("inter-cluster delay must be non-negative");
            if (inter_delay[i][j] != inter_delay[j][i]) throw Error("inter-cluster delay must be symmetric");
        }
    }
}

// ---------------------------------------------------------------------------
// Calculators

double normalized_load(const ClusterState& cluster) {
    if (cluster.workers.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& w : cluster.workers) {
        sum += static_cast<double>(w.active_instances) / static_cast<double>(w.concurrency_cap);
    }
    return sum / static_cast<double>(cluster.workers.size());
}

bool is_alive(Time t_e, Time last_heartbeat, Time fail_timeout) { return t_e - last_heartbeat <= fail_timeout; }

Time serving_time(ExecutionMode mode, Time queue_delay, Time warm_scale_delay, Time cold_start_delay, Time exec_time) {
    switch (mode) {
    case ExecutionMode::WarmExecution: return queue_delay + exec_time;
    case ExecutionMode::WarmScaling: return queue_delay + warm_scale_delay + exec_time;
    case ExecutionMode::ColdScaling: return queue_delay + cold_start_delay + exec_time;
    case ExecutionMode::Offloading: break;
    }
    throw Error("serving time is undefined for offloaded functions");
}

Time transfer_delay(double pred_output_mb, bool same_worker, double bandwidth_mbps) {
    if (same_worker) return Time::zero();
    if (!(bandwidth_mbps > 0)) throw Error("cross-worker transfer over a dead link");
    if (pred_output_mb <= 0) return Time::zero();
    return Time::seconds_ceil(pred_output_mb / bandwidth_mbps);
}

Time earliest_start(std::size_t f, const WorkflowInstance& workflow, const std::map<std::size_t, Time>& pred_finishes,
                    const std::map<std::size_t, Time>& pred_transfer) {
    const auto& preds = workflow.predecessors(f);
    if (preds.empty()) return workflow.arrival();
    Time start = Time::zero();
    for (auto g : preds) {
        auto fin = pred_finishes.find(g);
        if (fin == pred_finishes.end()) {
            throw Error("predecessor " + workflow.function(g).id + " of " + workflow.function(f).id + " not planned");
        }
        auto tr = pred_transfer.find(g);
        start = max(start, fin->second + (tr == pred_transfer.end() ? Time::zero() : tr->second));
    }
    return start;
}

Time completion(Time start, Time serving) { return start + serving; }

Time remote_completion(Time t_e, Time remote_start, Time inter_delay, Time remote_serving) {
    return max(remote_start, t_e) + inter_delay + remote_serving;
}

namespace {
bool fits(double cpu_need, double mem_need, double cpu_avail, double mem_avail) {
    return cpu_need <= cpu_avail && mem_need <= mem_avail;
}
} // namespace

bool resource_feasible(double cpu_demand, double mem_demand, const WorkerState& worker) {
    return fits(cpu_demand, mem_demand, worker.cpu_available, worker.mem_available);
}

bool resource_feasible(const FunctionSpec& f, const WorkerState& worker) {
    return resource_feasible(f.cpu_demand, f.mem_demand, worker);
}

bool bandwidth_feasible(double pred_output_mb, double available_bw, Time window) {
    if (pred_output_mb <= 0) return true;
    return pred_output_mb <= available_bw * window.to_seconds();
}

Time effective_completion(const PlanEntry& entry, std::optional<Time> global_override) {
    if (entry.external) {
        if (!global_override) throw Error("offloaded function has no resolved placement");
        return *global_override;
    }
    if (global_override) return *global_override;
    return entry.finish;
}

WorkflowFinish workflow_finish(const WorkflowInstance& workflow, const LocalPlan& plan,
                               const std::map<std::size_t, Time>& overrides) {
    if (plan.size() != workflow.size()) throw Error("plan does not cover the workflow");
    Time c = Time::zero();
    for (const auto& e : plan) {
        auto ov = overrides.find(e.function);
        std::optional<Time> o;
        if (ov != overrides.end()) o = ov->second;
        Time f = effective_completion(e, o);
        if (f.is_infinite()) throw Error("function " + workflow.function(e.function).id + " is unplanned");
        c = max(c, f);
    }
    return {c, c <= workflow.deadline_abs()};
}

// ---------------------------------------------------------------------------
// Placement

namespace {

Time setup_delay(const WorkerState& w, const FunctionSpec& f, ExecutionMode mode) {
    switch (mode) {
    case ExecutionMode::WarmExecution: return Time::zero();
    case ExecutionMode::WarmScaling: return w.warm_scale_delay;
    case ExecutionMode::ColdScaling:
        return w.cold_start_delay + (w.has_image(f.image) ? Time::zero() : w.image_pull_delay);
    case ExecutionMode::Offloading: break;
    }
    throw Error("no local setup delay for offloading");
}

// Memory reserved by intervals overlapping [b, e) on any core.
double overlapping_mem(const WorkerState& w, Time b, Time e) {
    double m = 0.0;
    for (const auto& core : w.cores) {
        for (const auto& iv : core.intervals()) {
            if (iv.begin >= e) break;
            if (iv.end > b) m += iv.mem;
        }
    }
    return m;
}

int free_core(const WorkerState& w, Time b, Time e) {
    for (std::size_t c = 0; c < w.cores.size(); ++c) {
        if (w.cores[c].free_over(b, e)) return static_cast<int>(c);
    }
    return -1;
}

// Earliest s >= from such that a core is free over [s, s + dur) and the
// worker's memory admits the function.
std::optional<Time> earliest_slot(const WorkerState& w, const FunctionSpec& f, Time from, Time dur) {
    std::vector<Time> points{from};
    for (const auto& core : w.cores) {
        for (const auto& iv : core.intervals()) {
            if (iv.end > from) points.push_back(iv.end);
        }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    for (Time s : points) {
        const Time e = s + dur;
        int c = free_core(w, s, e);
        if (c < 0) continue;
        // Resource check on the worker as projected over the slot: one free core and
        // the memory not held by overlapping reservations.
        if (!fits(1.0, f.mem_demand, 1.0, w.mem_total - overlapping_mem(w, s, e))) continue;
        return s;
    }
    return std::nullopt;
}

} // namespace

bool mode_ready(const WorkerState& worker, const FunctionSpec& f, ExecutionMode mode) {
    if (f.mem_demand > worker.mem_total || worker.concurrency_cap < 1) return false;
    switch (mode) {
    case ExecutionMode::WarmExecution: return worker.is_warm(f.image);
    case ExecutionMode::WarmScaling: return worker.has_image(f.image);
    case ExecutionMode::ColdScaling: return true;
    case ExecutionMode::Offloading: return false;
    }
    return false;
}

std::optional<Time> ready_time_on(const ClusterState& cluster, int worker, const FunctionSpec& f,
                                  std::span<const PredecessorState> preds, const PlacementContext& ctx) {
    Time ready = ctx.release;
    auto account = [&](const PredecessorState& p, double mb) -> bool {
        if (p.finish.is_infinite()) {
            ready = Time::infinity();
            return true;
        }
        Time theta = Time::zero();
        if (p.cluster == ctx.cluster) {
            const bool same = p.worker == worker;
            if (!same && mb > 0) {
                const double bw = cluster.intra_bandwidth ? cluster.intra_bandwidth(p.worker, worker, ctx.now) : 0.0;
                if (!(bw > 0) || !bandwidth_feasible(mb, bw, ctx.window)) return false;
                theta = transfer_delay(mb, false, bw);
            }
        } else {
            if (!ctx.inter_bandwidth || !ctx.inter_delay) return false;
            if (mb > 0) {
                const double bw = (*ctx.inter_bandwidth)(p.cluster, ctx.cluster, ctx.now);
                if (!(bw > 0) || !bandwidth_feasible(mb, bw, ctx.window)) return false;
                theta = transfer_delay(mb, false, bw);
            }
            theta += (*ctx.inter_delay)[static_cast<std::size_t>(p.cluster)][static_cast<std::size_t>(ctx.cluster)];
        }
        ready = max(ready, p.finish + theta);
        return true;
    };
    for (const auto& p : preds) {
        const double mb = p.worker == kIngress ? f.input_size : p.output_mb;
        if (!account(p, mb)) return std::nullopt;
    }
    return ready;
}

std::optional<Candidate> evaluate_worker(const ClusterState& cluster, int worker, const FunctionSpec& f,
                                         ExecutionMode mode, std::span<const PredecessorState> preds,
                                         const PlacementContext& ctx) {
    const auto& w = cluster.workers.at(static_cast<std::size_t>(worker));
    if (!mode_ready(w, f, mode)) return std::nullopt;
    auto ready = ready_time_on(cluster, worker, f, preds, ctx);
    if (!ready || ready->is_infinite()) return std::nullopt;

    const Time exec = w.exec_time(f);
    const Time setup = setup_delay(w, f, mode);
    Candidate best;
    best.worker = worker;
    best.mode = mode;
    best.start = *ready;

    if (mode == ExecutionMode::WarmExecution) {
        // Replicas serve concurrently; the worker's cores bound concurrency,
        // so the earliest materialized replica wins.
        const auto& reps = w.replicas.at(f.image);
        for (std::size_t k = 0; k < reps.size(); ++k) {
            if (reps[k].retired) continue;
            if (best.replica >= 0 && reps[k].available_from >= reps[static_cast<std::size_t>(best.replica)].available_from) {
                continue;
            }
            best.replica = static_cast<int>(k);
        }
        if (best.replica >= 0) {
            const auto from = max(*ready, reps[static_cast<std::size_t>(best.replica)].available_from);
            if (auto s = earliest_slot(w, f, from, exec)) best.slot_begin = *s;
        }
        if (best.slot_begin.is_infinite()) return std::nullopt;
    } else {
        auto s = earliest_slot(w, f, *ready, setup + exec);
        if (!s) return std::nullopt;
        best.slot_begin = *s;
    }

    const Time queue = best.slot_begin - best.start;
    const Time ws = mode == ExecutionMode::WarmScaling ? setup : Time::zero();
    const Time cs = mode == ExecutionMode::ColdScaling ? setup : Time::zero();
    best.finish = completion(best.start, serving_time(mode, queue, ws, cs, exec));
    return best;
}

std::optional<Candidate> best_candidate(const ClusterState& cluster, std::span<const int> workers,
                                        const FunctionSpec& f, ExecutionMode mode,
                                        std::span<const PredecessorState> preds, const PlacementContext& ctx,
                                        std::uint64_t* evaluations) {
    std::optional<Candidate> best;
    for (int z : workers) {
        if (evaluations) ++*evaluations;
        auto c = evaluate_worker(cluster, z, f, mode, preds, ctx);
        if (c && (!best || c->finish < best->finish)) best = c;
    }
    return best;
}

std::optional<Candidate> best_any_mode(const ClusterState& cluster, const FunctionSpec& f,
                                       std::span<const PredecessorState> preds, const PlacementContext& ctx,
                                       std::uint64_t* evaluations) {
    std::vector<int> all(cluster.workers.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    std::optional<Candidate> best;
    for (auto mode : {ExecutionMode::WarmExecution, ExecutionMode::WarmScaling, ExecutionMode::ColdScaling}) {
        auto c = best_candidate(cluster, all, f, mode, preds, ctx, evaluations);
        if (c && (!best || c->finish < best->finish)) best = c;
    }
    return best;
}

std::uint64_t reservation_tag(std::uint64_t workflow_id, std::size_t function) {
    return ((workflow_id + 1) << 8) | static_cast<std::uint64_t>(function & 0xff);
}

int reserve(WorkerState& w, const Candidate& c, const FunctionSpec& f, std::uint64_t tag) {
    int core = free_core(w, c.slot_begin, c.finish);
    if (core < 0) core = 0;
    w.cores[static_cast<std::size_t>(core)].insert({c.slot_begin, c.finish, tag, f.mem_demand});
    auto& reps = w.replicas[f.image];
    int k = c.replica;
    if (k < 0) {
        Replica r;
        r.creator = tag;
        r.available_from = c.finish;
        reps.push_back(std::move(r));
        k = static_cast<int>(reps.size()) - 1;
        if (!w.has_image(f.image)) w.images.emplace(f.image, tag);
    }
    auto& rep = reps[static_cast<std::size_t>(k)];
    rep.timeline.insert({c.slot_begin, c.finish, tag, 0.0});
    rep.last_used = max(rep.last_used, c.finish);
    return k;
}

void withdraw(WorkerState& w, std::uint64_t tag) {
    for (auto& core : w.cores) core.erase(tag);
    for (auto& [image, reps] : w.replicas) {
        for (auto& r : reps) {
            r.timeline.erase(tag);
            if (r.creator != tag) continue;
            // Other reservations already ride on this replica: keep it.
            if (r.timeline.empty()) r.retired = true;
            else r.creator = 0;
        }
    }
    std::erase_if(w.images, [&](const auto& kv) { return kv.second == tag && !w.is_warm(kv.first); });
}

void settle(WorkerState& w, std::uint64_t tag) {
    for (auto& [image, reps] : w.replicas) {
        for (auto& r : reps) {
            if (r.creator == tag) r.creator = 0;
        }
    }
    for (auto& [image, owner] : w.images) {
        if (owner == tag) owner = 0;
    }
}

void prune_worker(WorkerState& w, Time now, std::optional<Time> warm_ttl) {
    for (auto& core : w.cores) core.prune(now);
    for (auto& [image, reps] : w.replicas) {
        for (auto& r : reps) {
            r.timeline.prune(now);
            if (warm_ttl && !r.retired && r.creator == 0 && r.timeline.empty() && r.last_used + *warm_ttl < now) {
                r.retired = true;
            }
        }
    }
}

} // namespace clusterless
