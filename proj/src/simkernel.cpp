#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>

#include "clusterless/simkernel.hpp"

namespace clusterless {

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::ClusterFail: return "ClusterFail";
    case EventKind::ClusterRecover: return "ClusterRecover";
    case EventKind::EpochTick: return "EpochTick";
    case EventKind::HeartbeatEmit: return "HeartbeatEmit";
    case EventKind::FunctionFinish: return "FunctionFinish";
    case EventKind::TransferFinish: return "TransferFinish";
    case EventKind::ScaleReady: return "ScaleReady";
    case EventKind::FunctionStart: return "FunctionStart";
    case EventKind::TransferStart: return "TransferStart";
    case EventKind::WorkflowArrival: return "WorkflowArrival";
    }
    return "?";
}

std::string_view to_string(WorkflowStatus s) {
    switch (s) {
    case WorkflowStatus::OnTime: return "on_time";
    case WorkflowStatus::Late: return "late";
    case WorkflowStatus::Infeasible: return "infeasible";
    case WorkflowStatus::Lost: return "lost";
    }
    return "?";
}

bool event_before(const SimEvent& a, const SimEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.seq < b.seq;
}

namespace {

struct Traces {
    std::vector<std::vector<BandwidthTrace>> intra; // [cluster][destination worker]
    std::vector<BandwidthTrace> inter;              // [sending cluster]
};

std::shared_ptr<Traces> build_traces(const SimConfig& cfg) {
    auto tr = std::make_shared<Traces>();
    for (const auto& c : cfg.clusters) {
        if (c.trace.empty()) throw Error("cluster " + c.name + " has no bandwidth trace");
        std::vector<BandwidthTrace> per;
        for (std::size_t z = 0; z < c.workers.size(); ++z) {
            per.push_back(c.trace.scaled(cfg.intra_scale).shifted(cfg.intra_phase_step * static_cast<double>(z)));
        }
        tr->intra.push_back(std::move(per));
        tr->inter.push_back(c.trace.scaled(cfg.inter_scale));
    }
    return tr;
}

FederationState federation_from(const SimConfig& cfg, const std::shared_ptr<Traces>& tr) {
    FederationState fed;
    fed.epoch_len = cfg.epoch_len;
    fed.fail_timeout = cfg.fail_timeout;
    fed.load_threshold = cfg.load_threshold;
    fed.inter_delay = cfg.inter_delay;
    for (std::size_t n = 0; n < cfg.clusters.size(); ++n) {
        const auto& spec = cfg.clusters[n];
        ClusterState c;
        c.id = static_cast<int>(n);
        c.name = spec.name;
        c.master_id = spec.name + "-master";
        for (std::size_t z = 0; z < spec.workers.size(); ++z) {
            const auto& ws = spec.workers[z];
            auto w = make_worker(static_cast<int>(z), ws.node_class, ws.cores, ws.mem_bytes, ws.speed_factor,
                                 ws.warm_scale_delay, ws.cold_start_delay, ws.image_pull_delay);
            for (const auto& image : cfg.prewarmed_images) {
                w.images.emplace(image, 0);
                w.replicas[image].push_back(Replica{});
            }
            c.workers.push_back(std::move(w));
        }
        for (const auto& d : cfg.deployments) {
            if (d.cluster != static_cast<int>(n)) continue;
            if (d.worker < 0 || d.worker >= static_cast<int>(c.workers.size())) throw Error("deployment on unknown worker");
            auto& w = c.workers[static_cast<std::size_t>(d.worker)];
            w.images.emplace(d.image, 0);
            w.replicas[d.image].push_back(Replica{});
        }
        c.intra_bandwidth = [tr, n](int, int to, Time t) {
            return tr->intra[n].at(static_cast<std::size_t>(to)).rate_at(t);
        };
        fed.clusters.push_back(std::move(c));
    }
    fed.inter_bandwidth = [tr](int from, int, Time t) { return tr->inter.at(static_cast<std::size_t>(from)).rate_at(t); };
    fed.validate();
    return fed;
}

void check_config(const SimConfig& cfg) {
    if (cfg.clusters.empty()) throw Error("configuration has no clusters");
    if (cfg.horizon <= Time::zero()) throw Error("horizon must be positive");
    Time last = Time::zero();
    for (const auto& w : cfg.workload) {
        if (w.arrival() < last) throw Error("workload must be sorted by arrival");
        last = w.arrival();
        if (w.origin_cluster() < 0 || w.origin_cluster() >= static_cast<int>(cfg.clusters.size())) {
            throw Error("workflow origin cluster out of range");
        }
    }
    if (cfg.horizon < last) throw Error("horizon ends before the last arrival");
}

} // namespace

FederationState build_federation(const SimConfig& config) { return federation_from(config, build_traces(config)); }

// ---------------------------------------------------------------------------

struct Simulator::Impl {
    enum class FnState : std::uint8_t { Waiting, Queued, Running, Done, Lost };

    struct FnRun {
        int cluster = -1;
        int worker = -1;
        int replica = -1;
        bool external = false;
        ExecutionMode executed_mode = ExecutionMode::WarmExecution;
        Time release, slot_begin, duration;
        int inputs_pending = 0;
        Time inputs_ready = Time::zero();
        FnState state = FnState::Waiting;
        ExecutionRecord rec;
    };

    struct WfRun {
        std::size_t index = 0;
        std::vector<FnRun> fns;
        bool terminal = false;
        std::size_t remaining = 0;
    };

    struct Flow {
        std::size_t wf = 0;
        std::size_t fn = 0;
        double remaining = 0.0;
        Time latency = Time::zero();
    };

    struct Link {
        const BandwidthTrace* trace = nullptr;
        std::vector<std::uint64_t> flows;
        Time last = Time::zero();
        std::uint64_t gen = 0;
    };

    struct WorkerRun {
        int busy = 0;
        std::set<std::pair<Time, std::uint64_t>> waitlist;
    };

    static constexpr int kLinkUpdate = 0;
    static constexpr int kDelivery = 1;

    SimConfig cfg;
    std::shared_ptr<Planner> planner;
    std::shared_ptr<Traces> traces;
    FederationState fed;

    std::priority_queue<SimEvent, std::vector<SimEvent>, bool (*)(const SimEvent&, const SimEvent&)> queue{
        [](const SimEvent& a, const SimEvent& b) { return event_before(b, a); }};
    std::uint64_t seq = 0;
    Time now = Time::zero();

    std::vector<WfRun> wfs;
    std::unordered_map<std::uint64_t, std::size_t> wf_by_id;
    std::vector<std::size_t> pending; // waiting for the next epoch
    std::size_t unfinished = 0;

    std::map<std::tuple<int, int, int, int>, std::uint64_t> link_ids;
    std::vector<Link> links;
    std::unordered_map<std::uint64_t, Flow> flows;
    std::uint64_t next_flow = 1;

    std::vector<std::vector<WorkerRun>> runs;
    std::vector<bool> failed;
    std::unique_ptr<StatusExchange> exchange;
    std::optional<SuperMasterRecord> sm;

    SimulationReport report;

    Impl(SimConfig c, std::shared_ptr<Planner> p) : cfg(std::move(c)), planner(std::move(p)) {
        if (!planner) throw Error("simulator needs a planner");
        check_config(cfg);
        traces = build_traces(cfg);
        fed = federation_from(cfg, traces);
    }

    void push(SimEvent e) {
        e.seq = seq++;
        queue.push(e);
    }

    static std::pair<std::size_t, std::size_t> split_tag(std::uint64_t tag) { return {(tag >> 8) - 1, tag & 0xff}; }

    WorkerState& book(int c, int z) {
        return fed.clusters.at(static_cast<std::size_t>(c)).workers.at(static_cast<std::size_t>(z));
    }

    const WorkflowInstance& instance(const WfRun& r) const { return cfg.workload[r.index]; }

    void finish_workflow(WfRun& r, WorkflowStatus status, Time completion) {
        if (r.terminal) return;
        r.terminal = true;
        auto& res = report.workflows[r.index];
        res.status = status;
        res.completion = completion;
        --unfinished;
    }

    // -----------------------------------------------------------------
    // Links

    std::uint64_t link_for(int kind, int a, int b, int c) {
        auto key = std::make_tuple(kind, a, b, c);
        auto it = link_ids.find(key);
        if (it != link_ids.end()) return it->second;
        Link l;
        if (kind == 0) {
            l.trace = &traces->intra.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(c));
        } else {
            l.trace = &traces->inter.at(static_cast<std::size_t>(a));
        }
        links.push_back(l);
        link_ids.emplace(key, links.size() - 1);
        return links.size() - 1;
    }

    double share(const Link& l, Time t) const {
        const double rate = l.trace->rate_at(t);
        if (!cfg.fair_share || l.flows.empty()) return rate;
        return rate / static_cast<double>(l.flows.size());
    }

    void advance(Link& l) {
        if (!l.flows.empty() && now > l.last) {
            const double s = share(l, l.last);
            const double dt = (now - l.last).to_seconds();
            for (auto id : l.flows) flows[id].remaining -= s * dt;
        }
        l.last = now;
    }

    void reschedule(std::uint64_t lid) {
        auto& l = links[lid];
        ++l.gen;
        if (l.flows.empty()) return;
        const double s = share(l, now);
        double least = std::numeric_limits<double>::infinity();
        for (auto id : l.flows) least = std::min(least, flows[id].remaining);
        Time next = now + Time::seconds_ceil(std::max(0.0, least) / s);
        if (auto c = l.trace->next_change(now)) next = min(next, *c);
        push({next, 0, EventKind::TransferFinish, kLinkUpdate, 0, lid, l.gen});
    }

    void deliver(std::uint64_t flow_id, Time latency) {
        if (latency > Time::zero()) {
            push({now + latency, 0, EventKind::TransferFinish, kDelivery, 0, flow_id, 0});
            return;
        }
        auto f = flows.at(flow_id);
        flows.erase(flow_id);
        input_arrived(f.wf, f.fn);
    }

    void on_link_update(std::uint64_t lid, std::uint64_t gen) {
        auto& l = links[lid];
        if (gen != l.gen) return;
        advance(l);
        std::vector<std::uint64_t> done;
        std::vector<std::uint64_t> keep;
        for (auto id : l.flows) (flows[id].remaining <= 1e-9 ? done : keep).push_back(id);
        l.flows = std::move(keep);
        reschedule(lid);
        for (auto id : done) deliver(id, flows[id].latency);
    }

    // Moves `mb` toward function fn of workflow wf: over an intra link when
    // both ends share a cluster, otherwise over the inter link plus latency.
    void start_flow(std::size_t wf, std::size_t fn, int src_cluster, int src_worker, double mb) {
        const auto& dst = wfs[wf].fns[fn];
        const std::uint64_t id = next_flow++;
        Flow f{wf, fn, mb, Time::zero()};
        if (src_cluster == dst.cluster) {
            if (src_worker == dst.worker || mb <= 0) {
                input_arrived(wf, fn);
                return;
            }
            flows.emplace(id, f);
            auto lid = link_for(0, dst.cluster, src_worker, dst.worker);
            advance(links[lid]);
            links[lid].flows.push_back(id);
            reschedule(lid);
            return;
        }
        f.latency = fed.inter_delay[static_cast<std::size_t>(src_cluster)][static_cast<std::size_t>(dst.cluster)];
        flows.emplace(id, f);
        if (mb <= 0) {
            deliver(id, f.latency);
            return;
        }
        auto lid = link_for(1, src_cluster, dst.cluster, 0);
        advance(links[lid]);
        links[lid].flows.push_back(id);
        reschedule(lid);
    }

    // -----------------------------------------------------------------
    // Execution

    void input_arrived(std::size_t wf, std::size_t fn) {
        auto& r = wfs[wf];
        if (r.terminal) return;
        auto& f = r.fns[fn];
        if (f.state != FnState::Waiting) return;
        f.inputs_ready = max(f.inputs_ready, now);
        if (--f.inputs_pending > 0) return;
        if (failed[static_cast<std::size_t>(f.cluster)]) {
            lose_workflow(wf);
            return;
        }
        f.state = FnState::Queued;
        f.rec.enqueue = max(f.inputs_ready, f.release);
        const auto tag = reservation_tag(instance(r).id(), fn);
        runs[static_cast<std::size_t>(f.cluster)][static_cast<std::size_t>(f.worker)].waitlist.insert({f.slot_begin, tag});
        push({max(now, f.slot_begin), 0, EventKind::FunctionStart, f.cluster, f.worker, 0, 0});
    }

    void dispatch(int c, int z) {
        if (failed[static_cast<std::size_t>(c)]) return;
        auto& run = runs[static_cast<std::size_t>(c)][static_cast<std::size_t>(z)];
        auto& w = book(c, z);
        for (auto it = run.waitlist.begin(); it != run.waitlist.end();) {
            if (it->first > now) break;
            if (run.busy >= w.concurrency_cap) break;
            const auto tag = it->second;
            auto [wi, fi] = split_tag(tag);
            auto& wr = wfs[wf_by_id.at(wi)];
            auto& f = wr.fns[fi];
            const auto& spec = instance(wr).function(fi);
            if (now < f.rec.enqueue) {
                ++it;
                continue;
            }
            auto rit = w.replicas.find(spec.image);
            const Replica* rep = nullptr;
            if (rit != w.replicas.end() && f.replica >= 0 && f.replica < static_cast<int>(rit->second.size())) {
                rep = &rit->second[static_cast<std::size_t>(f.replica)];
            }
            const bool replica_ready = rep && (rep->creator == 0 || rep->creator == tag);
            if (!replica_ready) {
                ++it;
                continue;
            }
            it = run.waitlist.erase(it);
            ++run.busy;
            f.state = FnState::Running;
            f.rec.run_start = now;
            f.rec.finish = now + f.duration;
            const Time exec = w.exec_time(spec);
            f.rec.start_exec = f.duration > exec ? f.rec.finish - exec : now;
            ++w.active_instances;
            w.cpu_available -= 1.0;
            w.mem_available -= spec.mem_demand;
            if (f.rec.run_start != f.slot_begin) {
                for (auto& core : w.cores) core.update(tag, f.rec.run_start, f.rec.finish);
                rit->second[static_cast<std::size_t>(f.replica)].timeline.update(tag, f.rec.run_start, f.rec.finish);
            }
            if (f.rec.start_exec > now) push({f.rec.start_exec, 0, EventKind::ScaleReady, c, z, tag, 0});
            push({f.rec.finish, 0, EventKind::FunctionFinish, c, z, tag, 0});
        }
    }

    void on_finish(int c, int z, std::uint64_t tag) {
        auto [wi, fi] = split_tag(tag);
        auto wit = wf_by_id.find(wi);
        if (wit == wf_by_id.end()) return;
        auto& wr = wfs[wit->second];
        auto& f = wr.fns[fi];
        if (f.state != FnState::Running || f.cluster != c || f.worker != z) return;
        const auto& w = instance(wr);
        const auto& spec = w.function(fi);
        auto& run = runs[static_cast<std::size_t>(c)][static_cast<std::size_t>(z)];
        auto& wk = book(c, z);
        --run.busy;
        --wk.active_instances;
        wk.cpu_available += 1.0;
        wk.mem_available += spec.mem_demand;
        settle(wk, tag);
        f.state = FnState::Done;
        report.records.push_back(f.rec);
        push({now, 0, EventKind::FunctionStart, c, z, 0, 0});
        if (wr.terminal) return;
        if (--wr.remaining == 0) {
            finish_workflow(wr, now <= w.deadline_abs() ? WorkflowStatus::OnTime : WorkflowStatus::Late, now);
            return;
        }
        for (auto s : w.successors(fi)) start_flow(wit->second, s, c, z, spec.output_size);
    }

    void lose_workflow(std::size_t wf) {
        auto& r = wfs[wf];
        if (r.terminal) return;
        const auto& w = instance(r);
        for (std::size_t fi = 0; fi < r.fns.size(); ++fi) {
            auto& f = r.fns[fi];
            const auto tag = reservation_tag(w.id(), fi);
            if (f.state == FnState::Waiting || f.state == FnState::Queued) {
                if (f.worker >= 0) {
                    withdraw(book(f.cluster, f.worker), tag);
                    runs[static_cast<std::size_t>(f.cluster)][static_cast<std::size_t>(f.worker)].waitlist.erase(
                        {f.slot_begin, tag});
                }
                f.state = FnState::Lost;
            } else if (f.state == FnState::Running && failed[static_cast<std::size_t>(f.cluster)]) {
                f.state = FnState::Lost;
                f.rec.lost = true;
                f.rec.finish = now;
                report.records.push_back(f.rec);
            }
        }
        finish_workflow(r, WorkflowStatus::Lost, Time::infinity());
    }

    // -----------------------------------------------------------------
    // Planning

    PlanEnv env() {
        PlanEnv e;
        e.now = now;
        e.federation = &fed;
        e.super_master = sm ? &*sm : nullptr;
        e.channel_up = sm && sm->holder && !failed[static_cast<std::size_t>(*sm->holder)];
        e.inter = &report.inter;
        return e;
    }

    // Returns false when the planner asked to defer.
    bool plan_workflow(std::size_t wf) {
        auto& r = wfs[wf];
        const auto& w = instance(r);
        auto& res = report.workflows[r.index];
        if (failed[static_cast<std::size_t>(w.origin_cluster())]) {
            lose_workflow(wf);
            return true;
        }
        auto e = env();
        PlanResult pr = planner->plan(w, e);
        res.candidate_evaluations += pr.intra.candidate_evaluations;
        res.mode_evaluations += pr.intra.mode_evaluations;
        res.remote_evaluations += pr.remote_evaluations;
        if (pr.defer) {
            ++res.deferrals;
            return false;
        }
        if (pr.plan.size() != w.size()) throw Error("planner returned an incomplete plan");
        res.planned_at = now;
        Time fin = Time::zero();
        bool complete = true;
        for (const auto& pe : pr.plan) {
            if (!pe.planned() || !pe.worker) complete = false;
            fin = max(fin, pe.finish);
            if (pe.external) ++res.offloaded;
        }
        res.planned_finish = complete ? fin : Time::infinity();
        if (!complete) {
            for (std::size_t fi = 0; fi < pr.plan.size(); ++fi) {
                const auto& pe = pr.plan[fi];
                if (pe.worker && pe.planned()) withdraw(book(pe.cluster, *pe.worker), reservation_tag(w.id(), fi));
            }
            finish_workflow(r, WorkflowStatus::Infeasible, Time::infinity());
            return true;
        }
        r.fns.resize(w.size());
        r.remaining = w.size();
        for (std::size_t fi = 0; fi < w.size(); ++fi) {
            const auto& pe = pr.plan[fi];
            auto& f = r.fns[fi];
            f.cluster = pe.cluster;
            f.worker = *pe.worker;
            f.replica = pe.replica;
            f.external = pe.external;
            f.executed_mode = pe.executed_mode;
            f.release = pe.release;
            f.slot_begin = pe.slot_begin;
            f.duration = pe.finish - pe.slot_begin;
            f.inputs_pending = std::max<int>(1, static_cast<int>(w.predecessors(fi).size()));
            f.state = FnState::Waiting;
            auto& rec = f.rec;
            rec.workflow_id = w.id();
            rec.function_id = w.function(fi).id;
            rec.function = fi;
            rec.cluster = pe.cluster;
            rec.worker = *pe.worker;
            rec.mode = pe.external ? ExecutionMode::Offloading : pe.executed_mode;
            rec.executed_mode = pe.executed_mode;
            rec.was_offloaded = pe.external;
        }
        for (std::size_t fi = 0; fi < w.size(); ++fi) {
            if (w.predecessors(fi).empty()) start_flow(wf, fi, w.origin_cluster(), kIngress, w.function(fi).input_size);
        }
        return true;
    }

    void on_arrival(std::size_t wf) {
        if (planner->plans_at_arrival()) {
            plan_workflow(wf);
            return;
        }
        pending.push_back(wf);
    }

    void on_tick(std::size_t epoch) {
        const auto k = fed.clusters.size();
        std::vector<double> loads(k);
        for (std::size_t n = 0; n < k; ++n) {
            loads[n] = normalized_load(fed.clusters[n]);
            report.load_series[n].push_back(loads[n]);
            if (!failed[n]) exchange->publish(static_cast<int>(n), loads[n], now);
        }
        exchange->deliver_until(now);
        if (auto d = exchange->next_delivery()) push({*d, 0, EventKind::HeartbeatEmit, -1, -1, 0, 0});
        for (std::size_t n = 0; n < k; ++n) {
            if (!failed[n]) fed.clusters[n].last_heartbeat = now;
        }

        ElectionParams params{cfg.epoch_len, cfg.fail_timeout, cfg.load_threshold};
        auto rec = maintain_super_master(sm ? &*sm : nullptr, epoch, exchange->heartbeats(), exchange->loads(), params);
        fed.super_master = rec.holder;
        sm = rec;
        report.super_master.push_back(rec);

        for (auto& c : fed.clusters) {
            for (auto& w : c.workers) prune_worker(w, now, cfg.warm_ttl);
        }

        std::vector<std::size_t> batch;
        batch.swap(pending);
        std::stable_sort(batch.begin(), batch.end(), [&](std::size_t a, std::size_t b) {
            const auto& wa = instance(wfs[a]);
            const auto& wb = instance(wfs[b]);
            if (wa.deadline_abs() != wb.deadline_abs()) return wa.deadline_abs() < wb.deadline_abs();
            return wa.id() < wb.id();
        });
        for (auto wf : batch) {
            if (wfs[wf].terminal) continue;
            if (!plan_workflow(wf)) pending.push_back(wf);
        }

        const Time next = now + cfg.epoch_len;
        if (next <= cfg.horizon || unfinished > 0) {
            if (next > cfg.horizon + Time::seconds(100.0 * std::max(1.0, cfg.horizon.to_seconds()))) {
                throw Error("simulation failed to drain: " + stuck_summary());
            }
            push({next, 0, EventKind::EpochTick, -1, -1, epoch + 1, 0});
        }
    }

    std::string stuck_summary() const {
        static const char* names[] = {"waiting", "queued", "running", "done", "lost"};
        for (const auto& r : wfs) {
            if (r.terminal) continue;
            const auto& w = instance(r);
            std::string s = "workflow " + std::to_string(w.id());
            if (r.fns.empty()) return s + " never planned";
            for (std::size_t fi = 0; fi < r.fns.size(); ++fi) {
                const auto& f = r.fns[fi];
                s += " [" + w.function(fi).id + " " + names[static_cast<int>(f.state)] + " c" +
                     std::to_string(f.cluster) + " z" + std::to_string(f.worker) + " r" + std::to_string(f.replica) +
                     " slot " + format_seconds(f.slot_begin) + " inputs " + std::to_string(f.inputs_pending) + "]";
            }
            return s;
        }
        return "no unfinished workflow";
    }

    void on_fail(int c) {
        failed[static_cast<std::size_t>(c)] = true;
        for (std::size_t wf = 0; wf < wfs.size(); ++wf) {
            auto& r = wfs[wf];
            if (r.terminal) continue;
            bool touched = !r.fns.empty() && instance(r).origin_cluster() == c;
            for (const auto& f : r.fns) {
                if (f.cluster == c && f.state != FnState::Done) touched = true;
            }
            if (touched) lose_workflow(wf);
        }
        for (auto& run : runs[static_cast<std::size_t>(c)]) run = WorkerRun{};
        std::erase_if(pending, [&](std::size_t wf) {
            if (instance(wfs[wf]).origin_cluster() != c) return false;
            lose_workflow(wf);
            return true;
        });
    }

    void on_recover(int c) {
        failed[static_cast<std::size_t>(c)] = false;
        for (auto& w : fed.clusters[static_cast<std::size_t>(c)].workers) {
            for (auto& core : w.cores) core = Timeline{};
            w.replicas.clear();
            w.images.clear();
            w.active_instances = 0;
            w.cpu_available = w.cpu_capacity_total;
            w.mem_available = w.mem_total;
        }
    }

    SimulationReport run() {
        const auto k = fed.clusters.size();
        report = SimulationReport{};
        report.strategy = planner->name();
        report.horizon = cfg.horizon;
        report.epoch_len = cfg.epoch_len;
        report.load_series.assign(k, {});
        for (const auto& c : cfg.clusters) {
            int cores = 0;
            for (const auto& w : c.workers) cores += w.cores;
            report.cluster_cores.push_back(cores);
            report.cluster_names.push_back(c.name);
        }
        runs.assign(k, {});
        for (std::size_t n = 0; n < k; ++n) runs[n].resize(cfg.clusters[n].workers.size());
        failed.assign(k, false);
        exchange = std::make_unique<StatusExchange>(k, cfg.status_delay);

        wfs.clear();
        wf_by_id.clear();
        for (std::size_t i = 0; i < cfg.workload.size(); ++i) {
            const auto& w = cfg.workload[i];
            if (!wf_by_id.emplace(w.id(), i).second) throw Error("duplicate workflow id");
            WfRun r;
            r.index = i;
            wfs.push_back(std::move(r));
            WorkflowResult res;
            res.id = w.id();
            res.tag = w.tag();
            res.origin = w.origin_cluster();
            res.arrival = w.arrival();
            res.deadline_abs = w.deadline_abs();
            res.functions = w.size();
            report.workflows.push_back(res);
            push({w.arrival(), 0, EventKind::WorkflowArrival, w.origin_cluster(), -1, i, 0});
        }
        unfinished = cfg.workload.size();
        for (const auto& fw : cfg.failures) {
            push({fw.down_at, 0, EventKind::ClusterFail, fw.cluster, -1, 0, 0});
            push({fw.up_at, 0, EventKind::ClusterRecover, fw.cluster, -1, 0, 0});
        }
        push({Time::zero(), 0, EventKind::EpochTick, -1, -1, 0, 0});

        while (!queue.empty()) {
            SimEvent e = queue.top();
            queue.pop();
            if (e.time < now) throw Error("event scheduled in the past");
            now = e.time;
            ++report.events;
            switch (e.kind) {
            case EventKind::ClusterFail: on_fail(e.cluster); break;
            case EventKind::ClusterRecover: on_recover(e.cluster); break;
            case EventKind::EpochTick: on_tick(static_cast<std::size_t>(e.ref)); break;
            case EventKind::HeartbeatEmit:
                exchange->deliver_until(now);
                break;
            case EventKind::FunctionFinish: on_finish(e.cluster, e.worker, e.ref); break;
            case EventKind::TransferFinish:
                if (e.cluster == kLinkUpdate) {
                    on_link_update(e.ref, e.aux);
                } else {
                    auto it = flows.find(e.ref);
                    if (it != flows.end()) {
                        auto f = it->second;
                        flows.erase(it);
                        input_arrived(f.wf, f.fn);
                    }
                }
                break;
            case EventKind::ScaleReady: break;
            case EventKind::FunctionStart: dispatch(e.cluster, e.worker); break;
            case EventKind::TransferStart: break;
            case EventKind::WorkflowArrival: on_arrival(static_cast<std::size_t>(e.ref)); break;
            }
        }
        report.end_time = now;
        return report;
    }
};

Simulator::Simulator(SimConfig config, std::shared_ptr<Planner> planner)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(planner))) {}

Simulator::~Simulator() = default;

void Simulator::inject_failure(int cluster, Time down_at, Time up_at) {
    auto& cfg = impl_->cfg;
    if (cluster < 0 || cluster >= static_cast<int>(cfg.clusters.size())) throw Error("failure on unknown cluster");
    if (!(down_at < up_at)) throw Error("failure window must end after it starts");
    for (const auto& f : cfg.failures) {
        if (f.cluster == cluster && down_at < f.up_at && f.down_at < up_at) {
            throw Error("overlapping failure windows on one cluster");
        }
    }
    cfg.failures.push_back({cluster, down_at, up_at});
}

SimulationReport Simulator::run() { return impl_->run(); }

SimulationReport run(const SimConfig& config, std::shared_ptr<Planner> planner) {
    Simulator sim(config, std::move(planner));
    return sim.run();
}

std::vector<double> cpu_utilization_series(const SimulationReport& report, int cluster, Time window) {
    if (window <= Time::zero()) throw Error("utilization window must be positive");
    const auto c = static_cast<std::size_t>(cluster);
    if (c >= report.cluster_cores.size()) throw Error("utilization for unknown cluster");
    const Time end = max(report.horizon, report.end_time);
    const auto n = static_cast<std::size_t>((end.count() + window.count() - 1) / window.count());
    std::vector<double> busy(n, 0.0);
    for (const auto& r : report.records) {
        if (r.cluster != cluster || r.finish <= r.run_start) continue;
        auto first = static_cast<std::size_t>(r.run_start.count() / window.count());
        for (std::size_t k = first; k < n; ++k) {
            const Time wb = Time::micros(static_cast<Time::rep>(k) * window.count());
            const Time we = wb + window;
            if (wb >= r.finish) break;
            const Time b = max(wb, r.run_start);
            const Time e = min(we, r.finish);
            if (e > b) busy[k] += (e - b).to_seconds();
        }
    }
    const double cap = static_cast<double>(report.cluster_cores[c]) * window.to_seconds();
    for (auto& b : busy) b = cap > 0 ? b / cap : 0.0;
    return busy;
}

} // namespace clusterless
