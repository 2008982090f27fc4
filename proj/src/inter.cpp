#include "clusterless/inter.hpp"

#include <algorithm>

namespace clusterless {

namespace {

std::optional<int> argmin_load(const std::vector<double>& loads, const std::vector<bool>* mask) {
    std::optional<int> best;
    for (std::size_t n = 0; n < loads.size(); ++n) {
        if (mask && !(*mask)[n]) continue;
        if (!best || loads[n] < loads[static_cast<std::size_t>(*best)]) best = static_cast<int>(n);
    }
    return best;
}

} // namespace

SuperMasterRecord maintain_super_master(const SuperMasterRecord* previous, std::size_t epoch,
                                        std::span<const Time> heartbeats, std::span<const double> reported_loads,
                                        const ElectionParams& params) {
    const auto n = reported_loads.size();
    if (heartbeats.size() != n) throw Error("heartbeat and load vectors differ in size");
    SuperMasterRecord rec;
    rec.epoch = epoch;
    rec.time = Time::micros(params.epoch_len.count() * static_cast<Time::rep>(epoch));

    if (epoch == 0 || previous == nullptr) {
        rec.heartbeats.assign(n, rec.time);
        rec.loads.assign(reported_loads.begin(), reported_loads.end());
        rec.alive.assign(n, true);
        rec.holder = argmin_load(rec.loads, nullptr);
        return rec;
    }
    if (previous->loads.size() != n) throw Error("previous super-master record has wrong size");

    const Time prev_time = Time::micros(params.epoch_len.count() * static_cast<Time::rep>(epoch - 1));
    rec.heartbeats.assign(heartbeats.begin(), heartbeats.end());
    rec.loads.resize(n);
    rec.alive.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // Stale clusters keep their last load so that a late report does not
        // flip the election back and forth.
        rec.loads[k] = heartbeats[k] > prev_time ? reported_loads[k] : previous->loads[k];
        rec.alive[k] = is_alive(rec.time, heartbeats[k], params.fail_timeout);
    }

    const auto& inc = previous->holder;
    const bool invalid = !inc || !rec.alive[static_cast<std::size_t>(*inc)] ||
                         rec.loads[static_cast<std::size_t>(*inc)] > params.load_threshold;
    if (!invalid) {
        rec.holder = inc;
        return rec;
    }
    std::vector<bool> ok(n);
    for (std::size_t k = 0; k < n; ++k) ok[k] = rec.alive[k] && rec.loads[k] <= params.load_threshold;
    rec.holder = argmin_load(rec.loads, &ok);
    return rec;
}

bool eligible(const SuperMasterRecord& record, int cluster, double load_threshold) {
    const auto k = static_cast<std::size_t>(cluster);
    return record.alive.at(k) && record.loads.at(k) <= load_threshold;
}

std::optional<Candidate> remote_placement(Time t_e, const OffloadRequest& request, const ClusterState& cluster,
                                          const FederationState& federation, std::uint64_t* evaluations) {
    PlacementContext ctx;
    ctx.now = t_e;
    ctx.window = federation.epoch_len;
    ctx.cluster = cluster.id;
    ctx.release = t_e + federation.inter_delay.at(static_cast<std::size_t>(request.origin))
                            .at(static_cast<std::size_t>(cluster.id));
    ctx.inter_bandwidth = &federation.inter_bandwidth;
    ctx.inter_delay = &federation.inter_delay;
    return best_any_mode(cluster, request.spec, request.preds, ctx, evaluations);
}

void commit_remote(GlobalPlacement& placement, const OffloadRequest& request, FederationState& federation) {
    auto& cluster = federation.clusters.at(static_cast<std::size_t>(placement.destination));
    auto& worker = cluster.workers.at(static_cast<std::size_t>(placement.assignment.worker));
    placement.assignment.replica =
        reserve(worker, placement.assignment, request.spec, reservation_tag(request.workflow_id, request.function));
}

std::vector<GlobalPlacement> orchestrate_offloads(Time t_e, std::vector<OffloadRequest> requests,
                                                  FederationState& federation, const std::vector<bool>& alive,
                                                  InterStats* stats) {
    std::stable_sort(requests.begin(), requests.end(), [](const OffloadRequest& a, const OffloadRequest& b) {
        if (a.deadline_abs != b.deadline_abs) return a.deadline_abs < b.deadline_abs;
        if (a.workflow_id != b.workflow_id) return a.workflow_id < b.workflow_id;
        return a.function < b.function;
    });
    if (stats) {
        ++stats->batches;
        stats->requests += requests.size();
    }
    std::vector<GlobalPlacement> out;
    out.reserve(requests.size());
    const auto k = federation.clusters.size();
    for (const auto& req : requests) {
        GlobalPlacement gp;
        gp.workflow_id = req.workflow_id;
        gp.function = req.function;
        gp.destination = req.origin;
        gp.projected_finish = req.local_finish;
        gp.retained = true;

        std::optional<Candidate> best;
        int best_cluster = -1;
        for (std::size_t n = 0; n < k; ++n) {
            if (static_cast<int>(n) == req.origin) continue;
            if (stats) ++stats->remote_evaluations;
            if (!alive.empty() && !alive[n]) continue;
            auto c = remote_placement(t_e, req, federation.clusters[n], federation);
            if (!c) continue;
            // Feasible-improving: meets the deadline and beats the local plan.
            if (!(c->finish <= req.deadline_abs && c->finish < req.local_finish)) continue;
            if (!best || c->finish < best->finish) {
                best = c;
                best_cluster = static_cast<int>(n);
            }
        }
        if (best) {
            gp.destination = best_cluster;
            gp.projected_finish = best->finish;
            gp.retained = false;
            gp.assignment = *best;
            gp.release = t_e + federation.inter_delay[static_cast<std::size_t>(req.origin)]
                                                     [static_cast<std::size_t>(best_cluster)];
            commit_remote(gp, req, federation);
            if (stats) ++stats->dispatched;
        } else if (stats) {
            ++stats->retained;
        }
        out.push_back(gp);
    }
    return out;
}

StatusExchange::StatusExchange(std::size_t clusters, Time propagation_delay)
    : delay_(propagation_delay), heartbeats_(clusters, Time::zero()), loads_(clusters, 0.0) {}

void StatusExchange::publish(int cluster, double load, Time t) {
    const auto k = static_cast<std::size_t>(cluster);
    if (delay_ == Time::zero()) {
        heartbeats_.at(k) = t;
        loads_.at(k) = load;
        return;
    }
    in_flight_.push_back({cluster, load, t + delay_});
}

void StatusExchange::deliver_until(Time t) {
    std::vector<Message> keep;
    for (const auto& m : in_flight_) {
        if (m.due <= t) {
            const auto k = static_cast<std::size_t>(m.cluster);
            if (m.due >= heartbeats_[k]) {
                heartbeats_[k] = m.due;
                loads_[k] = m.load;
            }
        } else {
            keep.push_back(m);
        }
    }
    in_flight_ = std::move(keep);
}

std::optional<Time> StatusExchange::next_delivery() const {
    std::optional<Time> t;
    for (const auto& m : in_flight_) {
        if (!t || m.due < *t) t = m.due;
    }
    return t;
}

} // namespace clusterless
