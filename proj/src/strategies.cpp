#include "clusterless/strategies.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace clusterless {

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::CLU: return "CLU";
    case Strategy::NKS: return "NKS";
    case Strategy::CLI: return "CLI";
    case Strategy::RRX: return "RRX";
    case Strategy::RNX: return "RNX";
    }
    return "?";
}

Strategy parse_strategy(std::string_view text) {
    for (auto s : kAllStrategies) {
        if (to_string(s) == text) return s;
    }
    throw Error("unknown strategy '" + std::string(text) + "'");
}

OrchestratedPlanner::OrchestratedPlanner(Offload offload, std::size_t clusters, std::uint64_t seed)
    : offload_(offload), clusters_(clusters), cursor_(clusters, 0) {
    if (clusters == 0) throw Error("planner needs at least one cluster");
    if (offload == Offload::Category && clusters > 1) {
        std::mt19937_64 rng(seed ^ 0xA0761D6478BD642FULL);
        for (std::size_t o = 0; o < clusters; ++o) {
            for (int k = 1; k <= 18; ++k) {
                auto pick = static_cast<std::size_t>(rng() % (clusters - 1));
                if (pick >= o) ++pick;
                category_map_[{static_cast<int>(o), k}] = static_cast<int>(pick);
            }
        }
    }
}

std::string OrchestratedPlanner::name() const {
    switch (offload_) {
    case Offload::SuperMaster: return "CLU";
    case Offload::None: return "CLI";
    case Offload::RoundRobin: return "RRX";
    case Offload::Category: return "RNX";
    }
    return "?";
}

int OrchestratedPlanner::next_round_robin(int origin, const std::vector<bool>& alive) {
    const auto o = static_cast<std::size_t>(origin);
    if (clusters_ < 2) return -1;
    for (std::size_t tries = 0; tries + 1 < clusters_; ++tries) {
        auto pick = cursor_[o] % (clusters_ - 1);
        ++cursor_[o];
        if (pick >= o) ++pick;
        if (alive.empty() || alive[pick]) return static_cast<int>(pick);
    }
    return -1;
}

int OrchestratedPlanner::category_target(int origin, int template_index) const {
    auto it = category_map_.find({origin, template_index});
    if (it == category_map_.end()) throw Error("no category target");
    return it->second;
}

PlanResult OrchestratedPlanner::plan(const WorkflowInstance& w, PlanEnv& env) {
    auto& fed = *env.federation;
    auto& cluster = fed.clusters.at(static_cast<std::size_t>(w.origin_cluster()));
    IntraContext ctx{env.now, fed.epoch_len, &fed.inter_bandwidth, &fed.inter_delay};
    PlanResult result;
    bool blocked = false;
    std::vector<bool> alive;
    if (env.super_master) alive = env.super_master->alive;

    OffloadChannel channel = [&](const OffloadRequest& req) -> std::optional<GlobalPlacement> {
        if (offload_ == Offload::SuperMaster) {
            if (!env.channel_up) {
                blocked = true;
                return std::nullopt;
            }
            InterStats local;
            auto placed = orchestrate_offloads(env.now, {req}, fed, alive, &local);
            result.remote_evaluations += local.remote_evaluations;
            if (env.inter) {
                env.inter->batches += local.batches;
                env.inter->requests += local.requests;
                env.inter->remote_evaluations += local.remote_evaluations;
                env.inter->dispatched += local.dispatched;
                env.inter->retained += local.retained;
            }
            return placed.front();
        }
        int target = -1;
        if (offload_ == Offload::RoundRobin) {
            target = next_round_robin(req.origin, alive);
        } else {
            target = category_target(req.origin, w.tag().template_index);
            if (!alive.empty() && !alive[static_cast<std::size_t>(target)]) target = -1;
        }
        if (target < 0) return std::nullopt;
        std::uint64_t evals = 0;
        auto c = remote_placement(env.now, req, fed.clusters[static_cast<std::size_t>(target)], fed, &evals);
        ++result.remote_evaluations;
        if (!c) return std::nullopt;
        GlobalPlacement gp;
        gp.workflow_id = req.workflow_id;
        gp.function = req.function;
        gp.destination = target;
        gp.projected_finish = c->finish;
        gp.retained = false;
        gp.assignment = *c;
        gp.release = env.now + fed.inter_delay[static_cast<std::size_t>(req.origin)][static_cast<std::size_t>(target)];
        commit_remote(gp, req, fed);
        return gp;
    };

    auto out = orchestrate_workflow(w, cluster, ctx, offload_ == Offload::None ? nullptr : &channel);
    result.intra = out.stats;
    // No super-master to ask: hold the workflow for the next epoch while the
    // deadline can still be reached.
    if (offload_ == Offload::SuperMaster && blocked && !out.deadline_met &&
        env.now + fed.epoch_len < w.deadline_abs()) {
        withdraw_plan(w, out.plan, cluster);
        result.defer = true;
        return result;
    }
    result.plan = std::move(out.plan);
    result.deadline_met = out.deadline_met;
    return result;
}

double least_allocated_score(const WorkerState& w, Time t) {
    int busy = 0;
    double mem = 0.0;
    for (const auto& core : w.cores) {
        for (const auto& iv : core.intervals()) {
            if (iv.begin > t) break;
            if (iv.end > t) {
                ++busy;
                mem += iv.mem;
            }
        }
    }
    const double cpu_free = 1.0 - static_cast<double>(busy) / static_cast<double>(w.concurrency_cap);
    const double mem_free = 1.0 - mem / w.mem_total;
    return (std::max(0.0, cpu_free) + std::max(0.0, mem_free)) / 2.0;
}

KubernetesPlanner::KubernetesPlanner(double target_concurrency, std::uint64_t seed)
    : target_(target_concurrency), rng_(seed ^ 0x8BB84B93962EACC9ULL) {
    if (!(target_concurrency >= 1)) throw Error("target concurrency must be at least 1");
}

PlanResult KubernetesPlanner::plan(const WorkflowInstance& w, PlanEnv& env) {
    auto& fed = *env.federation;
    auto& cluster = fed.clusters.at(static_cast<std::size_t>(w.origin_cluster()));
    PlanResult result;
    auto& plan = result.plan;
    plan.resize(w.size());
    for (std::size_t f = 0; f < w.size(); ++f) {
        plan[f].workflow_id = w.id();
        plan[f].function = f;
        plan[f].release = env.now;
    }
    PlacementContext pctx;
    pctx.now = env.now;
    pctx.window = fed.epoch_len;
    pctx.release = env.now;
    pctx.cluster = cluster.id;
    pctx.inter_bandwidth = &fed.inter_bandwidth;
    pctx.inter_delay = &fed.inter_delay;

    for (auto f : w.topological_order()) {
        const auto& spec = w.function(f);
        const auto preds = predecessor_states(w, plan, f, cluster.id, env.now);
        Time ready = env.now;
        for (const auto& p : preds) ready = max(ready, p.finish);

        std::vector<int> order(cluster.workers.size());
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> score(order.size());
        std::vector<std::uint64_t> tie(order.size());
        for (std::size_t z = 0; z < order.size(); ++z) {
            score[z] = least_allocated_score(cluster.workers[z], ready);
            tie[z] = rng_();
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const auto x = static_cast<std::size_t>(a), y = static_cast<std::size_t>(b);
            if (score[x] != score[y]) return score[x] > score[y];
            return tie[x] < tie[y];
        });

        std::optional<Candidate> chosen;
        // Route to a replica with spare concurrency.
        for (int z : order) {
            const auto& wk = cluster.workers[static_cast<std::size_t>(z)];
            auto it = wk.replicas.find(spec.image);
            if (it == wk.replicas.end()) continue;
            bool spare = false;
            for (const auto& r : it->second) {
                if (r.retired) continue;
                std::size_t active = 0;
                for (const auto& iv : r.timeline.intervals()) active += iv.end > ready ? 1 : 0;
                if (r.available_from > ready) ++active;
                if (static_cast<double>(active) < target_) spare = true;
            }
            if (!spare) continue;
            ++result.intra.candidate_evaluations;
            auto c = evaluate_worker(cluster, z, spec, ExecutionMode::WarmExecution, preds, pctx);
            if (c) {
                chosen = c;
                break;
            }
        }
        // Otherwise scale out on the least-allocated worker.
        if (!chosen) {
            for (int z : order) {
                const auto& wk = cluster.workers[static_cast<std::size_t>(z)];
                if (spec.mem_demand > wk.mem_total) continue;
                const auto mode = wk.has_image(spec.image) ? ExecutionMode::WarmScaling : ExecutionMode::ColdScaling;
                ++result.intra.candidate_evaluations;
                auto c = evaluate_worker(cluster, z, spec, mode, preds, pctx);
                if (c) {
                    chosen = c;
                    break;
                }
            }
        }
        if (!chosen) continue;
        commit_local(w, plan[f], *chosen, cluster, env.now);
    }
    Time fin = Time::zero();
    for (const auto& e : plan) fin = max(fin, e.finish);
    result.deadline_met = fin <= w.deadline_abs();
    return result;
}

std::shared_ptr<Planner> make_planner(Strategy s, std::size_t clusters, std::uint64_t seed) {
    using O = OrchestratedPlanner::Offload;
    switch (s) {
    case Strategy::CLU: return std::make_shared<OrchestratedPlanner>(O::SuperMaster, clusters, seed);
    case Strategy::NKS: return std::make_shared<KubernetesPlanner>(1.0, seed);
    case Strategy::CLI: return std::make_shared<OrchestratedPlanner>(O::None, clusters, seed);
    case Strategy::RRX: return std::make_shared<OrchestratedPlanner>(O::RoundRobin, clusters, seed);
    case Strategy::RNX: return std::make_shared<OrchestratedPlanner>(O::Category, clusters, seed);
    }
    throw Error("unknown strategy");
}

} // namespace clusterless
