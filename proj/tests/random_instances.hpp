#pragma once

#include <random>
#include <string>
#include <vector>

#include "clusterless/inter.hpp"
#include "clusterless/intra.hpp"
#include "support.hpp"

namespace clusterless::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Random DAG with n functions drawn from `images` function types.
inline WorkflowInstance random_workflow(std::mt19937_64& rng, std::uint64_t id, std::size_t n, int origin,
                                        Time arrival, const std::vector<std::string>& images) {
    std::vector<FunctionSpec> fs;
    for (std::size_t i = 0; i < n; ++i) {
        const double cpu = uniform(rng, 0.2, 6.0);
        const double mem = uniform(rng, 64, 1024);
        const double in = uniform(rng, 0, 0.5);
        const double out = uniform(rng, 0, 1.5);
        auto f = fn("f" + std::to_string(i), cpu, mem, in, out);
        f.image = images[pick(rng, images.size())];
        fs.push_back(f);
    }
    std::vector<Edge> edges;
    for (std::size_t j = 1; j < n; ++j) {
        const auto parent = pick(rng, j);
        edges.emplace_back(parent, j);
        for (std::size_t i = 0; i < j; ++i) {
            if (i != parent && rng() % 5 == 0) edges.emplace_back(i, j);
        }
    }
    double cpu = 0;
    for (const auto& f : fs) cpu += f.cpu_demand;
    const Time deadline = Time::seconds(uniform(rng, 0.3, 2.0) * cpu + 1.0);
    WorkflowTag tag;
    tag.template_index = 1 + static_cast<int>(id % 18);
    tag.workflow = "random";
    return WorkflowInstance(id, std::move(fs), std::move(edges), arrival, deadline, origin, tag);
}

// Workers of mixed speed with partial warm pools and some reserved slots.
inline ClusterState random_cluster(std::mt19937_64& rng, int id, std::size_t workers,
                                   const std::vector<std::string>& images, Time now, double busy = 0.5) {
    std::vector<WorkerState> ws;
    for (std::size_t z = 0; z < workers; ++z) {
        const int cores = 1 + static_cast<int>(pick(rng, 4));
        const double speed = uniform(rng, 0.5, 4.0);
        const double ws_s = uniform(rng, 0.2, 2.0);
        const double cs_s = uniform(rng, 2.0, 6.0);
        const double mem_gb = uniform(rng, 0.5, 8.0);
        auto w = worker(static_cast<int>(z), cores, speed, ws_s, cs_s, mem_gb);
        for (const auto& img : images) {
            if (rng() % 3 == 0) make_warm(w, img);
            else if (rng() % 4 == 0) w.images[img] = 0;
        }
        for (std::size_t c = 0; c < w.cores.size(); ++c) {
            if (uniform(rng, 0, 1) < busy) {
                const Time b = now + Time::seconds(uniform(rng, 0, 4));
                const Time e = b + Time::seconds(uniform(rng, 0.5, 12));
                w.cores[c].insert({b, e, 900'000 + z * 16 + c, 0.0});
            }
        }
        ws.push_back(std::move(w));
    }
    return cluster(id, std::move(ws), uniform(rng, 2.0, 40.0));
}

inline FederationState random_federation(std::mt19937_64& rng, std::size_t k, std::size_t max_workers,
                                         const std::vector<std::string>& images, Time now) {
    FederationState fed;
    for (std::size_t n = 0; n < k; ++n) {
        fed.clusters.push_back(random_cluster(rng, static_cast<int>(n), 1 + pick(rng, max_workers), images, now));
    }
    const double bw = uniform(rng, 2.0, 20.0);
    fed.inter_bandwidth = [bw](int, int, Time) { return bw; };
    fed.inter_delay.assign(k, std::vector<Time>(k, Time::zero()));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) fed.inter_delay[i][j] = Time::seconds(uniform(rng, 0.005, 0.05));
        }
    }
    return fed;
}

// Offload channel backed by the super-master placement.
inline OffloadChannel super_master_channel(FederationState& fed, Time now, InterStats* stats = nullptr) {
    return [&fed, now, stats](const OffloadRequest& req) -> std::optional<GlobalPlacement> {
        auto out = orchestrate_offloads(now, {req}, fed, {}, stats);
        return out.front();
    };
}

} // namespace clusterless::testing
