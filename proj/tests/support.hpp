#pragma once

#include <string>
#include <vector>

#include "clusterless/model.hpp"
#include "clusterless/simkernel.hpp"

namespace clusterless::testing {

inline Time s(double seconds) { return Time::seconds(seconds); }

inline FunctionSpec fn(const std::string& id, double cpu, double mem_mb = 128, double in_mb = 0, double out_mb = 0) {
    FunctionSpec f;
    f.id = id;
    f.image = id;
    f.cpu_demand = cpu;
    f.mem_demand = mem_mb * 1024 * 1024;
    f.input_size = in_mb;
    f.output_size = out_mb;
    return f;
}

inline WorkerState worker(int id, int cores = 1, double speed = 1.0, double ws = 1.0, double cs = 3.0,
                          double mem_gb = 4.0) {
    return make_worker(id, "test", cores, mem_gb * 1024 * 1024 * 1024, speed, s(ws), s(cs), Time::zero());
}

// Image present with one idle, materialized replica.
inline void make_warm(WorkerState& w, const std::string& image) {
    w.images[image] = 0;
    w.replicas[image].push_back(Replica{});
}

inline ClusterState cluster(int id, std::vector<WorkerState> workers, double intra_mbps = 100.0) {
    ClusterState c;
    c.id = id;
    c.name = "K" + std::to_string(id + 1);
    c.master_id = "m";
    c.workers = std::move(workers);
    c.intra_bandwidth = [intra_mbps](int, int, Time) { return intra_mbps; };
    return c;
}

inline WorkflowInstance chain(std::uint64_t id, std::vector<FunctionSpec> fs, Time arrival, Time deadline,
                              int origin = 0) {
    std::vector<Edge> edges;
    for (std::size_t i = 1; i < fs.size(); ++i) edges.emplace_back(i - 1, i);
    return WorkflowInstance(id, std::move(fs), std::move(edges), arrival, deadline, origin);
}

inline WorkerSpec worker_spec(int cores, double speed, double ws = 1.0, double cs = 3.0, double mem_gb = 4.0) {
    WorkerSpec w;
    w.node_class = "test";
    w.cores = cores;
    w.mem_bytes = mem_gb * 1024 * 1024 * 1024;
    w.speed_factor = speed;
    w.warm_scale_delay = s(ws);
    w.cold_start_delay = s(cs);
    return w;
}

// Constant links, no fair sharing, zero inter-cluster delay unless given.
inline SimConfig sim_config(std::vector<std::vector<WorkerSpec>> clusters, double mbps = 100.0,
                            double delay_s = 0.0, double horizon_s = 60.0) {
    SimConfig c;
    const auto k = clusters.size();
    for (std::size_t i = 0; i < k; ++i) {
        ClusterSpec cs;
        cs.name = "K" + std::to_string(i + 1);
        cs.master_class = "test";
        cs.workers = std::move(clusters[i]);
        cs.trace = BandwidthTrace::constant(mbps);
        c.clusters.push_back(std::move(cs));
    }
    c.inter_delay.assign(k, std::vector<Time>(k, Time::zero()));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) c.inter_delay[i][j] = s(delay_s);
        }
    }
    c.fair_share = false;
    c.horizon = s(horizon_s);
    return c;
}

} // namespace clusterless::testing
