#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clusterless/intra.hpp"
#include "clusterless/model.hpp"

namespace clusterless {

struct SuperMasterRecord {
    std::size_t epoch = 0;
    Time time = Time::zero();
    std::optional<int> holder;
    std::vector<double> loads; // load used at this epoch (refreshed or retained)
    std::vector<bool> alive;
    std::vector<Time> heartbeats;
};

struct ElectionParams {
    Time epoch_len = Time::seconds(1.0);
    Time fail_timeout = Time::seconds(5.0);
    double load_threshold = 0.75;
};

// One epoch of super-master maintenance. `previous` is the record of epoch
// e - 1 (ignored at the bootstrap epoch e = 0). `heartbeats` are the latest
// heartbeat receipt times and `reported_loads` the loads they carried.
SuperMasterRecord maintain_super_master(const SuperMasterRecord* previous, std::size_t epoch,
                                        std::span<const Time> heartbeats, std::span<const double> reported_loads,
                                        const ElectionParams& params);

// Eligibility to hold the role at an epoch.
bool eligible(const SuperMasterRecord& record, int cluster, double load_threshold);

struct InterStats {
    std::uint64_t batches = 0;
    std::uint64_t requests = 0;
    std::uint64_t remote_evaluations = 0; // remote completion-time evaluations
    std::uint64_t dispatched = 0;
    std::uint64_t retained = 0;
};

// Earliest-deadline-first inter-cluster placement of an offload batch at
// epoch t_e. Dispatched placements are committed to the destination
// cluster's book before the next request is evaluated. `alive` excludes
// clusters that must not receive work; empty means all.
std::vector<GlobalPlacement> orchestrate_offloads(Time t_e, std::vector<OffloadRequest> requests,
                                                  FederationState& federation, const std::vector<bool>& alive,
                                                  InterStats* stats = nullptr);

// Best placement of a request on one remote cluster, evaluated over every
// worker and local mode; release is t_e plus the dispatch delay.
std::optional<Candidate> remote_placement(Time t_e, const OffloadRequest& request, const ClusterState& cluster,
                                          const FederationState& federation, std::uint64_t* evaluations = nullptr);

void commit_remote(GlobalPlacement& placement, const OffloadRequest& request, FederationState& federation);

// Status exchange: masters publish (load, heartbeat) and the super-master
// sees them after a fixed propagation delay.
class StatusExchange {
public:
    StatusExchange(std::size_t clusters, Time propagation_delay);

    // Publication at time t by a live master.
    void publish(int cluster, double load, Time t);
    // Delivers every publication due at or before t.
    void deliver_until(Time t);
    // Earliest pending delivery, if any.
    std::optional<Time> next_delivery() const;

    std::span<const Time> heartbeats() const { return heartbeats_; }
    std::span<const double> loads() const { return loads_; }
    Time propagation_delay() const { return delay_; }

private:
    struct Message {
        int cluster;
        double load;
        Time due;
    };
    Time delay_;
    std::vector<Time> heartbeats_;
    std::vector<double> loads_;
    std::vector<Message> in_flight_;
};

} // namespace clusterless
