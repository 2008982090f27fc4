#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clusterless/simkernel.hpp"
#include "clusterless/strategies.hpp"
#include "clusterless/workload.hpp"

namespace clusterless {

struct NodeClass {
    int cores = 1;
    double mem_gb = 1.0;
    double speed = 1.0; // execution-time multiplier
    double warm_scale_s = 1.0;
    double cold_start_s = 3.0;
};

struct ClusterProfile {
    std::string name;
    std::string master;
    // (node class, count) in column order.
    std::vector<std::pair<std::string, int>> workers;
};

struct NetworkConfig {
    double inter_delay_ms = 20.0;
    std::vector<std::vector<double>> inter_delay_matrix_ms; // overrides the scalar when present
    double intra_scale = 1.0;
    double inter_scale = 1.0;
    double phase_step_s = 7.0;
    bool fair_share = true;
    std::vector<std::string> trace_files; // one per cluster; rates in Mbit/s
    double synthetic_mean_mbps = 24.0;
    double synthetic_sigma = 0.35;
    double synthetic_correlation = 0.95;
    double synthetic_step_s = 1.0;
};

struct ExperimentConfig {
    double horizon_s = 600.0;
    std::uint64_t seed = 1;
    std::string regime = "uniform";
    Strategy strategy = Strategy::CLU;

    double epoch_s = 1.0;
    double fail_timeout_s = 5.0;
    double load_threshold = 0.75;
    double status_delay_s = 0.0;

    NetworkConfig network;

    std::optional<double> warm_ttl_s;
    // "all": every worker holds an idle replica of every function;
    // "single": one replica per function per cluster, spread over workers;
    // "none": empty image caches.
    std::string prewarm = "all";
    double image_pull_s = 5.0;

    std::map<std::string, NodeClass> node_classes;
    std::vector<ClusterProfile> clusters;
    std::map<std::string, RegimeConfig> regimes;
    DemandConfig demands;
    double zipf_alpha = 0.75;
    std::vector<FailureWindow> failures;
    std::optional<std::string> schedule_file;

    static ExperimentConfig defaults();
    void validate() const;
};

// Overlays a JSON document on the defaults. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

// Synthetic LTE-like trace in MB/s.
BandwidthTrace synthetic_trace(const NetworkConfig& net, double length_s, std::uint64_t seed);

ArrivalSchedule make_schedule(const ExperimentConfig& config);
SimConfig build_sim_config(const ExperimentConfig& config, const ArrivalSchedule& schedule);

} // namespace clusterless
