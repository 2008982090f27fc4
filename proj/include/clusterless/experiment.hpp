#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clusterless/config.hpp"
#include "clusterless/metrics.hpp"

namespace clusterless {

inline constexpr const char* kVersion = "0.1.0";

struct RunOutput {
    SimulationReport report;
    Metrics metrics;
};

// One simulation of config.strategy over a fixed schedule.
RunOutput run_single(const ExperimentConfig& config, const ArrivalSchedule& schedule);

// 64-bit FNV-1a, printed as 16 hex digits.
std::string content_hash(const std::string& text);

// Writes manifest, tables, series, aggregates and plot data for one run.
void export_run(const RunOutput& run, const ExperimentConfig& config, const ArrivalSchedule& schedule,
                const std::filesystem::path& dir);

struct SweepSpec {
    enum class Kind { None, Strategies, Seeds } kind = Kind::None;
    std::size_t seeds = 1;
};

// "strategies" or "seeds=<n>".
SweepSpec parse_sweep(const std::string& text);

// Mean and sample standard deviation of every scalar metric across runs.
std::string sweep_statistics_json(const std::vector<std::map<std::string, double>>& runs);

struct ExperimentSummary {
    std::vector<std::string> cells; // subdirectory per cell, empty for a single run
    std::vector<Metrics> metrics;
};

ExperimentSummary run_experiment(const ExperimentConfig& config, const SweepSpec& sweep,
                                 const std::filesystem::path& out);

} // namespace clusterless
