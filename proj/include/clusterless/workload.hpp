#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "clusterless/model.hpp"

namespace clusterless {

inline const std::array<std::string, 3> kSizeClasses{"small", "medium", "large"};
inline const std::array<std::string, 3> kDeadlineClasses{"strict", "moderate", "lenient"};

// Small-size demand of one function.
struct FunctionDemand {
    std::string id;
    double cpu = 1.0;       // CPU-seconds on a unit-speed core
    double mem_mb = 256.0;
    double input_mb = 0.0;  // only used by entry functions
    double output_mb = 0.0;
};

struct WorkflowDemand {
    std::vector<FunctionDemand> functions;
    // Multipliers for small, medium, large applied to cpu and output.
    std::array<double, 3> size_scale{1.0, 1.0, 1.0};
    // Deadlines in seconds per class, each as (small, medium, large).
    std::map<std::string, std::array<double, 3>> deadlines;
};

struct DemandConfig {
    std::map<std::string, WorkflowDemand> workflows; // "T2SC", "RT"
};

DemandConfig default_demands();

struct WorkflowTemplate {
    int index = 0; // 1..18
    std::string workflow;
    std::string size_class;
    std::string deadline_class;
    Time deadline;
    std::vector<FunctionSpec> functions;
    std::vector<Edge> edges;

    WorkflowTag tag() const { return {index, workflow, size_class, deadline_class}; }
};

// Fixed DAG shapes.
std::vector<std::string> workflow_functions(const std::string& workflow);
std::vector<Edge> workflow_edges(const std::string& workflow);

// Workflow-major (T2SC then RT), then size, then deadline class.
std::vector<WorkflowTemplate> build_templates(const DemandConfig& demands);

// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

class ZipfSampler {
public:
    explicit ZipfSampler(std::size_t k_max = 18, double alpha = 0.75);
    // 1-based index.
    std::size_t sample(std::mt19937_64& rng) const;
    double probability(std::size_t i) const { return pmf_.at(i - 1); }
    const std::vector<double>& pmf() const { return pmf_; }

private:
    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

struct RegimeConfig {
    std::string name = "uniform";
    std::vector<double> rates;        // per cluster, arrivals per second
    // Dynamic regime: rates switch to burst_rates over [burst_begin, burst_end).
    std::optional<Time> burst_begin;
    std::optional<Time> burst_end;
    std::vector<double> burst_rates;

    void validate(std::size_t clusters) const;
    double rate(std::size_t cluster, Time t) const;
};

// Built-in regimes for six clusters.
RegimeConfig default_regime(const std::string& name);

struct ArrivalEntry {
    Time time;
    int cluster = 0;        // 0-based
    int template_index = 1; // 1..18

    bool operator==(const ArrivalEntry&) const = default;
};

struct ArrivalSchedule {
    std::string regime;
    std::uint64_t seed = 0;
    std::vector<ArrivalEntry> entries;
};

ArrivalSchedule generate_arrivals(const RegimeConfig& regime, std::size_t clusters, Time horizon,
                                  std::uint64_t seed, std::size_t templates = 18, double zipf_alpha = 0.75);

// Text form: one "time cluster template_index" line per arrival, clusters 1-based.
void save_schedule(const ArrivalSchedule& schedule, const std::filesystem::path& path);
ArrivalSchedule load_schedule(const std::filesystem::path& path, std::size_t clusters);
std::string schedule_text(const ArrivalSchedule& schedule);

std::vector<WorkflowInstance> instantiate(const ArrivalSchedule& schedule,
                                          const std::vector<WorkflowTemplate>& templates);

} // namespace clusterless
