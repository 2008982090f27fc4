#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "clusterless/simkernel.hpp"

namespace clusterless {

enum class Strategy : std::uint8_t { CLU, NKS, CLI, RRX, RNX };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);
inline constexpr Strategy kAllStrategies[] = {Strategy::CLU, Strategy::NKS, Strategy::CLI, Strategy::RRX,
                                              Strategy::RNX};

// Bottleneck refinement with a pluggable offload target policy.
class OrchestratedPlanner : public Planner {
public:
    enum class Offload : std::uint8_t { SuperMaster, None, RoundRobin, Category };

    OrchestratedPlanner(Offload offload, std::size_t clusters, std::uint64_t seed = 0);

    std::string name() const override;
    PlanResult plan(const WorkflowInstance& w, PlanEnv& env) override;

    // Round-robin target for the next offload from origin (advances the cursor).
    int next_round_robin(int origin, const std::vector<bool>& alive);
    // Fixed remote target of a category for workflows from origin.
    int category_target(int origin, int template_index) const;

private:
    Offload offload_;
    std::size_t clusters_;
    std::vector<std::size_t> cursor_;
    std::map<std::pair<int, int>, int> category_map_;
};

// Per-function placement by a least-allocated score with
// replica-per-request autoscaling and no offloading. Equal scores are
// broken uniformly at random, as kube-scheduler does.
class KubernetesPlanner : public Planner {
public:
    explicit KubernetesPlanner(double target_concurrency = 1.0, std::uint64_t seed = 0);
    std::string name() const override { return "NKS"; }
    bool plans_at_arrival() const override { return true; }
    PlanResult plan(const WorkflowInstance& w, PlanEnv& env) override;

private:
    double target_;
    std::mt19937_64 rng_;
};

// Fraction of free cores and memory at instant t, averaged.
double least_allocated_score(const WorkerState& w, Time t);

std::shared_ptr<Planner> make_planner(Strategy s, std::size_t clusters, std::uint64_t seed);

} // namespace clusterless
