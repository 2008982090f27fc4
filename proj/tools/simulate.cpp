#include <iostream>

#include "CLI11.hpp"
#include "clusterless/experiment.hpp"

using namespace clusterless;

int main(int argc, char** argv) {
    CLI::App app{"Deadline-aware workflow orchestration simulator"};
    std::string config_path, strategy, regime, out, sweep, schedule;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    auto* strategy_opt = app.add_option("--strategy", strategy, "CLU, NKS, CLI, RRX or RNX");
    auto* regime_opt = app.add_option("--regime", regime, "uniform, skewed or dynamic");
    auto* seed_opt = app.add_option("--seed", seed, "workload seed");
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--sweep", sweep, "strategies or seeds=<n>");
    app.add_option("--schedule", schedule, "arrival schedule file (time cluster template)");
    CLI11_PARSE(app, argc, argv);

    try {
        auto config = load_config(config_path);
        if (*strategy_opt) config.strategy = parse_strategy(strategy);
        if (*regime_opt) config.regime = regime;
        if (*seed_opt) config.seed = seed;
        if (!schedule.empty()) config.schedule_file = schedule;
        config.validate();
        const auto spec = parse_sweep(sweep);
        const auto summary = run_experiment(config, spec, out);
        for (std::size_t i = 0; i < summary.metrics.size(); ++i) {
            const auto& m = summary.metrics[i];
            const auto& s = m.overall;
            std::cout << (summary.cells[i].empty() ? m.strategy : summary.cells[i]) << ": workflows=" << s.workflows
                      << " satisfaction=" << fmt(s.satisfaction) << " mean_completion_s=" << fmt(s.mean_completion_s)
                      << " mean_violation_s=" << fmt(s.mean_violation_s) << " internal_share=" << fmt(s.internal_share)
                      << " warm_share=" << fmt(s.mode_share[0]) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "simulate: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
