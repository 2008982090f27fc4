#include "clusterless/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace clusterless {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

std::string comparison_csv(const std::vector<std::string>& cells, const std::vector<Metrics>& ms) {
    std::ostringstream os;
    os << "cell,strategy,workflows,satisfaction,mean_completion_s,sd_completion_s,mean_violation_s,"
          "internal_share,warm,warm_scaling,cold_scaling,offloading\n";
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto& s = ms[i].overall;
        os << cells[i] << ',' << ms[i].strategy << ',' << s.workflows << ',' << fmt(s.satisfaction) << ','
           << fmt(s.mean_completion_s) << ',' << fmt(s.sd_completion_s) << ',' << fmt(s.mean_violation_s) << ','
           << fmt(s.internal_share);
        for (double x : s.mode_share) os << ',' << fmt(x);
        os << '\n';
    }
    return os.str();
}

} // namespace

RunOutput run_single(const ExperimentConfig& config, const ArrivalSchedule& schedule) {
    auto sim = build_sim_config(config, schedule);
    auto planner = make_planner(config.strategy, sim.clusters.size(), config.seed);
    RunOutput out;
    out.report = run(sim, planner);
    out.metrics = compute_metrics(out.report);
    return out;
}

std::string content_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void export_run(const RunOutput& run, const ExperimentConfig& config, const ArrivalSchedule& schedule,
                const fs::path& dir) {
    make_dir(dir);
    make_dir(dir / "plots");
    const auto cfg = config_to_json(config);
    const auto sched = schedule_text(schedule);
    nlohmann::ordered_json manifest;
    manifest["tool"] = "clusterless";
    manifest["version"] = kVersion;
    manifest["json_library"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                               std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                               std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    manifest["compiler"] = __VERSION__;
    manifest["strategy"] = run.report.strategy;
    manifest["regime"] = config.regime;
    manifest["seed"] = config.seed;
    manifest["horizon_s"] = config.horizon_s;
    manifest["config_hash"] = content_hash(cfg);
    manifest["schedule_hash"] = content_hash(sched);
    manifest["arrivals"] = schedule.entries.size();
    manifest["events"] = run.report.events;
    manifest["end_time_s"] = run.report.end_time.to_seconds();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    write_file(dir / "config.json", cfg + "\n");
    write_file(dir / "schedule.txt", sched);
    write_file(dir / "workflows.csv", workflows_csv(run.metrics));
    write_file(dir / "functions.csv", functions_csv(run.metrics));
    write_file(dir / "timeseries.csv", timeseries_csv(run.metrics));
    write_file(dir / "super_master.csv", super_master_csv(run.metrics));
    write_file(dir / "aggregate.json", aggregate_json(run.metrics));
    for (const auto& [name, text] : plot_data(run.metrics)) write_file(dir / "plots" / name, text);
}

SweepSpec parse_sweep(const std::string& text) {
    SweepSpec s;
    if (text.empty()) return s;
    if (text == "strategies") {
        s.kind = SweepSpec::Kind::Strategies;
        return s;
    }
    if (text.rfind("seeds=", 0) == 0) {
        const auto n = text.substr(6);
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(n, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != n.size() || n.empty() || v < 1) throw Error("--sweep seeds=<n> needs a positive integer");
        s.kind = SweepSpec::Kind::Seeds;
        s.seeds = static_cast<std::size_t>(v);
        return s;
    }
    throw Error("unknown sweep '" + text + "' (expected strategies or seeds=<n>)");
}

std::string sweep_statistics_json(const std::vector<std::map<std::string, double>>& runs) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (runs.empty()) return j.dump(2) + "\n";
    for (const auto& [key, unused] : runs.front()) {
        (void)unused;
        std::vector<double> v;
        for (const auto& r : runs) {
            auto it = r.find(key);
            if (it != r.end()) v.push_back(it->second);
        }
        j[key] = {{"mean", mean(v)}, {"sd", stddev(v)}, {"n", v.size()}};
    }
    return j.dump(2) + "\n";
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const SweepSpec& sweep, const fs::path& out) {
    config.validate();
    make_dir(out);
    ExperimentSummary summary;
    switch (sweep.kind) {
    case SweepSpec::Kind::None: {
        const auto schedule = make_schedule(config);
        auto r = run_single(config, schedule);
        export_run(r, config, schedule, out);
        summary.cells.emplace_back();
        summary.metrics.push_back(std::move(r.metrics));
        break;
    }
    case SweepSpec::Kind::Strategies: {
        // Every strategy consumes the same arrivals.
        const auto schedule = make_schedule(config);
        for (auto s : kAllStrategies) {
            auto c = config;
            c.strategy = s;
            auto r = run_single(c, schedule);
            const std::string cell(to_string(s));
            export_run(r, c, schedule, out / cell);
            summary.cells.push_back(cell);
            summary.metrics.push_back(std::move(r.metrics));
        }
        write_file(out / "comparison.csv", comparison_csv(summary.cells, summary.metrics));
        break;
    }
    case SweepSpec::Kind::Seeds: {
        std::vector<std::map<std::string, double>> scalars;
        for (std::size_t i = 0; i < sweep.seeds; ++i) {
            auto c = config;
            c.seed = config.seed + i;
            const auto schedule = make_schedule(c);
            auto r = run_single(c, schedule);
            const std::string cell = "seed-" + std::to_string(c.seed);
            export_run(r, c, schedule, out / cell);
            scalars.push_back(scalar_metrics(r.metrics));
            summary.cells.push_back(cell);
            summary.metrics.push_back(std::move(r.metrics));
        }
        write_file(out / "comparison.csv", comparison_csv(summary.cells, summary.metrics));
        write_file(out / "aggregate.json", sweep_statistics_json(scalars));
        break;
    }
    }
    return summary;
}

} // namespace clusterless
