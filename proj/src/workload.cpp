#include "clusterless/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace clusterless {

namespace {

constexpr double kMB = 1024.0 * 1024.0;

} // namespace

std::vector<std::string> workflow_functions(const std::string& workflow) {
    if (workflow == "T2SC") {
        return {"GetInput", "T2S", "Profanity", "Conversion", "Compression", "Merge", "Censor", "StoreAudio"};
    }
    if (workflow == "RT") {
        return {"GetInput", "DatasetCreation", "Training1", "Training2", "ModelSelection", "Evaluation"};
    }
    throw Error("unknown workflow " + workflow);
}

std::vector<Edge> workflow_edges(const std::string& workflow) {
    if (workflow == "T2SC") return {{0, 1}, {0, 2}, {1, 3}, {3, 4}, {4, 5}, {2, 5}, {5, 6}, {6, 7}};
    if (workflow == "RT") return {{0, 1}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {4, 5}};
    throw Error("unknown workflow " + workflow);
}

DemandConfig default_demands() {
    DemandConfig d;
    auto& t = d.workflows["T2SC"];
    t.functions = {
        {"GetInput", 0.45, 256, 0.002, 0.002},
        {"T2S", 3.3, 1536, 0, 0.1},
        {"Profanity", 1.35, 384, 0, 0.002},
        {"Conversion", 1.35, 512, 0, 0.1},
        {"Compression", 1.2, 512, 0, 0.1},
        {"Merge", 0.9, 384, 0, 0.1},
        {"Censor", 1.35, 512, 0, 0.1},
        {"StoreAudio", 0.45, 256, 0, 0.0},
    };
    t.size_scale = {1.0, 2.5, 7.5};
    // Lenient-large below moderate-large is kept as printed.
    t.deadlines = {{"strict", {70, 90, 110}}, {"moderate", {100, 130, 180}}, {"lenient", {130, 180, 150}}};

    auto& r = d.workflows["RT"];
    r.functions = {
        {"GetInput", 0.6, 256, 0.08, 0.08},
        {"DatasetCreation", 1.8, 512, 0, 0.08},
        {"Training1", 4.5, 2048, 0, 0.05},
        {"Training2", 3.6, 1536, 0, 0.05},
        {"ModelSelection", 0.9, 512, 0, 0.02},
        {"Evaluation", 1.5, 512, 0, 0.0},
    };
    r.size_scale = {1.0, 4.0, 10.0};
    r.deadlines = {{"strict", {80, 110, 150}}, {"moderate", {100, 150, 200}}, {"lenient", {120, 180, 250}}};
    return d;
}

std::vector<WorkflowTemplate> build_templates(const DemandConfig& demands) {
    std::vector<WorkflowTemplate> out;
    int index = 1;
    for (const std::string wf : {"T2SC", "RT"}) {
        auto it = demands.workflows.find(wf);
        if (it == demands.workflows.end()) throw Error("missing demand profile for " + wf);
        const auto& prof = it->second;
        const auto names = workflow_functions(wf);
        std::vector<const FunctionDemand*> by_name;
        for (const auto& n : names) {
            auto f = std::find_if(prof.functions.begin(), prof.functions.end(),
                                  [&](const FunctionDemand& x) { return x.id == n; });
            if (f == prof.functions.end()) throw Error("missing demand entry for " + wf + "/" + n);
            by_name.push_back(&*f);
        }
        if (prof.functions.size() != names.size()) throw Error("unexpected demand entries for " + wf);
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t d = 0; d < 3; ++d) {
                auto dl = prof.deadlines.find(kDeadlineClasses[d]);
                if (dl == prof.deadlines.end()) throw Error("missing " + kDeadlineClasses[d] + " deadline for " + wf);
                WorkflowTemplate t;
                t.index = index++;
                t.workflow = wf;
                t.size_class = kSizeClasses[s];
                t.deadline_class = kDeadlineClasses[d];
                t.deadline = Time::seconds(dl->second[s]);
                const double k = prof.size_scale[s];
                for (const auto* fd : by_name) {
                    FunctionSpec f;
                    f.id = fd->id;
                    f.image = wf + "/" + fd->id;
                    f.cpu_demand = fd->cpu * k;
                    f.mem_demand = fd->mem_mb * kMB;
                    f.input_size = fd->input_mb * k;
                    f.output_size = fd->output_mb * k;
                    f.validate();
                    t.functions.push_back(std::move(f));
                }
                t.edges = workflow_edges(wf);
                out.push_back(std::move(t));
            }
        }
    }
    return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ZipfSampler::ZipfSampler(std::size_t k_max, double alpha) {
    if (k_max == 0) throw Error("zipf support must be non-empty");
    double z = 0.0;
    for (std::size_t j = 1; j <= k_max; ++j) z += 1.0 / std::pow(static_cast<double>(j), alpha);
    double acc = 0.0;
    for (std::size_t i = 1; i <= k_max; ++i) {
        pmf_.push_back(1.0 / std::pow(static_cast<double>(i), alpha) / z);
        acc += pmf_.back();
        cdf_.push_back(acc);
    }
    cdf_.back() = 1.0;
}

std::size_t ZipfSampler::sample(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::size_t>(it - cdf_.begin()) + 1;
}

void RegimeConfig::validate(std::size_t clusters) const {
    if (rates.size() != clusters) throw Error("regime " + name + " needs one rate per cluster");
    for (double r : rates) {
        if (!(r >= 0)) throw Error("arrival rates must be non-negative");
    }
    if (name == "dynamic" && (!burst_begin || !burst_end)) throw Error("dynamic regime needs transition times");
    if (burst_begin || burst_end) {
        if (!burst_begin || !burst_end || !(*burst_begin < *burst_end)) throw Error("invalid burst window");
        if (burst_rates.size() != clusters) throw Error("burst needs one rate per cluster");
        for (double r : burst_rates) {
            if (!(r >= 0)) throw Error("arrival rates must be non-negative");
        }
    }
}

double RegimeConfig::rate(std::size_t cluster, Time t) const {
    if (burst_begin && burst_end && t >= *burst_begin && t < *burst_end) return burst_rates.at(cluster);
    return rates.at(cluster);
}

RegimeConfig default_regime(const std::string& name) {
    RegimeConfig r;
    r.name = name;
    if (name == "uniform") {
        r.rates.assign(6, 0.33);
    } else if (name == "skewed") {
        r.rates = {0.1, 0.05, 0.55, 0.5, 0.4, 0.4};
    } else if (name == "dynamic") {
        r.rates.assign(6, 0.33);
        r.burst_begin = Time::seconds(400);
        r.burst_end = Time::seconds(500);
        r.burst_rates = {2.0, 1.0, 1.0, 0.5, 0.5, 0.5};
    } else {
        throw Error("unknown regime " + name);
    }
    return r;
}

ArrivalSchedule generate_arrivals(const RegimeConfig& regime, std::size_t clusters, Time horizon,
                                  std::uint64_t seed, std::size_t templates, double zipf_alpha) {
    if (horizon <= Time::zero()) throw Error("horizon must be positive");
    regime.validate(clusters);
    ArrivalSchedule out;
    out.regime = regime.name;
    out.seed = seed;

    // Rate changes only at the burst edges.
    std::vector<Time> edges{Time::zero()};
    if (regime.burst_begin) {
        edges.push_back(*regime.burst_begin);
        edges.push_back(*regime.burst_end);
    }
    edges.push_back(horizon);
    std::sort(edges.begin(), edges.end());

    for (std::size_t n = 0; n < clusters; ++n) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + n + 1);
        double t = 0.0;
        for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
            const double b = edges[s].to_seconds();
            const double e = std::min(edges[s + 1].to_seconds(), horizon.to_seconds());
            if (e <= b) continue;
            const double lambda = regime.rate(n, edges[s]);
            t = std::max(t, b);
            if (lambda <= 0) continue;
            // Memoryless: a gap crossing the segment end restarts there.
            while (true) {
                const double gap = -std::log1p(-uniform01(rng)) / lambda;
                if (t + gap >= e) {
                    t = e;
                    break;
                }
                t += gap;
                out.entries.push_back({Time::seconds(t), static_cast<int>(n), 0});
            }
        }
    }
    std::stable_sort(out.entries.begin(), out.entries.end(), [](const ArrivalEntry& a, const ArrivalEntry& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.cluster < b.cluster;
    });
    ZipfSampler zipf(templates, zipf_alpha);
    std::mt19937_64 pick(seed ^ 0xD1B54A32D192ED03ULL);
    for (auto& e : out.entries) e.template_index = static_cast<int>(zipf.sample(pick));
    return out;
}

std::string schedule_text(const ArrivalSchedule& schedule) {
    std::ostringstream os;
    for (const auto& e : schedule.entries) {
        os << format_seconds(e.time) << ' ' << (e.cluster + 1) << ' ' << e.template_index << '\n';
    }
    return os.str();
}

void save_schedule(const ArrivalSchedule& schedule, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write schedule " + path.string());
    out << schedule_text(schedule);
}

ArrivalSchedule load_schedule(const std::filesystem::path& path, std::size_t clusters) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schedule " + path.string());
    ArrivalSchedule out;
    out.regime = "file";
    std::string line;
    std::size_t lineno = 0;
    Time last = Time::zero();
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double t;
        long cluster, k;
        if (!(ls >> t)) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        if (!(ls >> cluster >> k)) throw Error(where + "expected 'time cluster template_index'");
        if (t < 0) throw Error(where + "negative time");
        if (cluster < 1 || cluster > static_cast<long>(clusters)) throw Error(where + "cluster out of range");
        if (k < 1 || k > 18) throw Error(where + "template index out of range");
        ArrivalEntry e{Time::seconds(t), static_cast<int>(cluster - 1), static_cast<int>(k)};
        if (e.time < last) throw Error(where + "times must be non-decreasing");
        last = e.time;
        out.entries.push_back(e);
    }
    return out;
}

std::vector<WorkflowInstance> instantiate(const ArrivalSchedule& schedule,
                                          const std::vector<WorkflowTemplate>& templates) {
    std::vector<WorkflowInstance> out;
    out.reserve(schedule.entries.size());
    std::uint64_t id = 0;
    for (const auto& e : schedule.entries) {
        auto it = std::find_if(templates.begin(), templates.end(),
                               [&](const WorkflowTemplate& t) { return t.index == e.template_index; });
        if (it == templates.end()) throw Error("schedule refers to unknown template");
        out.emplace_back(id++, it->functions, it->edges, e.time, it->deadline, e.cluster, it->tag());
    }
    return out;
}

} // namespace clusterless
