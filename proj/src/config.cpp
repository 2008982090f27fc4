#include "clusterless/config.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace clusterless {

using nlohmann::json;

namespace {

constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

// Strict view of one JSON object: every key must be consumed.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(path_ + ": expected an object");
    }

    template <typename T>
    bool get(const std::string& key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return false;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw Error(path_ + "." + key + ": wrong type");
        }
        return true;
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw Error(path_ + ": unknown key '" + it.key() + "'");
        }
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void positive(double v, const std::string& what) {
    if (!(v > 0) || !std::isfinite(v)) throw Error(what + " must be positive");
}

void non_negative(double v, const std::string& what) {
    if (!(v >= 0) || !std::isfinite(v)) throw Error(what + " must be non-negative");
}

RegimeConfig parse_regime(const std::string& name, const json& j, RegimeConfig base) {
    Obj o(j, "regimes." + name);
    base.name = name;
    o.get("rates", base.rates);
    double b = 0, e = 0;
    if (o.get("burst_begin_s", b)) base.burst_begin = Time::seconds(b);
    if (o.get("burst_end_s", e)) base.burst_end = Time::seconds(e);
    o.get("burst_rates", base.burst_rates);
    o.done();
    return base;
}

WorkflowDemand parse_demand(const std::string& wf, const json& j, WorkflowDemand base) {
    Obj o(j, "workload.demands." + wf);
    std::vector<double> scale;
    if (o.get("size_scale", scale)) {
        if (scale.size() != 3) throw Error(o.path() + ".size_scale needs three entries");
        std::copy(scale.begin(), scale.end(), base.size_scale.begin());
    }
    if (const json* dl = o.child("deadlines")) {
        Obj d(*dl, o.path() + ".deadlines");
        for (const auto& cls : kDeadlineClasses) {
            std::vector<double> v;
            if (d.get(cls, v)) {
                if (v.size() != 3) throw Error(d.path() + "." + cls + " needs three entries");
                base.deadlines[cls] = {v[0], v[1], v[2]};
            }
        }
        d.done();
    }
    if (const json* fs = o.child("functions")) {
        if (!fs->is_array()) throw Error(o.path() + ".functions: expected an array");
        base.functions.clear();
        std::size_t i = 0;
        for (const auto& f : *fs) {
            Obj fo(f, o.path() + ".functions[" + std::to_string(i++) + "]");
            FunctionDemand d;
            if (!fo.get("id", d.id)) throw Error(fo.path() + ": missing id");
            fo.get("cpu", d.cpu);
            fo.get("mem_mb", d.mem_mb);
            fo.get("input_mb", d.input_mb);
            fo.get("output_mb", d.output_mb);
            fo.done();
            base.functions.push_back(d);
        }
    }
    o.done();
    return base;
}

json demand_to_json(const WorkflowDemand& d) {
    json fs = json::array();
    for (const auto& f : d.functions) {
        fs.push_back({{"id", f.id}, {"cpu", f.cpu}, {"mem_mb", f.mem_mb}, {"input_mb", f.input_mb},
                      {"output_mb", f.output_mb}});
    }
    json dl = json::object();
    for (const auto& [k, v] : d.deadlines) dl[k] = {v[0], v[1], v[2]};
    return {{"size_scale", {d.size_scale[0], d.size_scale[1], d.size_scale[2]}}, {"deadlines", dl}, {"functions", fs}};
}

} // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.node_classes = {
        {"XL", {12, 32, 0.9, 0.8, 2.5}},   {"L", {8, 32, 0.9, 0.8, 2.5}},   {"M", {4, 24, 0.9, 0.8, 2.5}},
        {"S", {2, 16, 0.9, 0.8, 2.5}},     {"4B", {4, 4, 3.0, 1.5, 5.0}},   {"4", {4, 4, 3.0, 1.5, 5.0}},
        {"3B+", {2, 1, 5.0, 2.5, 8.0}},    {"JN", {4, 4, 2.2, 1.2, 3.5}},   {"JON", {6, 8, 1.1, 1.2, 3.5}},
        {"JOA", {12, 64, 0.6, 1.2, 3.5}},  {"server", {24, 32, 0.7, 0.6, 2.0}},
    };
    c.clusters = {
        {"C1", "server", {{"M", 2}, {"S", 2}, {"4B", 1}, {"4", 3}, {"3B+", 2}, {"JN", 2}, {"JON", 1}, {"JOA", 1}}},
        {"C2", "server", {{"M", 2}, {"S", 2}, {"4B", 1}, {"4", 3}, {"3B+", 2}, {"JN", 2}, {"JOA", 1}}},
        {"C3", "L", {{"M", 1}, {"4B", 1}, {"4", 6}, {"3B+", 2}, {"JN", 1}, {"JON", 1}}},
        {"C4", "L", {{"M", 1}, {"4B", 1}, {"4", 4}, {"JN", 1}}},
        {"C5", "XL", {{"4", 4}, {"3B+", 3}}},
        {"C6", "XL", {{"4", 4}}},
    };
    for (const auto& r : {"uniform", "skewed", "dynamic"}) c.regimes[r] = default_regime(r);
    c.demands = default_demands();
    return c;
}

void ExperimentConfig::validate() const {
    positive(horizon_s, "horizon_s");
    positive(epoch_s, "orchestration.epoch_s");
    if (fail_timeout_s < epoch_s) throw Error("orchestration.fail_timeout_s must be at least one epoch");
    if (!(load_threshold > 0 && load_threshold <= 1)) throw Error("orchestration.load_threshold must lie in (0, 1]");
    non_negative(status_delay_s, "orchestration.status_delay_s");
    non_negative(network.inter_delay_ms, "network.inter_delay_ms");
    positive(network.intra_scale, "network.intra_scale");
    positive(network.inter_scale, "network.inter_scale");
    non_negative(network.phase_step_s, "network.phase_step_s");
    positive(network.synthetic_mean_mbps, "network.synthetic.mean_mbps");
    non_negative(network.synthetic_sigma, "network.synthetic.sigma");
    if (!(network.synthetic_correlation >= 0 && network.synthetic_correlation < 1)) {
        throw Error("network.synthetic.correlation must lie in [0, 1)");
    }
    positive(network.synthetic_step_s, "network.synthetic.step_s");
    if (warm_ttl_s) non_negative(*warm_ttl_s, "runtime.warm_ttl_s");
    non_negative(image_pull_s, "runtime.image_pull_s");
    if (prewarm != "all" && prewarm != "single" && prewarm != "none") {
        throw Error("runtime.prewarm must be all, single or none");
    }
    if (!(zipf_alpha >= 0)) throw Error("workload.zipf_alpha must be non-negative");
    if (clusters.empty()) throw Error("clusters must not be empty");
    const auto k = clusters.size();
    for (const auto& [name, nc] : node_classes) {
        if (nc.cores < 1) throw Error("node class " + name + " needs at least one core");
        positive(nc.mem_gb, "node class " + name + " memory");
        positive(nc.speed, "node class " + name + " speed");
        non_negative(nc.warm_scale_s, "node class " + name + " warm_scale_s");
        non_negative(nc.cold_start_s, "node class " + name + " cold_start_s");
    }
    std::set<std::string> names;
    for (const auto& c : clusters) {
        if (!names.insert(c.name).second) throw Error("duplicate cluster name " + c.name);
        if (c.workers.empty()) throw Error("cluster " + c.name + " has no workers");
        for (const auto& [cls, count] : c.workers) {
            if (!node_classes.count(cls)) throw Error("cluster " + c.name + " uses unknown node class " + cls);
            if (count < 1) throw Error("cluster " + c.name + " worker count must be positive");
        }
    }
    if (!network.inter_delay_matrix_ms.empty()) {
        if (network.inter_delay_matrix_ms.size() != k) throw Error("network.inter_delay_ms matrix has wrong size");
        for (const auto& row : network.inter_delay_matrix_ms) {
            if (row.size() != k) throw Error("network.inter_delay_ms matrix has wrong size");
        }
    }
    if (!network.trace_files.empty()) {
        if (network.trace_files.size() != k) throw Error("network.traces needs one file per cluster");
        for (const auto& f : network.trace_files) {
            if (!std::filesystem::exists(f)) throw Error("trace file " + f + " does not exist");
        }
    }
    if (schedule_file && !std::filesystem::exists(*schedule_file)) {
        throw Error("schedule file " + *schedule_file + " does not exist");
    }
    auto it = regimes.find(regime);
    if (it == regimes.end()) throw Error("unknown regime " + regime);
    for (const auto& [name, r] : regimes) r.validate(k);
    build_templates(demands);
    for (const auto& f : failures) {
        if (f.cluster < 0 || f.cluster >= static_cast<int>(k)) throw Error("failure on unknown cluster");
        if (!(f.down_at < f.up_at)) throw Error("failure window must end after it starts");
        for (const auto& g : failures) {
            if (&f != &g && f.cluster == g.cluster && f.down_at < g.up_at && g.down_at < f.up_at) {
                throw Error("overlapping failure windows on one cluster");
            }
        }
    }
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c = ExperimentConfig::defaults();
    Obj root(j, "config");
    root.get("horizon_s", c.horizon_s);
    root.get("seed", c.seed);
    root.get("regime", c.regime);
    std::string strategy;
    if (root.get("strategy", strategy)) c.strategy = parse_strategy(strategy);

    if (const json* o = root.child("orchestration")) {
        Obj oo(*o, "orchestration");
        oo.get("epoch_s", c.epoch_s);
        oo.get("fail_timeout_s", c.fail_timeout_s);
        oo.get("load_threshold", c.load_threshold);
        oo.get("status_delay_s", c.status_delay_s);
        oo.done();
    }
    if (const json* n = root.child("network")) {
        Obj no(*n, "network");
        if (const json* d = no.child("inter_delay_ms")) {
            if (d->is_number()) {
                c.network.inter_delay_ms = d->get<double>();
            } else {
                try {
                    c.network.inter_delay_matrix_ms = d->get<std::vector<std::vector<double>>>();
                } catch (const json::exception&) {
                    throw Error("network.inter_delay_ms: expected a number or a matrix");
                }
            }
        }
        no.get("intra_scale", c.network.intra_scale);
        no.get("inter_scale", c.network.inter_scale);
        no.get("phase_step_s", c.network.phase_step_s);
        no.get("fair_share", c.network.fair_share);
        if (no.get("traces", c.network.trace_files)) {
            for (auto& f : c.network.trace_files) {
                if (std::filesystem::path(f).is_relative() && !base_dir.empty()) f = (base_dir / f).string();
            }
        }
        if (const json* s = no.child("synthetic")) {
            Obj so(*s, "network.synthetic");
            so.get("mean_mbps", c.network.synthetic_mean_mbps);
            so.get("sigma", c.network.synthetic_sigma);
            so.get("correlation", c.network.synthetic_correlation);
            so.get("step_s", c.network.synthetic_step_s);
            so.done();
        }
        no.done();
    }
    if (const json* r = root.child("runtime")) {
        Obj ro(*r, "runtime");
        double ttl = 0;
        if (ro.get("warm_ttl_s", ttl)) c.warm_ttl_s = ttl;
        ro.get("prewarm", c.prewarm);
        ro.get("image_pull_s", c.image_pull_s);
        ro.done();
    }
    if (const json* nc = root.child("node_classes")) {
        if (!nc->is_object()) throw Error("node_classes: expected an object");
        for (auto it = nc->begin(); it != nc->end(); ++it) {
            NodeClass cls = c.node_classes.count(it.key()) ? c.node_classes[it.key()] : NodeClass{};
            Obj co(it.value(), "node_classes." + it.key());
            co.get("cores", cls.cores);
            co.get("mem_gb", cls.mem_gb);
            co.get("speed", cls.speed);
            co.get("warm_scale_s", cls.warm_scale_s);
            co.get("cold_start_s", cls.cold_start_s);
            co.done();
            c.node_classes[it.key()] = cls;
        }
    }
    if (const json* cl = root.child("clusters")) {
        if (!cl->is_array()) throw Error("clusters: expected an array");
        c.clusters.clear();
        std::size_t i = 0;
        for (const auto& x : *cl) {
            Obj co(x, "clusters[" + std::to_string(i++) + "]");
            ClusterProfile p;
            if (!co.get("name", p.name)) throw Error(co.path() + ": missing name");
            co.get("master", p.master);
            const json* ws = co.child("workers");
            if (!ws || !ws->is_array()) throw Error(co.path() + ".workers: expected an array");
            std::size_t wi = 0;
            for (const auto& w : *ws) {
                Obj wo(w, co.path() + ".workers[" + std::to_string(wi++) + "]");
                std::string cls;
                int count = 1;
                if (!wo.get("class", cls)) throw Error(wo.path() + ": missing class");
                wo.get("count", count);
                wo.done();
                p.workers.emplace_back(cls, count);
            }
            co.done();
            c.clusters.push_back(std::move(p));
        }
    }
    if (const json* rg = root.child("regimes")) {
        if (!rg->is_object()) throw Error("regimes: expected an object");
        for (auto it = rg->begin(); it != rg->end(); ++it) {
            RegimeConfig base = c.regimes.count(it.key()) ? c.regimes[it.key()] : RegimeConfig{};
            c.regimes[it.key()] = parse_regime(it.key(), it.value(), base);
        }
    }
    if (const json* wl = root.child("workload")) {
        Obj wo(*wl, "workload");
        wo.get("zipf_alpha", c.zipf_alpha);
        std::string sched;
        if (wo.get("schedule", sched)) {
            if (std::filesystem::path(sched).is_relative() && !base_dir.empty()) sched = (base_dir / sched).string();
            c.schedule_file = sched;
        }
        if (const json* d = wo.child("demands")) {
            if (!d->is_object()) throw Error("workload.demands: expected an object");
            for (auto it = d->begin(); it != d->end(); ++it) {
                if (it.key() != "T2SC" && it.key() != "RT") throw Error("workload.demands: unknown workflow " + it.key());
                c.demands.workflows[it.key()] = parse_demand(it.key(), it.value(), c.demands.workflows[it.key()]);
            }
        }
        wo.done();
    }
    if (const json* fl = root.child("failures")) {
        if (!fl->is_array()) throw Error("failures: expected an array");
        std::size_t i = 0;
        for (const auto& x : *fl) {
            Obj fo(x, "failures[" + std::to_string(i++) + "]");
            int cluster = 0;
            double down = 0, up = 0;
            if (!fo.get("cluster", cluster) || !fo.get("down_s", down) || !fo.get("up_s", up)) {
                throw Error(fo.path() + ": needs cluster, down_s and up_s");
            }
            fo.done();
            c.failures.push_back({cluster - 1, Time::seconds(down), Time::seconds(up)});
        }
    }
    root.done();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["horizon_s"] = c.horizon_s;
    j["seed"] = c.seed;
    j["regime"] = c.regime;
    j["strategy"] = std::string(to_string(c.strategy));
    j["orchestration"] = {{"epoch_s", c.epoch_s},
                          {"fail_timeout_s", c.fail_timeout_s},
                          {"load_threshold", c.load_threshold},
                          {"status_delay_s", c.status_delay_s}};
    json net;
    if (c.network.inter_delay_matrix_ms.empty()) {
        net["inter_delay_ms"] = c.network.inter_delay_ms;
    } else {
        net["inter_delay_ms"] = c.network.inter_delay_matrix_ms;
    }
    net["intra_scale"] = c.network.intra_scale;
    net["inter_scale"] = c.network.inter_scale;
    net["phase_step_s"] = c.network.phase_step_s;
    net["fair_share"] = c.network.fair_share;
    net["traces"] = c.network.trace_files;
    net["synthetic"] = {{"mean_mbps", c.network.synthetic_mean_mbps},
                        {"sigma", c.network.synthetic_sigma},
                        {"correlation", c.network.synthetic_correlation},
                        {"step_s", c.network.synthetic_step_s}};
    j["network"] = net;
    j["runtime"] = {{"warm_ttl_s", c.warm_ttl_s ? json(*c.warm_ttl_s) : json(nullptr)},
                    {"prewarm", c.prewarm},
                    {"image_pull_s", c.image_pull_s}};
    json nc = json::object();
    for (const auto& [name, cls] : c.node_classes) {
        nc[name] = {{"cores", cls.cores},
                    {"mem_gb", cls.mem_gb},
                    {"speed", cls.speed},
                    {"warm_scale_s", cls.warm_scale_s},
                    {"cold_start_s", cls.cold_start_s}};
    }
    j["node_classes"] = nc;
    json cl = json::array();
    for (const auto& p : c.clusters) {
        json ws = json::array();
        for (const auto& [cls, count] : p.workers) ws.push_back({{"class", cls}, {"count", count}});
        cl.push_back({{"name", p.name}, {"master", p.master}, {"workers", ws}});
    }
    j["clusters"] = cl;
    json rg = json::object();
    for (const auto& [name, r] : c.regimes) {
        json x = {{"rates", r.rates}};
        if (r.burst_begin) x["burst_begin_s"] = r.burst_begin->to_seconds();
        if (r.burst_end) x["burst_end_s"] = r.burst_end->to_seconds();
        if (!r.burst_rates.empty()) x["burst_rates"] = r.burst_rates;
        rg[name] = x;
    }
    j["regimes"] = rg;
    json dm = json::object();
    for (const auto& [name, d] : c.demands.workflows) dm[name] = demand_to_json(d);
    j["workload"] = {{"zipf_alpha", c.zipf_alpha}, {"demands", dm}};
    if (c.schedule_file) j["workload"]["schedule"] = *c.schedule_file;
    json fl = json::array();
    for (const auto& f : c.failures) {
        fl.push_back({{"cluster", f.cluster + 1}, {"down_s", f.down_at.to_seconds()}, {"up_s", f.up_at.to_seconds()}});
    }
    j["failures"] = fl;
    return j.dump(2);
}

BandwidthTrace synthetic_trace(const NetworkConfig& net, double length_s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double mean = net.synthetic_mean_mbps / 8.0;
    const double sigma = net.synthetic_sigma;
    const double rho = net.synthetic_correlation;
    const double innov = std::sqrt(1.0 - rho * rho) * sigma;
    std::vector<std::pair<double, double>> samples;
    double x = 0.0;
    const auto steps = static_cast<std::size_t>(std::ceil(length_s / net.synthetic_step_s)) + 1;
    for (std::size_t k = 0; k < steps; ++k) {
        const double u1 = 1.0 - uniform01(rng);
        const double u2 = uniform01(rng);
        const double eps = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        x = k == 0 ? sigma * eps : rho * x + innov * eps;
        const double rate = std::max(0.05 * mean, mean * std::exp(x - sigma * sigma / 2.0));
        samples.emplace_back(static_cast<double>(k) * net.synthetic_step_s, rate);
    }
    return BandwidthTrace(std::move(samples));
}

ArrivalSchedule make_schedule(const ExperimentConfig& c) {
    if (c.schedule_file) return load_schedule(*c.schedule_file, c.clusters.size());
    return generate_arrivals(c.regimes.at(c.regime), c.clusters.size(), Time::seconds(c.horizon_s), c.seed, 18,
                             c.zipf_alpha);
}

SimConfig build_sim_config(const ExperimentConfig& c, const ArrivalSchedule& schedule) {
    c.validate();
    SimConfig s;
    const auto k = c.clusters.size();
    const Time pull = Time::seconds(c.image_pull_s);
    for (std::size_t n = 0; n < k; ++n) {
        const auto& p = c.clusters[n];
        ClusterSpec cs;
        cs.name = p.name;
        cs.master_class = p.master;
        for (const auto& [cls, count] : p.workers) {
            const auto& nc = c.node_classes.at(cls);
            for (int i = 0; i < count; ++i) {
                cs.workers.push_back({cls, nc.cores, nc.mem_gb * kGiB, nc.speed, Time::seconds(nc.warm_scale_s),
                                      Time::seconds(nc.cold_start_s), pull});
            }
        }
        if (!c.network.trace_files.empty()) {
            cs.trace = BandwidthTrace::load(c.network.trace_files[n]).scaled(1.0 / 8.0);
        } else {
            cs.trace = synthetic_trace(c.network, 3.0 * c.horizon_s + 600.0, c.seed * 1000003ULL + n + 17);
        }
        s.clusters.push_back(std::move(cs));
    }
    s.epoch_len = Time::seconds(c.epoch_s);
    s.fail_timeout = Time::seconds(c.fail_timeout_s);
    s.load_threshold = c.load_threshold;
    s.inter_delay.assign(k, std::vector<Time>(k, Time::zero()));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            if (a == b) continue;
            const double ms =
                c.network.inter_delay_matrix_ms.empty() ? c.network.inter_delay_ms : c.network.inter_delay_matrix_ms[a][b];
            s.inter_delay[a][b] = Time::seconds(ms / 1000.0);
        }
    }
    s.intra_scale = c.network.intra_scale;
    s.inter_scale = c.network.inter_scale;
    s.intra_phase_step = c.network.phase_step_s;
    s.status_delay = Time::seconds(c.status_delay_s);
    if (c.warm_ttl_s) s.warm_ttl = Time::seconds(*c.warm_ttl_s);
    s.fair_share = c.network.fair_share;
    s.horizon = Time::seconds(c.horizon_s);
    const auto templates = build_templates(c.demands);
    s.workload = instantiate(schedule, templates);
    s.failures = c.failures;
    std::map<std::string, double> images;
    for (const auto& t : templates) {
        for (const auto& f : t.functions) images[f.image] = std::max(images[f.image], f.mem_demand);
    }
    if (c.prewarm == "all") {
        for (const auto& [image, mem] : images) s.prewarmed_images.push_back(image);
    } else if (c.prewarm == "single") {
        for (std::size_t n = 0; n < k; ++n) {
            const auto& ws = s.clusters[n].workers;
            std::size_t next = 0;
            for (const auto& [image, mem] : images) {
                for (std::size_t tries = 0; tries < ws.size(); ++tries) {
                    const auto z = next++ % ws.size();
                    if (ws[z].mem_bytes >= mem) {
                        s.deployments.push_back({static_cast<int>(n), static_cast<int>(z), image});
                        break;
                    }
                }
            }
        }
    }
    return s;
}

} // namespace clusterless
