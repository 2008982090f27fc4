#include "clusterless/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace clusterless {

namespace {

struct Acc {
    Summary s;
    std::vector<double> completion;
    std::vector<double> violation;
    std::size_t internal_workflows = 0;
    std::array<std::size_t, 4> modes{};
    std::uint64_t cand = 0, remote = 0, planned = 0;
};

void add_workflow(Acc& a, const WorkflowRow& w) {
    ++a.s.workflows;
    if (w.deadline_met) ++a.s.met;
    switch (w.status) {
    case WorkflowStatus::Late: ++a.s.late; break;
    case WorkflowStatus::Lost: ++a.s.lost; break;
    case WorkflowStatus::Infeasible: ++a.s.infeasible; break;
    case WorkflowStatus::OnTime: break;
    }
    if (w.completion_s) {
        ++a.s.completed;
        a.completion.push_back(*w.completion_s);
    }
    if (w.violation_s && *w.violation_s > 0) a.violation.push_back(*w.violation_s);
    if (w.status != WorkflowStatus::Infeasible && w.internal) ++a.internal_workflows;
    if (w.status != WorkflowStatus::Infeasible) {
        ++a.planned;
        a.cand += w.candidate_evaluations;
        a.remote += w.remote_evaluations;
    }
}

void add_function(Acc& a, const FunctionRow& f) {
    if (f.lost) return;
    ++a.s.functions;
    if (!f.offloaded) ++a.s.internal_functions;
    ++a.modes[static_cast<std::size_t>(f.mode)];
}

Summary finish(Acc& a) {
    auto& s = a.s;
    auto ratio = [](double x, double y) { return y > 0 ? x / y : 0.0; };
    s.satisfaction = ratio(static_cast<double>(s.met), static_cast<double>(s.workflows));
    s.mean_completion_s = mean(a.completion);
    s.sd_completion_s = stddev(a.completion);
    s.mean_violation_s = mean(a.violation);
    s.max_violation_s = a.violation.empty() ? 0.0 : *std::max_element(a.violation.begin(), a.violation.end());
    s.internal_share = ratio(static_cast<double>(s.internal_functions), static_cast<double>(s.functions));
    s.workflow_internal_share = ratio(static_cast<double>(a.internal_workflows), static_cast<double>(a.planned));
    for (std::size_t k = 0; k < 4; ++k) {
        s.mode_share[k] = ratio(static_cast<double>(a.modes[k]), static_cast<double>(s.functions));
    }
    s.candidate_evaluations_per_decision = ratio(static_cast<double>(a.cand), static_cast<double>(a.planned));
    s.remote_evaluations_per_decision = ratio(static_cast<double>(a.remote), static_cast<double>(a.planned));
    return s;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

const char* kModeKeys[4] = {"warm", "warm_scaling", "cold_scaling", "offloading"};

} // namespace

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf);
    if (s == "-0.000000") s = "0.000000";
    return s;
}

Metrics compute_metrics(const SimulationReport& report, Time utilization_window) {
    Metrics m;
    m.strategy = report.strategy;
    m.cluster_names = report.cluster_names;
    const auto k = report.cluster_names.size();

    std::unordered_map<std::uint64_t, std::size_t> index;
    for (const auto& r : report.workflows) {
        WorkflowRow w;
        w.id = r.id;
        w.template_index = r.tag.template_index;
        w.workflow = r.tag.workflow;
        w.size_class = r.tag.size_class;
        w.deadline_class = r.tag.deadline_class;
        w.origin = r.origin;
        w.arrival_s = r.arrival.to_seconds();
        w.deadline_s = (r.deadline_abs - r.arrival).to_seconds();
        w.status = r.status;
        if (!r.completion.is_infinite()) {
            w.completion_s = (r.completion - r.arrival).to_seconds();
            w.violation_s = r.completion > r.deadline_abs ? (r.completion - r.deadline_abs).to_seconds() : 0.0;
        }
        w.deadline_met = r.status == WorkflowStatus::OnTime;
        w.functions = r.functions;
        w.offloaded = r.offloaded;
        w.internal = r.offloaded == 0;
        w.candidate_evaluations = r.candidate_evaluations;
        w.mode_evaluations = r.mode_evaluations;
        w.remote_evaluations = r.remote_evaluations;
        w.deferrals = r.deferrals;
        index[w.id] = m.workflows.size();
        m.workflows.push_back(std::move(w));
    }
    for (const auto& r : report.records) {
        FunctionRow f;
        f.workflow_id = r.workflow_id;
        f.function = r.function;
        f.function_id = r.function_id;
        auto it = index.find(r.workflow_id);
        if (it == index.end()) throw Error("execution record for unknown workflow");
        f.origin = m.workflows[it->second].origin;
        f.cluster = r.cluster;
        f.worker = r.worker;
        f.mode = r.mode;
        f.executed_mode = r.executed_mode;
        f.enqueue_s = r.enqueue.to_seconds();
        f.run_start_s = r.run_start.to_seconds();
        f.start_exec_s = r.start_exec.to_seconds();
        f.finish_s = r.finish.is_infinite() ? 0.0 : r.finish.to_seconds();
        f.offloaded = r.was_offloaded;
        f.lost = r.lost;
        m.functions.push_back(std::move(f));
    }
    std::sort(m.functions.begin(), m.functions.end(), [](const FunctionRow& a, const FunctionRow& b) {
        return std::tie(a.workflow_id, a.function) < std::tie(b.workflow_id, b.function);
    });

    Acc all;
    std::vector<Acc> per(k);
    std::map<std::string, Acc> per_type;
    for (const auto& w : m.workflows) {
        add_workflow(all, w);
        add_workflow(per.at(static_cast<std::size_t>(w.origin)), w);
        add_workflow(per_type[w.workflow], w);
        auto& d = m.by_deadline_class[w.deadline_class];
        auto& s = m.by_size_class[w.size_class];
        ++d.count;
        ++s.count;
        if (w.deadline_met) {
            ++d.met;
            ++s.met;
        }
    }
    for (const auto& f : m.functions) {
        add_function(all, f);
        add_function(per.at(static_cast<std::size_t>(f.origin)), f);
        add_function(per_type[m.workflows[index.at(f.workflow_id)].workflow], f);
    }
    m.violations = all.violation;
    std::sort(m.violations.begin(), m.violations.end());
    m.overall = finish(all);
    for (auto& a : per) m.per_cluster.push_back(finish(a));
    for (auto& [name, a] : per_type) m.per_workflow_type[name] = finish(a);

    m.utilization_window_s = utilization_window.to_seconds();
    const auto in_horizon = static_cast<std::size_t>(
        std::max<Time::rep>(1, (report.horizon.count() + utilization_window.count() - 1) / utilization_window.count()));
    for (std::size_t c = 0; c < k; ++c) {
        m.utilization.push_back(cpu_utilization_series(report, static_cast<int>(c), utilization_window));
        const auto& u = m.utilization.back();
        std::vector<double> head(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(std::min(in_horizon, u.size())));
        m.mean_utilization.push_back(mean(head));
    }
    m.load_series = report.load_series;

    std::optional<int> prev;
    bool first = true;
    for (const auto& rec : report.super_master) {
        m.holder.push_back(rec.holder);
        m.epoch_time_s.push_back(rec.time.to_seconds());
        if (!first && rec.holder != prev) m.handovers.push_back({rec.epoch, rec.time.to_seconds(), prev, rec.holder});
        prev = rec.holder;
        first = false;
    }
    return m;
}

std::string workflows_csv(const Metrics& m) {
    std::ostringstream os;
    os << "id,template,workflow,size_class,deadline_class,origin,arrival_s,deadline_s,completion_s,status,"
          "deadline_met,violation_s,functions,offloaded,internal,candidate_evaluations,mode_evaluations,"
          "remote_evaluations,deferrals\n";
    for (const auto& w : m.workflows) {
        os << w.id << ',' << w.template_index << ',' << w.workflow << ',' << w.size_class << ',' << w.deadline_class
           << ',' << m.cluster_names.at(static_cast<std::size_t>(w.origin)) << ',' << fmt(w.arrival_s) << ','
           << fmt(w.deadline_s) << ',' << opt(w.completion_s) << ',' << to_string(w.status) << ','
           << (w.deadline_met ? 1 : 0) << ',' << opt(w.violation_s) << ',' << w.functions << ',' << w.offloaded << ','
           << (w.internal ? 1 : 0) << ',' << w.candidate_evaluations << ',' << w.mode_evaluations << ','
           << w.remote_evaluations << ',' << w.deferrals << '\n';
    }
    return os.str();
}

std::string functions_csv(const Metrics& m) {
    std::ostringstream os;
    os << "workflow_id,function,function_id,origin,cluster,worker,mode,executed_mode,enqueue_s,run_start_s,"
          "start_exec_s,finish_s,offloaded,lost\n";
    for (const auto& f : m.functions) {
        os << f.workflow_id << ',' << f.function << ',' << f.function_id << ','
           << m.cluster_names.at(static_cast<std::size_t>(f.origin)) << ','
           << (f.cluster >= 0 ? m.cluster_names.at(static_cast<std::size_t>(f.cluster)) : std::string()) << ','
           << f.worker << ',' << to_string(f.mode) << ',' << to_string(f.executed_mode) << ',' << fmt(f.enqueue_s)
           << ',' << fmt(f.run_start_s) << ',' << fmt(f.start_exec_s) << ',' << fmt(f.finish_s) << ','
           << (f.offloaded ? 1 : 0) << ',' << (f.lost ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string timeseries_csv(const Metrics& m) {
    std::ostringstream os;
    os << "epoch,time_s,cluster,load,utilization\n";
    // Utilization is attached to the window that contains the epoch.
    for (std::size_t e = 0; e < m.epoch_time_s.size(); ++e) {
        const double t = m.epoch_time_s[e];
        const auto win = static_cast<std::size_t>(t / m.utilization_window_s);
        for (std::size_t c = 0; c < m.cluster_names.size(); ++c) {
            const auto& u = m.utilization[c];
            const double util = win < u.size() ? u[win] : 0.0;
            const double load = e < m.load_series[c].size() ? m.load_series[c][e] : 0.0;
            os << e << ',' << fmt(t) << ',' << m.cluster_names[c] << ',' << fmt(load) << ',' << fmt(util) << '\n';
        }
    }
    return os.str();
}

std::string super_master_csv(const Metrics& m) {
    std::ostringstream os;
    os << "epoch,time_s,holder";
    for (const auto& n : m.cluster_names) os << ",load_" << n;
    os << '\n';
    for (std::size_t e = 0; e < m.holder.size(); ++e) {
        os << e << ',' << fmt(m.epoch_time_s[e]) << ','
           << (m.holder[e] ? m.cluster_names.at(static_cast<std::size_t>(*m.holder[e])) : std::string("none"));
        for (std::size_t c = 0; c < m.cluster_names.size(); ++c) {
            os << ',' << fmt(e < m.load_series[c].size() ? m.load_series[c][e] : 0.0);
        }
        os << '\n';
    }
    return os.str();
}

std::map<std::string, double> scalar_metrics(const Metrics& m) {
    std::map<std::string, double> out;
    auto put = [&](const std::string& p, const Summary& s) {
        out[p + "workflows"] = static_cast<double>(s.workflows);
        out[p + "satisfaction"] = s.satisfaction;
        out[p + "mean_completion_s"] = s.mean_completion_s;
        out[p + "sd_completion_s"] = s.sd_completion_s;
        out[p + "mean_violation_s"] = s.mean_violation_s;
        out[p + "max_violation_s"] = s.max_violation_s;
        out[p + "lost"] = static_cast<double>(s.lost);
        out[p + "infeasible"] = static_cast<double>(s.infeasible);
        out[p + "internal_share"] = s.internal_share;
        out[p + "workflow_internal_share"] = s.workflow_internal_share;
        for (std::size_t k = 0; k < 4; ++k) out[p + "mode_share." + kModeKeys[k]] = s.mode_share[k];
        out[p + "candidate_evaluations_per_decision"] = s.candidate_evaluations_per_decision;
        out[p + "remote_evaluations_per_decision"] = s.remote_evaluations_per_decision;
    };
    put("overall.", m.overall);
    for (std::size_t c = 0; c < m.per_cluster.size(); ++c) {
        const std::string p = "cluster." + m.cluster_names[c] + ".";
        put(p, m.per_cluster[c]);
        out[p + "mean_utilization"] = m.mean_utilization[c];
    }
    for (const auto& [name, s] : m.per_workflow_type) put("workflow." + name + ".", s);
    for (const auto& [name, r] : m.by_deadline_class) out["deadline_class." + name + ".satisfaction"] = r.rate();
    for (const auto& [name, r] : m.by_size_class) out["size_class." + name + ".satisfaction"] = r.rate();
    out["super_master.handovers"] = static_cast<double>(m.handovers.size());
    return out;
}

std::string aggregate_json(const Metrics& m) {
    using nlohmann::ordered_json;
    auto summary = [](const Summary& s) {
        ordered_json modes;
        for (std::size_t k = 0; k < 4; ++k) modes[kModeKeys[k]] = s.mode_share[k];
        return ordered_json{{"workflows", s.workflows},
                            {"completed", s.completed},
                            {"deadline_met", s.met},
                            {"late", s.late},
                            {"lost", s.lost},
                            {"infeasible", s.infeasible},
                            {"satisfaction", s.satisfaction},
                            {"mean_completion_s", s.mean_completion_s},
                            {"sd_completion_s", s.sd_completion_s},
                            {"mean_violation_s", s.mean_violation_s},
                            {"max_violation_s", s.max_violation_s},
                            {"functions", s.functions},
                            {"internal_share", s.internal_share},
                            {"workflow_internal_share", s.workflow_internal_share},
                            {"mode_share", modes},
                            {"candidate_evaluations_per_decision", s.candidate_evaluations_per_decision},
                            {"remote_evaluations_per_decision", s.remote_evaluations_per_decision}};
    };
    ordered_json j;
    j["strategy"] = m.strategy;
    j["overall"] = summary(m.overall);
    ordered_json clusters = ordered_json::object();
    for (std::size_t c = 0; c < m.per_cluster.size(); ++c) {
        auto s = summary(m.per_cluster[c]);
        s["mean_utilization"] = m.mean_utilization[c];
        clusters[m.cluster_names[c]] = s;
    }
    j["clusters"] = clusters;
    ordered_json types = ordered_json::object();
    for (const auto& [name, s] : m.per_workflow_type) types[name] = summary(s);
    j["workflow_types"] = types;
    auto rates = [](const std::map<std::string, RateStat>& x) {
        ordered_json o = ordered_json::object();
        for (const auto& [name, r] : x) o[name] = {{"count", r.count}, {"met", r.met}, {"satisfaction", r.rate()}};
        return o;
    };
    j["deadline_classes"] = rates(m.by_deadline_class);
    j["size_classes"] = rates(m.by_size_class);
    ordered_json hs = ordered_json::array();
    for (const auto& h : m.handovers) {
        auto name = [&](const std::optional<int>& c) {
            return c ? ordered_json(m.cluster_names.at(static_cast<std::size_t>(*c))) : ordered_json(nullptr);
        };
        hs.push_back({{"epoch", h.epoch}, {"time_s", h.time_s}, {"from", name(h.from)}, {"to", name(h.to)}});
    }
    j["super_master"] = {{"handovers", hs.size()}, {"timeline", hs}};
    j["decision_latency_proxy"] = "evaluated candidates per planning decision";
    return j.dump(2) + "\n";
}

std::vector<std::pair<std::string, std::string>> plot_data(const Metrics& m) {
    std::vector<std::pair<std::string, std::string>> out;
    const auto& names = m.cluster_names;
    {
        std::ostringstream os;
        os << "cluster,workflow,count,mean_completion_s,sd_completion_s\n";
        for (std::size_t c = 0; c < names.size(); ++c) {
            for (const auto& type : {"T2SC", "RT"}) {
                std::vector<double> v;
                for (const auto& w : m.workflows) {
                    if (w.origin == static_cast<int>(c) && w.workflow == type && w.completion_s) {
                        v.push_back(*w.completion_s);
                    }
                }
                os << names[c] << ',' << type << ',' << v.size() << ',' << fmt(mean(v)) << ',' << fmt(stddev(v))
                   << '\n';
            }
        }
        out.emplace_back("completion_time.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "epoch,time_s,holder,candidate_evaluations\n";
        // Work proxy of the planning done in each epoch.
        std::vector<std::uint64_t> work(m.holder.size(), 0);
        for (const auto& w : m.workflows) {
            const auto e = static_cast<std::size_t>(std::ceil(w.arrival_s));
            if (e < work.size()) work[e] += w.candidate_evaluations;
        }
        for (std::size_t e = 0; e < m.holder.size(); ++e) {
            os << e << ',' << fmt(m.epoch_time_s[e]) << ','
               << (m.holder[e] ? names.at(static_cast<std::size_t>(*m.holder[e])) : std::string("none")) << ','
               << work[e] << '\n';
        }
        out.emplace_back("super_master.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "cluster,workflows,deadline_met,satisfaction\n";
        for (std::size_t c = 0; c < names.size(); ++c) {
            const auto& s = m.per_cluster[c];
            os << names[c] << ',' << s.workflows << ',' << s.met << ',' << fmt(s.satisfaction) << '\n';
        }
        os << "all," << m.overall.workflows << ',' << m.overall.met << ',' << fmt(m.overall.satisfaction) << '\n';
        out.emplace_back("satisfaction.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "workflow_id,origin,violation_s\n";
        for (const auto& w : m.workflows) {
            if (w.violation_s && *w.violation_s > 0) {
                os << w.id << ',' << names.at(static_cast<std::size_t>(w.origin)) << ',' << fmt(*w.violation_s)
                   << '\n';
            }
        }
        out.emplace_back("violation_duration.csv", os.str());
    }
    auto rate_file = [&](const std::string& key, const std::map<std::string, RateStat>& x) {
        std::ostringstream os;
        os << key << ",count,deadline_met,satisfaction\n";
        for (const auto& [name, r] : x) os << name << ',' << r.count << ',' << r.met << ',' << fmt(r.rate()) << '\n';
        return os.str();
    };
    out.emplace_back("deadline_class.csv", rate_file("deadline_class", m.by_deadline_class));
    out.emplace_back("size_class.csv", rate_file("size_class", m.by_size_class));
    {
        std::ostringstream os;
        os << "cluster,functions,internal,internal_share,external_share\n";
        for (std::size_t c = 0; c < names.size(); ++c) {
            const auto& s = m.per_cluster[c];
            os << names[c] << ',' << s.functions << ',' << s.internal_functions << ',' << fmt(s.internal_share) << ','
               << fmt(s.functions ? 1.0 - s.internal_share : 0.0) << '\n';
        }
        out.emplace_back("internal_share.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "cluster,warm,warm_scaling,cold_scaling,offloading\n";
        for (std::size_t c = 0; c < names.size(); ++c) {
            const auto& s = m.per_cluster[c];
            os << names[c];
            for (double x : s.mode_share) os << ',' << fmt(x);
            os << '\n';
        }
        out.emplace_back("mode_distribution.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "window_start_s";
        for (const auto& n : names) os << ',' << n;
        os << '\n';
        std::size_t len = 0;
        for (const auto& u : m.utilization) len = std::max(len, u.size());
        for (std::size_t i = 0; i < len; ++i) {
            os << fmt(static_cast<double>(i) * m.utilization_window_s);
            for (const auto& u : m.utilization) os << ',' << fmt(i < u.size() ? u[i] : 0.0);
            os << '\n';
        }
        out.emplace_back("cpu_utilization.csv", os.str());
    }
    return out;
}

} // namespace clusterless
