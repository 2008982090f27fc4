#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>

#include "clusterless/simkernel.hpp"
#include "clusterless/strategies.hpp"
#include "random_instances.hpp"
#include "support.hpp"

using namespace clusterless;
using namespace clusterless::testing;

namespace {

const ExecutionRecord& record_of(const SimulationReport& r, std::uint64_t wf, std::size_t f) {
    for (const auto& rec : r.records) {
        if (rec.workflow_id == wf && rec.function == f) return rec;
    }
    throw Error("no record");
}

SimulationReport run_with(const SimConfig& c, Strategy s, std::uint64_t seed = 1) {
    return run(c, make_planner(s, c.clusters.size(), seed));
}

// Random federation run: 2-3 clusters, mixed workers, random DAG workload.
SimConfig random_sim(std::mt19937_64& rng, std::size_t workflows) {
    const std::vector<std::string> images{"i0", "i1", "i2", "i3"};
    std::vector<std::vector<WorkerSpec>> clusters;
    const std::size_t k = 2 + pick(rng, 2);
    for (std::size_t n = 0; n < k; ++n) {
        std::vector<WorkerSpec> ws;
        const std::size_t z = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < z; ++i) {
            const int cores = 1 + static_cast<int>(pick(rng, 3));
            const double speed = uniform(rng, 0.5, 3.0);
            ws.push_back(worker_spec(cores, speed, 1.0, 3.0, 4.0));
        }
        clusters.push_back(ws);
    }
    auto c = sim_config(clusters, uniform(rng, 2, 20), 0.02, 120);
    c.fair_share = rng() % 2 == 0;
    c.prewarmed_images = {"i0", "i1"};
    for (std::size_t i = 0; i < workflows; ++i) {
        const Time at = Time::seconds(uniform(rng, 0, 60));
        const int origin = static_cast<int>(pick(rng, k));
        c.workload.push_back(random_workflow(rng, i, 1 + pick(rng, 6), origin, at, images));
    }
    std::stable_sort(c.workload.begin(), c.workload.end(),
                     [](const WorkflowInstance& a, const WorkflowInstance& b) { return a.arrival() < b.arrival(); });
    return c;
}

} // namespace

TEST_CASE("trace transfer integration") {
    CHECK(transfer(0, BandwidthTrace::constant(2), s(3)) == s(3));
    CHECK(transfer(10, BandwidthTrace::constant(2), s(0)) == s(5));
    BandwidthTrace steps({{0.0, 1.0}, {4.0, 3.0}});
    CHECK(transfer(10, steps, s(0)) == s(6));
    CHECK(steps.rate_at(s(3.9)) == 1.0);
    CHECK(steps.rate_at(s(100)) == 3.0);
}

TEST_CASE("empty workload still records every epoch") {
    auto c = sim_config({{worker_spec(2, 1)}, {worker_spec(2, 1)}}, 10, 0, 10);
    auto r = run_with(c, Strategy::CLU);
    CHECK(r.records.empty());
    CHECK(r.workflows.empty());
    CHECK(r.super_master.size() >= 10);
    for (std::size_t e = 0; e < r.super_master.size(); ++e) CHECK(r.super_master[e].epoch == e);
}

TEST_CASE("execution on an idle warm worker") {
    auto c = sim_config({{worker_spec(4, 1.0)}});
    c.prewarmed_images = {"a"};
    c.workload.push_back(chain(1, {fn("a", 5)}, s(0.5), s(30)));
    auto r = run_with(c, Strategy::CLU);
    const auto& rec = record_of(r, 1, 0);
    CHECK(rec.executed_mode == ExecutionMode::WarmExecution);
    CHECK(rec.start_exec == rec.enqueue);
    CHECK(rec.finish == rec.enqueue + s(5));
    CHECK(r.workflows[0].status == WorkflowStatus::OnTime);
}

TEST_CASE("queued execution behind a running function") {
    auto c = sim_config({{worker_spec(1, 1.0)}});
    c.prewarmed_images = {"a"};
    c.workload.push_back(chain(1, {fn("a", 5)}, s(0.2), s(60)));
    c.workload.push_back(chain(2, {fn("a", 5)}, s(2.5), s(60)));
    auto r = run_with(c, Strategy::CLU);
    const auto& first = record_of(r, 1, 0);
    const auto& second = record_of(r, 2, 0);
    // The first finishes at 6; the second is enqueued at 3 with 3 s left.
    REQUIRE(first.finish == s(6));
    CHECK(second.enqueue == s(3));
    CHECK(second.start_exec == second.enqueue + s(3));
    CHECK(second.finish == second.enqueue + s(8));
}

TEST_CASE("cold start on an empty worker") {
    auto c = sim_config({{worker_spec(1, 1.0, 1.0, 4.0)}});
    c.workload.push_back(chain(1, {fn("a", 5)}, s(0.5), s(30)));
    auto r = run_with(c, Strategy::CLU);
    const auto& rec = record_of(r, 1, 0);
    CHECK(rec.executed_mode == ExecutionMode::ColdScaling);
    CHECK(rec.finish == rec.enqueue + s(9));
}

TEST_CASE("single-path workflow replays its plan") {
    auto c = sim_config({{worker_spec(1, 2.0)}});
    c.prewarmed_images = {"a", "b", "c"};
    c.workload.push_back(chain(1, {fn("a", 1), fn("b", 2), fn("c", 0.5)}, s(0.5), s(30)));
    auto r = run_with(c, Strategy::CLU);
    // Planned at the epoch after arrival: 1 + 2 + 4 + 1.
    CHECK(r.workflows[0].planned_finish == s(8));
    CHECK(r.workflows[0].completion == s(8));
    CHECK(record_of(r, 1, 1).enqueue == s(3));
    CHECK(record_of(r, 1, 2).finish == s(8));
}

TEST_CASE("same configuration runs are identical") {
    std::mt19937_64 rng(3);
    auto c = random_sim(rng, 30);
    auto a = run_with(c, Strategy::CLU);
    auto b = run_with(c, Strategy::CLU);
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.events == b.events);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].workflow_id == b.records[i].workflow_id);
        CHECK(a.records[i].function == b.records[i].function);
        CHECK(a.records[i].cluster == b.records[i].cluster);
        CHECK(a.records[i].worker == b.records[i].worker);
        CHECK(a.records[i].finish == b.records[i].finish);
    }
}

TEST_CASE("failing the holder elects a new one within the timeout bound") {
    auto c = sim_config({{worker_spec(2, 1)}, {worker_spec(2, 1)}, {worker_spec(2, 1)}}, 10, 0, 30);
    auto probe = run_with(c, Strategy::CLU);
    REQUIRE(probe.super_master.size() > 3);
    const int holder = *probe.super_master[3].holder;
    c.failures.push_back({holder, s(3.5), s(20)});
    auto r = run_with(c, Strategy::CLU);
    std::optional<std::size_t> switched;
    for (std::size_t e = 4; e < r.super_master.size(); ++e) {
        const auto& h = r.super_master[e].holder;
        if (h && *h != holder) {
            switched = e;
            break;
        }
    }
    REQUIRE(switched);
    // Last heartbeat at epoch 3; the new holder appears within 6 epochs.
    CHECK(*switched - 3 <= 6);
    // Recovered cluster is alive again at the next epoch after its heartbeat.
    CHECK(r.super_master[21].alive[static_cast<std::size_t>(holder)]);
}

TEST_CASE("failing a non-holder leaves the holder in place") {
    auto c = sim_config({{worker_spec(2, 1)}, {worker_spec(2, 1)}, {worker_spec(2, 1)}}, 10, 0, 30);
    auto probe = run_with(c, Strategy::CLU);
    const int holder = *probe.super_master[3].holder;
    const int other = (holder + 1) % 3;
    c.failures.push_back({other, s(3.5), s(20)});
    auto r = run_with(c, Strategy::CLU);
    for (const auto& rec : r.super_master) {
        REQUIRE(rec.holder);
        CHECK(*rec.holder == holder);
    }
}

TEST_CASE("overlapping failure windows are rejected") {
    auto c = sim_config({{worker_spec(1, 1)}, {worker_spec(1, 1)}}, 10, 0, 30);
    Simulator sim(c, make_planner(Strategy::CLU, 2, 1));
    sim.inject_failure(0, s(1), s(5));
    CHECK_THROWS_AS(sim.inject_failure(0, s(4), s(8)), Error);
    CHECK_THROWS_AS(sim.inject_failure(1, s(4), s(3)), Error);
}

TEST_CASE("utilization per window") {
    SimulationReport r;
    r.cluster_cores = {4};
    r.horizon = s(30);
    r.end_time = s(30);
    ExecutionRecord a;
    a.cluster = 0;
    a.run_start = s(10);
    a.finish = s(20);
    r.records = {a, a};
    auto u = cpu_utilization_series(r, 0, s(10));
    REQUIRE(u.size() == 3);
    CHECK(u[0] == 0.0);
    CHECK(u[1] == 0.5);
    r.records = {a, a, a, a};
    CHECK(cpu_utilization_series(r, 0, s(10))[1] == 1.0);
}

TEST_CASE("kernel invariants on random federations") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 12; ++trial) {
        auto c = random_sim(rng, 25);
        for (auto strat : kAllStrategies) {
            auto r = run_with(c, strat, 1 + static_cast<std::uint64_t>(trial));
            std::map<std::uint64_t, const WorkflowInstance*> by_id;
            for (const auto& w : c.workload) by_id[w.id()] = &w;

            // Every workflow ends in one terminal state.
            CHECK(r.workflows.size() == c.workload.size());
            std::map<std::pair<std::uint64_t, std::size_t>, const ExecutionRecord*> recs;
            for (const auto& rec : r.records) {
                CHECK(rec.enqueue <= rec.run_start);
                CHECK(rec.run_start <= rec.start_exec);
                CHECK(rec.start_exec <= rec.finish);
                recs[{rec.workflow_id, rec.function}] = &rec;
            }
            for (const auto& wr : r.workflows) {
                const auto& w = *by_id.at(wr.id);
                std::size_t seen = 0;
                for (std::size_t f = 0; f < w.size(); ++f) seen += recs.count({wr.id, f});
                if (wr.status == WorkflowStatus::OnTime || wr.status == WorkflowStatus::Late) {
                    CHECK(seen == w.size());
                    CHECK((wr.status == WorkflowStatus::OnTime) == (wr.completion <= wr.deadline_abs));
                }
                if (wr.status == WorkflowStatus::Infeasible) CHECK(seen == 0);
            }
            // Dependencies: a successor is enqueued only after its inputs arrived.
            for (const auto& [key, rec] : recs) {
                if (rec->lost) continue;
                const auto& w = *by_id.at(key.first);
                for (auto g : w.predecessors(key.second)) {
                    auto it = recs.find({key.first, g});
                    REQUIRE(it != recs.end());
                    CHECK(rec->enqueue >= it->second->finish);
                }
            }
            // Core conservation per worker.
            std::map<std::pair<int, int>, std::vector<std::pair<Time, int>>> sweeps;
            for (const auto& rec : r.records) {
                if (rec.finish <= rec.run_start) continue;
                sweeps[{rec.cluster, rec.worker}].push_back({rec.run_start, 1});
                sweeps[{rec.cluster, rec.worker}].push_back({rec.finish, -1});
            }
            for (auto& [key, pts] : sweeps) {
                std::sort(pts.begin(), pts.end());
                int running = 0;
                const int cap = c.clusters[static_cast<std::size_t>(key.first)]
                                    .workers[static_cast<std::size_t>(key.second)]
                                    .cores;
                for (const auto& p : pts) {
                    running += p.second;
                    CHECK(running <= cap);
                }
            }
            if (strat == Strategy::NKS || strat == Strategy::CLI) {
                for (const auto& rec : r.records) CHECK_FALSE(rec.was_offloaded);
            }
        }
    }
}
