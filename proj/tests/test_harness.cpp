#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "clusterless/experiment.hpp"
#include "support.hpp"

using namespace clusterless;
using namespace clusterless::testing;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig short_config(double horizon = 60) {
    auto c = ExperimentConfig::defaults();
    c.horizon_s = horizon;
    return c;
}

WorkflowResult result(std::uint64_t id, double deadline, double completion) {
    WorkflowResult r;
    r.id = id;
    r.tag = {1, "T2SC", "small", "strict"};
    r.arrival = s(0);
    r.deadline_abs = s(deadline);
    r.completion = s(completion);
    r.planned_finish = s(completion);
    r.status = completion <= deadline ? WorkflowStatus::OnTime : WorkflowStatus::Late;
    r.functions = 1;
    return r;
}

} // namespace

TEST_CASE("strategy names round trip") {
    for (auto st : kAllStrategies) CHECK(parse_strategy(to_string(st)) == st);
    CHECK_THROWS_AS(parse_strategy("XYZ"), Error);
}

TEST_CASE("round robin cycles over the other clusters") {
    OrchestratedPlanner p(OrchestratedPlanner::Offload::RoundRobin, 3, 1);
    std::vector<int> seq;
    for (int i = 0; i < 4; ++i) seq.push_back(p.next_round_robin(0, {}));
    CHECK(seq == std::vector<int>{1, 2, 1, 2});
    // Dead clusters are skipped.
    CHECK(p.next_round_robin(0, {true, false, true}) == 2);
    CHECK(p.next_round_robin(0, {true, false, true}) == 2);
}

TEST_CASE("category targets are fixed and remote") {
    OrchestratedPlanner p(OrchestratedPlanner::Offload::Category, 4, 9);
    for (int o = 0; o < 4; ++o) {
        for (int k = 1; k <= 18; ++k) {
            const int t = p.category_target(o, k);
            CHECK(t != o);
            CHECK(t >= 0);
            CHECK(t < 4);
            CHECK(p.category_target(o, k) == t);
        }
    }
}

TEST_CASE("kubernetes baseline never offloads") {
    auto c = short_config(120);
    c.strategy = Strategy::NKS;
    c.regime = "skewed";
    const auto sched = make_schedule(c);
    auto out = run_single(c, sched);
    REQUIRE_FALSE(out.report.records.empty());
    for (const auto& rec : out.report.records) CHECK_FALSE(rec.was_offloaded);
    CHECK(out.metrics.overall.internal_share == 1.0);
}

TEST_CASE("least allocated score") {
    auto w = worker(0, 4, 1, 1, 3, 4);
    CHECK(least_allocated_score(w, s(0)) == doctest::Approx(1.0));
    w.cores[0].insert({s(0), s(10), 1, 0.0});
    w.cores[1].insert({s(0), s(10), 2, 0.0});
    CHECK(least_allocated_score(w, s(5)) < 1.0);
    CHECK(least_allocated_score(w, s(20)) == doctest::Approx(1.0));
}

TEST_CASE("satisfaction and violation from a hand-built report") {
    SimulationReport r;
    r.strategy = "CLU";
    r.cluster_cores = {4};
    r.cluster_names = {"K1"};
    r.horizon = s(60);
    r.end_time = s(60);
    r.epoch_len = s(1);
    for (std::uint64_t i = 0; i < 9; ++i) r.workflows.push_back(result(i, 10, 5));
    r.workflows.push_back(result(9, 10, 13));
    for (std::uint64_t i = 0; i < 10; ++i) {
        ExecutionRecord rec;
        rec.workflow_id = i;
        rec.cluster = 0;
        rec.worker = 0;
        rec.executed_mode = i < 5 ? ExecutionMode::WarmExecution : ExecutionMode::ColdScaling;
        rec.mode = rec.executed_mode;
        rec.finish = s(5);
        r.records.push_back(rec);
    }
    auto m = compute_metrics(r);
    CHECK(m.overall.workflows == 10);
    CHECK(m.overall.satisfaction == doctest::Approx(0.9));
    CHECK(m.overall.max_violation_s == doctest::Approx(3.0));
    CHECK(m.overall.mean_violation_s == doctest::Approx(3.0));
    double total = 0;
    for (double x : m.overall.mode_share) total += x;
    CHECK(total == doctest::Approx(1.0));
    CHECK(m.overall.mode_share[0] == doctest::Approx(0.5));
    CHECK(m.by_deadline_class["strict"].rate() == doctest::Approx(0.9));
}

TEST_CASE("summary helpers") {
    CHECK(mean({1, 2, 3}) == doctest::Approx(2.0));
    CHECK(stddev({1, 2, 3}) == doctest::Approx(1.0));
    CHECK(mean({}) == 0.0);
    CHECK(content_hash("") == "cbf29ce484222325");
}

TEST_CASE("config parsing rejects bad documents") {
    CHECK_THROWS_AS(parse_config("{ not json"), Error);
    CHECK_THROWS_AS(parse_config(R"({"horizon": 10})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"horizon_s": -1})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"strategy": "ABC"})"), Error);
    auto c = parse_config(R"({"horizon_s": 30, "regime": "dynamic", "seed": 4})");
    CHECK(c.horizon_s == 30);
    CHECK(c.regime == "dynamic");
    CHECK(c.seed == 4);
}

TEST_CASE("config json round trip") {
    auto c = short_config();
    c.seed = 77;
    c.strategy = Strategy::RRX;
    auto back = parse_config(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("sweep specifiers") {
    CHECK(parse_sweep("").kind == SweepSpec::Kind::None);
    CHECK(parse_sweep("strategies").kind == SweepSpec::Kind::Strategies);
    auto s5 = parse_sweep("seeds=5");
    CHECK(s5.kind == SweepSpec::Kind::Seeds);
    CHECK(s5.seeds == 5);
    CHECK_THROWS_AS(parse_sweep("seeds=0"), Error);
    CHECK_THROWS_AS(parse_sweep("seeds=x"), Error);
    CHECK_THROWS_AS(parse_sweep("everything"), Error);
}

TEST_CASE("exports are byte identical across runs") {
    auto c = short_config(90);
    const auto sched = make_schedule(c);
    const auto root = fs::temp_directory_path() / "clusterless_export_test";
    fs::remove_all(root);
    export_run(run_single(c, sched), c, sched, root / "a");
    export_run(run_single(c, sched), c, sched, root / "b");
    std::size_t files = 0;
    bool manifest = false;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), root / "a");
        if (rel == "manifest.json") manifest = true;
        REQUIRE(fs::exists(root / "b" / rel));
        CHECK(slurp(entry.path()) == slurp(root / "b" / rel));
        ++files;
    }
    CHECK(manifest);
    CHECK(files >= 5);
    fs::remove_all(root);
}

TEST_CASE("a supplied schedule is replayed verbatim") {
    auto c = short_config(60);
    ArrivalSchedule sched;
    sched.regime = "uniform";
    sched.entries = {{s(2), 0, 1}, {s(5), 3, 10}};
    auto out = run_single(c, sched);
    REQUIRE(out.report.workflows.size() == 2);
    CHECK(out.report.workflows[0].arrival == s(2));
    CHECK(out.report.workflows[1].origin == 3);
    CHECK(out.report.workflows[1].tag.template_index == 10);
}
