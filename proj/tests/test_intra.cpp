#include "doctest.h"

#include <random>

#include "clusterless/intra.hpp"
#include "random_instances.hpp"
#include "support.hpp"

using namespace clusterless;
using namespace clusterless::testing;

namespace {

IntraContext context(Time now) { return IntraContext{now, s(1), nullptr, nullptr}; }

WorkflowInstance independent(std::vector<FunctionSpec> fs, Time deadline = s(100)) {
    return WorkflowInstance(1, std::move(fs), {}, s(0), deadline, 0);
}

LocalPlan plan_with(const WorkflowInstance& w, std::vector<Time> finishes) {
    LocalPlan p(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        p[i].function = i;
        p[i].finish = finishes[i];
        p[i].worker = 0;
    }
    return p;
}

} // namespace

TEST_CASE("bottleneck is the latest finisher with ties to the smaller id") {
    auto w = independent({fn("f1", 1), fn("f2", 1), fn("f3", 1)});
    auto plan = plan_with(w, {s(10), s(25), s(25)});
    auto r = identify_bottleneck(w, plan, {});
    REQUIRE(r.bottleneck);
    CHECK(*r.bottleneck == 1);

    auto ex = identify_bottleneck(w, plan, {1});
    REQUIRE(ex.bottleneck);
    CHECK(*ex.bottleneck == 2);

    for (auto& e : plan) e.external = true;
    CHECK_FALSE(identify_bottleneck(w, plan, {}).bottleneck);
}

TEST_CASE("bottleneck waits for unsettled predecessors") {
    auto w = chain(1, {fn("a", 1), fn("b", 1)}, s(0), s(5));
    auto plan = plan_with(w, {s(3), s(9)});
    auto r = identify_bottleneck(w, plan, {});
    REQUIRE(r.bottleneck);
    CHECK(*r.bottleneck == 0);
    CHECK(r.pending == std::vector<std::size_t>{1});
    auto after = identify_bottleneck(w, plan, {0});
    REQUIRE(after.bottleneck);
    CHECK(*after.bottleneck == 1);
}

TEST_CASE("mode escalation order") {
    CHECK(next_mode(ExecutionMode::WarmExecution) == ExecutionMode::WarmScaling);
    CHECK(next_mode(ExecutionMode::WarmScaling) == ExecutionMode::ColdScaling);
    CHECK(next_mode(ExecutionMode::ColdScaling) == ExecutionMode::Offloading);
    CHECK_THROWS_AS(next_mode(ExecutionMode::Offloading), Error);
}

TEST_CASE("availability sets") {
    auto w0 = worker(0, 2);
    auto w1 = worker(1, 2);
    w1.images["a"] = 0;
    auto tiny = worker(2, 2, 1, 1, 3, 0.5);
    make_warm(tiny, "a");
    auto c = cluster(0, {w0, w1, tiny});
    auto f = fn("a", 1, 1024);

    CHECK(get_available(f, ExecutionMode::WarmExecution, c).candidates.empty());
    CHECK(get_available(f, ExecutionMode::WarmScaling, c).candidates == std::vector<int>{1});
    CHECK(get_available(f, ExecutionMode::ColdScaling, c).candidates == std::vector<int>{0, 1});
    CHECK(get_available(fn("a", 1, 64), ExecutionMode::ColdScaling, c).candidates == std::vector<int>{0, 1, 2});
    CHECK(get_available(fn("a", 1, 64), ExecutionMode::WarmExecution, c).candidates == std::vector<int>{2});
    CHECK_THROWS_AS(get_available(f, ExecutionMode::Offloading, c), Error);
}

TEST_CASE("function placement picks the earliest finish") {
    auto slow = worker(0, 1, 11.0);
    auto fast = worker(1, 1, 9.0);
    make_warm(slow, "a");
    make_warm(fast, "a");
    auto c = cluster(0, {slow, fast});
    auto w = independent({fn("a", 1)});
    LocalPlan plan(1);
    auto ctx = context(s(0));

    AvailabilitySet one{ExecutionMode::WarmExecution, {0}};
    auto e1 = func_orch(w, plan, plan[0], one, c, ctx);
    REQUIRE(e1.worker);
    CHECK(*e1.worker == 0);
    CHECK(e1.finish == s(11));

    AvailabilitySet two{ExecutionMode::WarmExecution, {0, 1}};
    auto e2 = func_orch(w, plan, plan[0], two, c, ctx);
    CHECK(*e2.worker == 1);
    CHECK(e2.finish == s(9));

    AvailabilitySet none{ExecutionMode::WarmExecution, {}};
    auto e3 = func_orch(w, plan, plan[0], none, c, ctx);
    CHECK_FALSE(e3.worker);
    CHECK(e3.finish.is_infinite());
}

TEST_CASE("apply mode commits only strict improvements") {
    SUBCASE("warm execution beats an unplanned entry") {
        auto w0 = worker(0, 1, 1.0);
        make_warm(w0, "a");
        auto c = cluster(0, {w0});
        auto w = independent({fn("a", 4)});
        LocalPlan plan(1);
        auto r = apply_mode(w, 0, ExecutionMode::WarmExecution, plan, c, context(s(0)), nullptr);
        CHECK(r.success);
        CHECK(*r.entry.worker == 0);
        CHECK(r.entry.start == s(0));
        CHECK(r.entry.finish == s(4));
        CHECK(c.workers[0].cores[0].contains(reservation_tag(1, 0)));
    }
    SUBCASE("warm scaling that only ties is rejected") {
        auto w0 = worker(0, 1, 1.0);
        make_warm(w0, "a");
        auto w1 = worker(1, 1, 1.0, 2.0);
        w1.images["a"] = 0;
        auto c = cluster(0, {w0, w1});
        auto w = independent({fn("a", 5)});
        LocalPlan plan(1);
        plan[0].workflow_id = 1;
        // Current plan: warm on worker 0 behind a 2 s reservation, finishing at 7.
        c.workers[0].cores[0].insert({s(0), s(2), 77, 0.0});
        REQUIRE(apply_mode(w, 0, ExecutionMode::WarmExecution, plan, c, context(s(0)), nullptr).success);
        REQUIRE(plan[0].finish == s(7));
        auto r = apply_mode(w, 0, ExecutionMode::WarmScaling, plan, c, context(s(0)), nullptr);
        CHECK_FALSE(r.success);
        CHECK(plan[0].finish == s(7));
        CHECK(*plan[0].worker == 0);
        CHECK(c.workers[0].cores[0].contains(reservation_tag(1, 0)));
        CHECK_FALSE(c.workers[1].cores[0].contains(reservation_tag(1, 0)));
    }
    SUBCASE("offloading fails without an arbiter") {
        auto c = cluster(0, {worker(0)});
        auto w = independent({fn("a", 5)});
        LocalPlan plan(1);
        OffloadChannel silent = [](const OffloadRequest&) -> std::optional<GlobalPlacement> { return std::nullopt; };
        CHECK_FALSE(apply_mode(w, 0, ExecutionMode::Offloading, plan, c, context(s(0)), &silent).success);
        CHECK_FALSE(apply_mode(w, 0, ExecutionMode::Offloading, plan, c, context(s(0)), nullptr).success);
    }
}

TEST_CASE("refinement is not entered when warm execution is feasible") {
    auto fast = worker(0, 2, 1.0);
    make_warm(fast, "a");
    auto c = cluster(0, {fast, worker(1, 2, 3.0)});
    auto w = independent({fn("a", 3)}, s(60));
    auto out = orchestrate_workflow(w, c, context(s(0)), nullptr);
    CHECK(out.deadline_met);
    CHECK(out.stats.refinement_iterations == 0);
    CHECK(out.stats.mode_evaluations == 0);
    CHECK(out.plan[0].mode == ExecutionMode::WarmExecution);
    CHECK(*out.plan[0].worker == 0);
    CHECK(out.finish == s(3));
}

TEST_CASE("refinement escalates to cold scaling on a faster idle worker") {
    // Warm on the slow worker: 10 * 5 = 50 s. Cold on the fast one: 3 + 10 = 13 s.
    auto slow = worker(0, 1, 5.0, 1.0, 3.0);
    make_warm(slow, "a");
    auto fast = worker(1, 1, 1.0, 1.0, 3.0);
    auto c = cluster(0, {slow, fast});
    auto w = independent({fn("a", 10)}, s(20));
    auto out = orchestrate_workflow(w, c, context(s(0)), nullptr);
    CHECK(out.deadline_met);
    CHECK(out.plan[0].mode == ExecutionMode::ColdScaling);
    CHECK(*out.plan[0].worker == 1);
    CHECK(out.finish == s(13));
    CHECK(out.stats.mode_evaluations == 2);
    CHECK(c.workers[1].cores[0].contains(reservation_tag(1, 0)));
    CHECK_FALSE(c.workers[0].cores[0].contains(reservation_tag(1, 0)));
}

TEST_CASE("locally infeasible workflows are offloaded function by function") {
    auto w0 = worker(0, 1, 50.0);
    make_warm(w0, "a");
    make_warm(w0, "b");
    auto c = cluster(0, {w0});
    auto w = chain(1, {fn("a", 2), fn("b", 2)}, s(0), s(10));
    int acks = 0;
    OffloadChannel remote = [&](const OffloadRequest& req) -> std::optional<GlobalPlacement> {
        ++acks;
        GlobalPlacement gp;
        gp.workflow_id = req.workflow_id;
        gp.function = req.function;
        gp.destination = 1;
        gp.retained = false;
        Time ready = Time::zero();
        for (const auto& p : req.preds) ready = max(ready, p.finish);
        gp.assignment.worker = 0;
        gp.assignment.start = ready;
        gp.assignment.slot_begin = ready;
        gp.assignment.finish = ready + s(2);
        gp.projected_finish = gp.assignment.finish;
        return gp;
    };
    auto out = orchestrate_workflow(w, c, context(s(0)), &remote);
    CHECK(acks == 2);
    CHECK(out.plan[0].external);
    CHECK(out.plan[1].external);
    CHECK(out.plan[0].mode == ExecutionMode::Offloading);
    CHECK(out.finish == s(4));
    CHECK(out.deadline_met);
    CHECK(c.workers[0].cores[0].intervals().empty());
}

TEST_CASE("refinement work is linear and externals are acknowledged") {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> images{"i0", "i1", "i2", "i3"};
    for (int trial = 0; trial < 300; ++trial) {
        auto fed = random_federation(rng, 3, 3, images, s(10));
        auto w = random_workflow(rng, static_cast<std::uint64_t>(trial), 1 + pick(rng, 12), 0, s(10), images);
        auto channel = super_master_channel(fed, s(10));
        auto out = orchestrate_workflow(w, fed.clusters[0], context(s(10)), &channel);
        CHECK(out.stats.mode_evaluations <= 4 * w.size());
        for (const auto& e : out.plan) {
            if (!e.external) continue;
            CHECK(e.cluster != 0);
            CHECK(e.worker.has_value());
            CHECK(e.mode == ExecutionMode::Offloading);
        }
        // Dependencies hold in the plan.
        for (auto [g, f] : w.edges()) {
            if (out.plan[g].planned() && out.plan[f].planned()) CHECK(out.plan[f].start >= out.plan[g].finish);
        }
        if (out.deadline_met) CHECK(out.finish <= w.deadline_abs());
    }
}
