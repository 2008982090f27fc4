#include "doctest.h"

#include <random>

#include "clusterless/inter.hpp"
#include "random_instances.hpp"
#include "support.hpp"

using namespace clusterless;
using namespace clusterless::testing;

namespace {

ElectionParams params() { return ElectionParams{s(1), s(5), 0.75}; }

SuperMasterRecord step(const SuperMasterRecord& prev, std::size_t epoch, std::vector<double> loads,
                       std::vector<Time> hb = {}) {
    if (hb.empty()) hb.assign(loads.size(), s(static_cast<double>(epoch)));
    return maintain_super_master(&prev, epoch, hb, loads, params());
}

// One worker per cluster, fed to the super-master; speeds set remote finishes.
FederationState flat_federation(std::vector<double> speeds) {
    FederationState fed;
    for (std::size_t n = 0; n < speeds.size(); ++n) {
        auto w = worker(0, 1, speeds[n]);
        make_warm(w, "a");
        fed.clusters.push_back(cluster(static_cast<int>(n), {w}));
    }
    fed.inter_bandwidth = [](int, int, Time) { return 100.0; };
    fed.inter_delay.assign(speeds.size(), std::vector<Time>(speeds.size(), Time::zero()));
    return fed;
}

OffloadRequest request(std::uint64_t id, Time deadline_abs, Time local_finish, double cpu = 1) {
    OffloadRequest r;
    r.workflow_id = id;
    r.function = 0;
    r.function_id = "a";
    r.origin = 0;
    r.local_finish = local_finish;
    r.deadline_abs = deadline_abs;
    r.spec = fn("a", cpu);
    r.preds = {{0, s(10), 0, 0, kIngress}};
    return r;
}

} // namespace

TEST_CASE("bootstrap elects the least loaded cluster") {
    std::vector<Time> hb(3, s(0));
    std::vector<double> loads{0.2, 0.5, 0.1};
    auto rec = maintain_super_master(nullptr, 0, hb, loads, params());
    REQUIRE(rec.holder);
    CHECK(*rec.holder == 2);
}

TEST_CASE("over-threshold incumbent hands over in the same epoch") {
    std::vector<Time> hb(2, s(0));
    auto r0 = maintain_super_master(nullptr, 0, hb, std::vector<double>{0.1, 0.3}, params());
    REQUIRE(*r0.holder == 0);
    auto r1 = step(r0, 1, {0.8, 0.3});
    REQUIRE(r1.holder);
    CHECK(*r1.holder == 1);
}

TEST_CASE("no eligible cluster leaves the role empty") {
    std::vector<Time> hb(2, s(0));
    auto r0 = maintain_super_master(nullptr, 0, hb, std::vector<double>{0.1, 0.3}, params());
    auto r1 = step(r0, 1, {0.9, 0.8});
    CHECK_FALSE(r1.holder);
    // Silent for longer than the timeout while under threshold: dead.
    auto r2 = step(r0, 7, {0.1, 0.2}, {s(1), s(1)});
    CHECK_FALSE(r2.holder);
}

TEST_CASE("heartbeats at the epoch instant refresh the epoch") {
    std::vector<Time> hb(2, s(0));
    auto r0 = maintain_super_master(nullptr, 0, hb, std::vector<double>{0.1, 0.3}, params());
    auto r1 = step(r0, 1, {0.9, 0.2}, {s(1), s(1)});
    CHECK(r1.loads[0] == 0.9);
    CHECK(*r1.holder == 1);
    // A heartbeat not newer than the previous epoch keeps the stale load.
    auto r2 = step(r1, 2, {0.0, 0.2}, {s(1), s(2)});
    CHECK(r2.loads[0] == 0.9);
    CHECK(r2.alive[0]);
}

TEST_CASE("a silent cluster turns dead after the timeout") {
    std::vector<Time> hb(2, s(0));
    auto rec = maintain_super_master(nullptr, 0, hb, std::vector<double>{0.5, 0.1}, params());
    for (std::size_t e = 1; e <= 6; ++e) rec = step(rec, e, {0.5, 0.1}, {s(static_cast<double>(e)), s(0)});
    CHECK_FALSE(rec.alive[1]);
    CHECK(rec.alive[0]);
    CHECK(*rec.holder == 0);
}

TEST_CASE("holder is stable while eligible and always eligible when published") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + pick(rng, 5);
        std::vector<Time> hb(k, s(0));
        std::vector<double> loads(k);
        for (auto& l : loads) l = uniform(rng, 0, 1);
        auto rec = maintain_super_master(nullptr, 0, hb, loads, params());
        for (std::size_t e = 1; e < 40; ++e) {
            for (std::size_t n = 0; n < k; ++n) {
                if (rng() % 4 != 0) hb[n] = s(static_cast<double>(e));
                if (rng() % 3 == 0) loads[n] = uniform(rng, 0, 1);
            }
            auto next = maintain_super_master(&rec, e, hb, loads, params());
            if (next.holder) CHECK(eligible(next, *next.holder, 0.75));
            if (rec.holder && eligible(next, *rec.holder, 0.75)) CHECK(next.holder == rec.holder);
            rec = next;
        }
    }
}

TEST_CASE("offloads are placed earliest deadline first") {
    // One remote core: whichever request goes first gets the earlier slot.
    auto fed = flat_federation({1.0, 1.0});
    std::vector<OffloadRequest> batch{request(1, s(100), s(90), 5), request(2, s(50), s(90), 5)};
    InterStats stats;
    auto out = orchestrate_offloads(s(10), batch, fed, {}, &stats);
    REQUIRE(out.size() == 2);
    CHECK(out[0].workflow_id == 2);
    CHECK(out[0].projected_finish == s(15));
    CHECK(out[1].workflow_id == 1);
    CHECK(out[1].projected_finish == s(20));
    CHECK(stats.remote_evaluations == 2);
}

TEST_CASE("offload goes to the earliest feasible remote finish") {
    // Remote finishes 10 + 30 = 40 on K2 and 10 + 25 = 35 on K3.
    auto fed = flat_federation({1.0, 30.0, 25.0});
    auto out = orchestrate_offloads(s(10), {request(1, s(45), s(60))}, fed, {});
    REQUIRE(out.size() == 1);
    CHECK_FALSE(out[0].retained);
    CHECK(out[0].destination == 2);
    CHECK(out[0].projected_finish == s(35));
    CHECK(fed.clusters[2].workers[0].cores[0].contains(reservation_tag(1, 0)));
}

TEST_CASE("offload is retained when no remote meets the deadline") {
    auto fed = flat_federation({1.0, 30.0, 25.0});
    auto out = orchestrate_offloads(s(10), {request(1, s(30), s(60))}, fed, {});
    REQUIRE(out.size() == 1);
    CHECK(out[0].retained);
    CHECK(out[0].destination == 0);
    CHECK(fed.clusters[1].workers[0].cores[0].intervals().empty());
    CHECK(fed.clusters[2].workers[0].cores[0].intervals().empty());
}

TEST_CASE("offload invariants on random batches") {
    std::mt19937_64 rng(99);
    const std::vector<std::string> images{"i0", "i1", "i2"};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + pick(rng, 4);
        auto fed = random_federation(rng, k, 3, images, s(20));
        std::vector<OffloadRequest> batch;
        const std::size_t n = 1 + pick(rng, 8);
        for (std::size_t i = 0; i < n; ++i) {
            OffloadRequest r;
            r.workflow_id = i;
            r.origin = static_cast<int>(pick(rng, k));
            r.spec = fn("g", uniform(rng, 0.2, 5), 128, 0, 0.5);
            r.spec.image = images[pick(rng, images.size())];
            r.deadline_abs = s(20) + Time::seconds(uniform(rng, 1, 30));
            r.local_finish = s(20) + Time::seconds(uniform(rng, 1, 40));
            r.preds = {{0, s(20), uniform(rng, 0, 1), r.origin, kIngress}};
            batch.push_back(r);
        }
        InterStats stats;
        auto out = orchestrate_offloads(s(20), batch, fed, {}, &stats);
        CHECK(out.size() == n);
        CHECK(stats.remote_evaluations == n * (k - 1));
        Time last = Time::zero();
        for (const auto& gp : out) {
            const auto& req = batch[gp.workflow_id];
            CHECK(req.deadline_abs >= last);
            last = req.deadline_abs;
            if (gp.retained) {
                CHECK(gp.destination == req.origin);
            } else {
                CHECK(gp.destination != req.origin);
                CHECK(gp.projected_finish < req.local_finish);
                CHECK(gp.projected_finish <= req.deadline_abs);
            }
        }
    }
}

TEST_CASE("status exchange delivery") {
    StatusExchange now(2, Time::zero());
    now.publish(0, 0.4, s(3));
    now.deliver_until(s(3));
    CHECK(now.loads()[0] == 0.4);
    CHECK(now.heartbeats()[0] == s(3));

    StatusExchange late(2, s(0.5));
    late.publish(1, 0.7, s(3));
    late.deliver_until(s(3));
    CHECK(late.loads()[1] == 0.0);
    REQUIRE(late.next_delivery());
    CHECK(*late.next_delivery() == s(3.5));
    late.deliver_until(s(3.5));
    CHECK(late.loads()[1] == 0.7);
    CHECK(late.heartbeats()[1] == s(3.5));
}
