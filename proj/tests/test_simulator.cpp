#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <doctest.h>

#include "msctl/boundary_control.hpp"
#include "msctl/simulator.hpp"
#include "support.hpp"

using namespace msctl;

namespace {

struct TwoRegion {
    Scenario s = test::two_region();
    LinkId a_in = *s.network.find_link("a_in");
    LinkId b_out = *s.network.find_link("b_out");
    LinkId b_in = *s.network.find_link("b_in");
    LinkId a_out = *s.network.find_link("a_out");
    ArcId ab = *s.network.arc_between(RegionId(0), RegionId(1));

    [[nodiscard]] LaneId lane(LinkId l) const { return s.network.link(l).lanes.front(); }
    [[nodiscard]] SignalSettings plan(const char* name) const {
        for (std::size_t p = 0; p < s.network.plans().size(); ++p) {
            if (s.network.plans()[p].name == name) return SignalSettings{{PlanId(p)}};
        }
        FAIL("no plan " << name);
        return {};
    }
};

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_SUITE("mesosim") {

TEST_CASE("zero demand produces no vehicles") {
    TwoRegion t;
    t.s.demand.od.front().profile = {{0.0, 0.0}};
    Simulator sim(t.s.network, t.s.demand);
    for (int k = 0; k < 20; ++k) CHECK(sim.inject_demand(10.0).empty());
    CHECK(sim.created() == 0);
}

TEST_CASE("arrivals follow the configured Poisson rate") {
    TwoRegion t;
    t.s.demand.horizon_s = 1e9;
    Simulator sim(t.s.network, t.s.demand);
    constexpr int kSteps = 10000;
    std::size_t total = 0;
    for (int k = 0; k < kSteps; ++k) total += sim.inject_demand(10.0).size();
    const double mean = static_cast<double>(total) / kSteps;
    const double sd_of_mean = std::sqrt(2.0 / kSteps);
    CHECK(std::abs(mean - 2.0) < 3.0 * sd_of_mean);
}

TEST_CASE("the same seed replays the same arrivals") {
    TwoRegion t;
    Simulator a(t.s.network, t.s.demand);
    Simulator b(t.s.network, t.s.demand);
    for (int k = 0; k < 50; ++k) CHECK(a.inject_demand(10.0) == b.inject_demand(10.0));
}

TEST_CASE("empty network observes all zeros") {
    TwoRegion t;
    Simulator sim(t.s.network, t.s.demand);
    const MicroObservation obs = sim.advance(t.plan("p_ab"), 10.0);
    CHECK(sum(obs.crossings) == 0.0);
    CHECK(sum(obs.accumulation) == 0.0);
    for (int q : obs.queue) CHECK(q == 0);
    for (int e : obs.arrivals) CHECK(e == 0);
    CHECK(obs.in_network == 0);
}

TEST_CASE("discharge is the minimum of queue, saturation and downstream space") {
    TwoRegion t;
    SUBCASE("saturation binds") {
        Simulator sim(t.s.network, t.s.demand);
        for (int i = 0; i < 5; ++i) sim.place_vehicle(t.lane(t.a_in), {t.a_in, t.b_out}, true, 0.0);
        const MicroObservation obs = sim.advance(t.plan("p_ab"), 10.0);  // 0.3 veh/s * 10 s = 3
        CHECK(obs.crossings[t.ab.index()] == doctest::Approx(0.3));
        CHECK(sim.lane_queue(t.lane(t.a_in)) == 2);
    }
    SUBCASE("downstream space binds") {
        Simulator sim(t.s.network, t.s.demand);
        for (int i = 0; i < 5; ++i) sim.place_vehicle(t.lane(t.a_in), {t.a_in, t.b_out}, true, 0.0);
        for (int i = 0; i < 8; ++i) sim.place_vehicle(t.lane(t.b_out), {t.b_out}, false, 1000.0);
        const MicroObservation obs = sim.advance(t.plan("p_ab"), 10.0);
        CHECK(obs.crossings[t.ab.index()] == doctest::Approx(0.2));
        CHECK(sim.lane_queue(t.lane(t.a_in)) == 3);
        CHECK(sim.lane_occupancy(t.lane(t.b_out)) == 10);
    }
    SUBCASE("inactive gating phase serves nothing") {
        Simulator sim(t.s.network, t.s.demand);
        for (int i = 0; i < 5; ++i) sim.place_vehicle(t.lane(t.a_in), {t.a_in, t.b_out}, true, 0.0);
        const MicroObservation obs = sim.advance(t.plan("p_ba"), 10.0);
        CHECK(obs.crossings[t.ab.index()] == 0.0);
        CHECK(sim.lane_queue(t.lane(t.a_in)) == 5);
    }
}

TEST_CASE("vehicle types follow position and route") {
    TwoRegion t;
    Simulator sim(t.s.network, t.s.demand);
    SUBCASE("vehicles mid-link are all still travelling") {
        sim.place_vehicle(t.lane(t.a_in), {t.a_in, t.b_out}, false, 5.0);
        sim.place_vehicle(t.lane(t.b_in), {t.b_in, t.a_out}, false, 5.0);
        const TypeCounts c = sim.classify_vehicles();
        CHECK(sum(c.type1.v) == 0.0);
        CHECK(sum(c.type2.v) == 0.0);
        CHECK(sum(c.type3.v) == 2.0);
    }
    SUBCASE("queued at a boundary approach with the next link across") {
        sim.place_vehicle(t.lane(t.a_in), {t.a_in, t.b_out}, true, 0.0);
        const TypeCounts c = sim.classify_vehicles();
        CHECK(c.type1(0, 1) == 1.0);
        CHECK(sum(c.type3.v) == 0.0);
    }
    SUBCASE("on the destination link") {
        sim.place_vehicle(t.lane(t.b_out), {t.b_out}, false, 5.0);
        const TypeCounts c = sim.classify_vehicles();
        CHECK(c.type2(1, 1) == 1.0);
    }
}

TEST_CASE("conservation, capacity and crossing counts hold on every step of a corridor run") {
    const Scenario s = load_scenario(test::fixture("corridor.yaml"));
    const Network& net = s.network;
    Simulator sim(net, s.demand);
    std::size_t checked_partitions = 0;
    for (std::int64_t k = 0; k < 150; ++k) {
        std::map<std::uint32_t, RegionId> before;
        for (VehicleId id : sim.active_vehicles()) before.emplace(id.value, net.region_of(sim.vehicle(id).current()));

        sim.inject_demand(10.0);
        const MicroObservation obs = sim.advance(round_robin(net, k), 10.0);

        CHECK(obs.created == obs.exited + obs.in_network + obs.entry_queue);
        double n_total = 0.0;
        for (std::size_t i = 0; i < obs.accumulation.size(); ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < obs.accumulation.size(); ++j) row += obs.od_accumulation(i, j);
            CHECK(row == obs.accumulation[i]);
            n_total += obs.accumulation[i];
        }
        CHECK(n_total == static_cast<double>(obs.in_network));
        for (std::size_t l = 0; l < net.lanes().size(); ++l) {
            CHECK(obs.occupancy[l] <= net.lane(LaneId(l)).capacity_veh);
            CHECK(obs.queue[l] <= obs.occupancy[l]);
        }

        std::vector<double> moved(net.arcs().size(), 0.0);
        for (const auto& [id, from] : before) {
            const Vehicle& v = sim.vehicle(VehicleId(id));
            if (!v.in_network) continue;
            const RegionId to = net.region_of(v.current());
            if (to != from) moved[net.arc_between(from, to)->index()] += 1.0;
        }
        for (std::size_t a = 0; a < moved.size(); ++a) CHECK(obs.crossings[a] * 10.0 == doctest::Approx(moved[a]));

        const TypeCounts c = sim.classify_vehicles();
        if (obs.in_network > 0) ++checked_partitions;
        for (std::size_t i = 0; i < obs.accumulation.size(); ++i) {
            for (std::size_t j = 0; j < obs.accumulation.size(); ++j) {
                CHECK(c.type1(i, j) + c.type2(i, j) + c.type3(i, j) == obs.od_accumulation(i, j));
            }
        }
    }
    CHECK(checked_partitions > 50);
}

TEST_CASE("identical seed and signals give an identical observation trace") {
    const Scenario s = load_scenario(test::fixture("corridor.yaml"));
    auto trace = [&] {
        Simulator sim(s.network, s.demand);
        std::ostringstream out;
        write_observation_header(out, s.network);
        for (std::int64_t k = 0; k < 120; ++k) {
            sim.inject_demand(10.0);
            write_observation_row(out, sim.advance(round_robin(s.network, k), 10.0));
        }
        return out.str();
    };
    CHECK(trace() == trace());
}

}  // TEST_SUITE
