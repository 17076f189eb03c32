#include <algorithm>
#include <string>

#include <doctest.h>

#include "msctl/network.hpp"
#include "msctl/paths.hpp"
#include "msctl/scenario.hpp"
#include "support.hpp"

using namespace msctl;

namespace {

ScenarioError::Kind error_kind(const std::string& yaml) {
    try {
        build_scenario(parse_scenario(yaml));
    } catch (const ScenarioError& e) {
        return e.kind();
    }
    FAIL("scenario was accepted");
    return ScenarioError::Kind::parse;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_SUITE("netmodel") {

TEST_CASE("minimal two-region scenario loads") {
    const Scenario s = test::two_region();
    CHECK(s.network.region_count() == 2);
    CHECK(s.network.links().size() == 4);
    CHECK(s.network.boundaries().size() == 1);
    CHECK(s.network.arcs().size() == 2);
    CHECK(s.network.boundary(BoundaryId(0)).plans.size() == 2);
    CHECK(s.demand.od.size() == 1);
    CHECK_FALSE(s.mfd.has_value());
}

TEST_CASE("missing output lane is a dangling identifier") {
    const std::string yaml = replace(test::kTwoRegionYaml, "outputs: [b_out/0]", "outputs: [b_out/7]");
    CHECK(error_kind(yaml) == ScenarioError::Kind::dangling_identifier);
}

TEST_CASE("unknown region on a link is a dangling identifier") {
    const std::string yaml = replace(test::kTwoRegionYaml, "region: B\n    lanes:\n      - {id: b_out/0",
                                     "region: C\n    lanes:\n      - {id: b_out/0");
    CHECK(error_kind(yaml) == ScenarioError::Kind::dangling_identifier);
}

TEST_CASE("malformed yaml is a parse error with a line number") {
    const std::string yaml = replace(test::kTwoRegionYaml, "length: 100\n    speed: 10\n    region: A",
                                     "length: [100\n    speed: 10\n    region: A");
    try {
        build_scenario(parse_scenario(yaml));
        FAIL("scenario was accepted");
    } catch (const ScenarioError& e) {
        CHECK(e.kind() == ScenarioError::Kind::parse);
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
}

TEST_CASE("wrongly typed field names the field") {
    const std::string yaml = replace(test::kTwoRegionYaml, "length: 100", "length: far");
    try {
        parse_scenario(yaml);
        FAIL("scenario was accepted");
    } catch (const ScenarioError& e) {
        CHECK(e.kind() == ScenarioError::Kind::parse);
        CHECK(std::string(e.what()).find("length") != std::string::npos);
    }
}

TEST_CASE("invariant violations name the rule") {
    SUBCASE("non-positive length") {
        CHECK(error_kind(replace(test::kTwoRegionYaml, "length: 100", "length: 0")) ==
              ScenarioError::Kind::invariant);
    }
    SUBCASE("asymmetric adjacency") {
        CHECK(error_kind(replace(test::kTwoRegionYaml, "{id: B, neighbors: [A]}", "{id: B, neighbors: []}")) ==
              ScenarioError::Kind::invariant);
    }
    SUBCASE("gating intersection with a single phase") {
        std::string yaml = replace(test::kTwoRegionYaml, "      - {id: ba, lanes: [b_in/0]}\n", "");
        yaml = replace(yaml, "  - {id: p_ba, boundary: [A, B], phases: {g: ba}}\n", "");
        CHECK(error_kind(yaml) == ScenarioError::Kind::invariant);
    }
    SUBCASE("output lane on a link that does not leave the lane's end node") {
        CHECK(error_kind(replace(test::kTwoRegionYaml, "outputs: [b_out/0]", "outputs: [b_in/0]")) ==
              ScenarioError::Kind::invariant);
    }
    SUBCASE("warm-up not shorter than the horizon") {
        CHECK(error_kind(replace(test::kTwoRegionYaml, "warmup: 0", "warmup: 600")) ==
              ScenarioError::Kind::invariant);
    }
    SUBCASE("negative demand rate") {
        CHECK(error_kind(replace(test::kTwoRegionYaml, "[[0, 0.2]]", "[[0, -0.2]]")) ==
              ScenarioError::Kind::invariant);
    }
}

TEST_CASE("emitting and re-parsing a scenario is lossless") {
    for (const char* name : {"corridor.yaml", "grid6.yaml"}) {
        CAPTURE(name);
        const ScenarioDoc doc = read_scenario_doc(test::fixture(name));
        const std::string text = emit_scenario(doc);
        const ScenarioDoc again = parse_scenario(text);
        CHECK(again == doc);
        CHECK(emit_scenario(again) == text);
    }
    const ScenarioDoc tiny = parse_scenario(test::kTwoRegionYaml);
    CHECK(parse_scenario(emit_scenario(tiny)) == tiny);
}

TEST_CASE("six-region grid fixture has symmetric adjacency and plans on every boundary") {
    const Scenario s = load_scenario(test::fixture("grid6.yaml"));
    const Network& net = s.network;
    REQUIRE(net.region_count() == 6);
    const auto& nb = net.partition().neighbors;
    for (std::size_t i = 0; i < nb.size(); ++i) {
        for (RegionId h : nb[i]) {
            const auto& back = nb[h.index()];
            CHECK(std::find(back.begin(), back.end(), RegionId(i)) != back.end());
            CHECK(net.arc_between(RegionId(i), h).has_value());
        }
    }
    for (const Boundary& b : net.boundaries()) {
        CHECK_FALSE(b.plans.empty());
        CHECK_FALSE(b.gating.empty());
    }
    for (const Lane& lane : net.lanes()) {
        const NodeId end = net.link(lane.link).to_node;
        for (LaneId o : lane.outputs) CHECK(net.link(net.lane(o).link).from_node == end);
    }
    std::size_t assigned = 0;
    for (const auto& links : net.partition().links) assigned += links.size();
    CHECK(assigned == net.links().size());
    REQUIRE(s.mfd.has_value());
    CHECK(s.mfd->size() == 6);
}

TEST_CASE("hyper-path collapses consecutive regions and keeps re-entry") {
    const Scenario s = load_scenario(test::fixture("grid6.yaml"));
    const Network& net = s.network;
    const RegionId r00 = *net.find_region("r00");
    const RegionId r02 = *net.find_region("r02");

    SUBCASE("route inside one region") {
        const Scenario t = test::two_region();
        const LinkId a_in = *t.network.find_link("a_in");
        CHECK(candidate_hyper_path(t.network, std::vector<LinkId>{a_in}) == std::vector<RegionId>{RegionId(0)});
    }

    SUBCASE("route through several regions") {
        const LinkId from = net.partition().links[r00.index()].front();
        const LinkId to = net.partition().links[r02.index()].front();
        const PathTree tree(net, to, std::vector<double>(net.links().size(), 1.0));
        const std::vector<LinkId> route = tree.route_from(from);
        REQUIRE(route.size() > 2);
        std::vector<RegionId> expected;
        for (LinkId l : route) {
            if (expected.empty() || expected.back() != net.region_of(l)) expected.push_back(net.region_of(l));
        }
        const std::vector<RegionId> got = candidate_hyper_path(net, route);
        CHECK(got == expected);
        CHECK(got.front() == r00);
        CHECK(got.back() == r02);
        CHECK(got.size() >= 3);
    }

    SUBCASE("re-entry into the first region is preserved") {
        const RegionId r01 = *net.find_region("r01");
        const std::vector<double> unit(net.links().size(), 1.0);
        const LinkId start = net.partition().links[r00.index()].front();
        const LinkId away = net.partition().links[r01.index()].front();
        const LinkId home = net.partition().links[r00.index()].back();
        std::vector<LinkId> route = PathTree(net, away, unit).route_from(start);
        const std::vector<LinkId> back = PathTree(net, home, unit).route_from(away);
        REQUIRE(route.size() > 1);
        REQUIRE(back.size() > 1);
        route.insert(route.end(), back.begin() + 1, back.end());
        std::vector<RegionId> expected;
        for (LinkId l : route) {
            if (expected.empty() || expected.back() != net.region_of(l)) expected.push_back(net.region_of(l));
        }
        const std::vector<RegionId> got = candidate_hyper_path(net, route);
        CHECK(got == expected);
        CHECK(got.front() == r00);
        CHECK(got.back() == r00);
        CHECK(std::find(got.begin(), got.end(), r01) != got.end());
    }

    SUBCASE("disconnected route is rejected") {
        const Scenario t = test::two_region();
        const LinkId a_in = *t.network.find_link("a_in");
        const LinkId b_in = *t.network.find_link("b_in");
        CHECK_THROWS_AS(candidate_hyper_path(t.network, std::vector<LinkId>{a_in, b_in}), std::invalid_argument);
    }
}

}  // TEST_SUITE
