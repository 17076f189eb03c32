#include "msctl/grid_fixture.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace msctl {

namespace {

struct Builder {
    ScenarioDoc doc;
    std::map<std::string, std::vector<std::size_t>> out_links;  // node -> links leaving it
    double spacing = 7.5;
    double speed = 10.0;
    double sat_flow = 0.5;

    std::string add_link(const std::string& from, const std::string& to, double length, const std::string& region) {
        LinkDoc l;
        l.id = fmt::format("{}-{}", from, to);
        l.from = from;
        l.to = to;
        l.length = length;
        l.speed = speed;
        l.region = region;
        out_links[from].push_back(doc.links.size());
        doc.links.push_back(std::move(l));
        return doc.links.back().id;
    }

    LaneDoc make_lane(const LinkDoc& l, std::size_t k) const {
        LaneDoc lane;
        lane.id = fmt::format("{}/{}", l.id, k);
        lane.sat_flow = sat_flow;
        lane.capacity = std::max(1, static_cast<int>(std::floor(l.length / spacing)));
        return lane;
    }

    // With turn lanes every movement out of a link gets its own lane;
    // otherwise a single lane serves all of them.
    void wire_outputs(bool turn_lanes) {
        std::vector<std::vector<std::size_t>> moves(doc.links.size());
        for (std::size_t k = 0; k < doc.links.size(); ++k) {
            const LinkDoc& l = doc.links[k];
            for (std::size_t n : out_links[l.to]) {
                if (doc.links[n].to != l.from) moves[k].push_back(n);
            }
            const std::size_t lanes = turn_lanes ? std::max<std::size_t>(1, moves[k].size()) : 1;
            for (std::size_t j = 0; j < lanes; ++j) doc.links[k].lanes.push_back(make_lane(l, j));
        }
        for (std::size_t k = 0; k < doc.links.size(); ++k) {
            auto& lanes = doc.links[k].lanes;
            for (std::size_t m = 0; m < moves[k].size(); ++m) {
                LaneDoc& lane = lanes[turn_lanes ? m : 0];
                for (const LaneDoc& next : doc.links[moves[k][m]].lanes) lane.outputs.push_back(next.id);
            }
        }
    }
};

std::string region_name(int r, int c) { return fmt::format("r{}{}", r, c); }
std::string node_name(int r, int c, int a, int b) { return fmt::format("n{}{}_{}{}", r, c, a, b); }

}  // namespace

ScenarioDoc grid_scenario(const GridOptions& o) {
    if (o.region_rows < 1 || o.region_cols < 1 || o.region_rows * o.region_cols < 2) {
        throw std::invalid_argument("grid_scenario: need at least two regions");
    }
    if (o.block < 3) throw std::invalid_argument("grid_scenario: block must be >= 3");
    Builder b;
    b.spacing = o.vehicle_spacing_m;
    b.speed = o.speed_mps;
    b.sat_flow = o.sat_flow;
    ScenarioDoc& doc = b.doc;
    doc.name = o.name;
    doc.interior_service_fraction = o.interior_service;

    for (int r = 0; r < o.region_rows; ++r) {
        for (int c = 0; c < o.region_cols; ++c) {
            RegionDoc reg;
            reg.id = region_name(r, c);
            if (r > 0) reg.neighbors.push_back(region_name(r - 1, c));
            if (c > 0) reg.neighbors.push_back(region_name(r, c - 1));
            if (c + 1 < o.region_cols) reg.neighbors.push_back(region_name(r, c + 1));
            if (r + 1 < o.region_rows) reg.neighbors.push_back(region_name(r + 1, c));
            doc.regions.push_back(reg);
        }
    }

    const int n = o.block;
    for (int r = 0; r < o.region_rows; ++r) {
        for (int c = 0; c < o.region_cols; ++c) {
            const std::string reg = region_name(r, c);
            for (int a = 0; a < n; ++a) {
                for (int k = 0; k < n; ++k) {
                    if (k + 1 < n) {
                        b.add_link(node_name(r, c, a, k), node_name(r, c, a, k + 1), o.link_length_m, reg);
                        b.add_link(node_name(r, c, a, k + 1), node_name(r, c, a, k), o.link_length_m, reg);
                    }
                    if (a + 1 < n) {
                        b.add_link(node_name(r, c, a, k), node_name(r, c, a + 1, k), o.link_length_m, reg);
                        b.add_link(node_name(r, c, a + 1, k), node_name(r, c, a, k), o.link_length_m, reg);
                    }
                }
            }
        }
    }

    const std::vector<std::string> phase_names{"ab", "ba", "hold"};
    auto connect = [&](const std::string& ra, const std::string& rb, const std::vector<std::string>& side_a,
                       const std::vector<std::string>& side_b) {
        std::vector<std::string> gating;
        for (std::size_t k = 0; k < side_a.size(); ++k) {
            const std::string x = fmt::format("x_{}_{}_{}", ra, rb, k);
            const std::string in_a = b.add_link(side_a[k], x, o.connector_length_m, ra);
            b.add_link(x, side_a[k], o.connector_length_m, ra);
            const std::string in_b = b.add_link(side_b[k], x, o.connector_length_m, rb);
            b.add_link(x, side_b[k], o.connector_length_m, rb);
            IntersectionDoc ix;
            ix.id = x;
            ix.boundary = {ra, rb};
            if (k % 3 == 1) {
                ix.kind = "non-gating";
                ix.service_fraction = o.non_gating_service;
            } else {
                ix.kind = "gating";
                ix.phases = {PhaseDoc{"ab", {in_a + "/0"}}, PhaseDoc{"ba", {in_b + "/0"}}, PhaseDoc{"hold", {}}};
                gating.push_back(x);
            }
            doc.intersections.push_back(ix);
        }
        // Every combination of phases over the gating connectors.
        std::size_t combos = 1;
        for (std::size_t g = 0; g < gating.size(); ++g) combos *= phase_names.size();
        for (std::size_t p = 0; p < combos; ++p) {
            PlanDoc plan;
            plan.boundary = {ra, rb};
            std::string suffix;
            std::size_t rest = p;
            for (const std::string& g : gating) {
                const std::string& ph = phase_names[rest % phase_names.size()];
                rest /= phase_names.size();
                plan.phases.emplace_back(g, ph);
                suffix += "_" + ph;
            }
            plan.id = fmt::format("{}_{}{}", ra, rb, suffix);
            doc.plans.push_back(std::move(plan));
        }
    };

    for (int r = 0; r < o.region_rows; ++r) {
        for (int c = 0; c < o.region_cols; ++c) {
            if (c + 1 < o.region_cols) {
                std::vector<std::string> a, bside;
                for (int k = 0; k < n; ++k) {
                    a.push_back(node_name(r, c, k, n - 1));
                    bside.push_back(node_name(r, c + 1, k, 0));
                }
                connect(region_name(r, c), region_name(r, c + 1), a, bside);
            }
            if (r + 1 < o.region_rows) {
                std::vector<std::string> a, bside;
                for (int k = 0; k < n; ++k) {
                    a.push_back(node_name(r, c, n - 1, k));
                    bside.push_back(node_name(r + 1, c, 0, k));
                }
                connect(region_name(r, c), region_name(r + 1, c), a, bside);
            }
        }
    }
    b.wire_outputs(o.turn_lanes);

    // Each OD pair is split over `spread` origin/destination link pairs taken
    // round-robin from the regions' internal links.
    std::map<std::string, std::vector<std::size_t>> by_region;
    for (std::size_t k = 0; k < doc.links.size(); ++k) {
        const LinkDoc& l = doc.links[k];
        if (l.from.front() == 'n' && l.to.front() == 'n') by_region[l.region].push_back(k);
    }
    std::vector<std::vector<std::size_t>> internal;
    for (const RegionDoc& r : doc.regions) internal.push_back(by_region[r.id]);
    doc.demand.horizon = o.horizon_s;
    doc.demand.warmup = o.warmup_s;
    doc.demand.seed = o.seed;
    const int regions = o.region_rows * o.region_cols;
    const int spread = std::max(1, o.spread);
    for (int i = 0; i < regions; ++i) {
        for (int j = 0; j < regions; ++j) {
            double factor = i == j ? o.internal_factor : 1.0;
            const std::string dest = doc.regions[static_cast<std::size_t>(j)].id;
            if (i != j && std::find(o.hot_regions.begin(), o.hot_regions.end(), dest) != o.hot_regions.end()) {
                factor *= o.hot_factor;
            }
            if (factor <= 0.0) continue;
            const auto& from = internal[static_cast<std::size_t>(i)];
            const auto& to = internal[static_cast<std::size_t>(j)];
            for (int k = 0; k < spread; ++k) {
                const std::size_t a = (static_cast<std::size_t>(j) * 7 + static_cast<std::size_t>(k) * 5) % from.size();
                std::size_t d = (static_cast<std::size_t>(i) * 11 + static_cast<std::size_t>(k) * 3 + 1) % to.size();
                const LinkDoc& origin = doc.links[from[a]];
                while (to[d] == from[a] || (doc.links[to[d]].from == origin.to && doc.links[to[d]].to == origin.from)) {
                    d = (d + 1) % to.size();
                }
                OdDoc od;
                od.origin = origin.id;
                od.destination = doc.links[to[d]].id;
                const double scale = factor / spread;
                od.profile = {{0.0, o.base_rate * scale}, {o.peak_start_s, o.peak_rate * scale},
                              {o.peak_end_s, o.base_rate * scale}};
                doc.demand.od.push_back(std::move(od));
            }
        }
    }
    return doc;
}

GridOptions corridor_options() {
    GridOptions o;
    o.name = "corridor";
    o.region_rows = 1;
    o.region_cols = 2;
    o.horizon_s = 1200.0;
    o.peak_start_s = 200.0;
    o.peak_end_s = 800.0;
    o.base_rate = 0.02;
    o.peak_rate = 0.05;
    o.hot_regions = {"r01"};
    o.hot_factor = 1.5;
    return o;
}

GridOptions grid6_options() {
    GridOptions o;
    o.name = "grid6";
    return o;
}

}  // namespace msctl
