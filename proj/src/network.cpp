#include "msctl/network.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace msctl {

namespace {

std::uint64_t crossing_key(NodeId node, std::size_t phase, ArcId arc) {
    return (static_cast<std::uint64_t>(node.value) << 32) | (static_cast<std::uint64_t>(phase) << 16) |
           static_cast<std::uint64_t>(arc.value);
}

[[noreturn]] void violated(const std::string& rule) { throw ScenarioError(ScenarioError::Kind::invariant, rule); }

std::pair<RegionId, RegionId> ordered(std::pair<RegionId, RegionId> p) {
    if (p.second < p.first) std::swap(p.first, p.second);
    return p;
}

}  // namespace

Network::Network(NetworkParts parts)
    : node_names_(std::move(parts.node_names)),
      links_(std::move(parts.links)),
      lanes_(std::move(parts.lanes)),
      intersections_(std::move(parts.intersections)),
      plans_(std::move(parts.plans)),
      partition_(std::move(parts.partition)) {
    derive_tables(std::move(parts.plan_boundaries));
    validate();
}

void Network::derive_tables(std::vector<std::pair<RegionId, RegionId>> plan_boundaries) {
    const std::size_t regions = partition_.size();
    if (intersections_.size() != node_names_.size()) {
        violated("every node needs exactly one intersection entry");
    }
    for (std::size_t n = 0; n < node_names_.size(); ++n) node_by_name_.emplace(node_names_[n], NodeId(n));
    for (std::size_t r = 0; r < regions; ++r) region_by_name_.emplace(partition_.names[r], RegionId(r));
    for (std::size_t l = 0; l < links_.size(); ++l) {
        if (!link_by_name_.emplace(links_[l].name, LinkId(l)).second) {
            violated(fmt::format("duplicate link id '{}'", links_[l].name));
        }
        if (links_[l].region.index() >= regions) {
            violated(fmt::format("link '{}': region is not a member of the partition", links_[l].name));
        }
    }

    partition_.links.assign(regions, {});
    for (std::size_t l = 0; l < links_.size(); ++l) partition_.links[links_[l].region.index()].push_back(LinkId(l));
    for (auto& nb : partition_.neighbors) std::sort(nb.begin(), nb.end());

    successors_.assign(links_.size(), {});
    predecessors_.assign(links_.size(), {});
    for (std::size_t l = 0; l < lanes_.size(); ++l) {
        const Lane& lane = lanes_[l];
        for (LaneId out : lane.outputs) {
            LinkId next = lanes_[out.index()].link;
            auto& succ = successors_[lane.link.index()];
            if (std::find(succ.begin(), succ.end(), next) == succ.end()) succ.push_back(next);
        }
    }
    for (std::size_t l = 0; l < links_.size(); ++l) {
        std::sort(successors_[l].begin(), successors_[l].end());
        for (LinkId next : successors_[l]) predecessors_[next.index()].push_back(LinkId(l));
    }

    for (auto& ix : intersections_) ix.approach_lanes.clear();
    for (const Link& link : links_) {
        for (LaneId lane : link.lanes) intersections_[link.to_node.index()].approach_lanes.push_back(lane);
    }
    for (auto& ix : intersections_) {
        std::sort(ix.approach_lanes.begin(), ix.approach_lanes.end());
        for (auto& ph : ix.phases) std::sort(ph.lanes.begin(), ph.lanes.end());
    }

    // Boundaries, keyed by unordered region pair.
    std::map<std::pair<RegionId, RegionId>, BoundaryId> boundary_index;
    for (std::size_t n = 0; n < intersections_.size(); ++n) {
        const Intersection& ix = intersections_[n];
        if (!ix.boundary) continue;
        auto key = ordered(*ix.boundary);
        if (key.first == key.second) violated(fmt::format("intersection '{}': boundary joins a region to itself", ix.name));
        if (key.second.index() >= regions) violated(fmt::format("intersection '{}': boundary region out of range", ix.name));
        boundary_index.emplace(key, BoundaryId(0));
    }
    boundaries_.clear();
    for (auto& [key, id] : boundary_index) {
        id = BoundaryId(boundaries_.size());
        boundaries_.push_back(Boundary{key.first, key.second, {}, {}, {}});
    }
    gating_slot_.assign(intersections_.size(), 0);
    for (std::size_t n = 0; n < intersections_.size(); ++n) {
        const Intersection& ix = intersections_[n];
        if (!ix.boundary) continue;
        Boundary& b = boundaries_[boundary_index.at(ordered(*ix.boundary)).index()];
        if (ix.kind == IntersectionKind::gating) {
            gating_slot_[n] = b.gating.size();
            b.gating.push_back(NodeId(n));
        } else {
            b.non_gating.push_back(NodeId(n));
        }
    }

    arcs_.clear();
    for (std::size_t b = 0; b < boundaries_.size(); ++b) {
        arcs_.push_back(Arc{boundaries_[b].first, boundaries_[b].second, BoundaryId(b)});
        arcs_.push_back(Arc{boundaries_[b].second, boundaries_[b].first, BoundaryId(b)});
    }
    std::sort(arcs_.begin(), arcs_.end(),
              [](const Arc& a, const Arc& b) { return std::pair(a.from, a.to) < std::pair(b.from, b.to); });

    if (plan_boundaries.size() != plans_.size()) violated("every plan needs a boundary");
    for (std::size_t p = 0; p < plans_.size(); ++p) {
        auto key = ordered(plan_boundaries[p]);
        auto it = boundary_index.find(key);
        if (it == boundary_index.end()) {
            violated(fmt::format("plan '{}': its region pair has no boundary intersections", plans_[p].name));
        }
        MultiPhasePlan& plan = plans_[p];
        plan.boundary = it->second;
        Boundary& b = boundaries_[it->second.index()];
        if (plan.settings.size() != b.gating.size()) {
            violated(fmt::format("plan '{}': needs exactly one phase per gating intersection of its boundary ({} given, {} gating)",
                                 plan.name, plan.settings.size(), b.gating.size()));
        }
        std::vector<PlanSetting> sorted(b.gating.size());
        std::vector<bool> seen(b.gating.size(), false);
        for (const PlanSetting& s : plan.settings) {
            const Intersection& ix = intersections_[s.node.index()];
            if (ix.kind != IntersectionKind::gating || !ix.boundary || ordered(*ix.boundary) != key) {
                violated(fmt::format("plan '{}': node '{}' is not a gating intersection of the plan's boundary", plan.name,
                                     node_names_[s.node.index()]));
            }
            if (s.phase >= ix.phases.size()) violated(fmt::format("plan '{}': phase index out of range", plan.name));
            std::size_t slot = gating_slot_[s.node.index()];
            if (seen[slot]) violated(fmt::format("plan '{}': intersection listed twice", plan.name));
            seen[slot] = true;
            sorted[slot] = s;
        }
        plan.settings = std::move(sorted);
        b.plans.push_back(PlanId(p));
    }

    // L^p_{i,h}: phase lanes of the sending region with an output into the receiving region.
    crossing_.clear();
    for (std::size_t a = 0; a < arcs_.size(); ++a) {
        const Arc& arc = arcs_[a];
        for (NodeId node : boundaries_[arc.boundary.index()].gating) {
            const Intersection& ix = intersections_[node.index()];
            for (std::size_t p = 0; p < ix.phases.size(); ++p) {
                std::vector<LaneId> lanes;
                for (LaneId l : ix.phases[p].lanes) {
                    const Lane& lane = lanes_[l.index()];
                    if (links_[lane.link.index()].region != arc.from) continue;
                    bool crosses = std::any_of(lane.outputs.begin(), lane.outputs.end(), [&](LaneId o) {
                        return links_[lanes_[o.index()].link.index()].region == arc.to;
                    });
                    if (crosses) lanes.push_back(l);
                }
                crossing_.emplace(crossing_key(node, p, ArcId(a)), std::move(lanes));
            }
        }
    }

    nominal_service_.assign(lanes_.size(), 1.0);
    for (const Intersection& ix : intersections_) {
        for (LaneId l : ix.approach_lanes) {
            if (ix.kind == IntersectionKind::gating) {
                std::size_t served = 0;
                for (const Phase& ph : ix.phases) {
                    if (std::binary_search(ph.lanes.begin(), ph.lanes.end(), l)) ++served;
                }
                nominal_service_[l.index()] =
                    ix.phases.empty() ? 0.0 : static_cast<double>(served) / static_cast<double>(ix.phases.size());
            } else {
                nominal_service_[l.index()] = ix.service_fraction;
            }
        }
    }
}

void Network::validate() const {
    const std::size_t regions = partition_.size();
    if (regions == 0) violated("partition has no regions");
    if (partition_.neighbors.size() != regions) violated("adjacency must list every region");

    for (std::size_t r = 0; r < regions; ++r) {
        for (RegionId h : partition_.neighbors[r]) {
            if (h.index() >= regions || h.index() == r) {
                violated(fmt::format("region '{}': invalid neighbor", partition_.names[r]));
            }
            const auto& back = partition_.neighbors[h.index()];
            if (!std::binary_search(back.begin(), back.end(), RegionId(r))) {
                violated(fmt::format("adjacency is not symmetric: '{}' lists '{}' but not the reverse", partition_.names[r],
                                     partition_.names[h.index()]));
            }
        }
    }

    for (const Link& link : links_) {
        if (!(link.length_m > 0.0)) violated(fmt::format("link '{}': length_m must be > 0", link.name));
        if (!(link.free_speed_mps > 0.0)) violated(fmt::format("link '{}': free speed must be > 0", link.name));
        if (link.lanes.empty()) violated(fmt::format("link '{}': lane_count must be >= 1", link.name));
        for (LaneId l : link.lanes) {
            if (lanes_[l.index()].link != LinkId(&link - links_.data())) {
                violated(fmt::format("link '{}': lane '{}' belongs to another link", link.name, lanes_[l.index()].name));
            }
        }
    }

    for (const Lane& lane : lanes_) {
        if (!(lane.sat_flow_veh_per_s > 0.0)) violated(fmt::format("lane '{}': sat_flow must be > 0", lane.name));
        if (lane.capacity_veh < 1) violated(fmt::format("lane '{}': capacity must be >= 1", lane.name));
        const Link& link = links_[lane.link.index()];
        bool node_has_exits = std::any_of(links_.begin(), links_.end(), [&](const Link& l) { return l.from_node == link.to_node; });
        if (lane.outputs.empty() && node_has_exits) {
            violated(fmt::format("lane '{}': output_lanes empty but link '{}' is not a network sink", lane.name, link.name));
        }
        for (LaneId o : lane.outputs) {
            const Link& next = links_[lanes_[o.index()].link.index()];
            if (next.from_node != link.to_node) {
                violated(fmt::format("lane '{}': output lane '{}' is not on a link leaving node '{}'", lane.name,
                                     lanes_[o.index()].name, node_names_[link.to_node.index()]));
            }
            if (next.region != link.region) {
                const Intersection& ix = intersections_[link.to_node.index()];
                if (!ix.boundary || ordered(*ix.boundary) != ordered({link.region, next.region})) {
                    violated(fmt::format("lane '{}': crosses from '{}' to '{}' at node '{}' which is not on that boundary",
                                         lane.name, partition_.names[link.region.index()],
                                         partition_.names[next.region.index()], node_names_[link.to_node.index()]));
                }
            }
        }
    }

    for (const Intersection& ix : intersections_) {
        if (ix.kind == IntersectionKind::interior && ix.boundary) {
            violated(fmt::format("intersection '{}': interior intersections carry no boundary", ix.name));
        }
        if (ix.kind != IntersectionKind::interior && !ix.boundary) {
            violated(fmt::format("intersection '{}': boundary intersections need a region pair", ix.name));
        }
        if (ix.kind == IntersectionKind::gating && ix.phases.size() < 2) {
            violated(fmt::format("intersection '{}': gating intersections need >= 2 phases", ix.name));
        }
        if (ix.kind != IntersectionKind::gating && !(ix.service_fraction > 0.0 && ix.service_fraction <= 1.0)) {
            violated(fmt::format("intersection '{}': service_fraction must be in (0, 1]", ix.name));
        }
        for (const Phase& ph : ix.phases) {
            for (LaneId l : ph.lanes) {
                if (!std::binary_search(ix.approach_lanes.begin(), ix.approach_lanes.end(), l)) {
                    violated(fmt::format("intersection '{}': phase '{}' lists lane '{}' which does not approach it", ix.name,
                                         ph.name, lanes_[l.index()].name));
                }
            }
        }
    }

    for (std::size_t r = 0; r < regions; ++r) {
        for (RegionId h : partition_.neighbors[r]) {
            if (h.index() < r) continue;
            auto it = std::find_if(boundaries_.begin(), boundaries_.end(),
                                   [&](const Boundary& b) { return b.first == RegionId(r) && b.second == h; });
            if (it == boundaries_.end() || it->gating.empty()) {
                violated(fmt::format("boundary ('{}','{}') needs at least one gating intersection", partition_.names[r],
                                     partition_.names[h.index()]));
            }
            if (it->plans.empty()) {
                violated(fmt::format("boundary ('{}','{}') needs at least one multi-phase plan", partition_.names[r],
                                     partition_.names[h.index()]));
            }
        }
    }
    for (const Boundary& b : boundaries_) {
        const auto& nb = partition_.neighbors[b.first.index()];
        if (!std::binary_search(nb.begin(), nb.end(), b.second)) {
            violated(fmt::format("boundary intersections join '{}' and '{}' which are not adjacent",
                                 partition_.names[b.first.index()], partition_.names[b.second.index()]));
        }
    }
}

std::optional<ArcId> Network::arc_between(RegionId from, RegionId to) const {
    auto it = std::lower_bound(arcs_.begin(), arcs_.end(), std::pair(from, to),
                               [](const Arc& a, const std::pair<RegionId, RegionId>& k) {
                                   return std::pair(a.from, a.to) < k;
                               });
    if (it == arcs_.end() || it->from != from || it->to != to) return std::nullopt;
    return ArcId(static_cast<std::size_t>(it - arcs_.begin()));
}

std::vector<LinkId> Network::lane_successors(LaneId lane) const {
    std::vector<LinkId> out;
    for (LaneId o : lanes_[lane.index()].outputs) {
        LinkId l = lanes_[o.index()].link;
        if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool Network::lane_reaches(LaneId lane, LinkId next) const {
    const auto& outs = lanes_[lane.index()].outputs;
    return std::any_of(outs.begin(), outs.end(), [&](LaneId o) { return lanes_[o.index()].link == next; });
}

std::span<const LaneId> Network::crossing_lanes(NodeId node, std::size_t phase, ArcId arc) const {
    auto it = crossing_.find(crossing_key(node, phase, arc));
    if (it == crossing_.end()) return {};
    return it->second;
}

std::vector<LaneId> Network::crossing_approach_lanes(NodeId node, ArcId arc) const {
    const Arc& a = arcs_[arc.index()];
    std::vector<LaneId> out;
    for (LaneId l : intersections_[node.index()].approach_lanes) {
        const Lane& lane = lanes_[l.index()];
        if (links_[lane.link.index()].region != a.from) continue;
        bool crosses = std::any_of(lane.outputs.begin(), lane.outputs.end(),
                                   [&](LaneId o) { return links_[lanes_[o.index()].link.index()].region == a.to; });
        if (crosses) out.push_back(l);
    }
    return out;
}

std::optional<LinkId> Network::find_link(const std::string& name) const {
    auto it = link_by_name_.find(name);
    if (it == link_by_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<RegionId> Network::find_region(const std::string& name) const {
    auto it = region_by_name_.find(name);
    if (it == region_by_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeId> Network::find_node(const std::string& name) const {
    auto it = node_by_name_.find(name);
    if (it == node_by_name_.end()) return std::nullopt;
    return it->second;
}

std::vector<RegionId> candidate_hyper_path(const Network& net, std::span<const LinkId> route) {
    std::vector<RegionId> path;
    for (std::size_t i = 0; i < route.size(); ++i) {
        if (i > 0) {
            auto succ = net.successors(route[i - 1]);
            if (std::find(succ.begin(), succ.end(), route[i]) == succ.end()) {
                throw std::invalid_argument(fmt::format("route is disconnected between '{}' and '{}'",
                                                        net.link(route[i - 1]).name, net.link(route[i]).name));
            }
        }
        RegionId r = net.region_of(route[i]);
        if (path.empty() || path.back() != r) path.push_back(r);
    }
    return path;
}

double OdFlow::rate_at(double t) const {
    double rate = 0.0;
    for (const RateBreakpoint& bp : profile) {
        if (bp.start_s <= t) rate = bp.rate_veh_per_s;
        else break;
    }
    return rate;
}

}  // namespace msctl
