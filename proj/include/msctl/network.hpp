#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msctl/ids.hpp"

namespace msctl {

class ScenarioError : public std::runtime_error {
public:
    enum class Kind { parse, dangling_identifier, invariant };

    ScenarioError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Lane {
    std::string name;
    LinkId link;
    double sat_flow_veh_per_s = 0.5;  // c_l
    int capacity_veh = 1;             // l_o, storage of the lane
    std::vector<LaneId> outputs;      // O_l
};

struct Link {
    std::string name;
    NodeId from_node;
    NodeId to_node;
    double length_m = 0.0;
    double free_speed_mps = 10.0;
    RegionId region;
    std::vector<LaneId> lanes;

    [[nodiscard]] int lane_count() const { return static_cast<int>(lanes.size()); }
    [[nodiscard]] double free_flow_time_s() const { return length_m / free_speed_mps; }
};

enum class IntersectionKind { gating, non_gating, interior };

struct Phase {
    std::string name;
    std::vector<LaneId> lanes;  // L_p, sorted
};

/// One per node. Gating intersections are actuated by plans; non-gating and
/// interior ones serve every approach lane at service_fraction of saturation.
struct Intersection {
    std::string name;
    IntersectionKind kind = IntersectionKind::interior;
    std::vector<Phase> phases;
    std::optional<std::pair<RegionId, RegionId>> boundary;
    double service_fraction = 1.0;
    std::vector<LaneId> approach_lanes;  // lanes of links ending here, sorted
};

/// Unordered region pair {first < second} sharing at least one boundary intersection.
struct Boundary {
    RegionId first;
    RegionId second;
    std::vector<NodeId> gating;
    std::vector<NodeId> non_gating;
    std::vector<PlanId> plans;  // S_ih
};

/// Ordered adjacent region pair (i, h).
struct Arc {
    RegionId from;
    RegionId to;
    BoundaryId boundary;
};

struct PlanSetting {
    NodeId node;
    std::size_t phase = 0;

    friend bool operator==(const PlanSetting&, const PlanSetting&) = default;
};

struct MultiPhasePlan {
    std::string name;
    BoundaryId boundary;
    std::vector<PlanSetting> settings;  // one per gating intersection, in Boundary::gating order
};

struct RegionPartition {
    std::vector<std::string> names;
    std::vector<std::vector<RegionId>> neighbors;  // R_i, sorted
    std::vector<std::vector<LinkId>> links;        // X_i

    [[nodiscard]] std::size_t size() const { return names.size(); }
};

/// Everything needed to construct a Network, with cross references already
/// resolved to indices. Produced by the scenario loader and the fixture builders.
struct NetworkParts {
    std::vector<std::string> node_names;
    std::vector<Link> links;
    std::vector<Lane> lanes;
    std::vector<Intersection> intersections;  // indexed by node
    std::vector<MultiPhasePlan> plans;        // boundary field filled by Network
    std::vector<std::pair<RegionId, RegionId>> plan_boundaries;
    RegionPartition partition;
};

/// Static road network with its region partition. Immutable after construction.
class Network {
public:
    /// Validates every structural invariant; throws ScenarioError(invariant).
    explicit Network(NetworkParts parts);

    [[nodiscard]] const std::vector<Link>& links() const { return links_; }
    [[nodiscard]] const std::vector<Lane>& lanes() const { return lanes_; }
    [[nodiscard]] const std::vector<Intersection>& intersections() const { return intersections_; }
    [[nodiscard]] const std::vector<std::string>& node_names() const { return node_names_; }
    [[nodiscard]] const std::vector<MultiPhasePlan>& plans() const { return plans_; }
    [[nodiscard]] const std::vector<Boundary>& boundaries() const { return boundaries_; }
    [[nodiscard]] const std::vector<Arc>& arcs() const { return arcs_; }
    [[nodiscard]] const RegionPartition& partition() const { return partition_; }

    [[nodiscard]] const Link& link(LinkId id) const { return links_[id.index()]; }
    [[nodiscard]] const Lane& lane(LaneId id) const { return lanes_[id.index()]; }
    [[nodiscard]] const Intersection& intersection(NodeId id) const { return intersections_[id.index()]; }
    [[nodiscard]] const MultiPhasePlan& plan(PlanId id) const { return plans_[id.index()]; }
    [[nodiscard]] const Boundary& boundary(BoundaryId id) const { return boundaries_[id.index()]; }
    [[nodiscard]] const Arc& arc(ArcId id) const { return arcs_[id.index()]; }
    [[nodiscard]] std::size_t region_count() const { return partition_.size(); }
    [[nodiscard]] RegionId region_of(LinkId id) const { return links_[id.index()].region; }

    /// Arc for ordered pair (from, to), if the regions are adjacent.
    [[nodiscard]] std::optional<ArcId> arc_between(RegionId from, RegionId to) const;

    /// Links reachable in one move from the end of `id` (through any lane).
    [[nodiscard]] std::span<const LinkId> successors(LinkId id) const { return successors_[id.index()]; }
    [[nodiscard]] std::span<const LinkId> predecessors(LinkId id) const { return predecessors_[id.index()]; }

    /// Links reachable from `lane` (through its output lanes).
    [[nodiscard]] std::vector<LinkId> lane_successors(LaneId lane) const;

    /// True if some output of `lane` lies on `next`.
    [[nodiscard]] bool lane_reaches(LaneId lane, LinkId next) const;

    /// Lanes of phase `phase` at gating node `node` that carry traffic from
    /// the arc's sending region into its receiving region (L^p_{i,h}).
    [[nodiscard]] std::span<const LaneId> crossing_lanes(NodeId node, std::size_t phase, ArcId arc) const;

    /// Every lane at `node` whose movements cross `arc` (used for non-gating nodes).
    [[nodiscard]] std::vector<LaneId> crossing_approach_lanes(NodeId node, ArcId arc) const;

    /// Fraction of time a lane is expected to be served, used for travel-time estimates.
    [[nodiscard]] double nominal_service_fraction(LaneId lane) const { return nominal_service_[lane.index()]; }

    /// Gating node -> position in its boundary's gating list.
    [[nodiscard]] std::size_t gating_slot(NodeId node) const { return gating_slot_[node.index()]; }

    [[nodiscard]] std::optional<LinkId> find_link(const std::string& name) const;
    [[nodiscard]] std::optional<RegionId> find_region(const std::string& name) const;
    [[nodiscard]] std::optional<NodeId> find_node(const std::string& name) const;

    /// True if no link leaves the end node of `id`.
    [[nodiscard]] bool is_sink(LinkId id) const { return successors_[id.index()].empty(); }

private:
    void derive_tables(std::vector<std::pair<RegionId, RegionId>> plan_boundaries);
    void validate() const;

    std::vector<std::string> node_names_;
    std::vector<Link> links_;
    std::vector<Lane> lanes_;
    std::vector<Intersection> intersections_;
    std::vector<MultiPhasePlan> plans_;
    RegionPartition partition_;

    std::vector<Boundary> boundaries_;
    std::vector<Arc> arcs_;
    std::vector<std::vector<LinkId>> successors_;
    std::vector<std::vector<LinkId>> predecessors_;
    std::vector<double> nominal_service_;
    std::vector<std::size_t> gating_slot_;
    // crossing_[node][phase][arc] flattened through a map keyed by (node, phase, arc)
    std::unordered_map<std::uint64_t, std::vector<LaneId>> crossing_;
    std::unordered_map<std::string, LinkId> link_by_name_;
    std::unordered_map<std::string, RegionId> region_by_name_;
    std::unordered_map<std::string, NodeId> node_by_name_;
};

/// Region sequence visited by a link route, consecutive repeats collapsed.
/// Throws std::invalid_argument if consecutive links are not connected.
std::vector<RegionId> candidate_hyper_path(const Network& net, std::span<const LinkId> route);

/// Piecewise-constant arrival rate: rate applies from `start_s` until the next entry.
struct RateBreakpoint {
    double start_s = 0.0;
    double rate_veh_per_s = 0.0;

    friend bool operator==(const RateBreakpoint&, const RateBreakpoint&) = default;
};

struct OdFlow {
    LinkId origin;
    LinkId destination;
    std::vector<RateBreakpoint> profile;

    [[nodiscard]] double rate_at(double t) const;
};

struct DemandScenario {
    std::vector<OdFlow> od;
    double horizon_s = 3600.0;
    double warmup_s = 200.0;
    std::uint64_t seed = 1;
};

}  // namespace msctl
