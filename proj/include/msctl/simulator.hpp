#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "msctl/network.hpp"

namespace msctl {

struct Vehicle {
    VehicleId id;
    std::size_t od = 0;  // index into DemandScenario::od
    LinkId origin;
    LinkId destination;
    RegionId destination_region;
    std::vector<LinkId> route;  // front() is the current link, back() the destination
    LaneId lane;
    bool in_network = false;  // false while waiting in the entry queue or after exit
    bool exited = false;
    bool queued = false;
    double remaining_s = 0.0;  // free-flow time left before the stop line
    double created_s = 0.0;

    [[nodiscard]] LinkId current() const { return route.front(); }
};

/// Per-region, per-destination-region matrix stored row-major.
struct RegionMatrix {
    std::size_t n = 0;
    std::vector<double> v;

    RegionMatrix() = default;
    explicit RegionMatrix(std::size_t regions) : n(regions), v(regions * regions, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return v[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * n + j]; }
};

/// Snapshot taken at the end of a micro step. Flow quantities refer to the
/// step just simulated; e_l is projected for the step about to start.
struct MicroObservation {
    std::int64_t step = 0;  // number of steps simulated so far
    double time_s = 0.0;
    double dt_s = 0.0;
    std::vector<int> queue;      // q_l
    std::vector<int> occupancy;  // running + queued per lane
    std::vector<int> arrivals;   // e_l
    std::vector<double> crossings;         // total realized flow per arc, veh/s
    std::vector<double> gating_crossings;  // through gating intersections, veh/s
    std::vector<double> ng_crossings;      // through non-gating intersections, veh/s
    std::vector<double> accumulation;      // N_i
    RegionMatrix od_accumulation;          // N_ij
    RegionMatrix entries;                  // vehicles entering the network this step, by (origin, destination) region
    std::vector<double> completions;       // trips finished inside region i this step
    std::vector<double> outflow;           // vehicles leaving region i for a neighbor this step
    std::int64_t created = 0;              // cumulative
    std::int64_t exited = 0;               // cumulative
    std::int64_t in_network = 0;
    std::int64_t entry_queue = 0;
};

struct TypeCounts {
    RegionMatrix type1;  // queued with the next route link in another region, by (i, j)
    RegionMatrix type2;  // on the destination link, by (i, j = i's destination region)
    RegionMatrix type3;
};

/// Active phase per gating intersection, derived from one plan per boundary.
struct SignalSettings {
    std::vector<PlanId> plans;  // indexed by boundary
};

/// Point-queue mesoscopic engine. Vehicles traverse a link at free-flow
/// speed, then wait in a vertical queue at the stop line of their lane.
class Simulator {
public:
    Simulator(const Network& net, DemandScenario demand);

    [[nodiscard]] const Network& network() const { return *net_; }
    [[nodiscard]] const DemandScenario& demand() const { return demand_; }
    [[nodiscard]] double time() const { return time_s_; }
    [[nodiscard]] std::int64_t step() const { return step_; }

    /// Poisson arrivals for every OD over [time, time + dt). Returns the new
    /// vehicle ids; they wait in the origin's entry queue until admitted.
    std::vector<VehicleId> inject_demand(double dt);

    /// Simulates one step under `signals` and returns the resulting observation.
    MicroObservation advance(const SignalSettings& signals, double dt);

    /// Observation of the current state with zero flows.
    [[nodiscard]] MicroObservation observe() const;

    [[nodiscard]] TypeCounts classify_vehicles() const;

    [[nodiscard]] const std::vector<Vehicle>& vehicles() const { return vehicles_; }
    [[nodiscard]] const Vehicle& vehicle(VehicleId id) const { return vehicles_[id.index()]; }

    /// Ids of vehicles currently inside the network, ascending.
    [[nodiscard]] std::vector<VehicleId> active_vehicles() const;

    /// Replaces a vehicle's remaining route. The route must start at the
    /// current link, end at the destination, be connected, and its first hop
    /// must be reachable from the vehicle's lane. Returns false otherwise.
    bool set_route(VehicleId id, std::vector<LinkId> route);

    /// Current link travel time: free flow plus the queue discharged at the
    /// link's nominal service rate.
    [[nodiscard]] std::vector<double> link_travel_times() const;

    /// Free-flow travel time per link.
    [[nodiscard]] std::vector<double> free_flow_times() const;

    [[nodiscard]] bool empty() const { return in_network_ == 0 && entry_total_ == 0; }
    [[nodiscard]] std::int64_t created() const { return static_cast<std::int64_t>(vehicles_.size()); }
    [[nodiscard]] std::int64_t exited() const { return exited_; }
    [[nodiscard]] std::int64_t in_network() const { return in_network_; }
    [[nodiscard]] std::int64_t entry_queue_size() const { return entry_total_; }

    /// Lane-level accessors used by the estimators.
    [[nodiscard]] int lane_queue(LaneId l) const { return static_cast<int>(queue_[l.index()].size()); }
    [[nodiscard]] int lane_occupancy(LaneId l) const { return occupancy_[l.index()]; }

    /// Places a vehicle directly on a lane, bypassing demand; for tests and
    /// scripted scenarios. The route starts at the lane's link.
    VehicleId place_vehicle(LaneId lane, std::vector<LinkId> route, bool queued, double remaining_s);

private:
    VehicleId create_vehicle(std::size_t od, std::vector<LinkId> route);
    void enter_link(Vehicle& v, LinkId link, LaneId lane);
    std::vector<double> service_fraction(const SignalSettings& signals) const;
    int projected_arrivals(LaneId l, double dt) const;
    void fill_stocks(MicroObservation& obs) const;
    std::optional<LaneId> pick_lane(std::span<const LaneId> candidates, LinkId after, const std::vector<int>& space) const;

    const Network* net_;
    DemandScenario demand_;
    std::mt19937_64 demand_rng_;
    double time_s_ = 0.0;
    std::int64_t step_ = 0;

    std::vector<Vehicle> vehicles_;
    std::vector<std::deque<VehicleId>> queue_;    // per lane, FIFO
    std::vector<std::vector<VehicleId>> running_;  // per lane, in entry order
    std::vector<int> occupancy_;
    std::vector<double> carry_;                    // fractional service credit per lane
    std::vector<std::deque<VehicleId>> entry_;    // per origin link
    std::vector<std::uint32_t> origins_;           // links with an entry queue, ascending
    std::int64_t entry_total_ = 0;
    std::int64_t in_network_ = 0;
    std::int64_t exited_ = 0;
    std::vector<std::vector<LinkId>> free_flow_routes_;  // per OD
};

/// CSV header and row for the per-step observation log. Columns: step,
/// time_s, N_<region>..., m_<from>_<to>..., ng_<from>_<to>..., queued,
/// in_network, entry_queue, created, exited.
void write_observation_header(std::ostream& out, const Network& net);
void write_observation_row(std::ostream& out, const MicroObservation& obs);

}  // namespace msctl
