#include "msctl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "msctl/paths.hpp"
#include "msctl/rng.hpp"

namespace msctl {

namespace {

constexpr std::size_t kNoOd = std::numeric_limits<std::size_t>::max();

int service_limit(double sat_flow, double dt, double fraction, double& carry) {
    const double full = std::floor(sat_flow * dt + 1e-9);
    if (fraction >= 1.0) {
        carry = 0.0;
        return static_cast<int>(full);
    }
    if (fraction <= 0.0) {
        carry = 0.0;
        return 0;
    }
    const double credit = sat_flow * dt * fraction + carry;
    const double whole = std::min(std::floor(credit + 1e-9), full);
    carry = std::max(0.0, credit - whole);
    carry = std::min(carry, 1.0);
    return static_cast<int>(whole);
}

}  // namespace

Simulator::Simulator(const Network& net, DemandScenario demand)
    : net_(&net),
      demand_(std::move(demand)),
      demand_rng_(make_stream(demand_.seed, kDemandStream)),
      queue_(net.lanes().size()),
      running_(net.lanes().size()),
      occupancy_(net.lanes().size(), 0),
      carry_(net.lanes().size(), 0.0),
      entry_(net.links().size()) {
    const std::vector<double> ff = free_flow_times();
    std::map<std::uint32_t, PathTree> trees;
    for (const OdFlow& od : demand_.od) {
        auto it = trees.find(od.destination.value);
        if (it == trees.end()) it = trees.emplace(od.destination.value, PathTree(net, od.destination, ff)).first;
        std::vector<LinkId> route = it->second.route_from(od.origin);
        if (route.empty()) {
            throw ScenarioError(ScenarioError::Kind::invariant,
                                fmt::format("demand {} -> {}: destination unreachable", net.link(od.origin).name,
                                            net.link(od.destination).name));
        }
        free_flow_routes_.push_back(std::move(route));
    }
    std::vector<std::uint32_t> origins;
    for (const OdFlow& od : demand_.od) origins.push_back(od.origin.value);
    std::sort(origins.begin(), origins.end());
    origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
    origins_ = std::move(origins);
}

std::vector<double> Simulator::free_flow_times() const {
    std::vector<double> ff;
    ff.reserve(net_->links().size());
    for (const Link& l : net_->links()) ff.push_back(l.free_flow_time_s());
    return ff;
}

std::vector<double> Simulator::link_travel_times() const {
    std::vector<double> tt;
    tt.reserve(net_->links().size());
    for (const Link& link : net_->links()) {
        double queued = 0.0;
        double rate = 0.0;
        for (LaneId l : link.lanes) {
            queued += static_cast<double>(queue_[l.index()].size());
            rate += net_->lane(l).sat_flow_veh_per_s * net_->nominal_service_fraction(l);
        }
        double delay = queued > 0.0 ? (rate > 0.0 ? queued / rate : 1e6) : 0.0;
        tt.push_back(link.free_flow_time_s() + delay);
    }
    return tt;
}

VehicleId Simulator::create_vehicle(std::size_t od, std::vector<LinkId> route) {
    Vehicle v;
    v.id = VehicleId(vehicles_.size());
    v.od = od;
    v.origin = route.front();
    v.destination = route.back();
    v.destination_region = net_->region_of(v.destination);
    v.route = std::move(route);
    v.created_s = time_s_;
    vehicles_.push_back(std::move(v));
    return vehicles_.back().id;
}

std::vector<VehicleId> Simulator::inject_demand(double dt) {
    std::vector<VehicleId> created;
    if (time_s_ >= demand_.horizon_s) return created;
    for (std::size_t k = 0; k < demand_.od.size(); ++k) {
        const double mean = demand_.od[k].rate_at(time_s_) * dt;
        if (!(mean > 0.0)) continue;
        std::poisson_distribution<int> draw(mean);
        const int n = draw(demand_rng_);
        for (int i = 0; i < n; ++i) {
            VehicleId id = create_vehicle(k, free_flow_routes_[k]);
            entry_[demand_.od[k].origin.index()].push_back(id);
            ++entry_total_;
            created.push_back(id);
        }
    }
    return created;
}

VehicleId Simulator::place_vehicle(LaneId lane, std::vector<LinkId> route, bool queued, double remaining_s) {
    if (route.empty() || route.front() != net_->lane(lane).link) {
        throw std::invalid_argument("place_vehicle: route must start at the lane's link");
    }
    VehicleId id = create_vehicle(kNoOd, std::move(route));
    Vehicle& v = vehicles_[id.index()];
    v.lane = lane;
    v.in_network = true;
    v.queued = queued;
    v.remaining_s = queued ? 0.0 : remaining_s;
    if (queued) queue_[lane.index()].push_back(id);
    else running_[lane.index()].push_back(id);
    ++occupancy_[lane.index()];
    ++in_network_;
    return id;
}

void Simulator::enter_link(Vehicle& v, LinkId link, LaneId lane) {
    v.lane = lane;
    v.queued = false;
    v.remaining_s = net_->link(link).free_flow_time_s();
    running_[lane.index()].push_back(v.id);
    ++occupancy_[lane.index()];
}

std::optional<LaneId> Simulator::pick_lane(std::span<const LaneId> candidates, LinkId after,
                                           const std::vector<int>& space) const {
    const bool has_after = after.value != std::numeric_limits<std::uint32_t>::max();
    bool any_reach = false;
    if (has_after) {
        for (LaneId c : candidates) any_reach = any_reach || net_->lane_reaches(c, after);
    }
    std::optional<LaneId> best;
    for (LaneId c : candidates) {
        if (any_reach && !net_->lane_reaches(c, after)) continue;
        if (space[c.index()] <= 0) continue;
        if (!best || occupancy_[c.index()] < occupancy_[best->index()]) best = c;
    }
    return best;
}

std::vector<double> Simulator::service_fraction(const SignalSettings& signals) const {
    const auto& boundaries = net_->boundaries();
    if (signals.plans.size() != boundaries.size()) {
        throw std::invalid_argument(
            fmt::format("advance: {} plans given for {} boundaries", signals.plans.size(), boundaries.size()));
    }
    std::vector<double> frac(net_->lanes().size(), 1.0);
    for (const Intersection& ix : net_->intersections()) {
        if (ix.kind == IntersectionKind::gating) {
            for (LaneId l : ix.approach_lanes) frac[l.index()] = 0.0;
        } else {
            for (LaneId l : ix.approach_lanes) frac[l.index()] = ix.service_fraction;
        }
    }
    for (std::size_t b = 0; b < boundaries.size(); ++b) {
        const MultiPhasePlan& plan = net_->plan(signals.plans[b]);
        if (plan.boundary != BoundaryId(b)) {
            throw std::invalid_argument(fmt::format("advance: plan '{}' does not belong to boundary {}", plan.name, b));
        }
        for (const PlanSetting& s : plan.settings) {
            for (LaneId l : net_->intersection(s.node).phases[s.phase].lanes) frac[l.index()] = 1.0;
        }
    }
    return frac;
}

MicroObservation Simulator::advance(const SignalSettings& signals, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be positive");
    const Network& net = *net_;
    const std::size_t regions = net.region_count();
    const std::vector<double> frac = service_fraction(signals);

    MicroObservation obs;
    obs.crossings.assign(net.arcs().size(), 0.0);
    obs.gating_crossings.assign(net.arcs().size(), 0.0);
    obs.ng_crossings.assign(net.arcs().size(), 0.0);
    obs.completions.assign(regions, 0.0);
    obs.outflow.assign(regions, 0.0);
    obs.entries = RegionMatrix(regions);

    // 1. Free-flow movement: reach the stop line, or leave at the destination.
    for (std::size_t l = 0; l < running_.size(); ++l) {
        auto& run = running_[l];
        if (run.empty()) continue;
        std::vector<VehicleId> still;
        std::vector<VehicleId> arrived;
        for (VehicleId id : run) {
            Vehicle& v = vehicles_[id.index()];
            v.remaining_s -= dt;
            if (v.remaining_s > 1e-9) {
                still.push_back(id);
                continue;
            }
            if (v.route.size() == 1) {
                v.in_network = false;
                v.exited = true;
                --occupancy_[l];
                --in_network_;
                ++exited_;
                obs.completions[net.region_of(v.current()).index()] += 1.0;
            } else {
                arrived.push_back(id);
            }
        }
        std::stable_sort(arrived.begin(), arrived.end(), [&](VehicleId a, VehicleId b) {
            const double ra = vehicles_[a.index()].remaining_s;
            const double rb = vehicles_[b.index()].remaining_s;
            return ra != rb ? ra < rb : a < b;
        });
        for (VehicleId id : arrived) {
            Vehicle& v = vehicles_[id.index()];
            v.queued = true;
            v.remaining_s = 0.0;
            queue_[l].push_back(id);
        }
        run = std::move(still);
    }

    // 2. Stop-line discharge against a space snapshot taken after exits.
    std::vector<int> space(occupancy_.size());
    for (std::size_t l = 0; l < space.size(); ++l) space[l] = net.lane(LaneId(l)).capacity_veh - occupancy_[l];
    const std::vector<double> ff = free_flow_times();
    std::optional<std::map<std::uint32_t, PathTree>> repair_trees;

    for (std::size_t l = 0; l < queue_.size(); ++l) {
        auto& q = queue_[l];
        const Lane& lane = net.lane(LaneId(l));
        const int limit = service_limit(lane.sat_flow_veh_per_s, dt, frac[l], carry_[l]);
        int served = 0;
        while (served < limit && !q.empty()) {
            Vehicle& v = vehicles_[q.front().index()];
            if (!net.lane_reaches(LaneId(l), v.route[1])) {
                if (!repair_trees) repair_trees.emplace();
                auto it = repair_trees->find(v.destination.value);
                if (it == repair_trees->end()) {
                    it = repair_trees->emplace(v.destination.value, PathTree(net, v.destination, ff)).first;
                }
                std::vector<LinkId> hops = net.lane_successors(LaneId(l));
                std::vector<LinkId> fixed = it->second.route_from(v.current(), hops);
                if (fixed.empty()) break;
                v.route = std::move(fixed);
            }
            const LinkId next = v.route[1];
            std::vector<LaneId> candidates;
            for (LaneId o : lane.outputs) {
                if (net.lane(o).link == next) candidates.push_back(o);
            }
            const LinkId after = v.route.size() > 2 ? v.route[2] : LinkId(std::numeric_limits<std::uint32_t>::max());
            std::optional<LaneId> target = pick_lane(candidates, after, space);
            if (!target) break;  // head-of-line blocking

            const LinkId from_link = v.current();
            const RegionId from = net.region_of(from_link);
            const RegionId to = net.region_of(next);
            if (from != to) {
                const ArcId arc = *net.arc_between(from, to);
                const bool gating = net.intersection(net.link(from_link).to_node).kind == IntersectionKind::gating;
                (gating ? obs.gating_crossings : obs.ng_crossings)[arc.index()] += 1.0;
                obs.crossings[arc.index()] += 1.0;
                obs.outflow[from.index()] += 1.0;
            }
            q.pop_front();
            --occupancy_[l];
            --space[target->index()];
            v.route.erase(v.route.begin());
            enter_link(v, next, *target);
            ++served;
        }
    }

    // 3. Admission from the entry queues, limited by space and the link's saturation flow.
    for (std::uint32_t o : origins_) {
        auto& eq = entry_[o];
        const Link& link = net.link(LinkId(o));
        double cap = 0.0;
        for (LaneId l : link.lanes) cap += net.lane(l).sat_flow_veh_per_s * dt;
        int allowance = static_cast<int>(std::floor(cap + 1e-9));
        while (allowance > 0 && !eq.empty()) {
            Vehicle& v = vehicles_[eq.front().index()];
            const LinkId after = v.route.size() > 1 ? v.route[1] : LinkId(std::numeric_limits<std::uint32_t>::max());
            std::optional<LaneId> target = pick_lane(link.lanes, after, space);
            if (!target) break;
            eq.pop_front();
            --entry_total_;
            --space[target->index()];
            v.in_network = true;
            enter_link(v, LinkId(o), *target);
            ++in_network_;
            obs.entries(net.region_of(LinkId(o)).index(), v.destination_region.index()) += 1.0;
            --allowance;
        }
    }

    time_s_ += dt;
    ++step_;
    for (std::size_t a = 0; a < obs.crossings.size(); ++a) {
        obs.crossings[a] /= dt;
        obs.gating_crossings[a] /= dt;
        obs.ng_crossings[a] /= dt;
    }
    obs.dt_s = dt;
    fill_stocks(obs);
    return obs;
}

int Simulator::projected_arrivals(LaneId l, double dt) const {
    int n = static_cast<int>(queue_[l.index()].size());
    for (VehicleId id : running_[l.index()]) {
        const Vehicle& v = vehicles_[id.index()];
        if (v.remaining_s <= dt + 1e-9 && v.route.size() > 1) ++n;
    }
    return n;
}

void Simulator::fill_stocks(MicroObservation& obs) const {
    const Network& net = *net_;
    const std::size_t regions = net.region_count();
    const std::size_t lanes = net.lanes().size();
    obs.step = step_;
    obs.time_s = time_s_;
    obs.queue.assign(lanes, 0);
    obs.occupancy.assign(lanes, 0);
    obs.arrivals.assign(lanes, 0);
    obs.accumulation.assign(regions, 0.0);
    obs.od_accumulation = RegionMatrix(regions);
    const double dt = obs.dt_s > 0.0 ? obs.dt_s : 0.0;
    for (std::size_t l = 0; l < lanes; ++l) {
        obs.queue[l] = static_cast<int>(queue_[l].size());
        obs.occupancy[l] = occupancy_[l];
        obs.arrivals[l] = projected_arrivals(LaneId(l), dt);
        const std::size_t i = net.region_of(net.lane(LaneId(l)).link).index();
        auto count = [&](VehicleId id) {
            obs.od_accumulation(i, vehicles_[id.index()].destination_region.index()) += 1.0;
        };
        for (VehicleId id : queue_[l]) count(id);
        for (VehicleId id : running_[l]) count(id);
        obs.accumulation[i] += static_cast<double>(occupancy_[l]);
    }
    obs.created = created();
    obs.exited = exited_;
    obs.in_network = in_network_;
    obs.entry_queue = entry_total_;
}

MicroObservation Simulator::observe() const {
    MicroObservation obs;
    const std::size_t arcs = net_->arcs().size();
    const std::size_t regions = net_->region_count();
    obs.crossings.assign(arcs, 0.0);
    obs.gating_crossings.assign(arcs, 0.0);
    obs.ng_crossings.assign(arcs, 0.0);
    obs.completions.assign(regions, 0.0);
    obs.outflow.assign(regions, 0.0);
    obs.entries = RegionMatrix(regions);
    fill_stocks(obs);
    return obs;
}

TypeCounts Simulator::classify_vehicles() const {
    const std::size_t regions = net_->region_count();
    TypeCounts tc{RegionMatrix(regions), RegionMatrix(regions), RegionMatrix(regions)};
    for (std::size_t l = 0; l < queue_.size(); ++l) {
        const RegionId i = net_->region_of(net_->lane(LaneId(l)).link);
        auto classify = [&](VehicleId id) {
            const Vehicle& v = vehicles_[id.index()];
            const std::size_t j = v.destination_region.index();
            if (v.route.size() == 1) tc.type2(i.index(), j) += 1.0;
            else if (v.queued && net_->region_of(v.route[1]) != i) tc.type1(i.index(), j) += 1.0;
            else tc.type3(i.index(), j) += 1.0;
        };
        for (VehicleId id : queue_[l]) classify(id);
        for (VehicleId id : running_[l]) classify(id);
    }
    return tc;
}

std::vector<VehicleId> Simulator::active_vehicles() const {
    std::vector<VehicleId> out;
    out.reserve(static_cast<std::size_t>(in_network_));
    for (std::size_t l = 0; l < queue_.size(); ++l) {
        out.insert(out.end(), queue_[l].begin(), queue_[l].end());
        out.insert(out.end(), running_[l].begin(), running_[l].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool Simulator::set_route(VehicleId id, std::vector<LinkId> route) {
    if (id.index() >= vehicles_.size()) return false;
    Vehicle& v = vehicles_[id.index()];
    if (v.exited || route.empty() || route.front() != v.current() || route.back() != v.destination) return false;
    for (std::size_t k = 1; k < route.size(); ++k) {
        auto succ = net_->successors(route[k - 1]);
        if (!std::binary_search(succ.begin(), succ.end(), route[k])) return false;
    }
    if (v.in_network && route.size() > 1 && !net_->lane_reaches(v.lane, route[1])) return false;
    v.route = std::move(route);
    return true;
}

void write_observation_header(std::ostream& out, const Network& net) {
    out << "step,time_s";
    for (const std::string& r : net.partition().names) out << ",N_" << r;
    for (const Arc& a : net.arcs()) {
        out << ",m_" << net.partition().names[a.from.index()] << '_' << net.partition().names[a.to.index()];
    }
    for (const Arc& a : net.arcs()) {
        out << ",ng_" << net.partition().names[a.from.index()] << '_' << net.partition().names[a.to.index()];
    }
    out << ",queued,in_network,entry_queue,created,exited\n";
}

void write_observation_row(std::ostream& out, const MicroObservation& obs) {
    out << obs.step << ',' << fmt::format("{}", obs.time_s);
    for (double n : obs.accumulation) out << ',' << fmt::format("{}", n);
    for (double m : obs.crossings) out << ',' << fmt::format("{}", m);
    for (double m : obs.ng_crossings) out << ',' << fmt::format("{}", m);
    long queued = 0;
    for (int q : obs.queue) queued += q;
    out << ',' << queued << ',' << obs.in_network << ',' << obs.entry_queue << ',' << obs.created << ',' << obs.exited
        << '\n';
}

}  // namespace msctl
