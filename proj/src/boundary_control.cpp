#include "msctl/boundary_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace msctl {

void BoundaryTracker::reset(double new_target, double ng0) {
    target = new_target;
    k = 1;
    observed.clear();
    ng_estimate = ng0;
}

void BoundaryTracker::record(double realized, double ng_observed) {
    observed.push_back(realized);
    ng_estimate = ng_observed;
    k = std::min(k + 1, u);
    if (static_cast<int>(observed.size()) >= u) k = u;
}

double expected_rate(const BoundaryTracker& tracker, bool* floored) {
    // Incremental form of (target * T - spent) / remaining time: a step that
    // realizes exactly the expected rate leaves it bit-for-bit unchanged.
    double rate = tracker.target;
    const std::size_t z_end = std::min(tracker.observed.size(), static_cast<std::size_t>(std::max(0, tracker.k - 1)));
    for (std::size_t z = 0; z < z_end; ++z) {
        const double remaining_steps = static_cast<double>(tracker.u - static_cast<int>(z) - 1);
        rate += (rate - tracker.observed[z]) / remaining_steps;
    }
    if (floored) *floored = rate < 0.0;
    return std::max(0.0, rate);
}

double lane_flow(const Network& net, LaneId lane, const MicroObservation& obs, double t_micro) {
    const Lane& l = net.lane(lane);
    double space = 0.0;
    if (!l.outputs.empty()) {
        for (LaneId o : l.outputs) {
            space += static_cast<double>(net.lane(o).capacity_veh - obs.occupancy[o.index()]);
        }
        space /= static_cast<double>(l.outputs.size());
    } else {
        space = std::numeric_limits<double>::infinity();
    }
    const double v = std::min({static_cast<double>(obs.arrivals[lane.index()]), l.sat_flow_veh_per_s * t_micro, space});
    return std::max(0.0, v);
}

double plan_flow(const Network& net, PlanId plan, ArcId arc, const MicroObservation& obs, double t_micro) {
    double total = 0.0;
    for (const PlanSetting& s : net.plan(plan).settings) {
        for (LaneId l : net.crossing_lanes(s.node, s.phase, arc)) total += lane_flow(net, l, obs, t_micro);
    }
    return total / t_micro;
}

double phase_pressure(const Network& net, NodeId node, std::size_t phase, const MicroObservation& obs) {
    double w = 0.0;
    for (LaneId l : net.intersection(node).phases[phase].lanes) {
        const Lane& lane = net.lane(l);
        double downstream = 0.0;
        if (!lane.outputs.empty()) {
            for (LaneId o : lane.outputs) downstream += static_cast<double>(obs.queue[o.index()]);
            downstream /= static_cast<double>(lane.outputs.size());
        }
        w += (static_cast<double>(obs.queue[l.index()]) - downstream) * lane.sat_flow_veh_per_s;
    }
    return w;
}

double plan_weight(const Network& net, PlanId plan, const MicroObservation& obs) {
    double w = 0.0;
    for (const PlanSetting& s : net.plan(plan).settings) w += phase_pressure(net, s.node, s.phase, obs);
    return w;
}

PlanId select_plan(std::span<const PlanId> candidates, std::span<const double> weights) {
    if (candidates.empty() || candidates.size() != weights.size()) {
        throw std::invalid_argument("select_plan: needs one weight per candidate and at least one candidate");
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        if (weights[k] > weights[best] || (weights[k] == weights[best] && candidates[k] < candidates[best])) best = k;
    }
    return candidates[best];
}

bool within_tolerance(double estimate, double ng, double expected, int u, int k, double sigma, double sigma_abs) {
    if (expected > 0.0) {
        return std::abs(estimate + ng - expected) / expected < static_cast<double>(u - k + 1) * sigma;
    }
    return estimate + ng < sigma_abs;
}

double relative_deviation(double estimate, double ng, double expected, double sigma_abs) {
    return std::abs(estimate + ng - expected) / std::max(expected, sigma_abs);
}

std::vector<std::pair<double, double>> flow_bounds(const Network& net, const MicroObservation& obs,
                                                   std::span<const double> ng0, double t_micro) {
    std::vector<std::pair<double, double>> out(net.arcs().size());
    for (std::size_t a = 0; a < net.arcs().size(); ++a) {
        const Boundary& b = net.boundary(net.arc(ArcId(a)).boundary);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (PlanId p : b.plans) {
            const double f = plan_flow(net, p, ArcId(a), obs, t_micro);
            lo = std::min(lo, f);
            hi = std::max(hi, f);
        }
        out[a] = {lo + ng0[a], hi + ng0[a]};
    }
    return out;
}

BoundaryController::BoundaryController(const Network& net, const ControlConfig& config)
    : net_(&net), config_(config), trackers_(net.arcs().size()) {
    for (BoundaryTracker& t : trackers_) {
        t.u = config.micro_steps_per_macro();
        t.t_micro = config.t_micro_s;
        t.sigma = config.sigma;
    }
}

void BoundaryController::begin_macro(std::span<const double> targets, const MicroObservation& last) {
    if (targets.size() != trackers_.size()) throw std::invalid_argument("begin_macro: one target per arc required");
    for (std::size_t a = 0; a < trackers_.size(); ++a) {
        const double ng0 = last.ng_crossings.empty() ? 0.0 : last.ng_crossings[a];
        trackers_[a].reset(targets[a], ng0);
    }
    active_ = true;
}

std::vector<BoundaryDecision> BoundaryController::decide(const MicroObservation& obs) {
    const Network& net = *net_;
    std::vector<BoundaryDecision> out;
    out.reserve(net.boundaries().size());
    for (std::size_t b = 0; b < net.boundaries().size(); ++b) {
        const Boundary& bd = net.boundary(BoundaryId(b));
        const ArcId fwd = *net.arc_between(bd.first, bd.second);
        const ArcId bwd = *net.arc_between(bd.second, bd.first);
        const BoundaryTracker& tf = trackers_[fwd.index()];
        const BoundaryTracker& tb = trackers_[bwd.index()];
        bool floored_f = false;
        bool floored_b = false;
        const double mf = expected_rate(tf, &floored_f);
        const double mb = expected_rate(tb, &floored_b);
        if (floored_f || floored_b) spdlog::debug("boundary {}: expected rate floored at step k={}", b, tf.k);

        std::vector<PlanId> feasible;
        std::vector<double> weights;
        std::vector<double> est_f(bd.plans.size());
        std::vector<double> est_b(bd.plans.size());
        for (std::size_t s = 0; s < bd.plans.size(); ++s) {
            const PlanId p = bd.plans[s];
            est_f[s] = plan_flow(net, p, fwd, obs, config_.t_micro_s);
            est_b[s] = plan_flow(net, p, bwd, obs, config_.t_micro_s);
            if (within_tolerance(est_f[s], tf.ng_estimate, mf, tf.u, tf.k, config_.sigma, config_.sigma_abs) &&
                within_tolerance(est_b[s], tb.ng_estimate, mb, tb.u, tb.k, config_.sigma, config_.sigma_abs)) {
                feasible.push_back(p);
                weights.push_back(plan_weight(net, p, obs));
            }
        }
        BoundaryDecision d;
        d.boundary = BoundaryId(b);
        d.feasible_count = feasible.size();
        d.expected_forward = mf;
        d.expected_backward = mb;
        std::size_t chosen = 0;
        if (!feasible.empty()) {
            d.plan = select_plan(feasible, weights);
            chosen = static_cast<std::size_t>(std::find(bd.plans.begin(), bd.plans.end(), d.plan) - bd.plans.begin());
        } else {
            d.fallback = true;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < bd.plans.size(); ++s) {
                const double dev = relative_deviation(est_f[s], tf.ng_estimate, mf, config_.sigma_abs) +
                                   relative_deviation(est_b[s], tb.ng_estimate, mb, config_.sigma_abs);
                if (dev < best) {
                    best = dev;
                    chosen = s;
                }
            }
            d.plan = bd.plans[chosen];
        }
        d.estimate_forward = est_f[chosen];
        d.estimate_backward = est_b[chosen];
        out.push_back(d);
    }
    return out;
}

void BoundaryController::record(const MicroObservation& realized) {
    for (std::size_t a = 0; a < trackers_.size(); ++a) {
        trackers_[a].record(realized.crossings[a], realized.ng_crossings[a]);
    }
}

std::vector<BoundaryDecision> max_pressure_decisions(const Network& net, const MicroObservation& obs) {
    std::vector<BoundaryDecision> out;
    for (std::size_t b = 0; b < net.boundaries().size(); ++b) {
        const Boundary& bd = net.boundary(BoundaryId(b));
        std::vector<double> weights;
        for (PlanId p : bd.plans) weights.push_back(plan_weight(net, p, obs));
        BoundaryDecision d;
        d.boundary = BoundaryId(b);
        d.plan = select_plan(bd.plans, weights);
        d.feasible_count = bd.plans.size();
        out.push_back(d);
    }
    return out;
}

SignalSettings round_robin(const Network& net, std::int64_t step) {
    SignalSettings s;
    for (const Boundary& b : net.boundaries()) {
        s.plans.push_back(b.plans[static_cast<std::size_t>(step) % b.plans.size()]);
    }
    return s;
}

SignalSettings to_signals(std::span<const BoundaryDecision> decisions) {
    SignalSettings s;
    s.plans.resize(decisions.size());
    for (const BoundaryDecision& d : decisions) s.plans.at(d.boundary.index()) = d.plan;
    return s;
}

void write_boundary_header(std::ostream& out) {
    out << "time_s,k,from,to,expected,plan,estimate,ng,realized,feasible_count,fallback\n";
}

void write_boundary_rows(std::ostream& out, const Network& net, double time_s, int k,
                         std::span<const BoundaryDecision> decisions, std::span<const double> ng_estimates,
                         const MicroObservation& realized) {
    const auto& names = net.partition().names;
    for (const BoundaryDecision& d : decisions) {
        const Boundary& bd = net.boundary(d.boundary);
        for (int dir = 0; dir < 2; ++dir) {
            const RegionId from = dir == 0 ? bd.first : bd.second;
            const RegionId to = dir == 0 ? bd.second : bd.first;
            const ArcId a = *net.arc_between(from, to);
            out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", time_s, k, names[from.index()], names[to.index()],
                               dir == 0 ? d.expected_forward : d.expected_backward, net.plan(d.plan).name,
                               dir == 0 ? d.estimate_forward : d.estimate_backward, ng_estimates[a.index()],
                               realized.crossings[a.index()], d.feasible_count, d.fallback ? 1 : 0);
        }
    }
}

}  // namespace msctl
