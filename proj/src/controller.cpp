#include "msctl/controller.hpp"

#include <chrono>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "msctl/rng.hpp"

namespace msctl {

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::msjc: return "msjc";
        case Strategy::mspc_lr: return "mspc-lr";
        case Strategy::bp_lr: return "bp-lr";
        case Strategy::mspc: return "mspc";
        case Strategy::bp: return "bp";
    }
    return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    for (Strategy s : kAllStrategies) {
        if (strategy_name(s) == name) return s;
    }
    return std::nullopt;
}

StrategyParts compose(Strategy s) {
    switch (s) {
        case Strategy::msjc: return {Perimeter::joint, Routing::qp};
        case Strategy::mspc_lr: return {Perimeter::pi, Routing::logit};
        case Strategy::bp_lr: return {Perimeter::max_pressure, Routing::logit};
        case Strategy::mspc: return {Perimeter::pi, Routing::none};
        case Strategy::bp: return {Perimeter::max_pressure, Routing::none};
    }
    throw std::invalid_argument("compose: unknown strategy");
}

Controller::Controller(const Network& net, const MfdModel& mfd, const ControlConfig& config, Strategy strategy,
                       std::uint64_t seed)
    : net_(&net),
      mfd_(mfd),
      config_(config),
      strategy_(strategy),
      parts_(compose(strategy)),
      topo_(MacroTopology::from_network(net)),
      boundary_(net, config),
      pi_(net, mfd, config.pi_kp, config.pi_ki),
      route_rng_(make_stream(seed, kRouteStream)),
      vars_(default_controls(topo_)),
      flow_sum_(net.arcs().size(), 0.0) {
    if (mfd.size() != net.region_count()) throw std::invalid_argument("Controller: MFD does not cover every region");
}

std::vector<double> Controller::ng_estimates() const {
    std::vector<double> out;
    for (const BoundaryTracker& t : boundary_.trackers()) out.push_back(t.ng_estimate);
    return out;
}

void Controller::macro_update(const Simulator& sim, const MicroObservation& last, const RegionMatrix& entries,
                              bool active) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t A = net_->arcs().size();
    macro_ = MacroRecord{};
    macro_.time_s = last.time_s;
    macro_.active = active;
    std::vector<double> previous_flow(A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
        if (flow_steps_ > 0) previous_flow[a] = flow_sum_[a] / flow_steps_;
    }
    std::fill(flow_sum_.begin(), flow_sum_.end(), 0.0);
    flow_steps_ = 0;

    if (!active || parts_.perimeter == Perimeter::max_pressure) {
        boundary_.deactivate();
        vars_ = default_controls(topo_);
        was_active_ = active;
        return;
    }

    const auto bounds = flow_bounds(*net_, last, last.ng_crossings, config_.t_micro_s);
    for (const auto& [lo, hi] : bounds) {
        macro_.m_min.push_back(lo);
        macro_.m_max.push_back(hi);
    }

    if (parts_.perimeter == Perimeter::pi) {
        if (!was_active_) {
            std::vector<double> seed(A);
            for (std::size_t a = 0; a < A; ++a) seed[a] = std::clamp(previous_flow[a], bounds[a].first, bounds[a].second);
            pi_.reset(seed);
        }
        macro_.target = pi_.update(last.accumulation, bounds);
    } else {
        MacroState state;
        state.t = static_cast<std::int64_t>(last.step);
        state.n = last.od_accumulation;
        state.q = config_.demand_forecast == DemandForecast::previous_step ? entries : RegionMatrix(topo_.regions());
        state.t_macro_s = config_.t_macro_s;

        ControlBounds cb = open_bounds(topo_);
        cb.m_min = macro_.m_min;
        cb.m_max = macro_.m_max;
        const std::size_t R = topo_.regions();
        std::vector<std::vector<NextRegions>> sets(R * R);
        const auto route_sets = generate_routes(sim, sim.link_travel_times(), config_.t_micro_s);
        for (const RouteSet& rs : route_sets) {
            for (const VehicleRoutes& v : rs.vehicles) {
                if (v.destination == v.region) continue;
                NextRegions next;
                for (const CandidateRoute& r : v.routes) next.push_back(r.next_region);
                sets[v.region.index() * R + v.destination.index()].push_back(std::move(next));
            }
        }
        route_bounds(topo_, sets, cb);
        const ControlSolution sol = solve(topo_, state, mfd_, cb, solver_);
        vars_ = sol.vars;
        macro_.target = sol.m;
        macro_.z = sol.z;
        macro_.solver_feasible = sol.feasible;
        if (!sol.feasible) spdlog::debug("t={} joint solve infeasible: {}", last.time_s, sol.binding);
    }
    boundary_.begin_macro(macro_.target, last);
    was_active_ = true;
    macro_.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
}

void Controller::route(Simulator& sim) {
    const auto route_sets = generate_routes(sim, sim.link_travel_times(), config_.t_micro_s);
    for (const RouteSet& rs : route_sets) {
        if (rs.vehicles.empty()) continue;
        std::vector<std::vector<double>> phi;
        if (parts_.routing == Routing::qp) {
            const RouteProbabilities probs = solve_probabilities(*net_, topo_, rs, vars_.c, config_.beta);
            if (routing_log_) write_routing_rows(*routing_log_, *net_, topo_, sim.time(), rs, probs, vars_.c);
            phi = probs.phi;
        } else {
            phi = logit_probabilities(rs, config_.logit_theta);
        }
        const auto choice = assign_routes(rs, phi, route_rng_);
        rerouted_ += apply_routes(sim, rs, choice);
    }
}

SignalSettings Controller::micro_update(Simulator& sim, const MicroObservation& obs) {
    if (macro_.active && parts_.routing != Routing::none) route(sim);
    if (boundary_.active()) {
        decisions_ = boundary_.decide(obs);
    } else {
        decisions_ = bp_control(*net_, obs);
    }
    return to_signals(decisions_);
}

void Controller::record(const MicroObservation& realized) {
    if (boundary_.active()) boundary_.record(realized);
    for (std::size_t a = 0; a < flow_sum_.size(); ++a) flow_sum_[a] += realized.crossings[a];
    ++flow_steps_;
}

}  // namespace msctl
