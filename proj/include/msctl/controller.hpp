#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "msctl/baselines.hpp"
#include "msctl/boundary_control.hpp"
#include "msctl/config.hpp"
#include "msctl/joint_control.hpp"
#include "msctl/route_control.hpp"

namespace msctl {

enum class Strategy { msjc, mspc_lr, bp_lr, mspc, bp };

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::msjc, Strategy::mspc_lr, Strategy::bp_lr,
                                                       Strategy::mspc, Strategy::bp};

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

enum class Perimeter { joint, pi, max_pressure };
enum class Routing { qp, logit, none };

struct StrategyParts {
    Perimeter perimeter;
    Routing routing;
};

StrategyParts compose(Strategy s);

/// Summary of the most recent macro update, one entry per arc.
struct MacroRecord {
    double time_s = 0.0;
    bool active = false;
    std::vector<double> target;  // M_ih, veh/s; empty under max pressure
    std::vector<double> m_min;
    std::vector<double> m_max;
    double z = 0.0;                // joint objective; zero for other strategies
    bool solver_feasible = true;
    double solve_ms = 0.0;         // wall time, never written to CSV
};

/// One strategy wired to the simulator on both time scales: macro_update at
/// the start of each macro step, then micro_update / record around every
/// micro step.
class Controller {
public:
    Controller(const Network& net, const MfdModel& mfd, const ControlConfig& config, Strategy strategy,
               std::uint64_t seed);

    [[nodiscard]] Strategy strategy() const { return strategy_; }

    /// `entries` is the regional demand forecast for the coming macro step.
    void macro_update(const Simulator& sim, const MicroObservation& last, const RegionMatrix& entries, bool active);

    /// Routes vehicles and returns the signal plans for the next micro step.
    SignalSettings micro_update(Simulator& sim, const MicroObservation& obs);

    void record(const MicroObservation& realized);

    [[nodiscard]] const MacroRecord& macro() const { return macro_; }
    [[nodiscard]] const std::vector<BoundaryDecision>& decisions() const { return decisions_; }
    [[nodiscard]] const BoundaryController& boundary() const { return boundary_; }
    [[nodiscard]] std::vector<double> ng_estimates() const;
    [[nodiscard]] int rerouted() const { return rerouted_; }

    /// Optional routing log; rows are written for the route-choice program only.
    void set_routing_log(std::ostream* out) { routing_log_ = out; }

private:
    void route(Simulator& sim);

    const Network* net_;
    MfdModel mfd_;
    ControlConfig config_;
    Strategy strategy_;
    StrategyParts parts_;
    MacroTopology topo_;
    BoundaryController boundary_;
    PiController pi_;
    SolverOptions solver_;
    std::mt19937_64 route_rng_;
    MacroRecord macro_;
    ControlVars vars_;
    std::vector<BoundaryDecision> decisions_;
    std::vector<double> flow_sum_;  // realized crossings summed over the current macro step
    int flow_steps_ = 0;
    bool was_active_ = false;
    int rerouted_ = 0;
    std::ostream* routing_log_ = nullptr;
};

}  // namespace msctl
