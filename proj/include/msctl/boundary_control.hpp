#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "msctl/config.hpp"
#include "msctl/network.hpp"
#include "msctl/simulator.hpp"

namespace msctl {

/// Expected-flow bookkeeping for one ordered boundary within a macro step.
struct BoundaryTracker {
    double target = 0.0;    // M_ih(t), veh/s
    int u = 10;             // micro steps per macro step
    int k = 1;              // current micro step, 1-based
    double t_micro = 10.0;  // s
    std::vector<double> observed;  // realized m_ih(z), z < k
    double ng_estimate = 0.0;      // non-gating flow expected for step k
    double sigma = 0.1;

    [[nodiscard]] double t_macro() const { return t_micro * u; }

    /// Starts a macro step with a new target; `ng0` is the last observed non-gating flow.
    void reset(double new_target, double ng0);
    /// Appends the realized flow of step k and moves to k + 1.
    void record(double realized, double ng_observed);
};

/// Rate that spends the rest of the macro-step budget evenly over the
/// remaining micro steps, floored at zero.
/// `floored` is set when the floor was applied.
double expected_rate(const BoundaryTracker& tracker, bool* floored = nullptr);

/// Estimated flow over `arc` if plan `plan` is active for the next step, veh/s.
double plan_flow(const Network& net, PlanId plan, ArcId arc, const MicroObservation& obs, double t_micro);

/// Single-lane term of the plan-flow estimate, in vehicles.
double lane_flow(const Network& net, LaneId lane, const MicroObservation& obs, double t_micro);

/// Max-pressure weight of phase `phase` at `node`.
double phase_pressure(const Network& net, NodeId node, std::size_t phase, const MicroObservation& obs);

/// Sum of the phase weights of a plan.
double plan_weight(const Network& net, PlanId plan, const MicroObservation& obs);

/// Highest weight among `candidates`, lowest id on ties. `weights` is
/// parallel to `candidates`. Requires a nonempty candidate list.
PlanId select_plan(std::span<const PlanId> candidates, std::span<const double> weights);

/// Feasibility test for one direction.
bool within_tolerance(double estimate, double ng, double expected, int u, int k, double sigma, double sigma_abs);

/// Normalized deviation used by the fallback rule.
double relative_deviation(double estimate, double ng, double expected, double sigma_abs);

struct PlanEstimate {
    PlanId plan;
    double forward = 0.0;   // first -> second
    double backward = 0.0;  // second -> first
    double weight = 0.0;
};

/// Flow envelope (M_min, M_max) for each arc from the current estimates and
/// the last observed non-gating flow.
std::vector<std::pair<double, double>> flow_bounds(const Network& net, const MicroObservation& obs,
                                                   std::span<const double> ng0, double t_micro);

struct BoundaryDecision {
    BoundaryId boundary;
    PlanId plan;
    std::size_t feasible_count = 0;
    bool fallback = false;
    double expected_forward = 0.0;
    double expected_backward = 0.0;
    double estimate_forward = 0.0;
    double estimate_backward = 0.0;
};

/// Plan choice for every boundary, one decision per unordered region pair.
class BoundaryController {
public:
    BoundaryController(const Network& net, const ControlConfig& config);

    /// Sets new macro targets (veh/s per arc) and seeds the non-gating estimate
    /// from the last observation.
    void begin_macro(std::span<const double> targets, const MicroObservation& last);

    /// Chooses plans for the next micro step from the feasible sets.
    std::vector<BoundaryDecision> decide(const MicroObservation& obs);

    /// Records what the simulator realized in the step just taken.
    void record(const MicroObservation& realized);

    [[nodiscard]] const std::vector<BoundaryTracker>& trackers() const { return trackers_; }
    [[nodiscard]] bool active() const { return active_; }
    void deactivate() { active_ = false; }

private:
    const Network* net_;
    ControlConfig config_;
    std::vector<BoundaryTracker> trackers_;  // per arc
    bool active_ = false;
};

/// Pure max pressure over each boundary's full plan set.
std::vector<BoundaryDecision> max_pressure_decisions(const Network& net, const MicroObservation& obs);

/// Fixed-cycle rotation through each boundary's plans, one per step.
SignalSettings round_robin(const Network& net, std::int64_t step);

SignalSettings to_signals(std::span<const BoundaryDecision> decisions);

/// Per-step log, one row per arc: time_s, k, from, to, expected, plan,
/// estimate, ng, realized, feasible_count, fallback.
void write_boundary_header(std::ostream& out);
void write_boundary_rows(std::ostream& out, const Network& net, double time_s, int k,
                         std::span<const BoundaryDecision> decisions, std::span<const double> ng_estimates,
                         const MicroObservation& realized);

}  // namespace msctl
