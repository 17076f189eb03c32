#pragma once

#include <span>
#include <utility>
#include <vector>

#include "msctl/boundary_control.hpp"
#include "msctl/mfd.hpp"
#include "msctl/route_control.hpp"

namespace msctl {

/// Velocity-form PI gating, one loop per ordered boundary, acting on the
/// receiving region's accumulation error.
class PiController {
public:
    PiController(const Network& net, const MfdModel& mfd, double kp, double ki);

    /// Forgets the previous output and accumulation. `initial` seeds M_prev per arc.
    void reset(std::span<const double> initial);

    /// M_ih(t) per arc from the current accumulations and the flow envelope.
    std::vector<double> update(std::span<const double> accumulation,
                               std::span<const std::pair<double, double>> bounds);

    [[nodiscard]] double kp() const { return kp_; }
    [[nodiscard]] double ki() const { return ki_; }
    [[nodiscard]] const std::vector<double>& output() const { return m_prev_; }

private:
    const Network* net_;
    std::vector<double> setpoint_;  // N_h^crit per arc
    double kp_;
    double ki_;
    std::vector<double> m_prev_;
    std::vector<double> n_prev_;  // receiving accumulation at the previous update
    bool primed_ = false;
};

/// One PI step for a single loop: clamp(m_prev - kp (n - n_prev) - ki (n - setpoint), lo, hi).
double pi_step(double m_prev, double n, double n_prev, double setpoint, double kp, double ki, double lo, double hi);

/// Logit split over candidate travel times: phi_r proportional to exp(-theta tt_r).
std::vector<double> logit_choice(std::span<const double> travel_times, double theta);

/// Logit probabilities for every vehicle of a route set.
std::vector<std::vector<double>> logit_probabilities(const RouteSet& routes, double theta);

/// Max pressure over the full plan set of every boundary.
std::vector<BoundaryDecision> bp_control(const Network& net, const MicroObservation& obs);

}  // namespace msctl
