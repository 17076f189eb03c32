#include "msctl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msctl {

PiController::PiController(const Network& net, const MfdModel& mfd, double kp, double ki)
    : net_(&net), kp_(kp), ki_(ki) {
    if (kp < 0.0 || ki < 0.0) throw std::invalid_argument("PiController: gains must be non-negative");
    for (const Arc& a : net.arcs()) setpoint_.push_back(mfd.critical(a.to.index()));
    m_prev_.assign(net.arcs().size(), 0.0);
    n_prev_.assign(net.arcs().size(), 0.0);
}

void PiController::reset(std::span<const double> initial) {
    if (initial.size() != m_prev_.size()) throw std::invalid_argument("PiController::reset: one value per arc");
    m_prev_.assign(initial.begin(), initial.end());
    primed_ = false;
}

double pi_step(double m_prev, double n, double n_prev, double setpoint, double kp, double ki, double lo, double hi) {
    const double m = m_prev - kp * (n - n_prev) - ki * (n - setpoint);
    return std::clamp(m, lo, std::max(lo, hi));
}

std::vector<double> PiController::update(std::span<const double> accumulation,
                                         std::span<const std::pair<double, double>> bounds) {
    const auto& arcs = net_->arcs();
    if (bounds.size() != arcs.size()) throw std::invalid_argument("PiController::update: one bound per arc");
    for (std::size_t a = 0; a < arcs.size(); ++a) {
        const double n = accumulation[arcs[a].to.index()];
        const double n_prev = primed_ ? n_prev_[a] : n;
        m_prev_[a] = pi_step(m_prev_[a], n, n_prev, setpoint_[a], kp_, ki_, bounds[a].first, bounds[a].second);
        n_prev_[a] = n;
    }
    primed_ = true;
    return m_prev_;
}

std::vector<double> logit_choice(std::span<const double> travel_times, double theta) {
    if (travel_times.empty()) throw std::invalid_argument("logit_choice: empty route set");
    if (!(theta > 0.0)) throw std::invalid_argument("logit_choice: theta must be positive");
    const double best = *std::min_element(travel_times.begin(), travel_times.end());
    std::vector<double> phi(travel_times.size());
    double sum = 0.0;
    for (std::size_t r = 0; r < phi.size(); ++r) {
        phi[r] = std::exp(-theta * (travel_times[r] - best));
        sum += phi[r];
    }
    for (double& p : phi) p /= sum;
    return phi;
}

std::vector<std::vector<double>> logit_probabilities(const RouteSet& routes, double theta) {
    std::vector<std::vector<double>> phi;
    phi.reserve(routes.vehicles.size());
    std::vector<double> tt;
    for (const VehicleRoutes& v : routes.vehicles) {
        tt.clear();
        for (const CandidateRoute& r : v.routes) tt.push_back(r.cost);
        phi.push_back(logit_choice(tt, theta));
    }
    return phi;
}

std::vector<BoundaryDecision> bp_control(const Network& net, const MicroObservation& obs) {
    return max_pressure_decisions(net, obs);
}

}  // namespace msctl
