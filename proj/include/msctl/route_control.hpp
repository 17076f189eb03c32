#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "msctl/macro_dynamics.hpp"
#include "msctl/simulator.hpp"

namespace msctl {

struct CandidateRoute {
    std::vector<LinkId> links;  // starts at the vehicle's current link
    RegionId next_region;       // first region after the current one; the current region for internal trips
    LinkId end_link;            // link the vehicle is expected to occupy after one micro step
    double cost = 0.0;          // travel time over links[1..], s
};

struct VehicleRoutes {
    VehicleId vehicle;
    RegionId region;       // i
    RegionId destination;  // j
    std::vector<CandidateRoute> routes;  // [0] is the current route; at most two entries
    bool fixed = false;        // within one link of the destination
    bool unreachable = false;  // no shortest route could be found
};

/// Candidate routes of every vehicle inside one region.
struct RouteSet {
    RegionId region;
    std::vector<VehicleRoutes> vehicles;
};

/// Current plus instantaneous shortest route for each vehicle in the network,
/// grouped by region. `travel_times` holds current per-link times.
std::vector<RouteSet> generate_routes(const Simulator& sim, std::span<const double> travel_times, double t_micro);

struct RouteProbabilities {
    std::vector<std::vector<double>> phi;  // per vehicle in the RouteSet, per route
    std::vector<double> density;           // d_x per link of the region, veh/m/lane
    double mean_density = 0.0;             // d_bar
    double target_term = 0.0;              // weighted proportion mismatch
    double density_term = 0.0;
    double objective = 0.0;
    int iterations = 0;
};

/// Route-choice program of one region: match the split targets `c`
/// (indexed arc * R + j) while evening out link densities.
RouteProbabilities solve_probabilities(const Network& net, const MacroTopology& topo, const RouteSet& routes,
                                       std::span<const double> c, double beta);

/// Objective of the route-choice program at a given phi, with the same terms
/// reported by solve_probabilities.
RouteProbabilities evaluate_probabilities(const Network& net, const MacroTopology& topo, const RouteSet& routes,
                                          std::span<const double> c, double beta,
                                          std::vector<std::vector<double>> phi);

/// Link densities implied by phi, and the regional mean from the accumulation.
void density_fields(const Network& net, const RouteSet& routes, const std::vector<std::vector<double>>& phi,
                    std::vector<double>& density, double& mean_density);

/// Uniform phi over each vehicle's candidates.
std::vector<std::vector<double>> uniform_probabilities(const RouteSet& routes);

/// Samples one route per vehicle from phi.
std::vector<std::size_t> assign_routes(const RouteSet& routes, const std::vector<std::vector<double>>& phi,
                                       std::mt19937_64& rng);

/// Commits the sampled routes to the simulator; returns how many changed.
int apply_routes(Simulator& sim, const RouteSet& routes, std::span<const std::size_t> choice);

/// Per (j, h) realized proportion sum(phi over routes heading to h) / N_ij.
RegionMatrix realized_proportions(const MacroTopology& topo, const RouteSet& routes,
                                  const std::vector<std::vector<double>>& phi);

/// Routing log: time_s, region, destination, next, target, realized,
/// target_term, density_term.
void write_routing_header(std::ostream& out);
void write_routing_rows(std::ostream& out, const Network& net, const MacroTopology& topo, double time_s,
                        const RouteSet& routes, const RouteProbabilities& probs, std::span<const double> c);

}  // namespace msctl
