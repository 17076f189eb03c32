#include "msctl/route_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "msctl/paths.hpp"

namespace msctl {

namespace {

RegionId next_region_of(const Network& net, const std::vector<LinkId>& route, RegionId here) {
    for (LinkId l : route) {
        const RegionId r = net.region_of(l);
        if (r != here) return r;
    }
    return here;
}

LinkId projected_link(const Network& net, const Simulator& sim, const Vehicle& v, const std::vector<LinkId>& route,
                      double t_micro) {
    if (route.size() < 2 || v.queued || v.remaining_s > t_micro) return route.front();
    for (LaneId l : net.link(route.front()).lanes) {
        if (sim.lane_queue(l) > 0) return route.front();
    }
    return route[1];
}

double link_area(const Link& link) { return static_cast<double>(link.lane_count()) * link.length_m; }

/// Sparse linear model of the objective in the alternative-route shares t_v:
/// residual rows r = r0 + sum_v t_v * coef(v); objective = sum_rows weight * r^2.
struct LinearModel {
    std::vector<double> r0;
    std::vector<double> weight;
    std::vector<std::vector<std::pair<std::size_t, double>>> cols;  // per free vehicle
    std::vector<std::size_t> free_vehicles;                          // indices into the RouteSet
    std::size_t target_rows = 0;
};

struct RowIndex {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> group;  // (j, h) -> row
    std::map<std::uint32_t, std::size_t> link;                         // link -> row
};

LinearModel build_model(const Network& net, const MacroTopology& topo, const RouteSet& routes,
                        std::span<const double> c, double beta, RowIndex& rows, std::vector<double>& n_ij, double& mean_density) {
    const std::size_t R = topo.regions();
    const std::size_t i = routes.region.index();
    LinearModel m;
    n_ij.assign(R, 0.0);
    for (const VehicleRoutes& v : routes.vehicles) n_ij[v.destination.index()] += 1.0;

    for (std::size_t j = 0; j < R; ++j) {
        if (j == i || n_ij[j] == 0.0) continue;
        for (std::size_t a : topo.out_arcs(i)) {
            const std::size_t h = topo.arcs()[a].second.index();
            rows.group.emplace(std::pair(j, h), m.r0.size());
            m.r0.push_back(-c[a * R + j]);
            m.weight.push_back(beta);
        }
    }
    m.target_rows = m.r0.size();
    double area = 0.0;
    for (LinkId x : net.partition().links[i]) {
        rows.link.emplace(x.value, m.r0.size());
        area += link_area(net.link(x));
        m.r0.push_back(0.0);
        m.weight.push_back(1.0);
    }
    mean_density = area > 0.0 ? static_cast<double>(routes.vehicles.size()) / area : 0.0;
    for (std::size_t k = m.target_rows; k < m.r0.size(); ++k) m.r0[k] = -mean_density;

    auto contributions = [&](const VehicleRoutes& v, const CandidateRoute& r, double w,
                             std::vector<std::pair<std::size_t, double>>& out) {
        const std::size_t j = v.destination.index();
        if (j != i) {
            auto g = rows.group.find({j, r.next_region.index()});
            if (g != rows.group.end()) out.emplace_back(g->second, w / n_ij[j]);
        }
        if (net.region_of(r.end_link) == routes.region) {
            auto l = rows.link.find(r.end_link.value);
            if (l != rows.link.end()) out.emplace_back(l->second, w / link_area(net.link(r.end_link)));
        }
    };

    for (std::size_t vi = 0; vi < routes.vehicles.size(); ++vi) {
        const VehicleRoutes& v = routes.vehicles[vi];
        std::vector<std::pair<std::size_t, double>> base;
        contributions(v, v.routes[0], 1.0, base);
        for (auto [row, w] : base) m.r0[row] += w;
        if (v.routes.size() < 2) continue;
        // phi_0 = 1 - t, phi_1 = t
        std::vector<std::pair<std::size_t, double>> col;
        contributions(v, v.routes[0], -1.0, col);
        contributions(v, v.routes[1], 1.0, col);
        m.cols.push_back(std::move(col));
        m.free_vehicles.push_back(vi);
    }
    return m;
}

std::vector<double> residual(const LinearModel& m, const std::vector<double>& t) {
    std::vector<double> r = m.r0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        for (auto [row, w] : m.cols[k]) r[row] += w * t[k];
    }
    return r;
}

double objective(const LinearModel& m, const std::vector<double>& r, double* target_part) {
    double tgt = 0.0;
    double dens = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double v = m.weight[k] * r[k] * r[k];
        if (k < m.target_rows) tgt += v;
        else dens += v;
    }
    if (target_part) *target_part = tgt;
    return tgt + dens;
}

}  // namespace

std::vector<RouteSet> generate_routes(const Simulator& sim, std::span<const double> travel_times, double t_micro) {
    const Network& net = sim.network();
    std::vector<RouteSet> sets(net.region_count());
    for (std::size_t r = 0; r < sets.size(); ++r) sets[r].region = RegionId(r);
    std::map<std::uint32_t, PathTree> trees;
    for (VehicleId id : sim.active_vehicles()) {
        const Vehicle& v = sim.vehicle(id);
        const RegionId here = net.region_of(v.current());
        VehicleRoutes vr;
        vr.vehicle = id;
        vr.region = here;
        vr.destination = v.destination_region;
        CandidateRoute current;
        current.links = v.route;
        current.next_region = next_region_of(net, v.route, here);
        current.end_link = projected_link(net, sim, v, v.route, t_micro);
        current.cost = route_cost(v.route, travel_times);
        vr.routes.push_back(std::move(current));
        vr.fixed = v.route.size() <= 2;
        if (!vr.fixed) {
            auto it = trees.find(v.destination.value);
            if (it == trees.end()) it = trees.emplace(v.destination.value, PathTree(net, v.destination, travel_times)).first;
            const std::vector<LinkId> hops = net.lane_successors(v.lane);
            std::vector<LinkId> best = it->second.route_from(v.current(), hops);
            if (best.empty()) {
                vr.unreachable = true;
            } else if (best != v.route) {
                CandidateRoute alt;
                alt.next_region = next_region_of(net, best, here);
                alt.end_link = projected_link(net, sim, v, best, t_micro);
                alt.cost = route_cost(best, travel_times);
                alt.links = std::move(best);
                vr.routes.push_back(std::move(alt));
            }
        }
        sets[here.index()].vehicles.push_back(std::move(vr));
    }
    return sets;
}

void density_fields(const Network& net, const RouteSet& routes, const std::vector<std::vector<double>>& phi,
                    std::vector<double>& density, double& mean_density) {
    const auto& links = net.partition().links[routes.region.index()];
    density.assign(links.size(), 0.0);
    std::map<std::uint32_t, std::size_t> pos;
    double area = 0.0;
    for (std::size_t k = 0; k < links.size(); ++k) {
        pos.emplace(links[k].value, k);
        area += link_area(net.link(links[k]));
    }
    for (std::size_t vi = 0; vi < routes.vehicles.size(); ++vi) {
        const VehicleRoutes& v = routes.vehicles[vi];
        for (std::size_t r = 0; r < v.routes.size(); ++r) {
            auto it = pos.find(v.routes[r].end_link.value);
            if (it != pos.end()) density[it->second] += phi[vi][r];
        }
    }
    for (std::size_t k = 0; k < links.size(); ++k) density[k] /= link_area(net.link(links[k]));
    mean_density = area > 0.0 ? static_cast<double>(routes.vehicles.size()) / area : 0.0;
}

std::vector<std::vector<double>> uniform_probabilities(const RouteSet& routes) {
    std::vector<std::vector<double>> phi;
    phi.reserve(routes.vehicles.size());
    for (const VehicleRoutes& v : routes.vehicles) {
        phi.emplace_back(v.routes.size(), 1.0 / static_cast<double>(v.routes.size()));
    }
    return phi;
}

RouteProbabilities evaluate_probabilities(const Network& net, const MacroTopology& topo, const RouteSet& routes,
                                          std::span<const double> c, double beta,
                                          std::vector<std::vector<double>> phi) {
    RowIndex rows;
    std::vector<double> n_ij;
    RouteProbabilities out;
    LinearModel m = build_model(net, topo, routes, c, beta, rows, n_ij, out.mean_density);
    std::vector<double> t(m.free_vehicles.size());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = phi[m.free_vehicles[k]][1];
    const std::vector<double> r = residual(m, t);
    out.objective = objective(m, r, &out.target_term);
    out.density_term = out.objective - out.target_term;
    out.phi = std::move(phi);
    double mean = 0.0;
    density_fields(net, routes, out.phi, out.density, mean);
    return out;
}

RouteProbabilities solve_probabilities(const Network& net, const MacroTopology& topo, const RouteSet& routes,
                                       std::span<const double> c, double beta) {
    if (c.size() != topo.arc_count() * topo.regions()) throw std::invalid_argument("solve_probabilities: bad target size");
    for (const VehicleRoutes& v : routes.vehicles) {
        if (v.routes.empty()) throw std::invalid_argument("solve_probabilities: vehicle without routes");
    }
    RowIndex rows;
    std::vector<double> n_ij;
    double mean_density = 0.0;
    std::vector<std::vector<double>> phi = uniform_probabilities(routes);
    LinearModel m = build_model(net, topo, routes, c, beta, rows, n_ij, mean_density);

    const std::size_t n = m.free_vehicles.size();
    std::vector<double> t(n, 0.5);
    auto gradient = [&](const std::vector<double>& r, std::vector<double>& g) {
        g.assign(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            for (auto [row, w] : m.cols[k]) g[k] += 2.0 * m.weight[row] * r[row] * w;
        }
    };
    std::vector<double> r = residual(m, t);
    std::vector<double> g;
    gradient(r, g);
    std::vector<double> d(n);
    std::vector<double> t_prev;
    std::vector<double> g_prev;
    double step = 1.0;
    int it = 0;
    for (; it < 20000; ++it) {
        double stationarity = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            stationarity = std::max(stationarity, std::abs(std::clamp(t[k] - g[k], 0.0, 1.0) - t[k]));
        }
        if (stationarity <= 1e-9) break;
        for (std::size_t k = 0; k < n; ++k) d[k] = std::clamp(t[k] - step * g[k], 0.0, 1.0) - t[k];
        // Exact minimization of the quadratic along d, restricted to [0, 1].
        std::vector<double> wd(m.r0.size(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (d[k] == 0.0) continue;
            for (auto [row, w] : m.cols[k]) wd[row] += w * d[k];
        }
        double num = 0.0;
        double den = 0.0;
        for (std::size_t row = 0; row < wd.size(); ++row) {
            num += m.weight[row] * r[row] * wd[row];
            den += m.weight[row] * wd[row] * wd[row];
        }
        if (den <= 0.0) break;
        const double alpha = std::clamp(-num / den, 0.0, 1.0);
        if (alpha == 0.0) {
            step = 1.0;
            if (d == std::vector<double>(n, 0.0)) break;
        }
        t_prev = t;
        g_prev = g;
        for (std::size_t k = 0; k < n; ++k) t[k] = std::clamp(t[k] + alpha * d[k], 0.0, 1.0);
        r = residual(m, t);
        gradient(r, g);
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = t[k] - t_prev[k];
            ss += s * s;
            sy += s * (g[k] - g_prev[k]);
        }
        step = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e8) : 1.0;
        if (ss == 0.0) break;
    }
    for (std::size_t k = 0; k < n; ++k) {
        auto& p = phi[m.free_vehicles[k]];
        p[1] = t[k];
        p[0] = 1.0 - t[k];
    }
    for (std::size_t vi = 0; vi < routes.vehicles.size(); ++vi) {
        if (routes.vehicles[vi].routes.size() == 1) phi[vi] = {1.0};
    }
    RouteProbabilities out;
    out.objective = objective(m, r, &out.target_term);
    out.density_term = out.objective - out.target_term;
    out.iterations = it;
    out.phi = std::move(phi);
    density_fields(net, routes, out.phi, out.density, out.mean_density);
    return out;
}

std::vector<std::size_t> assign_routes(const RouteSet& routes, const std::vector<std::vector<double>>& phi,
                                       std::mt19937_64& rng) {
    std::vector<std::size_t> choice(routes.vehicles.size(), 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t vi = 0; vi < routes.vehicles.size(); ++vi) {
        const auto& p = phi[vi];
        if (p.size() < 2) continue;
        double u = unit(rng);
        std::size_t k = 0;
        while (k + 1 < p.size() && u >= p[k]) {
            u -= p[k];
            ++k;
        }
        choice[vi] = k;
    }
    return choice;
}

int apply_routes(Simulator& sim, const RouteSet& routes, std::span<const std::size_t> choice) {
    int changed = 0;
    for (std::size_t vi = 0; vi < routes.vehicles.size(); ++vi) {
        if (choice[vi] == 0) continue;
        const VehicleRoutes& v = routes.vehicles[vi];
        if (sim.set_route(v.vehicle, v.routes[choice[vi]].links)) ++changed;
    }
    return changed;
}

RegionMatrix realized_proportions(const MacroTopology& topo, const RouteSet& routes,
                                  const std::vector<std::vector<double>>& phi) {
    const std::size_t R = topo.regions();
    RegionMatrix out(R);
    std::vector<double> n(R, 0.0);
    for (std::size_t vi = 0; vi < routes.vehicles.size(); ++vi) {
        const VehicleRoutes& v = routes.vehicles[vi];
        n[v.destination.index()] += 1.0;
        for (std::size_t r = 0; r < v.routes.size(); ++r) {
            out(v.destination.index(), v.routes[r].next_region.index()) += phi[vi][r];
        }
    }
    for (std::size_t j = 0; j < R; ++j) {
        for (std::size_t h = 0; h < R; ++h) {
            if (n[j] > 0.0) out(j, h) /= n[j];
        }
    }
    return out;
}

void write_routing_header(std::ostream& out) {
    out << "time_s,region,destination,next,target,realized,target_term,density_term\n";
}

void write_routing_rows(std::ostream& out, const Network& net, const MacroTopology& topo, double time_s,
                        const RouteSet& routes, const RouteProbabilities& probs, std::span<const double> c) {
    const std::size_t R = topo.regions();
    const std::size_t i = routes.region.index();
    const RegionMatrix realized = realized_proportions(topo, routes, probs.phi);
    std::vector<bool> present(R, false);
    for (const VehicleRoutes& v : routes.vehicles) present[v.destination.index()] = true;
    const auto& names = net.partition().names;
    for (std::size_t j = 0; j < R; ++j) {
        if (j == i || !present[j]) continue;
        for (std::size_t a : topo.out_arcs(i)) {
            const std::size_t h = topo.arcs()[a].second.index();
            out << fmt::format("{},{},{},{},{},{},{},{}\n", time_s, names[i], names[j], names[h], c[a * R + j],
                               realized(j, h), probs.target_term, probs.density_term);
        }
    }
}

}  // namespace msctl
