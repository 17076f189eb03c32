#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "msctl/joint_control.hpp"
#include "msctl/mfd.hpp"
#include "msctl/route_control.hpp"

// Independent reference computations shared by the unit tests and the
// acceptance run.
namespace msctl::test {

inline constexpr MfdCurve kTruth{5e-3, -1e-6, -1e-10, 0.0};

// Positive root of the derivative 3 b3 N^2 + 2 b2 N + b1 = 0.
inline double stationary_point(const MfdCurve& c) {
    const double a = 3.0 * c.beta3;
    const double b = 2.0 * c.beta2;
    return (-b - std::sqrt(b * b - 4.0 * a * c.beta1)) / (2.0 * a);
}

inline std::vector<MfdSample> cubic_samples(const MfdCurve& c, int count, double max_n, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> n_draw(0.0, max_n);
    std::normal_distribution<double> eps(0.0, noise);
    std::vector<MfdSample> out;
    for (int k = 0; k < count; ++k) {
        const double n = n_draw(rng);
        const double g = c.raw(n) * (1.0 + eps(rng));
        out.push_back({0, n, std::max(0.0, g), static_cast<std::size_t>(k)});
    }
    return out;
}

inline MacroTopology pair_topology() { return MacroTopology({{RegionId(1)}, {RegionId(0)}}); }

// Two-region instance written out by hand: region i sends N^I_i = (N_ih / N_i) G_i T
// across its single boundary, so the next accumulations are linear in (b01, b10).
struct PairInstance {
    double n[2][2];  // N_ij
    double q[2];     // demand entering region i
    MfdCurve curve[2];
    double b_lo[2];
    double b_hi[2];

    [[nodiscard]] double g(int i) const {
        const double ni = n[i][0] + n[i][1];
        return std::max(0.0, curve[i].raw(ni));
    }
    [[nodiscard]] double type1(int i) const {
        const double ni = n[i][0] + n[i][1];
        return ni > 0.0 ? n[i][1 - i] / ni * g(i) * 100.0 : 0.0;
    }
    [[nodiscard]] double type2(int i) const {
        const double ni = n[i][0] + n[i][1];
        return ni > 0.0 ? n[i][i] / ni * g(i) * 100.0 : 0.0;
    }
    [[nodiscard]] double next(int i, double b_out, double b_in) const {
        return n[i][0] + n[i][1] + q[i] - type2(i) - b_out * type1(i) + b_in * type1(1 - i);
    }
    [[nodiscard]] double z(double b01, double b10) const {
        return std::max(next(0, b01, b10) - curve[0].n_crit, next(1, b10, b01) - curve[1].n_crit);
    }
    [[nodiscard]] double m_min(int i) const { return b_lo[i] * type1(i) / 100.0; }
    [[nodiscard]] double m_max(int i) const { return b_hi[i] * type1(i) / 100.0; }

    [[nodiscard]] MacroState state() const {
        MacroState s;
        s.n = RegionMatrix(2);
        s.q = RegionMatrix(2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) s.n(i, j) = n[i][j];
            s.q(i, i) = q[i];
        }
        return s;
    }
    [[nodiscard]] ControlBounds bounds(const MacroTopology& topo) const {
        ControlBounds b = open_bounds(topo);
        for (int i = 0; i < 2; ++i) {
            const std::size_t a = topo.arc(i, 1 - i);
            b.m_min[a] = m_min(i);
            b.m_max[a] = m_max(i);
        }
        return b;
    }

    // Exhaustive search over b on a 1e-3 lattice; the split is forced to one
    // with a single neighbor, so (b01, b10) is the whole decision.
    [[nodiscard]] double grid_optimum() const {
        double best = std::numeric_limits<double>::infinity();
        for (int x = 0; x <= 1000; ++x) {
            const double b01 = x * 1e-3;
            if (b01 < b_lo[0] - 1e-12 || b01 > b_hi[0] + 1e-12) continue;
            for (int y = 0; y <= 1000; ++y) {
                const double b10 = y * 1e-3;
                if (b10 < b_lo[1] - 1e-12 || b10 > b_hi[1] + 1e-12) continue;
                best = std::min(best, z(b01, b10));
            }
        }
        return best;
    }
};

inline PairInstance random_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> cell(50.0, 1200.0);
    std::uniform_real_distribution<double> demand(0.0, 150.0);
    std::uniform_real_distribution<double> crit(600.0, 2000.0);
    std::uniform_int_distribution<int> lo(0, 500);
    std::uniform_int_distribution<int> width(50, 500);
    PairInstance p{};
    for (int i = 0; i < 2; ++i) {
        p.n[i][0] = cell(rng);
        p.n[i][1] = cell(rng);
        p.q[i] = demand(rng);
        const double nc = crit(rng);
        // Cubic with a maximum at nc: G' = b1 + 2 b2 N + 3 b3 N^2 vanishes at nc.
        const double b1 = 4.5e-3;
        const double b3 = 1e-10;
        const double b2 = -(b1 + 3.0 * b3 * nc * nc) / (2.0 * nc);
        p.curve[i] = MfdCurve{b1, b2, b3, nc};
        const int l = lo(rng);
        p.b_lo[i] = l * 1e-3;
        p.b_hi[i] = std::min(1000, l + width(rng)) * 1e-3;
    }
    return p;
}

inline MfdModel model_of(const PairInstance& p) { return MfdModel({p.curve[0], p.curve[1]}); }

inline double link_area(const Link& l) { return static_cast<double>(l.lane_count()) * l.length_m; }

// Route-choice objective written directly from its definition.
inline double reference_objective(const Network& net, const MacroTopology& topo, const RouteSet& rs,
                           const std::vector<double>& c, double beta, const std::vector<std::vector<double>>& phi) {
    const std::size_t R = topo.regions();
    const std::size_t i = rs.region.index();
    std::vector<double> n_ij(R, 0.0);
    for (const VehicleRoutes& v : rs.vehicles) n_ij[v.destination.index()] += 1.0;
    double target = 0.0;
    for (std::size_t j = 0; j < R; ++j) {
        if (j == i || n_ij[j] == 0.0) continue;
        for (std::size_t a : topo.out_arcs(i)) {
            const RegionId h = topo.arcs()[a].second;
            double mass = 0.0;
            for (std::size_t v = 0; v < rs.vehicles.size(); ++v) {
                if (rs.vehicles[v].destination.index() != j) continue;
                for (std::size_t r = 0; r < rs.vehicles[v].routes.size(); ++r) {
                    if (rs.vehicles[v].routes[r].next_region == h) mass += phi[v][r];
                }
            }
            const double e = mass / n_ij[j] - c[a * R + j];
            target += e * e;
        }
    }
    double area = 0.0;
    for (LinkId x : net.partition().links[i]) area += link_area(net.link(x));
    const double mean = static_cast<double>(rs.vehicles.size()) / area;
    double spread = 0.0;
    for (LinkId x : net.partition().links[i]) {
        double mass = 0.0;
        for (std::size_t v = 0; v < rs.vehicles.size(); ++v) {
            for (std::size_t r = 0; r < rs.vehicles[v].routes.size(); ++r) {
                if (rs.vehicles[v].routes[r].end_link == x) mass += phi[v][r];
            }
        }
        const double d = mass / link_area(net.link(x)) - mean;
        spread += d * d;
    }
    return beta * target + spread;
}

struct GridResult {
    double coarse = 0.0;  // best value on the 1e-3 lattice
    double fine = 0.0;    // best value after refining to 1e-5 around the coarse argmin
};

// Minimum of the reference objective over the alternative-route weight of
// every two-route vehicle. A 1e-3 lattice alone sits up to beta * 2.5e-7 above
// the true minimum per vehicle, so the best cell is searched again at 1e-5.
inline GridResult grid_minimum(const Network& net, const MacroTopology& topo, const RouteSet& rs,
                               const std::vector<double>& c, double beta) {
    std::vector<std::vector<double>> phi;
    std::vector<std::size_t> free;
    for (std::size_t v = 0; v < rs.vehicles.size(); ++v) {
        phi.push_back(std::vector<double>(rs.vehicles[v].routes.size(), 0.0));
        phi.back()[0] = 1.0;
        if (rs.vehicles[v].routes.size() == 2) free.push_back(v);
    }
    auto search = [&](double lo1, double lo2, double step, int n) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<double, double> at{0.0, 0.0};
        const int n1 = free.size() > 0 ? n : 0;
        const int n2 = free.size() > 1 ? n : 0;
        for (int x = 0; x <= n1; ++x) {
            const double t1 = std::clamp(lo1 + x * step, 0.0, 1.0);
            if (!free.empty()) phi[free[0]] = {1.0 - t1, t1};
            for (int y = 0; y <= n2; ++y) {
                const double t2 = std::clamp(lo2 + y * step, 0.0, 1.0);
                if (free.size() > 1) phi[free[1]] = {1.0 - t2, t2};
                const double f = reference_objective(net, topo, rs, c, beta, phi);
                if (f < best) {
                    best = f;
                    at = {t1, t2};
                }
            }
        }
        return std::make_pair(best, at);
    };
    const auto [coarse, at] = search(0.0, 0.0, 1e-3, 1000);
    const auto fine = search(at.first - 2e-3, at.second - 2e-3, 1e-5, 400).first;
    return {coarse, std::min(coarse, fine)};
}

inline CandidateRoute candidate(RegionId next, LinkId end) {
    CandidateRoute r;
    r.next_region = next;
    r.end_link = end;
    return r;
}

// Uniform split targets for every region pair.
inline std::vector<double> uniform_targets(const MacroTopology& topo) {
    const std::size_t R = topo.regions();
    std::vector<double> c(topo.arc_count() * R, 0.0);
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t a : topo.out_arcs(i)) {
            for (std::size_t j = 0; j < R; ++j) c[a * R + j] = 1.0 / static_cast<double>(topo.out_arcs(i).size());
        }
    }
    return c;
}

}  // namespace msctl::test
