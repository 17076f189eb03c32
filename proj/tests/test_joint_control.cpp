#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <doctest.h>

#include "msctl/joint_control.hpp"
#include "oracles.hpp"

using namespace msctl;
using namespace msctl::test;

namespace {

MacroTopology square_topology() {
    return MacroTopology({{RegionId(1), RegionId(2)}, {RegionId(0), RegionId(3)}, {RegionId(0), RegionId(3)},
                          {RegionId(1), RegionId(2)}});
}

// Projection oracle: bisection on the shift tau of clamp(v - tau, lo, hi).
std::vector<double> bisect_projection(const std::vector<double>& v, const std::vector<double>& lo,
                                      const std::vector<double>& hi) {
    auto at = [&](double tau) {
        std::vector<double> x(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) x[k] = std::clamp(v[k] - tau, lo[k], hi[k]);
        return x;
    };
    auto total = [&](double tau) {
        double s = 0.0;
        for (double x : at(tau)) s += x;
        return s;
    };
    double a = -1e3;
    double b = 1e3;
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        (total(m) > 1.0 ? a : b) = m;
    }
    return at(0.5 * (a + b));
}

}  // namespace

TEST_SUITE("jointctl") {

TEST_CASE("route bounds from candidate next regions") {
    const MacroTopology topo = square_topology();
    const std::size_t r = 4;
    const RegionId h(1);
    const RegionId h2(2);
    std::vector<std::vector<NextRegions>> sets(r * r);
    for (int k = 0; k < 6; ++k) sets[0 * r + 3].push_back({h});
    for (int k = 0; k < 3; ++k) sets[0 * r + 3].push_back({h, h2});
    sets[0 * r + 3].push_back({h2});
    for (int k = 0; k < 4; ++k) sets[1 * r + 2].push_back({RegionId(3)});

    ControlBounds b = open_bounds(topo);
    route_bounds(topo, sets, b);
    const std::size_t a01 = topo.arc(0, 1);
    const std::size_t a02 = topo.arc(0, 2);
    CHECK(b.c_max[a01 * r + 3] == doctest::Approx(0.9));
    CHECK(b.c_min[a01 * r + 3] == doctest::Approx(0.6));
    CHECK(b.c_max[a02 * r + 3] == doctest::Approx(0.4));
    CHECK(b.c_min[a02 * r + 3] == doctest::Approx(0.1));

    const std::size_t a13 = topo.arc(1, 3);
    CHECK(b.c_min[a13 * r + 2] == 1.0);
    CHECK(b.c_max[a13 * r + 2] == 1.0);

    // Vacuous pair.
    CHECK(b.c_min[a01 * r + 2] == 0.0);
    CHECK(b.c_max[a01 * r + 2] == 1.0);

    sets[2 * r + 1].push_back({});
    CHECK_THROWS_AS(route_bounds(topo, sets, b), std::invalid_argument);
}

TEST_CASE("capped simplex projection matches a bisection oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + trial % 5;
        std::vector<double> v(n);
        std::vector<double> lo(n);
        std::vector<double> hi(n);
        double slo = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            v[k] = val(rng);
            lo[k] = unit(rng) / static_cast<double>(n) * 0.9;
            hi[k] = lo[k] + unit(rng) * (1.0 - lo[k]);
            slo += lo[k];
        }
        double shi = 0.0;
        for (double x : hi) shi += x;
        if (shi < 1.0) {
            for (std::size_t k = 0; k < n; ++k) hi[k] = std::min(1.0, hi[k] + (1.0 - shi));
        }
        shi = 0.0;
        for (double x : hi) shi += x;
        if (slo > 1.0 || shi < 1.0) continue;
        const std::vector<double> got = project_capped_simplex(v, lo, hi);
        const std::vector<double> want = bisect_projection(v, lo, hi);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-9));
            CHECK(got[k] >= lo[k]);
            CHECK(got[k] <= hi[k]);
            sum += got[k];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("empty network gives the most negative margin") {
    const MacroTopology topo = pair_topology();
    MacroState s;
    s.n = RegionMatrix(2);
    s.q = RegionMatrix(2);
    const MfdModel mfd({MfdCurve{4.46e-3, -1.57e-6, 1.44e-10, 1000.0}, MfdCurve{4.46e-3, -1.57e-6, 1.44e-10, 2000.0}});
    const ControlSolution sol = solve(topo, s, mfd, open_bounds(topo));
    CHECK(sol.z == doctest::Approx(-1000.0));
    CHECK(sol.feasible);
}

TEST_CASE("overloaded region sends at its upper bound and receives at its lower bound") {
    PairInstance p{};
    p.n[0][0] = 500.0;
    p.n[0][1] = 1800.0;
    p.n[1][0] = 300.0;
    p.n[1][1] = 100.0;
    p.q[0] = p.q[1] = 0.0;
    p.curve[0] = MfdCurve{4.46e-3, -1.57e-6, 1.44e-10, 1946.0};
    p.curve[1] = MfdCurve{4.46e-3, -1.57e-6, 1.44e-10, 1946.0};
    p.b_lo[0] = 0.1;
    p.b_hi[0] = 0.8;
    p.b_lo[1] = 0.2;
    p.b_hi[1] = 0.9;
    const MacroTopology topo = pair_topology();
    const ControlSolution sol = solve(topo, p.state(), model_of(p), p.bounds(topo));
    REQUIRE(sol.feasible);
    CHECK(sol.m[topo.arc(0, 1)] == doctest::Approx(p.m_max(0)).epsilon(1e-6));
    CHECK(sol.m[topo.arc(1, 0)] == doctest::Approx(p.m_min(1)).epsilon(1e-6));
    CHECK(sol.z == doctest::Approx(p.grid_optimum()).epsilon(1e-6));
}

TEST_CASE("pinned route splits are returned exactly") {
    const MacroTopology topo = square_topology();
    const std::size_t r = 4;
    MacroState s;
    s.n = RegionMatrix(r);
    s.q = RegionMatrix(r);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) s.n(i, j) = 100.0 + 37.0 * static_cast<double>(i) + 11.0 * j;
    }
    const MfdModel mfd(std::vector<MfdCurve>(r, MfdCurve{4.46e-3, -1.57e-6, 1.44e-10, 600.0}));
    ControlBounds b = open_bounds(topo);
    const std::size_t a01 = topo.arc(0, 1);
    const std::size_t a02 = topo.arc(0, 2);
    b.c_min[a01 * r + 3] = b.c_max[a01 * r + 3] = 0.3;
    b.c_min[a02 * r + 3] = b.c_max[a02 * r + 3] = 0.7;
    const ControlSolution sol = solve(topo, s, mfd, b);
    CHECK(sol.vars.c[a01 * r + 3] == 0.3);
    CHECK(sol.vars.c[a02 * r + 3] == 0.7);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            if (j == i) continue;
            double sum = 0.0;
            for (std::size_t a : topo.out_arcs(i)) sum += sol.vars.c[a * r + j];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("unattainable flow bound is reported with the binding constraint") {
    PairInstance p{};
    p.n[0][0] = 200.0;
    p.n[0][1] = 200.0;
    p.n[1][0] = 200.0;
    p.n[1][1] = 200.0;
    p.curve[0] = p.curve[1] = MfdCurve{4.46e-3, -1.57e-6, 1.44e-10, 1946.0};
    p.b_lo[0] = p.b_lo[1] = 0.0;
    p.b_hi[0] = p.b_hi[1] = 1.0;
    const MacroTopology topo = pair_topology();
    ControlBounds b = p.bounds(topo);
    b.m_min[topo.arc(0, 1)] = 10.0 * p.m_max(0);
    b.m_max[topo.arc(0, 1)] = 20.0 * p.m_max(0);
    const ControlSolution sol = solve(topo, p.state(), model_of(p), b);
    CHECK_FALSE(sol.feasible);
    CHECK_FALSE(sol.binding.empty());
    CHECK(sol.vars.b[topo.arc(0, 1)] == doctest::Approx(1.0));
}

TEST_CASE("solver matches grid search on random two-region instances") {
    const MacroTopology topo = pair_topology();
    std::mt19937_64 rng(2024);
    double slowest = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        CAPTURE(trial);
        const PairInstance p = random_instance(rng);
        const MfdModel mfd = model_of(p);
        const auto t0 = std::chrono::steady_clock::now();
        const ControlSolution sol = solve(topo, p.state(), mfd, p.bounds(topo));
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

        const double grid = p.grid_optimum();
        CHECK(sol.feasible);
        CHECK(sol.residual <= 1e-6);
        CHECK(std::abs(sol.z - grid) <= 1e-3 * (1.0 + std::abs(grid)));

        const double b01 = sol.vars.b[topo.arc(0, 1)];
        const double b10 = sol.vars.b[topo.arc(1, 0)];
        CHECK(b01 >= 0.0);
        CHECK(b01 <= 1.0);
        CHECK(std::abs(sol.z - p.z(b01, b10)) <= 1e-9 * (1.0 + std::abs(sol.z)));

        const std::vector<double> m = targets(topo, sol.vars, p.state(), mfd);
        for (int i = 0; i < 2; ++i) {
            const std::size_t a = topo.arc(i, 1 - i);
            CHECK(m[a] == doctest::Approx(sol.m[a]).epsilon(1e-12));
            CHECK(m[a] >= p.m_min(i) - 1e-6);
            CHECK(m[a] <= p.m_max(i) + 1e-6);
        }

        const ControlSolution again = solve(topo, p.state(), mfd, p.bounds(topo));
        CHECK(again.z == sol.z);
    }
    CHECK(slowest < 1.0);
}

}  // TEST_SUITE
