#include <cmath>
#include <random>

#include <doctest.h>

#include "msctl/baselines.hpp"
#include "msctl/controller.hpp"
#include "support.hpp"

using namespace msctl;

TEST_SUITE("baselines") {

TEST_CASE("PI recurrence over a scripted accumulation trace") {
    constexpr double kp = 0.05;
    constexpr double ki = 0.01;
    const double setpoint = 100.0;
    // 0.5 - 0.05 * 4 - 0.01 * 2 = 0.28
    double m = pi_step(0.5, 102.0, 98.0, setpoint, kp, ki, 0.0, 2.0);
    CHECK(m == doctest::Approx(0.28));
    // 0.28 + 0.05 * 1 - 0.01 * 1 = 0.32
    m = pi_step(m, 101.0, 102.0, setpoint, kp, ki, 0.0, 2.0);
    CHECK(m == doctest::Approx(0.32));
    // 0.32 + 0.05 * 2 + 0.01 * 1 = 0.43
    m = pi_step(m, 99.0, 101.0, setpoint, kp, ki, 0.0, 2.0);
    CHECK(m == doctest::Approx(0.43));
}

TEST_CASE("PI output direction and clamp") {
    CHECK(pi_step(0.4, 100.0, 100.0, 100.0, 0.05, 0.01, 0.0, 1.0) == 0.4);
    CHECK(pi_step(0.4, 120.0, 120.0, 100.0, 0.05, 0.01, 0.0, 1.0) < 0.4);
    CHECK(pi_step(0.4, 80.0, 80.0, 100.0, 0.05, 0.01, 0.0, 1.0) > 0.4);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double lo = u(rng);
        const double hi = lo + u(rng);
        const double m = pi_step(10.0 * u(rng), 500.0 * u(rng), 500.0 * u(rng), 250.0, 0.05, 0.01, lo, hi);
        CHECK(m >= lo);
        CHECK(m <= hi);
    }
}

TEST_CASE("PI controller acts on the receiving region against its critical accumulation") {
    const Scenario s = test::two_region();
    const Network& net = s.network;
    const MfdModel mfd({MfdCurve{4e-3, -1e-6, 0.0, 100.0}, MfdCurve{4e-3, -1e-6, 0.0, 200.0}});
    PiController pi(net, mfd, 0.05, 0.01);
    const ArcId ab = *net.arc_between(RegionId(0), RegionId(1));
    const ArcId ba = *net.arc_between(RegionId(1), RegionId(0));
    pi.reset(std::vector<double>(2, 0.5));
    const std::vector<std::pair<double, double>> bounds(2, {0.0, 5.0});
    // First update has no previous accumulation: integral term only.
    std::vector<double> out = pi.update(std::vector<double>{150.0, 150.0}, bounds);
    CHECK(out[ab.index()] == doctest::Approx(0.5 - 0.01 * (150.0 - 200.0)));
    CHECK(out[ba.index()] == doctest::Approx(0.5 - 0.01 * (150.0 - 100.0)));
    out = pi.update(std::vector<double>{150.0, 160.0}, bounds);
    CHECK(out[ab.index()] == doctest::Approx(1.0 - 0.05 * 10.0 - 0.01 * (160.0 - 200.0)));
    CHECK_THROWS_AS(PiController(net, mfd, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("logit split") {
    const std::vector<double> phi = logit_choice(std::vector<double>{100.0, 200.0}, 0.01);
    CHECK(phi[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(phi[0] == doctest::Approx(0.731).epsilon(5e-4));
    CHECK(phi[1] == doctest::Approx(0.269).epsilon(5e-4));

    const std::vector<double> same = logit_choice(std::vector<double>{80.0, 80.0, 80.0}, 0.01);
    for (double p : same) CHECK(p == doctest::Approx(1.0 / 3.0));
    const std::vector<double> flat = logit_choice(std::vector<double>{10.0, 500.0}, 1e-12);
    CHECK(flat[0] == doctest::Approx(0.5));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> tt(0.0, 1000.0);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> t{tt(rng), tt(rng), tt(rng)};
        const std::vector<double> a = logit_choice(t, 0.01);
        for (double& x : t) x += 333.0;
        const std::vector<double> b = logit_choice(t, 0.01);
        double sum = 0.0;
        for (std::size_t r = 0; r < a.size(); ++r) {
            CHECK(a[r] == doctest::Approx(b[r]).epsilon(1e-12));
            sum += a[r];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(logit_choice(std::vector<double>{}, 0.01), std::invalid_argument);
}

TEST_CASE("strategies compose perimeter and routing parts") {
    CHECK(compose(Strategy::msjc).perimeter == Perimeter::joint);
    CHECK(compose(Strategy::msjc).routing == Routing::qp);
    CHECK(compose(Strategy::mspc_lr).perimeter == Perimeter::pi);
    CHECK(compose(Strategy::mspc_lr).routing == Routing::logit);
    CHECK(compose(Strategy::bp_lr).perimeter == Perimeter::max_pressure);
    CHECK(compose(Strategy::bp_lr).routing == Routing::logit);
    CHECK(compose(Strategy::mspc).perimeter == Perimeter::pi);
    CHECK(compose(Strategy::mspc).routing == Routing::none);
    CHECK(compose(Strategy::bp).perimeter == Perimeter::max_pressure);
    CHECK(compose(Strategy::bp).routing == Routing::none);
    for (Strategy st : kAllStrategies) CHECK(parse_strategy(strategy_name(st)) == st);
    CHECK_FALSE(parse_strategy("fixed-time").has_value());
}

}  // TEST_SUITE
