#include "msctl/joint_control.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "msctl/rng.hpp"

namespace msctl {

std::vector<double> project_capped_simplex(std::span<const double> v, std::span<const double> lo,
                                           std::span<const double> hi) {
    const std::size_t n = v.size();
    std::vector<double> x(n);
    auto sum_at = [&](double tau) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += std::clamp(v[k] - tau, lo[k], hi[k]);
        return s;
    };
    // The sum of clamp(v - tau) is piecewise linear and nonincreasing in tau,
    // with kinks at v - hi and v - lo.
    std::vector<double> kinks;
    kinks.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        kinks.push_back(v[k] - hi[k]);
        kinks.push_back(v[k] - lo[k]);
    }
    std::sort(kinks.begin(), kinks.end());
    double tau = kinks.front();
    double s_prev = sum_at(kinks.front());
    if (s_prev > 1.0) {
        for (std::size_t m = 1; m < kinks.size(); ++m) {
            const double s = sum_at(kinks[m]);
            if (s <= 1.0) {
                tau = s_prev == s ? kinks[m] : kinks[m - 1] + (s_prev - 1.0) / (s_prev - s) * (kinks[m] - kinks[m - 1]);
                break;
            }
            s_prev = s;
            tau = kinks[m];
        }
    }
    for (std::size_t k = 0; k < n; ++k) x[k] = std::clamp(v[k] - tau, lo[k], hi[k]);
    return x;
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

/// Spectral projected gradient with a nonmonotone Armijo search.
void spg(Vec& x, const std::function<double(const Vec&, Vec&)>& f, const std::function<void(Vec&)>& project,
         double tol, int max_iter) {
    const std::size_t n = x.size();
    project(x);
    Vec g(n), gn(n), xn(n), d(n), p(n);
    double fx = f(x, g);
    std::deque<double> history{fx};
    auto pg_norm = [&]() {
        p = x;
        for (std::size_t k = 0; k < n; ++k) p[k] -= g[k];
        project(p);
        double m = 0.0;
        for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(p[k] - x[k]));
        return m;
    };
    double alpha = 1.0;
    {
        const double m = pg_norm();
        if (m > 0.0) alpha = std::clamp(1.0 / m, 1e-10, 1e10);
    }
    for (int it = 0; it < max_iter; ++it) {
        if (pg_norm() <= tol) break;
        for (std::size_t k = 0; k < n; ++k) d[k] = x[k] - alpha * g[k];
        project(d);
        for (std::size_t k = 0; k < n; ++k) d[k] -= x[k];
        const double gd = dot(g, d);
        if (gd >= 0.0) break;
        const double fmax = *std::max_element(history.begin(), history.end());
        double lambda = 1.0;
        double fn = 0.0;
        for (;;) {
            for (std::size_t k = 0; k < n; ++k) xn[k] = x[k] + lambda * d[k];
            fn = f(xn, gn);
            if (fn <= fmax + 1e-4 * lambda * gd || lambda < 1e-14) break;
            const double trial = -0.5 * gd * lambda * lambda / (fn - fx - lambda * gd);
            lambda = (trial >= 0.1 * lambda && trial <= 0.9 * lambda) ? trial : 0.5 * lambda;
        }
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = xn[k] - x[k];
            ss += s * s;
            sy += s * (gn[k] - g[k]);
        }
        x.swap(xn);
        g.swap(gn);
        fx = fn;
        history.push_back(fx);
        if (history.size() > 10) history.pop_front();
        alpha = sy <= 0.0 ? 1e10 : std::clamp(ss / sy, 1e-10, 1e10);
    }
}

/// Linearized program in the variables (y, c, z): y_a = b_a F_a(c) is the
/// vehicle count released over arc a, which turns the bilinear flow bounds
/// into linear constraints y_a <= F_a(c) with a box on y_a.
struct Program {
    explicit Program(const MacroTopology& t) : topo(t) {}

    const MacroTopology& topo;
    std::size_t R = 0;
    std::size_t A = 0;
    double scale = 1.0;     // veh per unit of the scaled variables
    double t_macro = 100.0;
    Vec base;               // (K_i - N_i^crit) / scale
    RegionMatrix type1;     // N^I_ij / scale
    std::vector<bool> guarded;
    std::vector<std::size_t> y_index;  // per arc, npos when guarded
    Vec y_lo, y_hi;                    // per free y variable, scaled
    std::vector<std::size_t> c_index;  // per arc * R + j, npos if absent
    struct Group {
        std::vector<std::size_t> vars;
        Vec lo, hi;
    };
    std::vector<Group> groups;
    std::size_t z_index = 0;
    std::size_t size = 0;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    [[nodiscard]] double flow_capacity(const Vec& x, std::size_t a) const {
        const std::size_t i = topo.arcs()[a].first.index();
        double f = 0.0;
        for (std::size_t j = 0; j < R; ++j) {
            if (j == i || c_index[a * R + j] == npos) continue;
            f += x[c_index[a * R + j]] * type1(i, j);
        }
        return f;
    }
    [[nodiscard]] double released(const Vec& x, std::size_t a) const {
        return guarded[a] ? flow_capacity(x, a) : x[y_index[a]];
    }
    // d released_a / dx, accumulated with weight w into grad
    void add_released_grad(std::size_t a, double w, Vec& grad) const {
        if (!guarded[a]) {
            grad[y_index[a]] += w;
            return;
        }
        add_capacity_grad(a, w, grad);
    }
    void add_capacity_grad(std::size_t a, double w, Vec& grad) const {
        const std::size_t i = topo.arcs()[a].first.index();
        for (std::size_t j = 0; j < R; ++j) {
            if (j == i || c_index[a * R + j] == npos) continue;
            grad[c_index[a * R + j]] += w * type1(i, j);
        }
    }
    [[nodiscard]] Vec deviations(const Vec& x) const {
        Vec g = base;
        for (std::size_t a = 0; a < A; ++a) {
            const double y = released(x, a);
            g[topo.arcs()[a].first.index()] -= y;
            g[topo.arcs()[a].second.index()] += y;
        }
        return g;
    }
    void project(Vec& x, bool freeze_z, double z_fixed) const {
        std::size_t k = 0;
        for (std::size_t a = 0; a < A; ++a) {
            if (guarded[a]) continue;
            x[y_index[a]] = std::clamp(x[y_index[a]], y_lo[k], y_hi[k]);
            ++k;
        }
        Vec v;
        for (const Group& grp : groups) {
            v.resize(grp.vars.size());
            for (std::size_t m = 0; m < grp.vars.size(); ++m) v[m] = x[grp.vars[m]];
            Vec p = project_capped_simplex(v, grp.lo, grp.hi);
            for (std::size_t m = 0; m < grp.vars.size(); ++m) x[grp.vars[m]] = p[m];
        }
        if (freeze_z) x[z_index] = z_fixed;
    }
};

struct Candidate {
    ControlSolution sol;
    double total_flow = 0.0;
};

}  // namespace

ControlBounds open_bounds(const MacroTopology& topo) {
    const std::size_t r = topo.regions();
    ControlBounds b;
    b.m_min.assign(topo.arc_count(), 0.0);
    b.m_max.assign(topo.arc_count(), std::numeric_limits<double>::infinity());
    b.c_min.assign(topo.arc_count() * r, 0.0);
    b.c_max.assign(topo.arc_count() * r, 1.0);
    return b;
}

void route_bounds(const MacroTopology& topo, std::span<const std::vector<NextRegions>> sets, ControlBounds& bounds) {
    const std::size_t r = topo.regions();
    if (sets.size() != r * r) throw std::invalid_argument("route_bounds: expected one vehicle list per region pair");
    bounds.c_min.assign(topo.arc_count() * r, 0.0);
    bounds.c_max.assign(topo.arc_count() * r, 1.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            if (j == i) continue;
            const auto& vehicles = sets[i * r + j];
            if (vehicles.empty()) continue;
            const double n = static_cast<double>(vehicles.size());
            for (std::size_t a : topo.out_arcs(i)) {
                const RegionId h = topo.arcs()[a].second;
                double any = 0.0;
                double only = 0.0;
                for (const NextRegions& cand : vehicles) {
                    if (cand.empty()) {
                        throw std::invalid_argument(
                            fmt::format("route_bounds: vehicle in region {} bound for {} has no candidate", i, j));
                    }
                    const bool has = std::find(cand.begin(), cand.end(), h) != cand.end();
                    if (has) {
                        any += 1.0;
                        if (std::all_of(cand.begin(), cand.end(), [&](RegionId x) { return x == h; })) only += 1.0;
                    }
                }
                bounds.c_min[a * r + j] = only / n;
                bounds.c_max[a * r + j] = any / n;
            }
        }
    }
}

std::vector<double> targets(const MacroTopology& topo, const ControlVars& vars, const MacroState& state,
                            const MfdModel& mfd) {
    return transfers(topo, state, mfd, vars).m_ih;
}

ControlSolution solve(const MacroTopology& topo, const MacroState& state, const MfdModel& mfd,
                      const ControlBounds& bounds, const SolverOptions& options) {
    const std::size_t R = topo.regions();
    const std::size_t A = topo.arc_count();
    if (mfd.size() != R) throw std::invalid_argument("solve: MFD model does not cover every region");
    if (bounds.m_min.size() != A || bounds.m_max.size() != A || bounds.c_min.size() != A * R ||
        bounds.c_max.size() != A * R) {
        throw std::invalid_argument("solve: bounds do not match the topology");
    }
    const double T = state.t_macro_s;
    std::string bounds_problem;

    Program prog(topo);
    prog.R = R;
    prog.A = A;
    prog.t_macro = T;
    const CompletionSplit split = completion_split(state, mfd);
    double mass = 1.0;
    for (double v : split.type1.v) mass = std::max(mass, v);
    for (std::size_t i = 0; i < R; ++i) mass = std::max(mass, state.accumulation(i));
    prog.scale = mass;
    prog.type1 = split.type1;
    for (double& v : prog.type1.v) v /= mass;
    prog.base.assign(R, 0.0);
    for (std::size_t i = 0; i < R; ++i) {
        double k = state.accumulation(i) - split.type2[i] - mfd.critical(i);
        for (std::size_t j = 0; j < R; ++j) k += state.q.v.empty() ? 0.0 : state.q(i, j);
        prog.base[i] = k / mass;
    }

    std::size_t next = 0;
    prog.guarded.assign(A, false);
    prog.y_index.assign(A, Program::npos);
    for (std::size_t a = 0; a < A; ++a) {
        const std::size_t i = topo.arcs()[a].first.index();
        if (state.accumulation(i) < options.min_accumulation) {
            prog.guarded[a] = true;
            continue;
        }
        double lo = std::max(0.0, bounds.m_min[a] * T);
        double hi = bounds.m_max[a] * T;
        if (hi < lo) {
            if (bounds_problem.empty()) {
                bounds_problem = fmt::format("arc {}->{}: M_min {} exceeds M_max {}", i, topo.arcs()[a].second.index(),
                                             bounds.m_min[a], bounds.m_max[a]);
            }
            hi = lo;
        }
        prog.y_index[a] = next++;
        prog.y_lo.push_back(lo / mass);
        prog.y_hi.push_back(std::min(hi / mass, 1e12));
    }
    prog.c_index.assign(A * R, Program::npos);
    for (std::size_t i = 0; i < R; ++i) {
        const auto& outs = topo.out_arcs(i);
        if (outs.empty()) continue;
        for (std::size_t j = 0; j < R; ++j) {
            if (j == i) continue;
            Program::Group grp;
            double slo = 0.0;
            double shi = 0.0;
            for (std::size_t a : outs) {
                const double lo = std::clamp(bounds.c_min[a * R + j], 0.0, 1.0);
                const double hi = std::clamp(bounds.c_max[a * R + j], lo, 1.0);
                grp.vars.push_back(next);
                prog.c_index[a * R + j] = next++;
                grp.lo.push_back(lo);
                grp.hi.push_back(hi);
                slo += lo;
                shi += hi;
            }
            if (slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12) {
                if (bounds_problem.empty()) {
                    bounds_problem = fmt::format("route split of region {} toward {}: bounds sum to [{}, {}]", i, j, slo, shi);
                }
                // Relax to the nearest consistent box so a point can still be returned.
                for (std::size_t m = 0; m < grp.lo.size(); ++m) {
                    if (slo > 1.0) grp.lo[m] /= slo;
                    if (shi < 1.0) grp.hi[m] = 1.0;
                }
            }
            prog.groups.push_back(std::move(grp));
        }
    }
    prog.z_index = next++;
    prog.size = next;

    const std::size_t n_free = prog.y_lo.size();
    // Constraints: R deviation rows, then one capacity row per free arc.
    auto constraints = [&](const Vec& x, bool phase1, double zcap, Vec& h) {
        h.resize(R + n_free);
        Vec g = prog.deviations(x);
        for (std::size_t i = 0; i < R; ++i) h[i] = g[i] - (phase1 ? x[prog.z_index] : zcap);
        std::size_t k = R;
        for (std::size_t a = 0; a < A; ++a) {
            if (prog.guarded[a]) continue;
            h[k++] = x[prog.y_index[a]] - prog.flow_capacity(x, a);
        }
    };
    auto constraint_grad = [&](std::size_t row, double w, bool phase1, Vec& grad) {
        if (row < R) {
            for (std::size_t a = 0; a < A; ++a) {
                if (topo.arcs()[a].first.index() == row) prog.add_released_grad(a, -w, grad);
                if (topo.arcs()[a].second.index() == row) prog.add_released_grad(a, w, grad);
            }
            if (phase1) grad[prog.z_index] -= w;
            return;
        }
        std::size_t k = R;
        for (std::size_t a = 0; a < A; ++a) {
            if (prog.guarded[a]) continue;
            if (k++ == row) {
                grad[prog.y_index[a]] += w;
                prog.add_capacity_grad(a, -w, grad);
                return;
            }
        }
    };

    auto run_al = [&](Vec& x, bool phase1, double zcap) {
        Vec lambda(R + n_free, 0.0);
        double rho = 10.0;
        double last_violation = std::numeric_limits<double>::infinity();
        Vec h;
        for (int outer = 0; outer < 60; ++outer) {
            auto f = [&](const Vec& xv, Vec& grad) {
                grad.assign(xv.size(), 0.0);
                double val = 0.0;
                if (phase1) {
                    val = xv[prog.z_index];
                    grad[prog.z_index] = 1.0;
                } else {
                    for (std::size_t a = 0; a < A; ++a) {
                        val -= prog.released(xv, a);
                        prog.add_released_grad(a, -1.0, grad);
                    }
                }
                Vec hv;
                constraints(xv, phase1, zcap, hv);
                for (std::size_t k = 0; k < hv.size(); ++k) {
                    const double p = std::max(0.0, lambda[k] + rho * hv[k]);
                    val += (p * p - lambda[k] * lambda[k]) / (2.0 * rho);
                    if (p > 0.0) constraint_grad(k, p, phase1, grad);
                }
                return val;
            };
            spg(
                x, f, [&](Vec& v) { prog.project(v, !phase1, 0.0); }, 1e-9, 1000);
            constraints(x, phase1, zcap, h);
            double violation = 0.0;
            for (std::size_t k = 0; k < h.size(); ++k) {
                violation = std::max(violation, std::max(h[k], -lambda[k] / rho));
                lambda[k] = std::max(0.0, lambda[k] + rho * h[k]);
            }
            if (violation <= 1e-11) break;
            if (violation > 0.25 * last_violation) rho = std::min(rho * 10.0, 1e9);
            last_violation = violation;
        }
    };

    // Turns a program point into (b, c), enforcing the flow bounds exactly for the chosen c.
    auto finish = [&](const Vec& x, std::size_t start) {
        Candidate cand;
        ControlSolution& sol = cand.sol;
        sol.start = start;
        sol.vars.b.assign(A, 1.0);
        sol.vars.c.assign(A * R, 0.0);
        for (std::size_t a = 0; a < A * R; ++a) {
            if (prog.c_index[a] != Program::npos) sol.vars.c[a] = x[prog.c_index[a]];
        }
        for (std::size_t a = 0; a < A; ++a) {
            if (prog.guarded[a]) continue;
            const double cap = prog.flow_capacity(x, a) * mass;
            const double want = x[prog.y_index[a]] * mass;
            double b = cap > 0.0 ? std::clamp(want / cap, 0.0, 1.0) : 1.0;
            if (cap > 0.0) {
                const double lo = std::max(0.0, bounds.m_min[a] * T / cap);
                const double hi = std::min(1.0, bounds.m_max[a] * T / cap);
                b = lo > hi ? std::min(1.0, lo) : std::clamp(b, lo, hi);
            }
            sol.vars.b[a] = b;
        }
        const MacroStep st = step(topo, state, mfd, sol.vars);
        sol.m = st.transfers.m_ih;
        sol.predicted.assign(R, 0.0);
        sol.z = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < R; ++i) {
            sol.predicted[i] = st.next.accumulation(i);
            sol.z = std::max(sol.z, sol.predicted[i] - mfd.critical(i));
        }
        sol.residual = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
            if (prog.guarded[a]) continue;
            const double v = std::max({0.0, bounds.m_min[a] - sol.m[a], sol.m[a] - bounds.m_max[a]});
            if (v > sol.residual) {
                sol.residual = v;
                sol.binding = fmt::format("flow bound of arc {}->{} violated by {} veh/s",
                                          topo.arcs()[a].first.index(), topo.arcs()[a].second.index(), v);
            }
        }
        sol.feasible = sol.residual <= 1e-6 && bounds_problem.empty();
        if (!bounds_problem.empty()) sol.binding = bounds_problem;
        else if (sol.feasible) sol.binding.clear();
        for (double m : sol.m) cand.total_flow += m;
        return cand;
    };

    auto start_point = [&](std::size_t s, std::mt19937_64& rng) {
        Vec x(prog.size, 0.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (const Program::Group& grp : prog.groups) {
            for (std::size_t m = 0; m < grp.vars.size(); ++m) {
                x[grp.vars[m]] = s < 2 ? 1.0 / static_cast<double>(grp.vars.size()) : unit(rng);
            }
        }
        prog.project(x, false, 0.0);
        std::size_t k = 0;
        for (std::size_t a = 0; a < A; ++a) {
            if (prog.guarded[a]) continue;
            const double cap = prog.flow_capacity(x, a);
            const double b = s == 0 ? 1.0 : s == 1 ? 0.0 : unit(rng);
            x[prog.y_index[a]] = std::clamp(b * cap, prog.y_lo[k], prog.y_hi[k]);
            ++k;
        }
        Vec g = prog.deviations(x);
        x[prog.z_index] = *std::max_element(g.begin(), g.end());
        return x;
    };

    std::mt19937_64 rng = make_stream(options.seed, 0);
    std::optional<Candidate> best;
    for (std::size_t s = 0; s < static_cast<std::size_t>(std::max(1, options.starts)); ++s) {
        Vec x = start_point(s, rng);
        run_al(x, true, 0.0);
        Candidate first = finish(x, s);
        Candidate chosen = first;
        if (first.sol.feasible) {
            const double zstar = first.sol.z;
            const double delta = 1e-7 * (1.0 + std::abs(zstar));
            Vec x2 = x;
            run_al(x2, false, (zstar + delta) / mass);
            Candidate second = finish(x2, s);
            if (second.sol.feasible && second.sol.z <= zstar + 1e-6 * (1.0 + std::abs(zstar)) &&
                second.total_flow > first.total_flow) {
                chosen = second;
            }
        }
        if (!best) {
            best = chosen;
            continue;
        }
        const ControlSolution& b = best->sol;
        const ControlSolution& c = chosen.sol;
        bool replace = false;
        if (c.feasible != b.feasible) {
            replace = c.feasible;
        } else if (!c.feasible) {
            replace = c.residual < b.residual - 1e-12;
        } else {
            const double tol = 1e-7 * (1.0 + std::abs(b.z));
            replace = c.z < b.z - tol || (std::abs(c.z - b.z) <= tol && chosen.total_flow > best->total_flow + 1e-12);
        }
        if (replace) best = chosen;
    }
    if (!best->sol.feasible) {
        spdlog::warn("joint control infeasible at macro step {}: {}", state.t, best->sol.binding);
    }
    return best->sol;
}

}  // namespace msctl
