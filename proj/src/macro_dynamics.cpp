#include "msctl/macro_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace msctl {

MacroTopology::MacroTopology(std::vector<std::vector<RegionId>> neighbors) : neighbors_(std::move(neighbors)) {
    out_.assign(neighbors_.size(), {});
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
        std::sort(neighbors_[i].begin(), neighbors_[i].end());
        for (RegionId h : neighbors_[i]) {
            if (h.index() >= neighbors_.size() || h.index() == i) {
                throw std::invalid_argument(fmt::format("region {} has an invalid neighbor {}", i, h.index()));
            }
            arcs_.emplace_back(RegionId(i), h);
        }
    }
    for (std::size_t a = 0; a < arcs_.size(); ++a) out_[arcs_[a].first.index()].push_back(a);
}

MacroTopology MacroTopology::from_network(const Network& net) { return MacroTopology(net.partition().neighbors); }

std::size_t MacroTopology::arc(std::size_t i, std::size_t h) const {
    for (std::size_t a : out_[i]) {
        if (arcs_[a].second.index() == h) return a;
    }
    return npos;
}

double MacroState::accumulation(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n.n; ++j) s += n(i, j);
    return s;
}

double MacroState::total() const {
    double s = 0.0;
    for (double x : n.v) s += x;
    return s;
}

CompletionSplit completion_split(const MacroState& state, const MfdModel& mfd) {
    const std::size_t r = state.n.n;
    CompletionSplit out{RegionMatrix(r), std::vector<double>(r, 0.0)};
    for (std::size_t i = 0; i < r; ++i) {
        const double ni = state.accumulation(i);
        if (!(ni > 0.0)) continue;
        const double completed = mfd.evaluate(i, ni) * state.t_macro_s;
        for (std::size_t j = 0; j < r; ++j) {
            const double share = state.n(i, j) / ni * completed;
            if (j == i) out.type2[i] = share;
            else out.type1(i, j) = share;
        }
    }
    return out;
}

TransferEstimate transfers(const MacroTopology& topo, const MacroState& state, const MfdModel& mfd,
                           const ControlVars& vars) {
    const std::size_t r = topo.regions();
    if (state.n.n != r) throw std::invalid_argument("state and topology disagree on the region count");
    if (vars.b.size() != topo.arc_count() || vars.c.size() != topo.arc_count() * r) {
        throw std::invalid_argument("control vector sizes do not match the topology");
    }
    for (std::size_t a = 0; a < topo.arc_count(); ++a) {
        if (!(vars.b[a] >= 0.0 && vars.b[a] <= 1.0)) {
            throw std::invalid_argument(fmt::format("b[{}] = {} outside [0, 1]", a, vars.b[a]));
        }
    }
    for (std::size_t i = 0; i < r; ++i) {
        if (topo.out_arcs(i).empty()) continue;
        for (std::size_t j = 0; j < r; ++j) {
            if (j == i) continue;
            double sum = 0.0;
            for (std::size_t a : topo.out_arcs(i)) {
                const double c = vars.c_at(a, j, r);
                if (c < 0.0 || !std::isfinite(c)) {
                    throw std::invalid_argument(fmt::format("c[{}][{}] = {} is negative", a, j, c));
                }
                sum += c;
            }
            if (std::abs(sum - 1.0) > 1e-8) {
                throw std::invalid_argument(fmt::format("route split of region {} toward {} sums to {}", i, j, sum));
            }
        }
    }

    TransferEstimate est;
    est.split = completion_split(state, mfd);
    est.n_ihj.assign(topo.arc_count() * r, 0.0);
    est.m_ihj.assign(topo.arc_count() * r, 0.0);
    est.m_ih.assign(topo.arc_count(), 0.0);
    for (std::size_t a = 0; a < topo.arc_count(); ++a) {
        const std::size_t i = topo.arcs()[a].first.index();
        for (std::size_t j = 0; j < r; ++j) {
            if (j == i) continue;
            const double n = vars.b[a] * vars.c_at(a, j, r) * est.split.type1(i, j);
            est.n_ihj[a * r + j] = n;
            est.m_ihj[a * r + j] = n / state.t_macro_s;
            est.m_ih[a] += est.m_ihj[a * r + j];
        }
    }
    return est;
}

MacroStep step(const MacroTopology& topo, const MacroState& state, const MfdModel& mfd, const ControlVars& vars) {
    const std::size_t r = topo.regions();
    MacroStep out;
    out.transfers = transfers(topo, state, mfd, vars);
    const TransferEstimate& tr = out.transfers;
    MacroState& next = out.next;
    next.t = state.t + 1;
    next.t_macro_s = state.t_macro_s;
    next.n = state.n;
    next.q = RegionMatrix(r);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) next.n(i, j) += state.q.v.empty() ? 0.0 : state.q(i, j);
        next.n(i, i) -= tr.split.type2[i];
    }
    for (std::size_t a = 0; a < topo.arc_count(); ++a) {
        const std::size_t i = topo.arcs()[a].first.index();
        const std::size_t h = topo.arcs()[a].second.index();
        for (std::size_t j = 0; j < r; ++j) {
            if (j == i) continue;
            const double moved = tr.n_ihj[a * r + j];
            next.n(i, j) -= moved;
            next.n(h, j) += moved;  // j == h lands in N_hh
        }
    }
    for (std::size_t k = 0; k < next.n.v.size(); ++k) {
        if (next.n.v[k] < 0.0) {
            spdlog::debug("macro step {}: N[{}][{}] = {} clamped to 0", state.t, k / r, k % r, next.n.v[k]);
            next.n.v[k] = 0.0;
            ++out.clamp_events;
        }
    }
    return out;
}

ControlVars default_controls(const MacroTopology& topo) {
    const std::size_t r = topo.regions();
    ControlVars v{std::vector<double>(topo.arc_count(), 1.0), std::vector<double>(topo.arc_count() * r, 0.0)};
    for (std::size_t i = 0; i < r; ++i) {
        const auto& outs = topo.out_arcs(i);
        for (std::size_t j = 0; j < r; ++j) {
            if (j == i) continue;
            for (std::size_t a : outs) v.c_at(a, j, r) = 1.0 / static_cast<double>(outs.size());
        }
    }
    return v;
}

}  // namespace msctl
