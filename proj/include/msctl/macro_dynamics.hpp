#pragma once

#include <cstdint>
#include <vector>

#include "msctl/mfd.hpp"
#include "msctl/network.hpp"
#include "msctl/simulator.hpp"

namespace msctl {

/// Region adjacency as a list of ordered arcs (i, h), sorted by (i, h).
class MacroTopology {
public:
    MacroTopology() = default;
    explicit MacroTopology(std::vector<std::vector<RegionId>> neighbors);
    static MacroTopology from_network(const Network& net);

    [[nodiscard]] std::size_t regions() const { return neighbors_.size(); }
    [[nodiscard]] std::size_t arc_count() const { return arcs_.size(); }
    [[nodiscard]] const std::vector<std::pair<RegionId, RegionId>>& arcs() const { return arcs_; }
    [[nodiscard]] const std::vector<RegionId>& neighbors(std::size_t i) const { return neighbors_[i]; }
    /// Indices of arcs leaving region i, ascending by receiving region.
    [[nodiscard]] const std::vector<std::size_t>& out_arcs(std::size_t i) const { return out_[i]; }
    /// Arc index of (i, h); npos if not adjacent.
    [[nodiscard]] std::size_t arc(std::size_t i, std::size_t h) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<std::vector<RegionId>> neighbors_;
    std::vector<std::pair<RegionId, RegionId>> arcs_;
    std::vector<std::vector<std::size_t>> out_;
};

struct MacroState {
    std::int64_t t = 0;
    RegionMatrix n;  // N_ij, diagonal holds N_ii
    RegionMatrix q;  // Q_ij, demand entering during the step
    double t_macro_s = 100.0;

    [[nodiscard]] double accumulation(std::size_t i) const;
    [[nodiscard]] double total() const;
};

/// Decision variables: b per arc, c per (arc, destination region) flattened as arc * R + j.
struct ControlVars {
    std::vector<double> b;
    std::vector<double> c;

    [[nodiscard]] double& c_at(std::size_t arc, std::size_t j, std::size_t regions) { return c[arc * regions + j]; }
    [[nodiscard]] double c_at(std::size_t arc, std::size_t j, std::size_t regions) const { return c[arc * regions + j]; }
};

struct CompletionSplit {
    RegionMatrix type1;         // N^I_ij, j != i
    std::vector<double> type2;  // N^II_i
};

struct TransferEstimate {
    CompletionSplit split;
    std::vector<double> n_ihj;  // arc * R + j
    std::vector<double> m_ihj;  // veh/s
    std::vector<double> m_ih;   // veh/s per arc
};

struct MacroStep {
    MacroState next;
    TransferEstimate transfers;
    int clamp_events = 0;
};

/// N^I_ij and N^II_i from the MFD completion flow, split by OD share.
CompletionSplit completion_split(const MacroState& state, const MfdModel& mfd);

/// Transfers N_ihj = b_ih c_ihj N^I_ij and the derived flow rates. Throws
/// std::invalid_argument when b leaves [0,1], c is negative, or c does not sum
/// to one over h for an (i, j) pair.
TransferEstimate transfers(const MacroTopology& topo, const MacroState& state, const MfdModel& mfd,
                           const ControlVars& vars);

/// One macro step of the regional dynamics. Negative stocks are clamped to
/// zero and counted in clamp_events.
MacroStep step(const MacroTopology& topo, const MacroState& state, const MfdModel& mfd, const ControlVars& vars);

/// c at one for the single neighbor case and uniform otherwise; b at one.
ControlVars default_controls(const MacroTopology& topo);

}  // namespace msctl
