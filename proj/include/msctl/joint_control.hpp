#pragma once

#include <span>
#include <string>
#include <vector>

#include "msctl/macro_dynamics.hpp"

namespace msctl {

/// Flow bounds per arc (veh/s) and route-split bounds per (arc, destination),
/// flattened as arc * R + j like ControlVars::c.
struct ControlBounds {
    std::vector<double> m_min;
    std::vector<double> m_max;
    std::vector<double> c_min;
    std::vector<double> c_max;
};

struct ControlSolution {
    ControlVars vars;
    double z = 0.0;
    std::vector<double> m;                  // M_ih per arc, veh/s
    std::vector<double> predicted;          // N_i(t+1)
    double residual = 0.0;                  // worst flow-bound violation, veh/s
    bool feasible = true;
    std::string binding;                    // most violated constraint when infeasible
    std::size_t start = 0;                  // winning start index
};

struct SolverOptions {
    int starts = 8;
    std::uint64_t seed = 0x5eed;
    double min_accumulation = 1.0;  // regions below this are left ungated
};

/// Candidate next regions of one vehicle.
using NextRegions = std::vector<RegionId>;

/// Route-split bounds from the vehicles' candidate next-region sets. `sets`
/// is indexed by i * R + j and lists one entry per vehicle in region i bound
/// for region j. Vacuous pairs get (0, 1). Throws std::invalid_argument on a
/// vehicle with no candidate.
void route_bounds(const MacroTopology& topo, std::span<const std::vector<NextRegions>> sets, ControlBounds& bounds);

/// Default bounds: unrestricted flows and c in [0, 1].
ControlBounds open_bounds(const MacroTopology& topo);

/// Minimizes max_i(N_i(t+1) - N_i^crit) over b in [0,1] and c on its capped
/// simplices subject to the per-arc flow bounds; among minimizers prefers the
/// largest total boundary flow.
ControlSolution solve(const MacroTopology& topo, const MacroState& state, const MfdModel& mfd,
                      const ControlBounds& bounds, const SolverOptions& options = {});

/// M_ih from (b, c) through the regional transfer model.
std::vector<double> targets(const MacroTopology& topo, const ControlVars& vars, const MacroState& state,
                            const MfdModel& mfd);

/// Projection of v onto {lo <= x <= hi, sum x = 1}.
std::vector<double> project_capped_simplex(std::span<const double> v, std::span<const double> lo,
                                           std::span<const double> hi);

}  // namespace msctl
