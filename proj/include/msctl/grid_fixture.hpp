#pragma once

#include <cstdint>

#include "msctl/scenario.hpp"

namespace msctl {

/// Synthetic network: region_rows x region_cols regions, each a block x block
/// grid of nodes joined by two-way links. Adjacent blocks meet at
/// one connector node per row (or column) of the shared edge; the outer two of
/// every three connectors are gating, the middle one is not.
struct GridOptions {
    std::string name = "grid";
    int region_rows = 2;
    int region_cols = 3;
    int block = 3;
    double link_length_m = 200.0;
    double connector_length_m = 100.0;
    double speed_mps = 4.0;
    double sat_flow = 0.5;
    double vehicle_spacing_m = 7.5;
    double interior_service = 0.5;
    double non_gating_service = 0.5;
    bool turn_lanes = true;  // one lane per outgoing movement instead of a shared lane

    double horizon_s = 3600.0;
    double warmup_s = 200.0;
    std::uint64_t seed = 1;
    double base_rate = 0.015;    // veh/s per OD pair outside the peak
    double peak_rate = 0.10;     // veh/s per OD pair during the peak
    double peak_start_s = 400.0;
    double peak_end_s = 2000.0;
    double hot_factor = 4.0;     // multiplier for trips bound to the hot regions
    std::vector<std::string> hot_regions{"r01"};
    double internal_factor = 1.0;  // multiplier for trips that stay in their region
    int spread = 4;                // origin/destination link pairs per OD pair
};

/// Scenario document for the grid; the mfd section is left empty.
ScenarioDoc grid_scenario(const GridOptions& options);

/// Two regions side by side with light symmetric demand.
GridOptions corridor_options();

/// The six-region end-to-end fixture.
GridOptions grid6_options();

}  // namespace msctl
