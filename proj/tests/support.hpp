#pragma once

#include <filesystem>
#include <string>

#include "msctl/scenario.hpp"

namespace msctl::test {

// Two regions meeting at one gating node g. a_in carries A -> B traffic up to
// the stop line, b_in carries B -> A; a_out and b_out are sinks.
inline const std::string kTwoRegionYaml = R"(name: two_region
interior_service_fraction: 1
control:
  t_macro: 100
  t_micro: 10
regions:
  - {id: A, neighbors: [B]}
  - {id: B, neighbors: [A]}
links:
  - id: a_in
    from: oa
    to: g
    length: 100
    speed: 10
    region: A
    lanes:
      - {id: a_in/0, sat_flow: 0.3, capacity: 20, outputs: [b_out/0]}
  - id: b_out
    from: g
    to: db
    length: 100
    speed: 10
    region: B
    lanes:
      - {id: b_out/0, sat_flow: 0.5, capacity: 10, outputs: []}
  - id: b_in
    from: ob
    to: g
    length: 100
    speed: 10
    region: B
    lanes:
      - {id: b_in/0, sat_flow: 0.5, capacity: 20, outputs: [a_out/0]}
  - id: a_out
    from: g
    to: da
    length: 100
    speed: 10
    region: A
    lanes:
      - {id: a_out/0, sat_flow: 0.5, capacity: 20, outputs: []}
intersections:
  - id: g
    kind: gating
    boundary: [A, B]
    phases:
      - {id: ab, lanes: [a_in/0]}
      - {id: ba, lanes: [b_in/0]}
plans:
  - {id: p_ab, boundary: [A, B], phases: {g: ab}}
  - {id: p_ba, boundary: [A, B], phases: {g: ba}}
demand:
  horizon: 600
  warmup: 0
  seed: 7
  od:
    - {origin: a_in, destination: b_out, profile: [[0, 0.2]]}
)";

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(MSCTL_FIXTURE_DIR) / name;
}

inline Scenario two_region() { return build_scenario(parse_scenario(kTwoRegionYaml)); }

}  // namespace msctl::test
