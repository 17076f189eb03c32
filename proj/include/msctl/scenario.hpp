#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msctl/config.hpp"
#include "msctl/mfd.hpp"
#include "msctl/network.hpp"

namespace msctl {

// Text-level scenario document. Mirrors the YAML schema one-to-one so that
// emit(parse(text)) is lossless; see docs/scenario_format.md.

struct LaneDoc {
    std::string id;
    double sat_flow = 0.5;
    int capacity = 1;
    std::vector<std::string> outputs;
    friend bool operator==(const LaneDoc&, const LaneDoc&) = default;
};

struct LinkDoc {
    std::string id;
    std::string from;
    std::string to;
    double length = 0.0;
    double speed = 10.0;
    std::string region;
    std::vector<LaneDoc> lanes;
    friend bool operator==(const LinkDoc&, const LinkDoc&) = default;
};

struct PhaseDoc {
    std::string id;
    std::vector<std::string> lanes;
    friend bool operator==(const PhaseDoc&, const PhaseDoc&) = default;
};

struct IntersectionDoc {
    std::string id;  // node name
    std::string kind = "interior";
    std::vector<std::string> boundary;  // empty or two region ids
    double service_fraction = 1.0;
    std::vector<PhaseDoc> phases;
    friend bool operator==(const IntersectionDoc&, const IntersectionDoc&) = default;
};

struct PlanDoc {
    std::string id;
    std::vector<std::string> boundary;
    std::vector<std::pair<std::string, std::string>> phases;  // intersection -> phase id
    friend bool operator==(const PlanDoc&, const PlanDoc&) = default;
};

struct RegionDoc {
    std::string id;
    std::vector<std::string> neighbors;
    friend bool operator==(const RegionDoc&, const RegionDoc&) = default;
};

struct OdDoc {
    std::string origin;
    std::string destination;
    std::vector<RateBreakpoint> profile;
    friend bool operator==(const OdDoc&, const OdDoc&) = default;
};

struct DemandDoc {
    double horizon = 3600.0;
    double warmup = 200.0;
    std::uint64_t seed = 1;
    std::vector<OdDoc> od;
    friend bool operator==(const DemandDoc&, const DemandDoc&) = default;
};

struct MfdDoc {
    std::string region;
    MfdCurve curve;
    friend bool operator==(const MfdDoc&, const MfdDoc&) = default;
};

struct ScenarioDoc {
    std::string name;
    double interior_service_fraction = 0.5;  // nodes not listed under intersections
    ControlConfig control;
    std::vector<RegionDoc> regions;
    std::vector<LinkDoc> links;
    std::vector<IntersectionDoc> intersections;
    std::vector<PlanDoc> plans;
    DemandDoc demand;
    std::vector<MfdDoc> mfd;
    friend bool operator==(const ScenarioDoc&, const ScenarioDoc&) = default;
};

/// Validated, index-resolved scenario.
struct Scenario {
    std::string name;
    Network network;
    DemandScenario demand;
    ControlConfig control;
    std::optional<MfdModel> mfd;
};

/// Parses YAML text; ScenarioError(parse) carries the line and field.
ScenarioDoc parse_scenario(const std::string& text);
ScenarioDoc read_scenario_doc(const std::filesystem::path& path);

std::string emit_scenario(const ScenarioDoc& doc);
void write_scenario_doc(const ScenarioDoc& doc, const std::filesystem::path& path);

/// Resolves identifiers and validates invariants.
Scenario build_scenario(const ScenarioDoc& doc);

/// read_scenario_doc + build_scenario.
Scenario load_scenario(const std::filesystem::path& path);

/// Replaces the mfd section of `doc` with `model`, keyed by region order.
void set_mfd(ScenarioDoc& doc, const MfdModel& model);

}  // namespace msctl
