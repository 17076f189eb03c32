#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "msctl/scenario.hpp"

namespace msctl {

namespace {

[[noreturn]] void parse_error(const YAML::Node& node, const std::string& field, const std::string& what) {
    const auto mark = node.Mark();
    if (mark.line >= 0) {
        throw ScenarioError(ScenarioError::Kind::parse, fmt::format("line {}: field '{}': {}", mark.line + 1, field, what));
    }
    throw ScenarioError(ScenarioError::Kind::parse, fmt::format("field '{}': {}", field, what));
}

[[noreturn]] void dangling(const std::string& what) {
    throw ScenarioError(ScenarioError::Kind::dangling_identifier, what);
}

[[noreturn]] void invalid(const std::string& what) { throw ScenarioError(ScenarioError::Kind::invariant, what); }

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
    if (!node || !node.IsScalar()) parse_error(node, field, "expected a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        parse_error(node, field, fmt::format("cannot read '{}'", node.Scalar()));
    }
}

template <class T>
T required(const YAML::Node& parent, const char* key, const std::string& path) {
    const YAML::Node node = parent[key];
    if (!node) parse_error(parent, path + "." + key, "missing");
    return scalar<T>(node, path + "." + key);
}

template <class T>
T optional_value(const YAML::Node& parent, const char* key, const std::string& path, T fallback) {
    const YAML::Node node = parent[key];
    if (!node) return fallback;
    return scalar<T>(node, path + "." + key);
}

std::vector<std::string> string_list(const YAML::Node& parent, const char* key, const std::string& path) {
    std::vector<std::string> out;
    const YAML::Node node = parent[key];
    if (!node) return out;
    if (!node.IsSequence()) parse_error(node, path + "." + key, "expected a list");
    for (std::size_t i = 0; i < node.size(); ++i) {
        out.push_back(scalar<std::string>(node[i], fmt::format("{}.{}[{}]", path, key, i)));
    }
    return out;
}

YAML::Node sequence(const YAML::Node& parent, const char* key, const std::string& path, bool needed) {
    const YAML::Node node = parent[key];
    if (!node) {
        if (needed) parse_error(parent, path + key, "missing");
        return node;
    }
    if (!node.IsSequence()) parse_error(node, path + key, "expected a list");
    return node;
}

DemandForecast parse_forecast(const YAML::Node& node, const std::string& field) {
    const auto s = scalar<std::string>(node, field);
    if (s == "previous_step") return DemandForecast::previous_step;
    if (s == "none") return DemandForecast::none;
    parse_error(node, field, fmt::format("unknown forecast '{}'", s));
}

CompletionProxy parse_proxy(const YAML::Node& node, const std::string& field) {
    const auto s = scalar<std::string>(node, field);
    if (s == "outflow_plus_completions") return CompletionProxy::outflow_plus_completions;
    if (s == "outflow_only") return CompletionProxy::outflow_only;
    parse_error(node, field, fmt::format("unknown completion proxy '{}'", s));
}

const char* forecast_name(DemandForecast f) { return f == DemandForecast::previous_step ? "previous_step" : "none"; }

const char* proxy_name(CompletionProxy p) {
    return p == CompletionProxy::outflow_plus_completions ? "outflow_plus_completions" : "outflow_only";
}

ControlConfig parse_control(const YAML::Node& node) {
    ControlConfig c;
    if (!node) return c;
    if (!node.IsMap()) parse_error(node, "control", "expected a mapping");
    const std::string p = "control";
    c.t_macro_s = optional_value(node, "t_macro", p, c.t_macro_s);
    c.t_micro_s = optional_value(node, "t_micro", p, c.t_micro_s);
    c.activation_threshold = optional_value(node, "activation_threshold", p, c.activation_threshold);
    c.sigma = optional_value(node, "sigma", p, c.sigma);
    c.sigma_abs = optional_value(node, "sigma_abs", p, c.sigma_abs);
    c.beta = optional_value(node, "beta", p, c.beta);
    c.logit_theta = optional_value(node, "logit_theta", p, c.logit_theta);
    c.pi_kp = optional_value(node, "pi_kp", p, c.pi_kp);
    c.pi_ki = optional_value(node, "pi_ki", p, c.pi_ki);
    c.cap_factor = optional_value(node, "cap_factor", p, c.cap_factor);
    c.mfd_window_s = optional_value(node, "mfd_window", p, c.mfd_window_s);
    if (node["demand_forecast"]) c.demand_forecast = parse_forecast(node["demand_forecast"], p + ".demand_forecast");
    if (node["completion_proxy"]) c.completion_proxy = parse_proxy(node["completion_proxy"], p + ".completion_proxy");
    return c;
}

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

ScenarioDoc parse_scenario(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ScenarioError(ScenarioError::Kind::parse, fmt::format("line {}: {}", e.mark.line + 1, e.msg));
    }
    if (!root.IsMap()) throw ScenarioError(ScenarioError::Kind::parse, "scenario root must be a mapping");

    ScenarioDoc doc;
    doc.name = optional_value<std::string>(root, "name", "", "scenario");
    doc.interior_service_fraction =
        optional_value(root, "interior_service_fraction", "", doc.interior_service_fraction);
    doc.control = parse_control(root["control"]);

    const YAML::Node regions = sequence(root, "regions", "", true);
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const std::string p = fmt::format("regions[{}]", i);
        RegionDoc r;
        r.id = required<std::string>(regions[i], "id", p);
        r.neighbors = string_list(regions[i], "neighbors", p);
        doc.regions.push_back(std::move(r));
    }

    const YAML::Node links = sequence(root, "links", "", true);
    for (std::size_t i = 0; i < links.size(); ++i) {
        const YAML::Node& ln = links[i];
        const std::string p = fmt::format("links[{}]", i);
        LinkDoc l;
        l.id = required<std::string>(ln, "id", p);
        l.from = required<std::string>(ln, "from", p);
        l.to = required<std::string>(ln, "to", p);
        l.length = required<double>(ln, "length", p);
        l.speed = optional_value(ln, "speed", p, l.speed);
        l.region = required<std::string>(ln, "region", p);
        const YAML::Node lanes = sequence(ln, "lanes", p + ".", true);
        for (std::size_t k = 0; k < lanes.size(); ++k) {
            const std::string lp = fmt::format("{}.lanes[{}]", p, k);
            LaneDoc lane;
            lane.id = required<std::string>(lanes[k], "id", lp);
            lane.sat_flow = required<double>(lanes[k], "sat_flow", lp);
            lane.capacity = required<int>(lanes[k], "capacity", lp);
            lane.outputs = string_list(lanes[k], "outputs", lp);
            l.lanes.push_back(std::move(lane));
        }
        doc.links.push_back(std::move(l));
    }

    const YAML::Node ixs = sequence(root, "intersections", "", false);
    for (std::size_t i = 0; ixs && i < ixs.size(); ++i) {
        const std::string p = fmt::format("intersections[{}]", i);
        IntersectionDoc ix;
        ix.id = required<std::string>(ixs[i], "id", p);
        ix.kind = optional_value<std::string>(ixs[i], "kind", p, ix.kind);
        if (ix.kind != "gating" && ix.kind != "non-gating" && ix.kind != "interior") {
            parse_error(ixs[i]["kind"], p + ".kind", fmt::format("unknown kind '{}'", ix.kind));
        }
        ix.boundary = string_list(ixs[i], "boundary", p);
        if (!ix.boundary.empty() && ix.boundary.size() != 2) {
            parse_error(ixs[i]["boundary"], p + ".boundary", "expected two region ids");
        }
        ix.service_fraction = optional_value(ixs[i], "service_fraction", p, ix.service_fraction);
        const YAML::Node phases = sequence(ixs[i], "phases", p + ".", false);
        for (std::size_t k = 0; phases && k < phases.size(); ++k) {
            const std::string pp = fmt::format("{}.phases[{}]", p, k);
            PhaseDoc ph;
            ph.id = required<std::string>(phases[k], "id", pp);
            ph.lanes = string_list(phases[k], "lanes", pp);
            ix.phases.push_back(std::move(ph));
        }
        doc.intersections.push_back(std::move(ix));
    }

    const YAML::Node plans = sequence(root, "plans", "", false);
    for (std::size_t i = 0; plans && i < plans.size(); ++i) {
        const std::string p = fmt::format("plans[{}]", i);
        PlanDoc plan;
        plan.id = required<std::string>(plans[i], "id", p);
        plan.boundary = string_list(plans[i], "boundary", p);
        if (plan.boundary.size() != 2) parse_error(plans[i], p + ".boundary", "expected two region ids");
        const YAML::Node ph = plans[i]["phases"];
        if (!ph || !ph.IsMap()) parse_error(plans[i], p + ".phases", "expected a mapping intersection -> phase");
        for (auto it = ph.begin(); it != ph.end(); ++it) {
            plan.phases.emplace_back(scalar<std::string>(it->first, p + ".phases"),
                                     scalar<std::string>(it->second, p + ".phases"));
        }
        doc.plans.push_back(std::move(plan));
    }

    const YAML::Node demand = root["demand"];
    if (!demand || !demand.IsMap()) parse_error(root, "demand", "missing or not a mapping");
    doc.demand.horizon = required<double>(demand, "horizon", "demand");
    doc.demand.warmup = optional_value(demand, "warmup", "demand", doc.demand.warmup);
    doc.demand.seed = optional_value<std::uint64_t>(demand, "seed", "demand", doc.demand.seed);
    const YAML::Node od = sequence(demand, "od", "demand.", false);
    for (std::size_t i = 0; od && i < od.size(); ++i) {
        const std::string p = fmt::format("demand.od[{}]", i);
        OdDoc o;
        o.origin = required<std::string>(od[i], "origin", p);
        o.destination = required<std::string>(od[i], "destination", p);
        const YAML::Node prof = od[i]["profile"];
        if (!prof || !prof.IsSequence()) parse_error(od[i], p + ".profile", "expected a list of [start_s, rate]");
        for (std::size_t k = 0; k < prof.size(); ++k) {
            const std::string pp = fmt::format("{}.profile[{}]", p, k);
            if (!prof[k].IsSequence() || prof[k].size() != 2) parse_error(prof[k], pp, "expected [start_s, rate]");
            o.profile.push_back({scalar<double>(prof[k][0], pp), scalar<double>(prof[k][1], pp)});
        }
        doc.demand.od.push_back(std::move(o));
    }

    const YAML::Node mfd = sequence(root, "mfd", "", false);
    for (std::size_t i = 0; mfd && i < mfd.size(); ++i) {
        const std::string p = fmt::format("mfd[{}]", i);
        MfdDoc m;
        m.region = required<std::string>(mfd[i], "region", p);
        m.curve.beta1 = required<double>(mfd[i], "beta1", p);
        m.curve.beta2 = required<double>(mfd[i], "beta2", p);
        m.curve.beta3 = required<double>(mfd[i], "beta3", p);
        m.curve.n_crit = required<double>(mfd[i], "n_crit", p);
        doc.mfd.push_back(m);
    }
    return doc;
}

ScenarioDoc read_scenario_doc(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(ScenarioError::Kind::parse, fmt::format("cannot open '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string emit_scenario(const ScenarioDoc& doc) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << doc.name;
    out << YAML::Key << "interior_service_fraction" << YAML::Value << num(doc.interior_service_fraction);

    const ControlConfig& c = doc.control;
    out << YAML::Key << "control" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "t_macro" << YAML::Value << num(c.t_macro_s);
    out << YAML::Key << "t_micro" << YAML::Value << num(c.t_micro_s);
    out << YAML::Key << "activation_threshold" << YAML::Value << num(c.activation_threshold);
    out << YAML::Key << "sigma" << YAML::Value << num(c.sigma);
    out << YAML::Key << "sigma_abs" << YAML::Value << num(c.sigma_abs);
    out << YAML::Key << "beta" << YAML::Value << num(c.beta);
    out << YAML::Key << "logit_theta" << YAML::Value << num(c.logit_theta);
    out << YAML::Key << "pi_kp" << YAML::Value << num(c.pi_kp);
    out << YAML::Key << "pi_ki" << YAML::Value << num(c.pi_ki);
    out << YAML::Key << "cap_factor" << YAML::Value << num(c.cap_factor);
    out << YAML::Key << "mfd_window" << YAML::Value << num(c.mfd_window_s);
    out << YAML::Key << "demand_forecast" << YAML::Value << forecast_name(c.demand_forecast);
    out << YAML::Key << "completion_proxy" << YAML::Value << proxy_name(c.completion_proxy);
    out << YAML::EndMap;

    out << YAML::Key << "regions" << YAML::Value << YAML::BeginSeq;
    for (const RegionDoc& r : doc.regions) {
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << r.id << YAML::Key << "neighbors"
            << YAML::Value << YAML::Flow << r.neighbors << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "links" << YAML::Value << YAML::BeginSeq;
    for (const LinkDoc& l : doc.links) {
        out << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << l.id;
        out << YAML::Key << "from" << YAML::Value << l.from;
        out << YAML::Key << "to" << YAML::Value << l.to;
        out << YAML::Key << "length" << YAML::Value << num(l.length);
        out << YAML::Key << "speed" << YAML::Value << num(l.speed);
        out << YAML::Key << "region" << YAML::Value << l.region;
        out << YAML::Key << "lanes" << YAML::Value << YAML::BeginSeq;
        for (const LaneDoc& lane : l.lanes) {
            out << YAML::Flow << YAML::BeginMap;
            out << YAML::Key << "id" << YAML::Value << lane.id;
            out << YAML::Key << "sat_flow" << YAML::Value << num(lane.sat_flow);
            out << YAML::Key << "capacity" << YAML::Value << lane.capacity;
            out << YAML::Key << "outputs" << YAML::Value << YAML::Flow << lane.outputs;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "intersections" << YAML::Value << YAML::BeginSeq;
    for (const IntersectionDoc& ix : doc.intersections) {
        out << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << ix.id;
        out << YAML::Key << "kind" << YAML::Value << ix.kind;
        if (!ix.boundary.empty()) out << YAML::Key << "boundary" << YAML::Value << YAML::Flow << ix.boundary;
        out << YAML::Key << "service_fraction" << YAML::Value << num(ix.service_fraction);
        if (!ix.phases.empty()) {
            out << YAML::Key << "phases" << YAML::Value << YAML::BeginSeq;
            for (const PhaseDoc& ph : ix.phases) {
                out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << ph.id << YAML::Key << "lanes"
                    << YAML::Value << YAML::Flow << ph.lanes << YAML::EndMap;
            }
            out << YAML::EndSeq;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "plans" << YAML::Value << YAML::BeginSeq;
    for (const PlanDoc& plan : doc.plans) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << plan.id;
        out << YAML::Key << "boundary" << YAML::Value << YAML::Flow << plan.boundary;
        out << YAML::Key << "phases" << YAML::Value << YAML::Flow << YAML::BeginMap;
        for (const auto& [node, phase] : plan.phases) out << YAML::Key << node << YAML::Value << phase;
        out << YAML::EndMap << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "demand" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "horizon" << YAML::Value << num(doc.demand.horizon);
    out << YAML::Key << "warmup" << YAML::Value << num(doc.demand.warmup);
    out << YAML::Key << "seed" << YAML::Value << doc.demand.seed;
    out << YAML::Key << "od" << YAML::Value << YAML::BeginSeq;
    for (const OdDoc& o : doc.demand.od) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "origin" << YAML::Value << o.origin;
        out << YAML::Key << "destination" << YAML::Value << o.destination;
        out << YAML::Key << "profile" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const RateBreakpoint& bp : o.profile) {
            out << YAML::Flow << YAML::BeginSeq << num(bp.start_s) << num(bp.rate_veh_per_s) << YAML::EndSeq;
        }
        out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;

    if (!doc.mfd.empty()) {
        out << YAML::Key << "mfd" << YAML::Value << YAML::BeginSeq;
        for (const MfdDoc& m : doc.mfd) {
            out << YAML::Flow << YAML::BeginMap;
            out << YAML::Key << "region" << YAML::Value << m.region;
            out << YAML::Key << "beta1" << YAML::Value << num(m.curve.beta1);
            out << YAML::Key << "beta2" << YAML::Value << num(m.curve.beta2);
            out << YAML::Key << "beta3" << YAML::Value << num(m.curve.beta3);
            out << YAML::Key << "n_crit" << YAML::Value << num(m.curve.n_crit);
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void write_scenario_doc(const ScenarioDoc& doc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ScenarioError(ScenarioError::Kind::parse, fmt::format("cannot write '{}'", path.string()));
    out << emit_scenario(doc);
}

Scenario build_scenario(const ScenarioDoc& doc) {
    NetworkParts parts;

    std::unordered_map<std::string, RegionId> region_ids;
    for (const RegionDoc& r : doc.regions) {
        if (!region_ids.emplace(r.id, RegionId(region_ids.size())).second) invalid(fmt::format("duplicate region '{}'", r.id));
        parts.partition.names.push_back(r.id);
    }
    auto region = [&](const std::string& name, const std::string& where) {
        auto it = region_ids.find(name);
        if (it == region_ids.end()) dangling(fmt::format("{}: unknown region '{}'", where, name));
        return it->second;
    };
    for (const RegionDoc& r : doc.regions) {
        std::vector<RegionId> nb;
        for (const std::string& n : r.neighbors) nb.push_back(region(n, fmt::format("region '{}' neighbors", r.id)));
        parts.partition.neighbors.push_back(std::move(nb));
    }

    std::unordered_map<std::string, NodeId> node_ids;
    auto node = [&](const std::string& name) {
        auto [it, inserted] = node_ids.emplace(name, NodeId(parts.node_names.size()));
        if (inserted) parts.node_names.push_back(name);
        return it->second;
    };

    std::unordered_map<std::string, LaneId> lane_ids;
    for (const LinkDoc& l : doc.links) {
        for (const LaneDoc& lane : l.lanes) {
            if (!lane_ids.emplace(lane.id, LaneId(lane_ids.size())).second) invalid(fmt::format("duplicate lane '{}'", lane.id));
        }
    }
    for (const LinkDoc& l : doc.links) {
        Link link;
        link.name = l.id;
        link.from_node = node(l.from);
        link.to_node = node(l.to);
        link.length_m = l.length;
        link.free_speed_mps = l.speed;
        link.region = region(l.region, fmt::format("link '{}'", l.id));
        const LinkId link_id(parts.links.size());
        for (const LaneDoc& ld : l.lanes) {
            Lane lane;
            lane.name = ld.id;
            lane.link = link_id;
            lane.sat_flow_veh_per_s = ld.sat_flow;
            lane.capacity_veh = ld.capacity;
            for (const std::string& o : ld.outputs) {
                auto it = lane_ids.find(o);
                if (it == lane_ids.end()) dangling(fmt::format("lane '{}' output_lanes: unknown lane '{}'", ld.id, o));
                lane.outputs.push_back(it->second);
            }
            link.lanes.push_back(LaneId(parts.lanes.size()));
            parts.lanes.push_back(std::move(lane));
        }
        parts.links.push_back(std::move(link));
    }

    parts.intersections.resize(parts.node_names.size());
    for (std::size_t n = 0; n < parts.node_names.size(); ++n) {
        parts.intersections[n].name = parts.node_names[n];
        parts.intersections[n].service_fraction = doc.interior_service_fraction;
    }
    std::vector<bool> listed(parts.node_names.size(), false);
    for (const IntersectionDoc& ixd : doc.intersections) {
        auto it = node_ids.find(ixd.id);
        if (it == node_ids.end()) dangling(fmt::format("intersection '{}': no link touches this node", ixd.id));
        if (listed[it->second.index()]) invalid(fmt::format("intersection '{}' listed twice", ixd.id));
        listed[it->second.index()] = true;
        Intersection& ix = parts.intersections[it->second.index()];
        ix.kind = ixd.kind == "gating"       ? IntersectionKind::gating
                  : ixd.kind == "non-gating" ? IntersectionKind::non_gating
                                             : IntersectionKind::interior;
        if (!ixd.boundary.empty()) {
            const std::string where = fmt::format("intersection '{}' boundary", ixd.id);
            ix.boundary = std::pair(region(ixd.boundary[0], where), region(ixd.boundary[1], where));
        }
        ix.service_fraction = ixd.service_fraction;
        for (const PhaseDoc& pd : ixd.phases) {
            Phase ph;
            ph.name = pd.id;
            for (const std::string& ln : pd.lanes) {
                auto lit = lane_ids.find(ln);
                if (lit == lane_ids.end()) dangling(fmt::format("intersection '{}' phase '{}': unknown lane '{}'", ixd.id, pd.id, ln));
                ph.lanes.push_back(lit->second);
            }
            ix.phases.push_back(std::move(ph));
        }
    }

    for (const PlanDoc& pd : doc.plans) {
        MultiPhasePlan plan;
        plan.name = pd.id;
        const std::string where = fmt::format("plan '{}'", pd.id);
        parts.plan_boundaries.emplace_back(region(pd.boundary.at(0), where), region(pd.boundary.at(1), where));
        for (const auto& [node_name, phase_name] : pd.phases) {
            auto it = node_ids.find(node_name);
            if (it == node_ids.end()) dangling(fmt::format("{}: unknown intersection '{}'", where, node_name));
            const auto& phases = parts.intersections[it->second.index()].phases;
            auto ph = std::find_if(phases.begin(), phases.end(), [&](const Phase& p) { return p.name == phase_name; });
            if (ph == phases.end()) dangling(fmt::format("{}: intersection '{}' has no phase '{}'", where, node_name, phase_name));
            plan.settings.push_back(PlanSetting{it->second, static_cast<std::size_t>(ph - phases.begin())});
        }
        parts.plans.push_back(std::move(plan));
    }

    Scenario sc{doc.name, Network(std::move(parts)), {}, doc.control, std::nullopt};

    const ControlConfig& c = doc.control;
    if (!(c.t_micro_s > 0.0) || !(c.t_macro_s > 0.0)) invalid("control: step lengths must be positive");
    if (std::abs(c.t_macro_s - c.micro_steps_per_macro() * c.t_micro_s) > 1e-9) {
        invalid("control: t_macro must be an integer multiple of t_micro");
    }
    if (!(c.activation_threshold > 0.0 && c.activation_threshold < 1.0)) invalid("control: activation_threshold must be in (0,1)");
    if (!(c.sigma > 0.0)) invalid("control: sigma must be > 0");

    DemandScenario& demand = sc.demand;
    demand.horizon_s = doc.demand.horizon;
    demand.warmup_s = doc.demand.warmup;
    demand.seed = doc.demand.seed;
    if (!(demand.warmup_s < demand.horizon_s)) invalid("demand: warmup must be shorter than the horizon");
    for (const OdDoc& od : doc.demand.od) {
        auto o = sc.network.find_link(od.origin);
        auto d = sc.network.find_link(od.destination);
        if (!o) dangling(fmt::format("demand: unknown origin link '{}'", od.origin));
        if (!d) dangling(fmt::format("demand: unknown destination link '{}'", od.destination));
        OdFlow flow{*o, *d, od.profile};
        std::stable_sort(flow.profile.begin(), flow.profile.end(),
                         [](const RateBreakpoint& a, const RateBreakpoint& b) { return a.start_s < b.start_s; });
        for (const RateBreakpoint& bp : flow.profile) {
            if (bp.rate_veh_per_s < 0.0) invalid(fmt::format("demand {} -> {}: rates must be >= 0", od.origin, od.destination));
        }
        demand.od.push_back(std::move(flow));
    }

    if (!doc.mfd.empty()) {
        std::vector<MfdCurve> curves(sc.network.region_count());
        std::vector<bool> seen(curves.size(), false);
        for (const MfdDoc& m : doc.mfd) {
            RegionId r = region(m.region, "mfd");
            curves[r.index()] = m.curve;
            seen[r.index()] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end()) invalid("mfd: every region needs a curve");
        sc.mfd = MfdModel(std::move(curves));
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) { return build_scenario(read_scenario_doc(path)); }

void set_mfd(ScenarioDoc& doc, const MfdModel& model) {
    doc.mfd.clear();
    for (std::size_t r = 0; r < model.size() && r < doc.regions.size(); ++r) {
        doc.mfd.push_back(MfdDoc{doc.regions[r].id, model.curve(r)});
    }
}

}  // namespace msctl
