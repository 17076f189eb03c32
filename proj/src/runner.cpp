#include "msctl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

namespace msctl {

namespace {

bool demand_remaining(const DemandScenario& demand, double t) {
    if (t >= demand.horizon_s) return false;
    for (const OdFlow& od : demand.od) {
        if (od.rate_at(t) > 0.0) return true;
        for (const RateBreakpoint& bp : od.profile) {
            if (bp.start_s > t && bp.start_s < demand.horizon_s && bp.rate_veh_per_s > 0.0) return true;
        }
    }
    return false;
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    return out;
}

void write_manifest(const std::filesystem::path& path, const Scenario& sc, const RunConfig& cfg,
                    const DemandScenario& demand, double cap) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "scenario" << YAML::Value << sc.name;
    if (!cfg.scenario_source.empty()) e << YAML::Key << "source" << YAML::Value << cfg.scenario_source;
    e << YAML::Key << "strategy" << YAML::Value << std::string(strategy_name(cfg.strategy));
    e << YAML::Key << "seed" << YAML::Value << demand.seed;
    e << YAML::Key << "cap_s" << YAML::Value << fmt::format("{}", cap);
    const ControlConfig& c = sc.control;
    e << YAML::Key << "control" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "t_macro" << YAML::Value << fmt::format("{}", c.t_macro_s);
    e << YAML::Key << "t_micro" << YAML::Value << fmt::format("{}", c.t_micro_s);
    e << YAML::Key << "activation_threshold" << YAML::Value << fmt::format("{}", c.activation_threshold);
    e << YAML::Key << "sigma" << YAML::Value << fmt::format("{}", c.sigma);
    e << YAML::Key << "sigma_abs" << YAML::Value << fmt::format("{}", c.sigma_abs);
    e << YAML::Key << "beta" << YAML::Value << fmt::format("{}", c.beta);
    e << YAML::Key << "logit_theta" << YAML::Value << fmt::format("{}", c.logit_theta);
    e << YAML::Key << "pi_kp" << YAML::Value << fmt::format("{}", c.pi_kp);
    e << YAML::Key << "pi_ki" << YAML::Value << fmt::format("{}", c.pi_ki);
    e << YAML::Key << "cap_factor" << YAML::Value << fmt::format("{}", c.cap_factor);
    e << YAML::Key << "demand_forecast" << YAML::Value
      << (c.demand_forecast == DemandForecast::previous_step ? "previous_step" : "none");
    e << YAML::Key << "completion_proxy" << YAML::Value
      << (c.completion_proxy == CompletionProxy::outflow_plus_completions ? "outflow_plus_completions" : "outflow_only");
    e << YAML::EndMap;
    e << YAML::Key << "demand" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "horizon" << YAML::Value << fmt::format("{}", demand.horizon_s);
    e << YAML::Key << "warmup" << YAML::Value << fmt::format("{}", demand.warmup_s);
    e << YAML::Key << "od_pairs" << YAML::Value << demand.od.size();
    e << YAML::EndMap;
    e << YAML::Key << "mfd" << YAML::Value << YAML::BeginSeq;
    for (std::size_t r = 0; r < sc.mfd->size(); ++r) {
        const MfdCurve& m = sc.mfd->curve(r);
        e << YAML::Flow << YAML::BeginMap;
        e << YAML::Key << "region" << YAML::Value << sc.network.partition().names[r];
        e << YAML::Key << "beta1" << YAML::Value << fmt::format("{}", m.beta1);
        e << YAML::Key << "beta2" << YAML::Value << fmt::format("{}", m.beta2);
        e << YAML::Key << "beta3" << YAML::Value << fmt::format("{}", m.beta3);
        e << YAML::Key << "n_crit" << YAML::Value << fmt::format("{}", m.n_crit);
        e << YAML::EndMap;
    }
    e << YAML::EndSeq << YAML::EndMap;
    std::ofstream out(path);
    out << e.c_str() << '\n';
}

void write_macro_header(std::ostream& out) {
    out << "time_s,from,to,active,target,m_min,m_max,realized,all_feasible,fallbacks\n";
}

void write_macro_row(std::ostream& out, const Network& net, const BoundarySample& s) {
    const auto& names = net.partition().names;
    const Arc& a = net.arc(ArcId(s.arc));
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", s.time_s, names[a.from.index()], names[a.to.index()],
                       s.active ? 1 : 0, s.target, s.m_min, s.m_max, s.realized, s.all_feasible ? 1 : 0, s.fallbacks);
}

void write_metrics(std::ostream& out, const RunMetrics& m) {
    out << "scenario,strategy,seed,total_travel_time,throughput,created,clearance_time_s,truncated,activation_time_s,"
           "fallbacks,infeasible_solves,rerouted,conservation_violations\n";
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", m.scenario, strategy_name(m.strategy), m.seed,
                       m.total_travel_time, m.throughput, m.created, m.clearance_time_s, m.truncated ? 1 : 0,
                       m.activation_time_s ? fmt::format("{}", *m.activation_time_s) : std::string(), m.fallbacks,
                       m.infeasible_solves, m.rerouted, m.conservation_violations);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error(fmt::format("missing column '{}'", name));
        return static_cast<std::size_t>(it - header.begin());
    }
};

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", path.string()));
    Table t;
    std::string line;
    if (std::getline(in, line)) t.header = split(line);
    while (std::getline(in, line)) {
        if (!line.empty()) t.rows.push_back(split(line));
    }
    return t;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

RunMetrics run(const Scenario& scenario, const RunConfig& config) {
    if (!scenario.mfd) throw std::runtime_error("run: scenario has no MFD section; run calibrate first");
    const Network& net = scenario.network;
    const ControlConfig& control = scenario.control;
    DemandScenario demand = scenario.demand;
    if (config.seed) demand.seed = *config.seed;
    const double dt = control.t_micro_s;
    const int u = control.micro_steps_per_macro();
    const double cap = config.cap_s.value_or(control.cap_factor * demand.horizon_s);
    const std::size_t R = net.region_count();
    const std::size_t A = net.arcs().size();

    RunMetrics m;
    m.scenario = scenario.name;
    m.strategy = config.strategy;
    m.seed = demand.seed;

    std::ofstream obs_csv, boundary_csv, macro_csv, routing_csv;
    const bool files = !config.out.empty();
    if (files) {
        std::filesystem::create_directories(config.out);
        obs_csv = open_csv(config.out / "observations.csv");
        boundary_csv = open_csv(config.out / "boundary.csv");
        macro_csv = open_csv(config.out / "macro.csv");
        routing_csv = open_csv(config.out / "routing.csv");
        write_observation_header(obs_csv, net);
        write_boundary_header(boundary_csv);
        write_macro_header(macro_csv);
        write_routing_header(routing_csv);
        write_manifest(config.out / "manifest.yaml", scenario, config, demand, cap);
    }

    Simulator sim(net, demand);
    Controller ctl(net, *scenario.mfd, control, config.strategy, demand.seed);
    if (files) ctl.set_routing_log(&routing_csv);
    MicroObservation obs = sim.observe();
    RegionMatrix entries(R);

    auto micro = [&](const SignalSettings& signals) {
        sim.inject_demand(dt);
        obs = sim.advance(signals, dt);
        m.total_travel_time += static_cast<double>(obs.in_network + obs.entry_queue) * dt;
        if (obs.exited + obs.in_network + obs.entry_queue != obs.created) ++m.conservation_violations;
        for (std::size_t k = 0; k < entries.v.size(); ++k) entries.v[k] += obs.entries.v[k];
        m.times.push_back(obs.time_s);
        m.accumulation.push_back(obs.accumulation);
        m.completed.push_back(static_cast<double>(obs.exited));
        if (files) write_observation_row(obs_csv, obs);
    };
    auto done = [&] { return sim.empty() && !demand_remaining(demand, sim.time()); };

    int warm = 0;
    while (!done() && sim.time() + 1e-9 < demand.warmup_s && sim.time() < cap) {
        micro(round_robin(net, sim.step()));
        if (++warm % u == 0) entries = RegionMatrix(R);
    }

    while (!done()) {
        if (sim.time() >= cap) {
            m.truncated = true;
            break;
        }
        bool active = false;
        for (std::size_t i = 0; i < R; ++i) {
            if (obs.accumulation[i] > control.activation_threshold * scenario.mfd->critical(i)) active = true;
        }
        if (active && !m.activation_time_s) m.activation_time_s = sim.time();
        ctl.macro_update(sim, obs, entries, active);
        entries = RegionMatrix(R);
        const MacroRecord& rec = ctl.macro();
        if (rec.active && !rec.solver_feasible) ++m.infeasible_solves;
        m.max_solve_ms = std::max(m.max_solve_ms, rec.solve_ms);
        if (rec.active) spdlog::debug("t={} macro update {:.1f} ms, z={}", rec.time_s, rec.solve_ms, rec.z);

        std::vector<BoundarySample> samples(A);
        for (std::size_t a = 0; a < A; ++a) {
            samples[a].time_s = rec.time_s;
            samples[a].arc = a;
            samples[a].active = ctl.boundary().active();
            if (!rec.target.empty()) samples[a].target = rec.target[a];
            if (!rec.m_min.empty()) {
                samples[a].m_min = rec.m_min[a];
                samples[a].m_max = rec.m_max[a];
            }
        }
        int steps = 0;
        for (int k = 1; k <= u; ++k) {
            const SignalSettings signals = ctl.micro_update(sim, obs);
            const std::vector<BoundaryDecision> decisions = ctl.decisions();
            const std::vector<double> ng = ctl.ng_estimates();
            micro(signals);
            ctl.record(obs);
            ++steps;
            if (files) write_boundary_rows(boundary_csv, net, obs.time_s, k, decisions, ng, obs);
            for (std::size_t a = 0; a < A; ++a) samples[a].realized += obs.crossings[a];
            if (ctl.boundary().active()) {
                for (const BoundaryDecision& d : decisions) {
                    const Boundary& b = net.boundary(d.boundary);
                    for (ArcId a : {*net.arc_between(b.first, b.second), *net.arc_between(b.second, b.first)}) {
                        if (d.feasible_count == 0) samples[a.index()].all_feasible = false;
                        if (d.fallback) ++samples[a.index()].fallbacks;
                    }
                    if (d.fallback) ++m.fallbacks;
                }
            }
            if (done() || sim.time() >= cap) break;
        }
        for (BoundarySample& s : samples) {
            s.realized /= static_cast<double>(steps);
            if (files) write_macro_row(macro_csv, net, s);
        }
        m.boundary.insert(m.boundary.end(), samples.begin(), samples.end());
    }

    m.throughput = sim.exited();
    m.created = sim.created();
    m.clearance_time_s = sim.time();
    m.rerouted = ctl.rerouted();
    if (files) {
        std::ofstream metrics = open_csv(config.out / "metrics.csv");
        write_metrics(metrics, m);
    }
    spdlog::info("{} seed {}: ttt {:.0f} veh s, throughput {}/{}, cleared at {} s{}", strategy_name(m.strategy), m.seed,
                 m.total_travel_time, m.throughput, m.created, m.clearance_time_s, m.truncated ? " (truncated)" : "");
    return m;
}

// Windows without a single exit or boundary crossing before a calibration
// level is declared gridlocked.
constexpr int kStallWindows = 5;

CalibrationResult calibrate(const Scenario& scenario, std::span<const double> levels) {
    if (levels.empty()) throw std::invalid_argument("calibrate: no demand levels");
    const Network& net = scenario.network;
    const ControlConfig& control = scenario.control;
    const double dt = control.t_micro_s;
    const int per_window = std::max(1, static_cast<int>(std::lround(control.mfd_window_s / dt)));
    const double window_s = per_window * dt;
    const std::size_t R = net.region_count();
    CalibrationResult result;
    std::size_t window = 0;
    for (double level : levels) {
        if (!(level > 0.0)) throw std::invalid_argument("calibrate: demand levels must be positive");
        DemandScenario demand = scenario.demand;
        for (OdFlow& od : demand.od) {
            for (RateBreakpoint& bp : od.profile) bp.rate_veh_per_s *= level;
        }
        const double cap = control.cap_factor * demand.horizon_s;
        Simulator sim(net, demand);
        MicroObservation obs = sim.observe();
        std::vector<double> n_sum(R, 0.0);
        std::vector<double> done_sum(R, 0.0);
        int in_window = 0;
        int stalled = 0;
        while (!(sim.empty() && !demand_remaining(demand, sim.time())) && sim.time() < cap) {
            sim.inject_demand(dt);
            obs = sim.advance(to_signals(bp_control(net, obs)), dt);
            for (std::size_t i = 0; i < R; ++i) {
                n_sum[i] += obs.accumulation[i];
                done_sum[i] += obs.outflow[i];
                if (control.completion_proxy == CompletionProxy::outflow_plus_completions) {
                    done_sum[i] += obs.completions[i];
                }
            }
            if (++in_window == per_window) {
                double progress = 0.0;
                for (std::size_t i = 0; i < R; ++i) {
                    const double n = n_sum[i] / per_window;
                    if (n > 0.0) result.samples.push_back(MfdSample{i, n, done_sum[i] / window_s, window});
                    progress += done_sum[i];
                }
                stalled = progress > 0.0 || sim.in_network() == 0 ? 0 : stalled + 1;
                ++window;
                in_window = 0;
                std::fill(n_sum.begin(), n_sum.end(), 0.0);
                std::fill(done_sum.begin(), done_sum.end(), 0.0);
                if (stalled == kStallWindows) break;
            }
        }
        if (stalled == kStallWindows) {
            spdlog::warn("calibration level {}: gridlocked at {} s with {} vehicles, level stopped", level,
                         sim.time(), sim.in_network());
        } else {
            spdlog::info("calibration level {}: {} windows so far, cleared at {} s", level, window, sim.time());
        }
    }
    result.fit = fit_mfd(result.samples, R);
    if (levels.size() == 1) {
        result.fit.warnings.insert(result.fit.warnings.begin(),
                                   "single demand level: narrow accumulation range, the fitted curve may not reach "
                                   "its critical point");
    }
    return result;
}

std::vector<RunMetrics> compare(const Scenario& scenario, std::span<const Strategy> strategies,
                                std::uint64_t base_seed, int reps, const std::filesystem::path& out,
                                const std::string& source) {
    if (reps < 1) throw std::invalid_argument("compare: reps must be >= 1");
    std::vector<RunMetrics> runs;
    for (Strategy s : strategies) {
        for (int r = 0; r < reps; ++r) {
            RunConfig cfg;
            cfg.strategy = s;
            cfg.seed = base_seed + static_cast<std::uint64_t>(r);
            cfg.scenario_source = source;
            if (!out.empty()) cfg.out = out / std::string(strategy_name(s)) / fmt::format("seed_{}", *cfg.seed);
            runs.push_back(run(scenario, cfg));
        }
    }
    return runs;
}

std::vector<ReportRow> summarize(std::span<const RunMetrics> runs) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunMetrics*>> groups;
    for (const RunMetrics& m : runs) {
        const std::string name(strategy_name(m.strategy));
        if (!groups.contains(name)) order.push_back(name);
        groups[name].push_back(&m);
    }
    std::vector<ReportRow> rows;
    for (const std::string& name : order) {
        std::vector<double> ttt, thr, clr;
        ReportRow row;
        row.strategy = name;
        for (const RunMetrics* m : groups[name]) {
            ttt.push_back(m->total_travel_time);
            thr.push_back(static_cast<double>(m->throughput));
            clr.push_back(m->clearance_time_s);
            if (m->truncated) ++row.truncated;
        }
        row.runs = static_cast<int>(ttt.size());
        row.ttt_mean = mean_of(ttt);
        row.ttt_std = sd_of(ttt);
        row.throughput_mean = mean_of(thr);
        row.throughput_std = sd_of(thr);
        row.clearance_mean = mean_of(clr);
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.ttt_mean < b.ttt_mean; });
    return rows;
}

void write_report(const std::filesystem::path& out, std::span<const RunMetrics> runs, const Network& net) {
    std::filesystem::create_directories(out);
    const auto rows = summarize(runs);
    {
        std::ofstream f = open_csv(out / "comparison.csv");
        f << "strategy,runs,ttt_mean,ttt_std,throughput_mean,throughput_std,clearance_mean,truncated\n";
        for (const ReportRow& r : rows) {
            f << fmt::format("{},{},{},{},{},{},{},{}\n", r.strategy, r.runs, r.ttt_mean, r.ttt_std, r.throughput_mean,
                             r.throughput_std, r.clearance_mean, r.truncated);
        }
    }
    const auto& names = net.partition().names;
    std::ofstream acc = open_csv(out / "accumulation.csv");
    acc << "strategy,step,time_s,region,mean,sd,runs\n";
    std::ofstream thr = open_csv(out / "throughput.csv");
    thr << "strategy,step,time_s,mean,sd,runs\n";
    for (const ReportRow& row : rows) {
        std::vector<const RunMetrics*> group;
        for (const RunMetrics& m : runs) {
            if (strategy_name(m.strategy) == row.strategy) group.push_back(&m);
        }
        std::size_t steps = 0;
        for (const RunMetrics* m : group) steps = std::max(steps, m->times.size());
        for (std::size_t s = 0; s < steps; ++s) {
            double t = 0.0;
            std::vector<double> done;
            std::vector<std::vector<double>> n(net.region_count());
            for (const RunMetrics* m : group) {
                if (s >= m->times.size()) continue;
                t = m->times[s];
                done.push_back(m->completed[s]);
                for (std::size_t i = 0; i < n.size(); ++i) n[i].push_back(m->accumulation[s][i]);
            }
            for (std::size_t i = 0; i < n.size(); ++i) {
                acc << fmt::format("{},{},{},{},{},{},{}\n", row.strategy, s + 1, t, names[i], mean_of(n[i]), sd_of(n[i]),
                                   n[i].size());
            }
            thr << fmt::format("{},{},{},{},{},{}\n", row.strategy, s + 1, t, mean_of(done), sd_of(done), done.size());
        }
    }
    std::ofstream bf = open_csv(out / "boundary_flow.csv");
    bf << "strategy,seed,time_s,from,to,active,target,m_min,m_max,realized,all_feasible,fallbacks\n";
    for (const RunMetrics& m : runs) {
        for (const BoundarySample& s : m.boundary) {
            const Arc& a = net.arc(ArcId(s.arc));
            bf << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", strategy_name(m.strategy), m.seed, s.time_s,
                              names[a.from.index()], names[a.to.index()], s.active ? 1 : 0, s.target, s.m_min, s.m_max,
                              s.realized, s.all_feasible ? 1 : 0, s.fallbacks);
        }
    }
}

std::vector<RunMetrics> load_runs(const std::filesystem::path& dir, const Network& net) {
    std::vector<std::filesystem::path> found;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") found.push_back(entry.path().parent_path());
    }
    std::sort(found.begin(), found.end());
    std::vector<RunMetrics> runs;
    for (const auto& run_dir : found) {
        const Table metrics = read_table(run_dir / "metrics.csv");
        if (metrics.rows.empty()) continue;
        const auto& row = metrics.rows.front();
        RunMetrics m;
        m.scenario = row[metrics.column("scenario")];
        const auto strategy = parse_strategy(row[metrics.column("strategy")]);
        if (!strategy) throw std::runtime_error(fmt::format("'{}': unknown strategy", (run_dir / "metrics.csv").string()));
        m.strategy = *strategy;
        m.seed = std::stoull(row[metrics.column("seed")]);
        m.total_travel_time = std::stod(row[metrics.column("total_travel_time")]);
        m.throughput = std::stoll(row[metrics.column("throughput")]);
        m.created = std::stoll(row[metrics.column("created")]);
        m.clearance_time_s = std::stod(row[metrics.column("clearance_time_s")]);
        m.truncated = row[metrics.column("truncated")] == "1";
        const std::string& act = row[metrics.column("activation_time_s")];
        if (!act.empty()) m.activation_time_s = std::stod(act);
        m.fallbacks = std::stoi(row[metrics.column("fallbacks")]);

        const Table obs = read_table(run_dir / "observations.csv");
        const std::size_t t_col = obs.column("time_s");
        const std::size_t exited_col = obs.column("exited");
        std::vector<std::size_t> n_cols;
        for (const std::string& name : net.partition().names) n_cols.push_back(obs.column("N_" + name));
        for (const auto& r : obs.rows) {
            m.times.push_back(std::stod(r[t_col]));
            m.completed.push_back(std::stod(r[exited_col]));
            std::vector<double> n;
            for (std::size_t c : n_cols) n.push_back(std::stod(r[c]));
            m.accumulation.push_back(std::move(n));
        }

        const Table macro = read_table(run_dir / "macro.csv");
        for (const auto& r : macro.rows) {
            BoundarySample s;
            s.time_s = std::stod(r[macro.column("time_s")]);
            const auto from = net.find_region(r[macro.column("from")]);
            const auto to = net.find_region(r[macro.column("to")]);
            if (!from || !to || !net.arc_between(*from, *to)) throw std::runtime_error("macro.csv: unknown boundary");
            s.arc = net.arc_between(*from, *to)->index();
            s.active = r[macro.column("active")] == "1";
            s.target = std::stod(r[macro.column("target")]);
            s.m_min = std::stod(r[macro.column("m_min")]);
            s.m_max = std::stod(r[macro.column("m_max")]);
            s.realized = std::stod(r[macro.column("realized")]);
            s.all_feasible = r[macro.column("all_feasible")] == "1";
            s.fallbacks = std::stoi(r[macro.column("fallbacks")]);
            m.boundary.push_back(s);
        }
        runs.push_back(std::move(m));
    }
    return runs;
}

std::string format_table(std::span<const ReportRow> rows) {
    std::string out = fmt::format("{:<9} {:>4} {:>14} {:>12} {:>11} {:>9} {:>10} {:>5}\n", "strategy", "runs",
                                  "ttt_mean", "ttt_sd", "thru_mean", "thru_sd", "clear_s", "trunc");
    for (const ReportRow& r : rows) {
        out += fmt::format("{:<9} {:>4} {:>14.1f} {:>12.1f} {:>11.1f} {:>9.1f} {:>10.1f} {:>5}\n", r.strategy, r.runs,
                           r.ttt_mean, r.ttt_std, r.throughput_mean, r.throughput_std, r.clearance_mean, r.truncated);
    }
    return out;
}

}  // namespace msctl
