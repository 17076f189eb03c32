#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include "msctl/grid_fixture.hpp"
#include "msctl/runner.hpp"
#include "msctl/scenario.hpp"

namespace fs = std::filesystem;
using namespace msctl;

namespace {

std::vector<Strategy> parse_strategies(const std::string& list) {
    std::vector<Strategy> out;
    if (list == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        auto s = parse_strategy(name);
        if (!s) throw CLI::ValidationError("--strategies", "unknown strategy '" + name + "'");
        out.push_back(*s);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::cfg::load_env_levels();
    CLI::App app{"Multi-region perimeter control and route guidance simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::uint64_t seed = 1;
    int reps = 1;
    double cap = 0.0;
    bool until_cleared = false;

    auto* fixture = app.add_subcommand("fixture", "Write a bundled synthetic scenario (without MFD)");
    std::string fixture_name = "grid6";
    fixture->add_option("--name", fixture_name, "corridor or grid6")->check(CLI::IsMember({"corridor", "grid6"}));
    fixture->add_option("--out", out_dir, "Output YAML path")->required();
    std::optional<double> base_rate, peak_rate, hot_factor, horizon, link_length, speed;
    std::optional<int> block;
    fixture->add_option("--base-rate", base_rate, "Off-peak rate per OD pair, veh/s");
    fixture->add_option("--peak-rate", peak_rate, "Peak rate per OD pair, veh/s");
    fixture->add_option("--hot-factor", hot_factor, "Demand multiplier for trips to the hot regions");
    fixture->add_option("--horizon", horizon, "Demand horizon, s");
    fixture->add_option("--link-length", link_length, "Length of the links inside a region, m");
    fixture->add_option("--speed", speed, "Free-flow speed, m/s");
    fixture->add_option("--block", block, "Nodes per side of each region");

    auto* cal = app.add_subcommand("calibrate", "Fit per-region MFDs from an uncontrolled demand sweep");
    std::vector<double> levels{0.25, 0.5, 0.75, 1.0, 1.25};
    cal->add_option("--scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
    cal->add_option("--levels", levels, "Demand scale factors")->delimiter(',');
    cal->add_option("--out", out_dir, "Write the scenario with the fitted mfd section here (default: in place)");
    std::string samples_path;
    cal->add_option("--samples", samples_path, "Optional CSV of the collected samples");

    Strategy strategy = Strategy::msjc;
    std::string strategy_text = "msjc";
    auto* run_cmd = app.add_subcommand("run", "Simulate one strategy");
    run_cmd->add_option("--scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--strategy", strategy_text, "msjc, mspc-lr, bp-lr, mspc or bp");
    run_cmd->add_option("--seed", seed, "Demand seed");
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_cmd->add_option("--cap", cap, "Hard stop, seconds of simulated time");
    run_cmd->add_flag("--until-cleared", until_cleared, "Disable the hard stop");

    std::string strategies_text = "all";
    auto* cmp = app.add_subcommand("compare", "Run several strategies over several seeds and summarize");
    cmp->add_option("--scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
    cmp->add_option("--strategies", strategies_text, "Comma separated list or 'all'");
    cmp->add_option("--seed", seed, "First seed");
    cmp->add_option("--reps", reps, "Replications per strategy")->check(CLI::PositiveNumber);
    cmp->add_option("--out", out_dir, "Output directory")->required();

    std::string runs_dir;
    auto* rep = app.add_subcommand("report", "Summarize the run directories written by compare or run");
    rep->add_option("--scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
    rep->add_option("--runs", runs_dir, "Directory containing run outputs")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--out", out_dir, "Report directory (default: the runs directory)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fixture->parsed()) {
            GridOptions opts = fixture_name == "corridor" ? corridor_options() : grid6_options();
            if (base_rate) opts.base_rate = *base_rate;
            if (peak_rate) opts.peak_rate = *peak_rate;
            if (hot_factor) opts.hot_factor = *hot_factor;
            if (horizon) opts.horizon_s = *horizon;
            if (link_length) opts.link_length_m = *link_length;
            if (speed) opts.speed_mps = *speed;
            if (block) opts.block = *block;
            write_scenario_doc(grid_scenario(opts), out_dir);
            build_scenario(read_scenario_doc(out_dir));
            std::cout << "wrote " << out_dir << '\n';
        } else if (cal->parsed()) {
            ScenarioDoc doc = read_scenario_doc(scenario_path);
            const Scenario sc = build_scenario(doc);
            const CalibrationResult res = calibrate(sc, levels);
            for (const std::string& w : res.fit.warnings) spdlog::warn("{}", w);
            set_mfd(doc, res.fit.model);
            const std::string target = out_dir.empty() ? scenario_path : out_dir;
            write_scenario_doc(doc, target);
            if (!samples_path.empty()) {
                std::ofstream s(samples_path);
                s << "region,window,accumulation,completion\n";
                for (const MfdSample& m : res.samples) {
                    s << fmt::format("{},{},{},{}\n", sc.network.partition().names[m.region], m.window, m.accumulation,
                                     m.completion);
                }
            }
            for (std::size_t r = 0; r < res.fit.model.size(); ++r) {
                const MfdCurve& c = res.fit.model.curve(r);
                std::cout << fmt::format("{}: beta=({:.6g}, {:.6g}, {:.6g}) n_crit={:.1f} G(n_crit)={:.3f}\n",
                                         sc.network.partition().names[r], c.beta1, c.beta2, c.beta3, c.n_crit,
                                         c.raw(c.n_crit));
            }
            std::cout << "wrote " << target << '\n';
        } else if (run_cmd->parsed()) {
            auto s = parse_strategy(strategy_text);
            if (!s) throw std::invalid_argument("unknown strategy '" + strategy_text + "'");
            strategy = *s;
            const Scenario sc = load_scenario(scenario_path);
            RunConfig cfg;
            cfg.strategy = strategy;
            cfg.seed = seed;
            cfg.out = out_dir;
            cfg.scenario_source = scenario_path;
            if (until_cleared) cfg.cap_s = std::numeric_limits<double>::infinity();
            else if (cap > 0.0) cfg.cap_s = cap;
            const RunMetrics m = run(sc, cfg);
            std::cout << format_table(summarize(std::span(&m, 1)));
            return m.truncated ? 3 : 0;
        } else if (cmp->parsed()) {
            const Scenario sc = load_scenario(scenario_path);
            const auto strategies = parse_strategies(strategies_text);
            const auto runs = compare(sc, strategies, seed, reps, out_dir, scenario_path);
            write_report(out_dir, runs, sc.network);
            std::cout << format_table(summarize(runs));
        } else if (rep->parsed()) {
            const Scenario sc = load_scenario(scenario_path);
            const auto runs = load_runs(runs_dir, sc.network);
            if (runs.empty()) throw std::runtime_error("no runs found under " + runs_dir);
            write_report(out_dir.empty() ? runs_dir : out_dir, runs, sc.network);
            std::cout << format_table(summarize(runs));
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
