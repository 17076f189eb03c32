#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msctl/controller.hpp"
#include "msctl/mfd.hpp"
#include "msctl/scenario.hpp"

namespace msctl {

struct RunConfig {
    Strategy strategy = Strategy::msjc;
    std::optional<std::uint64_t> seed;   // overrides the scenario's demand seed
    std::optional<double> cap_s;         // default: cap_factor x demand horizon
    std::filesystem::path out;           // empty: no files written
    std::string scenario_source;         // recorded in the manifest
};

/// One arc over one macro step.
struct BoundarySample {
    double time_s = 0.0;
    std::size_t arc = 0;
    bool active = false;
    double target = 0.0;
    double m_min = 0.0;
    double m_max = 0.0;
    double realized = 0.0;     // mean crossing flow over the macro step, veh/s
    bool all_feasible = true;  // feasible plan set nonempty at every micro step
    int fallbacks = 0;
};

struct RunMetrics {
    std::string scenario;
    Strategy strategy = Strategy::msjc;
    std::uint64_t seed = 0;
    double total_travel_time = 0.0;  // veh s, network plus entry queues
    std::int64_t throughput = 0;
    std::int64_t created = 0;
    double clearance_time_s = 0.0;
    bool truncated = false;
    std::optional<double> activation_time_s;
    int conservation_violations = 0;
    int fallbacks = 0;
    int infeasible_solves = 0;
    int rerouted = 0;
    double max_solve_ms = 0.0;
    std::vector<double> times;                      // end of each micro step
    std::vector<std::vector<double>> accumulation;  // per step, per region
    std::vector<double> completed;                  // cumulative exits per step
    std::vector<BoundarySample> boundary;
};

/// Simulates the scenario under one strategy until the network clears or the
/// cap is hit. Writes observations.csv, boundary.csv, macro.csv, routing.csv,
/// metrics.csv and manifest.yaml into config.out when it is set.
RunMetrics run(const Scenario& scenario, const RunConfig& config);

struct CalibrationResult {
    FitReport fit;
    std::vector<MfdSample> samples;
};

/// Uncontrolled demand sweep at each scale in `levels`, sampled over
/// mfd_window_s windows, then a per-region cubic fit.
CalibrationResult calibrate(const Scenario& scenario, std::span<const double> levels);

/// Every strategy in `strategies` for seeds base, base+1, ..., base+reps-1.
/// Each run writes into out/<strategy>/seed_<n> when out is set.
std::vector<RunMetrics> compare(const Scenario& scenario, std::span<const Strategy> strategies,
                                std::uint64_t base_seed, int reps, const std::filesystem::path& out,
                                const std::string& source = {});

struct ReportRow {
    std::string strategy;
    int runs = 0;
    double ttt_mean = 0.0;
    double ttt_std = 0.0;
    double throughput_mean = 0.0;
    double throughput_std = 0.0;
    double clearance_mean = 0.0;
    int truncated = 0;
};

/// Strategy table sorted by mean total travel time. Standard deviations are
/// sample deviations (zero for a single run).
std::vector<ReportRow> summarize(std::span<const RunMetrics> runs);

/// Writes comparison.csv, accumulation.csv (mean and sd per strategy, step,
/// region) and boundary_flow.csv (every run's macro-step flows with envelopes).
void write_report(const std::filesystem::path& out, std::span<const RunMetrics> runs, const Network& net);

/// Reads runs back from a compare output directory (metrics.csv, observations.csv
/// and macro.csv of every run directory).
std::vector<RunMetrics> load_runs(const std::filesystem::path& dir, const Network& net);

std::string format_table(std::span<const ReportRow> rows);

}  // namespace msctl
