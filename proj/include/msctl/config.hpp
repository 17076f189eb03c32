#pragma once

namespace msctl {

enum class DemandForecast {
    previous_step,  // Q_ij(t) := realized regional entries of macro step t-1
    none,           // Q_ij(t) := 0
};

enum class CompletionProxy {
    outflow_plus_completions,  // boundary outflow + trips finished inside the region
    outflow_only,
};

/// Control parameters shared by every strategy. Defaults follow the two
/// time-scale setup: 100 s macro steps split into ten 10 s micro steps.
struct ControlConfig {
    double t_macro_s = 100.0;
    double t_micro_s = 10.0;
    double activation_threshold = 0.3;  // fraction of N_crit that switches control on
    double sigma = 0.1;                 // base tolerance of the plan feasibility test
    double sigma_abs = 0.05;            // veh/s, used when the expected rate is zero
    double beta = 10.0;                 // weight of hyper-path matching in route choice
    double logit_theta = 0.01;          // 1/s
    double pi_kp = 0.05;                // veh/s per veh
    double pi_ki = 0.01;                // veh/s per veh
    double cap_factor = 4.0;            // hard cap as a multiple of the demand horizon
    double mfd_window_s = 120.0;
    DemandForecast demand_forecast = DemandForecast::previous_step;
    CompletionProxy completion_proxy = CompletionProxy::outflow_plus_completions;

    [[nodiscard]] int micro_steps_per_macro() const { return static_cast<int>(t_macro_s / t_micro_s + 0.5); }

    friend bool operator==(const ControlConfig&, const ControlConfig&) = default;
};

}  // namespace msctl
