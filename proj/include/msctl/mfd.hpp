#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msctl {

/// Cubic through the origin: G(N) = b3 N^3 + b2 N^2 + b1 N, in veh/s.
struct MfdCurve {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;
    double n_crit = 0.0;

    /// Raw polynomial value (can be negative past gridlock).
    [[nodiscard]] double raw(double n) const { return ((beta3 * n + beta2) * n + beta1) * n; }

    friend bool operator==(const MfdCurve&, const MfdCurve&) = default;
};

class MfdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-region macroscopic fundamental diagrams. Immutable once built.
class MfdModel {
public:
    MfdModel() = default;
    explicit MfdModel(std::vector<MfdCurve> curves) : curves_(std::move(curves)) {}

    [[nodiscard]] std::size_t size() const { return curves_.size(); }
    [[nodiscard]] const MfdCurve& curve(std::size_t region) const;
    [[nodiscard]] const std::vector<MfdCurve>& curves() const { return curves_; }
    [[nodiscard]] double critical(std::size_t region) const { return curve(region).n_crit; }

    /// Trip completion flow max(0, G_i(N)); throws MfdError for an unknown region.
    [[nodiscard]] double evaluate(std::size_t region, double accumulation) const;

    friend bool operator==(const MfdModel&, const MfdModel&) = default;

private:
    std::vector<MfdCurve> curves_;
};

struct MfdSample {
    std::size_t region = 0;
    double accumulation = 0.0;  // veh
    double completion = 0.0;    // veh/s
    std::size_t window = 0;
};

struct FitReport {
    MfdModel model;
    std::vector<std::string> warnings;
};

/// Argmax of the cubic on [0, upper]. Uses the local-maximum root of the
/// derivative when it falls in range, otherwise a dense scan. `unimodal` is
/// cleared when the scan had to decide.
double critical_accumulation(const MfdCurve& curve, double upper, bool* unimodal = nullptr);

/// Local maximum of the cubic on (0, inf) from the derivative's roots; used
/// for curves given directly rather than fitted from samples.
double critical_accumulation(const MfdCurve& curve);

/// Least-squares cubic through the origin per region. `regions` is the
/// number of regions expected in the output.
FitReport fit_mfd(std::span<const MfdSample> samples, std::size_t regions);

}  // namespace msctl
