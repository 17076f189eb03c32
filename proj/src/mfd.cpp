#include "msctl/mfd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace msctl {

namespace {

/// Root of G'(N) = 3 b3 N^2 + 2 b2 N + b1 where G'' < 0, if any positive one exists.
std::optional<double> local_max_root(const MfdCurve& c) {
    const double a = 3.0 * c.beta3;
    const double b = 2.0 * c.beta2;
    const double k = c.beta1;
    std::vector<double> roots;
    if (std::abs(a) < 1e-300) {
        if (std::abs(b) > 0.0) roots.push_back(-k / b);
    } else {
        const double disc = b * b - 4.0 * a * k;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        // Stable quadratic roots.
        const double q = -0.5 * (b + std::copysign(sq, b));
        if (q != 0.0) {
            roots.push_back(q / a);
            roots.push_back(k / q);
        } else {
            roots.push_back(0.0);
        }
    }
    std::optional<double> best;
    for (double r : roots) {
        if (!(r > 0.0) || !std::isfinite(r)) continue;
        if (6.0 * c.beta3 * r + 2.0 * c.beta2 >= 0.0) continue;
        if (!best || r < *best) best = r;
    }
    return best;
}

double scan_argmax(const MfdCurve& c, double upper) {
    constexpr int kPoints = 100000;
    double best_n = 0.0;
    double best_g = c.raw(0.0);
    for (int i = 1; i <= kPoints; ++i) {
        const double n = upper * static_cast<double>(i) / kPoints;
        const double g = c.raw(n);
        if (g > best_g) {
            best_g = g;
            best_n = n;
        }
    }
    return best_n;
}

}  // namespace

const MfdCurve& MfdModel::curve(std::size_t region) const {
    if (region >= curves_.size()) throw MfdError(fmt::format("no MFD for region index {}", region));
    return curves_[region];
}

double MfdModel::evaluate(std::size_t region, double accumulation) const {
    return std::max(0.0, curve(region).raw(accumulation));
}

double critical_accumulation(const MfdCurve& curve, double upper, bool* unimodal) {
    if (unimodal) *unimodal = true;
    auto root = local_max_root(curve);
    if (root && *root <= upper && curve.raw(*root) >= curve.raw(upper)) return *root;
    if (unimodal) *unimodal = false;
    return scan_argmax(curve, upper);
}

double critical_accumulation(const MfdCurve& curve) {
    auto root = local_max_root(curve);
    if (!root) throw MfdError("cubic has no interior maximum");
    return *root;
}

FitReport fit_mfd(std::span<const MfdSample> samples, std::size_t regions) {
    FitReport report;
    std::vector<MfdCurve> curves(regions);
    for (std::size_t r = 0; r < regions; ++r) {
        std::vector<const MfdSample*> mine;
        for (const MfdSample& s : samples) {
            if (s.region == r) mine.push_back(&s);
        }
        if (mine.size() < 10) {
            throw MfdError(fmt::format("region {}: {} samples, at least 10 required", r, mine.size()));
        }
        // Sort so the fit does not depend on sample order.
        std::sort(mine.begin(), mine.end(), [](const MfdSample* a, const MfdSample* b) {
            return std::tie(a->accumulation, a->completion, a->window) < std::tie(b->accumulation, b->completion, b->window);
        });
        double max_n = 0.0;
        for (const MfdSample* s : mine) {
            if (s->accumulation < 0.0 || s->completion < 0.0) {
                throw MfdError(fmt::format("region {}: negative sample", r));
            }
            max_n = std::max(max_n, s->accumulation);
        }
        if (max_n <= 0.0) throw MfdError(fmt::format("region {}: rank-deficient samples (all accumulations zero)", r));

        const auto rows = static_cast<Eigen::Index>(mine.size());
        Eigen::MatrixXd x(rows, 3);
        Eigen::VectorXd y(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double n = mine[static_cast<std::size_t>(i)]->accumulation / max_n;
            x(i, 0) = n;
            x(i, 1) = n * n;
            x(i, 2) = n * n * n;
            y(i) = mine[static_cast<std::size_t>(i)]->completion;
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
        qr.setThreshold(1e-10);
        if (qr.rank() < 3) {
            throw MfdError(fmt::format("region {}: rank-deficient samples (fewer than three distinct accumulations)", r));
        }
        Eigen::Vector3d a = qr.solve(y);
        MfdCurve c;
        c.beta1 = a(0) / max_n;
        c.beta2 = a(1) / (max_n * max_n);
        c.beta3 = a(2) / (max_n * max_n * max_n);
        bool unimodal = true;
        c.n_crit = critical_accumulation(c, 1.2 * max_n, &unimodal);
        if (!unimodal) {
            report.warnings.push_back(
                fmt::format("region {}: fitted cubic is not unimodal on [0, {:.1f}]; using scanned argmax {:.1f}", r,
                            1.2 * max_n, c.n_crit));
        }
        if (!(c.raw(c.n_crit) > 0.0)) {
            report.warnings.push_back(fmt::format("region {}: fitted flow at the critical accumulation is not positive", r));
        }
        curves[r] = c;
    }
    report.model = MfdModel(std::move(curves));
    return report;
}

}  // namespace msctl
