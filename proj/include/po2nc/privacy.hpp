#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "po2nc/rng.hpp"
#include "po2nc/vec.hpp"

namespace po2nc {

// Privacy budget quoted as (alpha, alpha*rho^2/2)-RDP simultaneously for all
// orders alpha > 1. rho = +inf is the non-private sentinel (sigma = 0
// everywhere).
struct PrivacyBudget {
    double rho = std::numeric_limits<double>::infinity();

    static PrivacyBudget non_private() { return {}; }

    bool is_private() const { return std::isfinite(rho); }

    void validate() const {
        if (std::isnan(rho) || rho <= 0.0)
            throw std::invalid_argument("PrivacyBudget: rho must be > 0 (or +inf for non-private)");
    }
};

// Per-step L2 sensitivity bound of a released vector, with the estimator it
// belongs to.
struct SensitivityRecord {
    double s = 0.0;
    std::string source;
};

struct SensitivityBounds {
    SensitivityRecord grad;  // one-point swap bound of grad_estimate, 2dL/B1
    SensitivityRecord diff;  // one-point swap bound of diff_estimate, 2dL*(2D)/(B2*delta)
};

// Analytic sensitivity bounds for the two estimators with batch sizes B1, B2
// and successive query points at most 2D apart. With D = delta/T the diff
// bound collapses to 4dL/(B2*T).
inline SensitivityBounds sensitivity_bounds(int d, double L, int B1, int B2, double delta,
                                            double D) {
    if (d < 1 || L <= 0.0 || B1 < 1 || B2 < 1 || delta <= 0.0 || D <= 0.0)
        throw std::invalid_argument("sensitivity_bounds: all arguments must be positive");
    const double dd = static_cast<double>(d);
    return SensitivityBounds{
        {2.0 * dd * L / B1, "grad_estimate"},
        {2.0 * dd * L * (2.0 * D) / (B2 * delta), "diff_estimate"},
    };
}

// Constant noise scale making one epoch of the tree-released oracle
// (alpha, alpha*rho^2/2)-RDP:
//   sigma = sqrt(2 ln T) * 4 d L / (B2 * T * rho),
// valid when B1 >= T*B2/2 and the OCO domain is D = delta/T. rho = +inf gives
// sigma = 0 (the non-private mode). T = 1 is rejected: ln 1 = 0 would yield
// zero noise against nonzero sensitivity.
inline double sigma_schedule(int d, double L, int B2, int T, double rho) {
    if (T < 2) throw std::invalid_argument("sigma_schedule: T must be >= 2");
    if (d < 1 || L <= 0.0 || B2 < 1)
        throw std::invalid_argument("sigma_schedule: d, L, B2 must be positive");
    if (std::isnan(rho) || rho <= 0.0)
        throw std::invalid_argument("sigma_schedule: rho must be > 0");
    if (std::isinf(rho)) return 0.0;
    return std::sqrt(2.0 * std::log(static_cast<double>(T))) * 4.0 * d * L /
           (static_cast<double>(B2) * T * rho);
}

// RDP -> approximate DP: a mechanism that is (alpha, alpha*rho^2/2)-RDP for
// all alpha > 1 is (2*rho*sqrt(ln(1/dp_delta)), dp_delta)-DP whenever
// dp_delta >= exp(-rho^2).
inline double rdp_to_dp(double rho, double dp_delta) {
    if (!std::isfinite(rho) || rho <= 0.0)
        throw std::invalid_argument("rdp_to_dp: rho must be finite and > 0");
    if (dp_delta > 1.0)
        throw std::invalid_argument("rdp_to_dp: dp_delta must be <= 1");
    if (dp_delta < std::exp(-rho * rho))
        throw std::out_of_range("rdp_to_dp: conversion requires dp_delta >= exp(-rho^2)");
    return 2.0 * rho * std::sqrt(std::log(1.0 / dp_delta));
}

// Replays a frozen-direction estimator step on n_swaps neighboring batches
// (one entry replaced by a draw from `replacement`) and returns the largest
// L2 output change observed. `step` must fix its own rng seed so both runs of
// a swap see identical directions.
template <class Step, class Z, class ReplaceSampler>
double empirical_sensitivity_probe(Step&& step, std::span<const Z> batch, int n_swaps,
                                   ReplaceSampler&& replacement, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("empirical_sensitivity_probe: empty batch");
    if (n_swaps < 1) throw std::invalid_argument("empirical_sensitivity_probe: n_swaps must be >= 1");

    const ParamVector baseline = step(batch);
    std::vector<Z> neighbor(batch.begin(), batch.end());
    double worst = 0.0;
    for (int s = 0; s < n_swaps; ++s) {
        const std::size_t idx = static_cast<std::size_t>(rng.uniform_int(batch.size()));
        Z saved = neighbor[idx];
        neighbor[idx] = replacement(rng);
        const ParamVector out = step(std::span<const Z>(neighbor));
        worst = std::max(worst, dist(baseline, out));
        neighbor[idx] = std::move(saved);
    }
    return worst;
}

}  // namespace po2nc
