#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>

#include "po2nc/rng.hpp"
#include "po2nc/vec.hpp"

namespace po2nc {

// Parameters of the uniform smoothing F_hat_delta(x) = E_{v ~ unit ball} F(x + delta*v).
struct SmoothingParams {
    double delta;      // smoothing radius, > 0
    int dim;           // ambient dimension, >= 1
    double lipschitz;  // Lipschitz constant L of f(., z), > 0

    void validate() const {
        if (delta <= 0.0) throw std::invalid_argument("SmoothingParams: delta must be > 0");
        if (dim < 1) throw std::invalid_argument("SmoothingParams: dim must be >= 1");
        if (lipschitz <= 0.0) throw std::invalid_argument("SmoothingParams: lipschitz must be > 0");
    }
};

// Unit vector on the Euclidean sphere, |norm(u) - 1| <= 1e-12.
struct Direction {
    ParamVector u;
};

// Output of grad_estimate / diff_estimate. For an L-Lipschitz objective,
// norm(g) <= d*L for gradient estimates and <= (d*L/delta)*|x-y| for
// difference estimates.
struct GradEstimate {
    ParamVector g;
};

// Uniform sample on the unit sphere: a standard-normal vector, normalized.
// Consumes exactly 2*dim raw draws per attempt; an attempt is retried only
// when the pre-normalization norm falls below 1e-8 (probability ~0).
inline Direction sample_unit_sphere(int dim, Rng& rng) {
    if (dim < 1) throw std::invalid_argument("sample_unit_sphere: dim must be >= 1");
    if (dim == 1) {
        // sign of a normal draw; normalizing through sqrt(x*x) would cost an ulp
        return Direction{{rng.normal() >= 0.0 ? 1.0 : -1.0}};
    }
    for (;;) {
        ParamVector u = rng.normal_vec(static_cast<std::size_t>(dim));
        const double n = norm(u);
        if (n < 1e-8) continue;
        scale(u, 1.0 / n);
        return Direction{std::move(u)};
    }
}

namespace detail {

// Accumulates c * u into acc where the probe points x + delta*u / base - delta*u
// are built in caller-owned scratch buffers to avoid per-term allocations.
inline void displace(const ParamVector& base, const ParamVector& u, double delta,
                     ParamVector& out) {
    out.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + delta * u[i];
}

}  // namespace detail

// Two-point zeroth-order estimator of the smoothed gradient:
//   (1/b) sum_i (1/d) sum_j (d/2delta) (f(x+delta*u_ij, z_i) - f(x-delta*u_ij, z_i)) u_ij
// with b*d fresh i.i.d. sphere directions drawn in row-major (i outer, j inner)
// order, so sensitivity probes can replay them from the same seed. Uses exactly
// 2*b*d objective evaluations.
template <class F, class Z>
GradEstimate grad_estimate(F&& f, const SmoothingParams& sp, const ParamVector& x,
                           std::span<const Z> batch, Rng& rng) {
    sp.validate();
    if (batch.empty()) throw std::invalid_argument("grad_estimate: empty batch");
    if (static_cast<int>(x.size()) != sp.dim)
        throw std::invalid_argument("grad_estimate: x dimension does not match SmoothingParams");

    const int d = sp.dim;
    const double coeff = static_cast<double>(d) / (2.0 * sp.delta);
    ParamVector acc = zeros(x.size());
    ParamVector plus, minus;
    for (const Z& z : batch) {
        for (int j = 0; j < d; ++j) {
            Direction dir = sample_unit_sphere(d, rng);
            detail::displace(x, dir.u, sp.delta, plus);
            detail::displace(x, dir.u, -sp.delta, minus);
            const double c = coeff * (f(plus, z) - f(minus, z));
            axpy(c, dir.u, acc);
        }
    }
    scale(acc, 1.0 / (static_cast<double>(batch.size()) * d));
    return GradEstimate{std::move(acc)};
}

// Zeroth-order estimator of the smoothed-gradient difference:
//   (1/b) sum_i (1/d) sum_j (d/delta) (f(x+delta*u_ij, z_i) - f(y+delta*u_ij, z_i)) u_ij
// The same direction u_ij is used at both x and y within a term. Directions are
// drawn in the same row-major order as grad_estimate; 2*b*d evaluations.
template <class F, class Z>
GradEstimate diff_estimate(F&& f, const SmoothingParams& sp, const ParamVector& x,
                           const ParamVector& y, std::span<const Z> batch, Rng& rng) {
    sp.validate();
    if (batch.empty()) throw std::invalid_argument("diff_estimate: empty batch");
    check_same_dim(x, y);
    if (static_cast<int>(x.size()) != sp.dim)
        throw std::invalid_argument("diff_estimate: x dimension does not match SmoothingParams");

    const int d = sp.dim;
    const double coeff = static_cast<double>(d) / sp.delta;
    ParamVector acc = zeros(x.size());
    ParamVector at_x, at_y;
    for (const Z& z : batch) {
        for (int j = 0; j < d; ++j) {
            Direction dir = sample_unit_sphere(d, rng);
            detail::displace(x, dir.u, sp.delta, at_x);
            detail::displace(y, dir.u, sp.delta, at_y);
            const double c = coeff * (f(at_x, z) - f(at_y, z));
            axpy(c, dir.u, acc);
        }
    }
    scale(acc, 1.0 / (static_cast<double>(batch.size()) * d));
    return GradEstimate{std::move(acc)};
}

// High-accuracy Monte-Carlo estimate of the smoothed gradient, averaging the
// two-point form over n_samples fresh (direction, data) pairs. Test oracle
// only; the optimizer never calls this.
template <class F, class Sampler>
ParamVector smoothed_grad_reference(F&& f, const SmoothingParams& sp, const ParamVector& x,
                                    Sampler&& sample_data, long n_samples, Rng& rng) {
    sp.validate();
    if (n_samples < 1) throw std::invalid_argument("smoothed_grad_reference: n_samples must be >= 1");

    const int d = sp.dim;
    const double coeff = static_cast<double>(d) / (2.0 * sp.delta);
    ParamVector acc = zeros(x.size());
    ParamVector plus, minus;
    for (long s = 0; s < n_samples; ++s) {
        auto z = sample_data(rng);
        Direction dir = sample_unit_sphere(d, rng);
        detail::displace(x, dir.u, sp.delta, plus);
        detail::displace(x, dir.u, -sp.delta, minus);
        const double c = coeff * (f(plus, z) - f(minus, z));
        axpy(c, dir.u, acc);
    }
    scale(acc, 1.0 / static_cast<double>(n_samples));
    return acc;
}

struct MeanStderr {
    double mean;
    double stderr_;
};

// Monte-Carlo estimate of the smoothed value F_hat_delta(x) with its standard
// error. Ball samples are sphere directions scaled by U^(1/d). Test oracle.
template <class F, class Sampler>
MeanStderr smoothed_value_reference(F&& f, const SmoothingParams& sp, const ParamVector& x,
                                    Sampler&& sample_data, long n_samples, Rng& rng) {
    sp.validate();
    if (n_samples < 1) throw std::invalid_argument("smoothed_value_reference: n_samples must be >= 1");

    double mean = 0.0, m2 = 0.0;
    ParamVector probe;
    for (long s = 0; s < n_samples; ++s) {
        auto z = sample_data(rng);
        Direction dir = sample_unit_sphere(sp.dim, rng);
        const double r = std::pow(rng.uniform_pos(), 1.0 / sp.dim);
        detail::displace(x, dir.u, sp.delta * r, probe);
        const double v = f(probe, z);
        const double delta_v = v - mean;
        mean += delta_v / static_cast<double>(s + 1);
        m2 += delta_v * (v - mean);
    }
    const double var = n_samples > 1 ? m2 / static_cast<double>(n_samples - 1) : 0.0;
    return MeanStderr{mean, std::sqrt(var / static_cast<double>(n_samples))};
}

}  // namespace po2nc
