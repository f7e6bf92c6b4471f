#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "po2nc/objectives.hpp"
#include "po2nc/rng.hpp"
#include "po2nc/smoothing.hpp"
#include "po2nc/vec.hpp"

namespace po2nc {

enum class CertificateKind { inner_average, ball_sample };

// A stochastic upper bound on the Goldstein norm |grad F(.)|_delta: the norm
// of an average of population gradients over points inside a delta-ball. The
// true quantity is an inf over all such averages, so any single evaluation is
// an upper bound, never the inf itself. n_samples reports the sampling
// effort: data draws per point for the inner average, averaged ball points
// for the ball sample.
struct Certificate {
    double value = 0.0;
    CertificateKind kind = CertificateKind::inner_average;
    long n_samples = 0;
};

namespace detail {

// Monte-Carlo population gradient E_z[grad_ae(w, z)] over n_mc fresh draws.
inline ParamVector population_grad(const StochasticObjective& obj, const ParamVector& w,
                                   long n_mc, Rng& rng) {
    ParamVector acc = zeros(w.size());
    for (long i = 0; i < n_mc; ++i) {
        const DataPoint z = obj.sample_data(rng);
        axpy(1.0, obj.grad_ae(w, z), acc);
    }
    scale(acc, 1.0 / static_cast<double>(n_mc));
    return acc;
}

}  // namespace detail

// |(1/T) sum_t g^(w_t)| over the epoch's query points, a valid certificate for
// |grad F(w_bar)|_delta because every w_t lies within delta of the mean
// (guaranteed by D*T = delta). Points spread wider than delta void the claim
// and are rejected.
inline Certificate inner_average_certificate(const StochasticObjective& obj,
                                             std::span<const ParamVector> w_list, double delta,
                                             long n_mc, Rng& rng) {
    if (w_list.empty()) throw std::invalid_argument("inner_average_certificate: empty point list");
    if (n_mc < 1) throw std::invalid_argument("inner_average_certificate: n_mc must be >= 1");

    ParamVector mean = zeros(w_list.front().size());
    for (const ParamVector& w : w_list) axpy(1.0, w, mean);
    scale(mean, 1.0 / static_cast<double>(w_list.size()));
    for (const ParamVector& w : w_list) {
        const double r = dist(w, mean);
        if (r > delta * (1.0 + 1e-9) + 1e-12)
            throw std::invalid_argument(
                "inner_average_certificate: point at distance " + std::to_string(r) +
                " from the mean exceeds delta = " + std::to_string(delta));
    }

    ParamVector acc = zeros(mean.size());
    for (const ParamVector& w : w_list)
        axpy(1.0, detail::population_grad(obj, w, n_mc, rng), acc);
    scale(acc, 1.0 / static_cast<double>(w_list.size()));
    return Certificate{norm(acc), CertificateKind::inner_average, n_mc};
}

// |(1/n) sum_i g^(y_i)| over y_i drawn uniformly from the ball B(x, delta) --
// one concrete S in the Goldstein inf, hence an upper bound.
inline Certificate ball_sample_certificate(const StochasticObjective& obj, const ParamVector& x,
                                           double delta, int n_points, long n_mc, Rng& rng) {
    if (n_points < 1) throw std::invalid_argument("ball_sample_certificate: n_points must be >= 1");
    if (n_mc < 1) throw std::invalid_argument("ball_sample_certificate: n_mc must be >= 1");
    if (delta <= 0.0) throw std::invalid_argument("ball_sample_certificate: delta must be > 0");

    const int d = static_cast<int>(x.size());
    ParamVector acc = zeros(x.size());
    ParamVector y;
    for (int i = 0; i < n_points; ++i) {
        Direction dir = sample_unit_sphere(d, rng);
        const double r = delta * std::pow(rng.uniform_pos(), 1.0 / d);
        detail::displace(x, dir.u, r, y);
        axpy(1.0, detail::population_grad(obj, y, n_mc, rng), acc);
    }
    scale(acc, 1.0 / static_cast<double>(n_points));
    return Certificate{norm(acc), CertificateKind::ball_sample, n_points};
}

}  // namespace po2nc
