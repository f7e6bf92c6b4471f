#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "po2nc/vec.hpp"

namespace po2nc {

// Euclidean projection onto the ball of radius D: x if |x| <= D, else D*x/|x|.
inline ParamVector project_ball(const ParamVector& x, double D) {
    if (D <= 0.0) throw std::invalid_argument("project_ball: D must be > 0");
    const double n = norm(x);
    if (n <= D) return x;
    return scaled(x, D / n);
}

// Projected Online Subgradient Descent over the ball of radius D with the
// adaptive stepsize eta_t = D / sqrt(sum_{i<=t} |g_i|^2). Delta_1 = 0 on a
// fresh state; step(g) consumes one linear loss and produces the next output.
class OsdState {
public:
    OsdState(std::size_t dim, double radius)
        : delta_vec_(zeros(dim)), radius_(radius) {
        if (radius <= 0.0) throw std::invalid_argument("OsdState: radius must be > 0");
        if (dim == 0) throw std::invalid_argument("OsdState: dim must be >= 1");
    }

    // Current output Delta_t; always |Delta| <= radius.
    const ParamVector& delta() const { return delta_vec_; }
    double radius() const { return radius_; }
    double grad_sq_sum() const { return grad_sq_sum_; }
    int step_count() const { return step_count_; }

    // Delta_{t+1} = Pi_D(Delta_t - eta_t g) with eta_t = D/sqrt(grad_sq_sum);
    // a zero-gradient prefix keeps Delta at 0 (eta undefined, zero step).
    const ParamVector& step(const ParamVector& g) {
        check_same_dim(g, delta_vec_);
        grad_sq_sum_ += norm_sq(g);
        ++step_count_;
        if (grad_sq_sum_ > 0.0) {
            const double eta = radius_ / std::sqrt(grad_sq_sum_);
            ParamVector next = delta_vec_;
            axpy(-eta, g, next);
            delta_vec_ = project_ball(next, radius_);
        }
        return delta_vec_;
    }

private:
    ParamVector delta_vec_;
    double radius_;
    double grad_sq_sum_ = 0.0;
    int step_count_ = 0;
};

struct RegretReport {
    double regret;  // against the worst-case linear comparator u* = -D*sum(g)/|sum(g)|
    double bound;   // 2*D*sqrt(sum |g_t|^2), the adaptive-stepsize guarantee
};

// Evaluates realized regret sum_t <g_t, Delta_t - u*> for the comparator that
// maximizes it over the ball, u* = -D*(sum g_t)/|sum g_t| (u* = 0 when the
// gradients sum to zero), together with the 2*D*sqrt(sum |g_t|^2) bound.
inline RegretReport regret_audit(std::span<const ParamVector> deltas,
                                 std::span<const ParamVector> grads, double D) {
    if (deltas.size() != grads.size())
        throw std::invalid_argument("regret_audit: sequences must have equal length");
    if (D <= 0.0) throw std::invalid_argument("regret_audit: D must be > 0");
    if (deltas.empty()) return RegretReport{0.0, 0.0};

    ParamVector grad_sum = zeros(grads[0].size());
    double inner_sum = 0.0;
    double grad_sq_sum = 0.0;
    for (std::size_t t = 0; t < grads.size(); ++t) {
        inner_sum += dot(grads[t], deltas[t]);
        axpy(1.0, grads[t], grad_sum);
        grad_sq_sum += norm_sq(grads[t]);
    }
    const double regret = inner_sum + D * norm(grad_sum);
    return RegretReport{regret, 2.0 * D * std::sqrt(grad_sq_sum)};
}

// Same audit from per-epoch accumulators, so optimization traces do not need
// to retain the full gradient sequence.
inline RegretReport regret_audit_from_sums(double inner_sum, const ParamVector& grad_sum,
                                           double grad_sq_sum, double D) {
    if (D <= 0.0) throw std::invalid_argument("regret_audit_from_sums: D must be > 0");
    return RegretReport{inner_sum + D * norm(grad_sum), 2.0 * D * std::sqrt(grad_sq_sum)};
}

}  // namespace po2nc
