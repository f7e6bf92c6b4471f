#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "po2nc/rng.hpp"
#include "po2nc/vec.hpp"

namespace po2nc {

// Closed interval [lo, hi] of step indices, 1-based.
struct Interval {
    int lo;
    int hi;

    friend bool operator==(const Interval&, const Interval&) = default;
};

inline int ceil_log2(int t) {
    return t <= 1 ? 0 : std::bit_width(static_cast<unsigned>(t - 1));
}

// Interval decomposition of [1, t]: starting from k = 0, for i = 0..ceil(log2 t)
// while k < t, k' = k + 2^(ceil(log2 t) - i); if k' <= t, append (k+1, k') and
// advance k. The intervals correspond to the binary decomposition of t, so they
// are disjoint, consecutive, cover [1, t] exactly, and there are at most
// ceil(log2 t) + 1 of them. node(7) = {(1,4),(5,6),(7,7)}, node(8) = {(1,8)}.
inline std::vector<Interval> node(int t) {
    if (t < 1) throw std::invalid_argument("node: t must be >= 1");
    const int c = ceil_log2(t);
    std::vector<Interval> s;
    std::int64_t k = 0;
    for (int i = 0; i <= c && k < t; ++i) {
        const std::int64_t kp = k + (std::int64_t{1} << (c - i));
        if (kp <= t) {
            s.push_back(Interval{static_cast<int>(k + 1), static_cast<int>(kp)});
            k = kp;
        }
    }
    return s;
}

// Per-epoch noise store for the tree mechanism. Holds exactly the noise
// vectors xi_i that have been drawn so far this epoch, keyed by the interval
// right-endpoint i; each is N(0, sigma_i^2 I_dim) at first use.
struct TreeState {
    int horizon = 0;
    int dim = 0;
    std::vector<double> sigma;                // sigma[i-1] is the scale of xi_i
    std::map<int, ParamVector> noise_store;   // right-endpoint -> xi
    int last_t = 0;                           // order enforcement within an epoch

    TreeState() = default;

    TreeState(int horizon_, int dim_, std::vector<double> sigma_)
        : horizon(horizon_), dim(dim_), sigma(std::move(sigma_)) {
        if (horizon < 1) throw std::invalid_argument("TreeState: horizon must be >= 1");
        if (dim < 1) throw std::invalid_argument("TreeState: dim must be >= 1");
        if (static_cast<int>(sigma.size()) != horizon)
            throw std::invalid_argument("TreeState: sigma schedule must have horizon entries");
        for (double s : sigma)
            if (s < 0.0) throw std::invalid_argument("TreeState: sigma must be >= 0");
    }

    TreeState(int horizon_, int dim_, double uniform_sigma)
        : TreeState(horizon_, dim_, std::vector<double>(static_cast<std::size_t>(horizon_),
                                                        uniform_sigma)) {}
};

// Clears the noise store; marks the start of a new epoch.
inline void tree_reset(TreeState& state) {
    state.noise_store.clear();
    state.last_t = 0;
}

// Returns sum of xi_i over the right-endpoints of node(t), lazily drawing each
// missing xi_i ~ N(0, sigma_i^2 I) in increasing endpoint order. Queries must
// come in strictly increasing t within an epoch; a query at t = 1 starts a
// fresh epoch (Noise <- {}). The normal draw happens even when sigma_i = 0 so
// the stream position does not depend on the schedule.
inline ParamVector tree_noise(TreeState& state, int t, Rng& rng) {
    if (t < 1 || t > state.horizon)
        throw std::invalid_argument("tree_noise: t out of range [1, horizon]");
    if (t == 1)
        tree_reset(state);
    else if (t <= state.last_t)
        throw std::logic_error("tree_noise: queries must be made in increasing t");

    ParamVector total = zeros(static_cast<std::size_t>(state.dim));
    for (const Interval& iv : node(t)) {
        auto it = state.noise_store.find(iv.hi);
        if (it == state.noise_store.end()) {
            ParamVector xi = rng.normal_vec(static_cast<std::size_t>(state.dim));
            scale(xi, state.sigma[static_cast<std::size_t>(iv.hi - 1)]);
            it = state.noise_store.emplace(iv.hi, std::move(xi)).first;
        }
        axpy(1.0, it->second, total);
    }
    state.last_t = t;
    return total;
}

// Releases x_i = (exact running sum of increments 1..i) + Tree(i) for
// i = 1..n. The generator may be adaptive: it receives the sums released so
// far. With sigma identically zero the outputs equal the exact prefix sums
// bit-for-bit.
template <class Gen>
std::vector<ParamVector> private_prefix_sum(Gen&& increments, int n, TreeState& state,
                                            Rng& rng) {
    if (n < 1 || n > state.horizon)
        throw std::invalid_argument("private_prefix_sum: n out of range [1, horizon]");
    std::vector<ParamVector> released;
    released.reserve(static_cast<std::size_t>(n));
    ParamVector running = zeros(static_cast<std::size_t>(state.dim));
    for (int i = 1; i <= n; ++i) {
        ParamVector inc = increments(i, std::span<const ParamVector>(released));
        check_same_dim(inc, running);
        axpy(1.0, inc, running);
        ParamVector out = running;
        axpy(1.0, tree_noise(state, i, rng), out);
        released.push_back(std::move(out));
    }
    return released;
}

}  // namespace po2nc
