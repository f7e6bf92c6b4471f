#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "po2nc/vec.hpp"

namespace po2nc {

// splitmix64 finalizer; used both as the seed mixer for derived streams and
// to decorrelate user-provided seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic seed for a named sub-stream of a master seed. Streams are
// addressed by (tag, a, b); every consumer of randomness in a run owns a
// distinct address, so replays and concurrent replicates never share draws.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = mix64(master ^ tag);
    h = mix64(h ^ a);
    return mix64(h ^ b);
}

// Seeded random stream with fixed, documented draw counts per call:
//   uniform()       1 raw 64-bit draw
//   uniform_pos()   1 raw draw
//   normal()        2 raw draws (cache-free Box-Muller)
//   normal_vec(d)   2*d raw draws
//   uniform_int(n)  1 raw draw (Lemire multiply-shift; bias < n/2^64)
// std::normal_distribution is avoided on purpose: its internal cache makes
// the draw count per call depend on history, which breaks replay tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((raw() >> 11) + 1) * 0x1.0p-53; }

    // Standard normal, always consuming exactly two raw draws.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    ParamVector normal_vec(std::size_t dim) {
        ParamVector v(dim);
        for (double& x : v) x = normal();
        return v;
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(raw()) * n) >> 64);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace po2nc
