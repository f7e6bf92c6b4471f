#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mc_stats.hpp"
#include "po2nc/objectives.hpp"
#include "po2nc/smoothing.hpp"

using namespace po2nc;

namespace {

Dataset dummy_batch(std::size_t n) { return Dataset(n); }

}  // namespace

TEST_CASE("sphere sample in one dimension is +1 or -1, both occurring", "[smoothing]") {
    Rng rng(1);
    int plus = 0, minus = 0;
    for (int i = 0; i < 200; ++i) {
        const Direction d = sample_unit_sphere(1, rng);
        REQUIRE(d.u.size() == 1);
        if (d.u[0] == 1.0) ++plus;
        else if (d.u[0] == -1.0) ++minus;
        else FAIL("unit vector in R^1 must be +1 or -1, got " << d.u[0]);
    }
    REQUIRE(plus > 50);
    REQUIRE(minus > 50);
}

TEST_CASE("sphere samples have unit norm", "[smoothing]") {
    for (std::uint64_t seed : {1ULL, 7ULL, 1234ULL}) {
        Rng rng(seed);
        for (int dim : {1, 2, 3, 8, 57}) {
            const Direction d = sample_unit_sphere(dim, rng);
            REQUIRE(std::abs(norm(d.u) - 1.0) <= 1e-12);
        }
    }
    Rng rng(2);
    REQUIRE_THROWS_AS(sample_unit_sphere(0, rng), std::invalid_argument);
}

TEST_CASE("sphere samples are coordinate-symmetric", "[smoothing]") {
    Rng rng(5);
    const long n = 100000;
    testutil::VectorStats stats(3);
    for (long i = 0; i < n; ++i) stats.add(sample_unit_sphere(3, rng).u);
    const double tol = 3.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(stats.mean()[static_cast<std::size_t>(i)]) <= tol);
}

TEST_CASE("grad_estimate is exact for linear objectives in one dimension", "[smoothing]") {
    auto obj = make_linear({2.5});
    const SmoothingParams sp{0.3, 1, obj->lipschitz()};
    const Dataset batch = dummy_batch(3);
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        Rng rng(seed);
        const GradEstimate g = grad_estimate(obj->fn(), sp, {0.7}, DataBatch(batch), rng);
        REQUIRE(g.g[0] == Catch::Approx(2.5).margin(1e-12));
    }
}

TEST_CASE("grad_estimate is unbiased for a linear objective", "[smoothing]") {
    const int d = 8;
    Rng setup(21);
    ParamVector a = sample_unit_sphere(d, setup).u;
    scale(a, 1.7);
    auto obj = make_linear(a);
    const SmoothingParams sp{0.25, d, obj->lipschitz()};
    const Dataset batch = dummy_batch(4);
    const ParamVector x(d, 0.4);

    Rng rng(7);
    testutil::VectorStats stats(d);
    const long n_calls = 20000;
    for (long i = 0; i < n_calls; ++i)
        stats.add(grad_estimate(obj->fn(), sp, x, DataBatch(batch), rng).g);
    for (int i = 0; i < d; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        REQUIRE(std::abs(stats.mean()[idx] - a[idx]) <= 4.0 * stats.stderr_(idx));
    }
}

TEST_CASE("grad_estimate norm never exceeds d*L", "[smoothing]") {
    const int d = 6;
    Rng data_rng(3);
    auto prob = make_piecewise_linear_regression(d, 64, data_rng);
    const SmoothingParams sp{0.1, d, prob.objective->lipschitz()};
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        ParamVector x = rng.normal_vec(d);
        const DataBatch batch(prob.dataset.data() + (rep % 16) * 4, 4);
        const GradEstimate g = grad_estimate(prob.objective->fn(), sp, x, batch, rng);
        REQUIRE(norm(g.g) <= d * sp.lipschitz + 1e-9);
    }
}

TEST_CASE("grad_estimate rejects empty batches and is seed-deterministic", "[smoothing]") {
    auto obj = make_linear({1.0, 1.0});
    const SmoothingParams sp{0.1, 2, obj->lipschitz()};
    Rng rng(1);
    REQUIRE_THROWS_AS(grad_estimate(obj->fn(), sp, {0.0, 0.0}, DataBatch{}, rng),
                      std::invalid_argument);

    const Dataset batch = dummy_batch(2);
    Rng r1(5), r2(5);
    const GradEstimate g1 = grad_estimate(obj->fn(), sp, {0.1, 0.2}, DataBatch(batch), r1);
    const GradEstimate g2 = grad_estimate(obj->fn(), sp, {0.1, 0.2}, DataBatch(batch), r2);
    REQUIRE(g1.g == g2.g);
}

TEST_CASE("diff_estimate at identical points is exactly zero", "[smoothing]") {
    const int d = 5;
    Rng data_rng(9);
    auto prob = make_piecewise_linear_regression(d, 8, data_rng);
    const SmoothingParams sp{0.2, d, 1.0};
    Rng rng(4);
    const ParamVector x = rng.normal_vec(d);
    const GradEstimate g =
        diff_estimate(prob.objective->fn(), sp, x, x, DataBatch(prob.dataset.data(), 4), rng);
    for (double v : g.g) REQUIRE(v == 0.0);
}

TEST_CASE("diff_estimate has zero mean for linear objectives", "[smoothing]") {
    const int d = 4;
    auto obj = make_linear({1.0, -2.0, 0.5, 3.0});
    const SmoothingParams sp{0.2, d, obj->lipschitz()};
    const Dataset batch = dummy_batch(2);
    Rng rng(11);
    const ParamVector x(d, 0.3), y(d, -0.1);
    testutil::VectorStats stats(d);
    for (long i = 0; i < 20000; ++i)
        stats.add(diff_estimate(obj->fn(), sp, x, y, DataBatch(batch), rng).g);
    for (int i = 0; i < d; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        REQUIRE(std::abs(stats.mean()[idx]) <= 4.0 * stats.stderr_(idx) + 1e-12);
    }
}

TEST_CASE("diff_estimate mean matches x - y for the quadratic", "[smoothing]") {
    const int d = 4;
    auto obj = make_quadratic(d);
    const SmoothingParams sp{0.1, d, obj->lipschitz()};
    const Dataset batch = dummy_batch(1);
    Rng rng(13);
    const ParamVector x{0.3, -0.2, 0.5, 0.1};
    const ParamVector y{0.25, -0.15, 0.48, 0.14};
    testutil::VectorStats stats(d);
    for (long i = 0; i < 30000; ++i)
        stats.add(diff_estimate(obj->fn(), sp, x, y, DataBatch(batch), rng).g);
    const ParamVector want = sub(x, y);
    for (int i = 0; i < d; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        REQUIRE(std::abs(stats.mean()[idx] - want[idx]) <= 3.0 * stats.stderr_(idx) + 1e-12);
    }
}

TEST_CASE("diff_estimate rejects dimension mismatches", "[smoothing]") {
    auto obj = make_linear({1.0, 1.0});
    const SmoothingParams sp{0.1, 2, obj->lipschitz()};
    const Dataset batch = dummy_batch(1);
    Rng rng(1);
    REQUIRE_THROWS_AS(
        diff_estimate(obj->fn(), sp, {0.0, 0.0}, {0.0, 0.0, 0.0}, DataBatch(batch), rng),
        std::invalid_argument);
}

TEST_CASE("smoothed_grad_reference recovers closed forms", "[smoothing]") {
    const int d = 4;
    Rng setup(2);
    ParamVector a = sample_unit_sphere(d, setup).u;
    auto lin = make_linear(a);
    const SmoothingParams sp{0.2, d, lin->lipschitz()};
    Rng rng(3);
    const long n = 200000;
    const ParamVector ref =
        smoothed_grad_reference(lin->fn(), sp, ParamVector(d, 0.1), lin->sampler(), n, rng);
    // per-sample component std is bounded by d*L
    const double tol = 4.0 * d * sp.lipschitz / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < d; ++i)
        REQUIRE(std::abs(ref[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)]) <= tol);

    auto quad = make_quadratic(d);
    const SmoothingParams spq{0.15, d, quad->lipschitz()};
    const ParamVector x{0.5, -0.3, 0.2, 0.0};
    Rng rngq(4);
    const ParamVector refq = smoothed_grad_reference(quad->fn(), spq, x, quad->sampler(), n, rngq);
    const double tolq = 4.0 * d * 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < d; ++i)
        REQUIRE(std::abs(refq[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]) <= tolq);
}

TEST_CASE("one-sample reference in one dimension is exact for linear", "[smoothing]") {
    auto obj = make_linear({-1.25});
    const SmoothingParams sp{0.4, 1, obj->lipschitz()};
    Rng rng(8);
    const ParamVector ref = smoothed_grad_reference(obj->fn(), sp, {0.9}, obj->sampler(), 1, rng);
    REQUIRE(ref[0] == Catch::Approx(-1.25).margin(1e-12));
}

TEST_CASE("smoothed value stays within L*delta of the raw value", "[smoothing]") {
    const int d = 6;
    Rng data_rng(31);
    auto prob = make_piecewise_linear_regression(d, 8, data_rng);
    const double delta = 0.3;
    const SmoothingParams sp{delta, d, prob.objective->lipschitz()};
    Rng rng(6);
    const ParamVector x = rng.normal_vec(d);

    // population F(x) and F_hat(x) by Monte-Carlo over the data distribution
    testutil::ScalarStats fx;
    Rng frng(7);
    for (long i = 0; i < 200000; ++i) fx.add(prob.objective->value(x, prob.objective->sample_data(frng)));
    const MeanStderr fs = smoothed_value_reference(prob.objective->fn(), sp, x,
                                                   prob.objective->sampler(), 200000, rng);
    const double tol = 4.0 * (fs.stderr_ + fx.stderr_());
    REQUIRE(std::abs(fs.mean - fx.mean()) <= sp.lipschitz * delta + tol);
}

TEST_CASE("quadratic smoothing bias at the origin is delta^2*d/(2(d+2))", "[smoothing]") {
    const int d = 4;
    auto obj = make_quadratic(d);
    const double delta = 0.5;
    const SmoothingParams sp{delta, d, obj->lipschitz()};
    Rng rng(12);
    const MeanStderr fs =
        smoothed_value_reference(obj->fn(), sp, zeros(d), obj->sampler(), 400000, rng);
    const double want = delta * delta * d / (2.0 * (d + 2.0));
    REQUIRE(std::abs(fs.mean - want) <= 4.0 * fs.stderr_);
}
