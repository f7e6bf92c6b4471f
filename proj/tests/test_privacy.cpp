#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "mc_stats.hpp"
#include "po2nc/objectives.hpp"
#include "po2nc/privacy.hpp"
#include "po2nc/smoothing.hpp"

using namespace po2nc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("sigma_schedule matches the closed form", "[privacy]") {
    const double got = sigma_schedule(4, 1.0, 1, 16, 1.0);
    const double want = std::sqrt(2.0 * std::log(16.0));  // 4dL/(B2*T) = 1 here
    REQUIRE(std::abs(got - want) <= 1e-12 * want);

    REQUIRE(sigma_schedule(4, 1.0, 1, 16, kInf) == 0.0);

    const double s16 = sigma_schedule(4, 1.0, 1, 16, 1.0);
    const double s32 = sigma_schedule(4, 1.0, 1, 32, 1.0);
    const double want_ratio = std::sqrt(std::log(32.0) / std::log(16.0)) * 16.0 / 32.0;
    REQUIRE(s32 / s16 == Catch::Approx(want_ratio).epsilon(1e-12));
    REQUIRE(s32 / s16 == Catch::Approx(0.559016994).epsilon(1e-6));

    REQUIRE_THROWS_AS(sigma_schedule(4, 1.0, 1, 1, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(sigma_schedule(0, 1.0, 1, 16, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(sigma_schedule(4, 1.0, 1, 16, -1.0), std::invalid_argument);
}

TEST_CASE("sensitivity bounds follow the estimator lemmas", "[privacy]") {
    const SensitivityBounds b = sensitivity_bounds(2, 1.0, 8, 1, 0.5, 0.1);
    REQUIRE(b.grad.s == Catch::Approx(0.5).epsilon(1e-15));  // 2dL/B1
    REQUIRE(b.grad.source == "grad_estimate");
    REQUIRE(b.diff.s == Catch::Approx(2.0 * 2.0 * 1.0 * 0.2 / 0.5).epsilon(1e-15));

    // with D = delta/T the diff bound is 4dL/(B2*T)
    for (int T : {4, 16, 128}) {
        for (int d : {1, 3, 8}) {
            const double delta = 0.3;
            const SensitivityBounds sb =
                sensitivity_bounds(d, 2.0, T + 1, 1, delta, delta / T);
            REQUIRE(sb.diff.s == Catch::Approx(4.0 * d * 2.0 / T).epsilon(1e-12));
            // B1 = T+1 >= T*B2/2, so the diff bound dominates
            REQUIRE(sb.grad.s <= sb.diff.s * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("sigma schedule calibrates the diff sensitivity to rho exactly", "[privacy]") {
    for (int T : {2, 8, 64, 1024}) {
        for (int d : {1, 4, 16}) {
            for (double rho : {0.25, 1.0, 3.0}) {
                const double L = 1.5;
                const int B2 = 2;
                const double delta = 0.7;
                const double sigma = sigma_schedule(d, L, B2, T, rho);
                const SensitivityBounds sb =
                    sensitivity_bounds(d, L, T * B2, B2, delta, delta / T);
                const double implied = std::sqrt(2.0 * std::log(static_cast<double>(T))) *
                                       sb.diff.s / sigma;
                REQUIRE(std::abs(implied - rho) <= 1e-12 * rho);
            }
        }
    }
}

TEST_CASE("rdp to dp conversion", "[privacy]") {
    REQUIRE(rdp_to_dp(1.0, std::exp(-1.0)) == Catch::Approx(2.0).epsilon(1e-12));
    REQUIRE(rdp_to_dp(0.7, 1.0) == 0.0);
    REQUIRE(rdp_to_dp(0.5, 0.78) ==
            Catch::Approx(2.0 * 0.5 * std::sqrt(std::log(1.0 / 0.78))).epsilon(1e-12));
    REQUIRE(rdp_to_dp(0.5, 0.78) == Catch::Approx(0.4985).margin(5e-4));
    REQUIRE_THROWS_AS(rdp_to_dp(1.0, 0.9 * std::exp(-1.0)), std::out_of_range);
    REQUIRE_THROWS_AS(rdp_to_dp(kInf, 0.5), std::invalid_argument);
}

namespace {

// grad_estimate with directions frozen by a fixed seed, as the probe requires
auto frozen_grad_step(const StochasticObjective& obj, const SmoothingParams& sp,
                      const ParamVector& x, std::uint64_t dir_seed) {
    return [&obj, sp, x, dir_seed](DataBatch batch) {
        Rng rng(dir_seed);
        return grad_estimate(obj.fn(), sp, x, batch, rng).g;
    };
}

}  // namespace

TEST_CASE("probe with identical replacements reports zero", "[privacy]") {
    auto obj = make_quadratic(3);
    const SmoothingParams sp{0.2, 3, obj->lipschitz()};
    Dataset batch(4);  // quadratic ignores z, so every neighbor is identical
    Rng rng(5);
    const double got = empirical_sensitivity_probe(
        frozen_grad_step(*obj, sp, {0.1, 0.2, 0.3}, 77), DataBatch(batch), 20,
        [](Rng&) { return DataPoint{}; }, rng);
    REQUIRE(got == 0.0);
}

TEST_CASE("one-dimensional sign flip attains the grad sensitivity bound", "[privacy]") {
    // f(x, z) = L*<z.a, x> with z.a = +-1: the estimate is L*z.a exactly, so a
    // sign flip moves the output by 2L = 2dL/b.
    struct SignedLinear final : StochasticObjective {
        double value(const ParamVector& x, const DataPoint& z) const override {
            return 2.0 * z.a[0] * x[0];
        }
        ParamVector grad_ae(const ParamVector&, const DataPoint& z) const override {
            return {2.0 * z.a[0]};
        }
        double lipschitz() const override { return 2.0; }
        int dim() const override { return 1; }
        DataPoint sample_data(Rng&) const override { return DataPoint{{1.0}, 0.0}; }
    } obj;

    const SmoothingParams sp{0.3, 1, obj.lipschitz()};
    Dataset batch{DataPoint{{1.0}, 0.0}};
    Rng rng(9);
    const double got = empirical_sensitivity_probe(
        frozen_grad_step(obj, sp, {0.5}, 123), DataBatch(batch), 5,
        [](Rng&) { return DataPoint{{-1.0}, 0.0}; }, rng);
    const double bound = 2.0 * 1 * obj.lipschitz() / 1;  // 2dL/b
    REQUIRE(got >= 0.99 * bound);
    REQUIRE(got <= bound + 1e-9);
}

TEST_CASE("probe never exceeds the analytic bounds on the regression objective", "[privacy]") {
    for (int d : {1, 2, 4}) {
        for (int b : {1, 2}) {
            Rng data_rng(100 + d);
            auto prob = make_piecewise_linear_regression(d, 16, data_rng);
            const double L = prob.objective->lipschitz();
            const SmoothingParams sp{0.2, d, L};
            Rng setup(d * 10 + b);
            const ParamVector x = setup.normal_vec(static_cast<std::size_t>(d));
            Dataset batch(prob.dataset.begin(), prob.dataset.begin() + b);
            Rng rng(55);
            auto replace = [&prob](Rng& r) { return prob.objective->sample_data(r); };
            const double got = empirical_sensitivity_probe(
                frozen_grad_step(*prob.objective, sp, x, 31), DataBatch(batch), 50, replace,
                rng);
            REQUIRE(got <= 2.0 * d * L / b + 1e-9);
        }
    }
}
