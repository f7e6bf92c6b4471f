#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "po2nc/rng.hpp"
#include "po2nc/smoothing.hpp"
#include "po2nc/vec.hpp"

namespace po2nc {

// Opaque data point consumed by a stochastic objective. Which parts are
// meaningful depends on the objective; the regression objectives read
// (a, b), the synthetic test objectives ignore z entirely.
struct DataPoint {
    ParamVector a;
    double b = 0.0;
};

using Dataset = std::vector<DataPoint>;
using DataBatch = std::span<const DataPoint>;

// A stochastic objective F(x) = E_z[f(x, z)] with a known Lipschitz constant,
// an almost-everywhere gradient, and (where available) a closed-form smoothed
// gradient. Immutable after construction; safe for concurrent evaluation.
class StochasticObjective {
public:
    virtual ~StochasticObjective() = default;

    virtual double value(const ParamVector& x, const DataPoint& z) const = 0;

    // Gradient of f(., z), defined off a measure-zero set. Kink hits resolve
    // by the right-limit convention documented per objective.
    virtual ParamVector grad_ae(const ParamVector& x, const DataPoint& z) const = 0;

    virtual double lipschitz() const = 0;
    virtual int dim() const = 0;

    virtual std::optional<ParamVector> smoothed_grad_closed_form(const ParamVector& /*x*/,
                                                                 double /*delta*/) const {
        return std::nullopt;
    }

    // Fresh draw from the population data distribution.
    virtual DataPoint sample_data(Rng& rng) const = 0;

    // Adapters for the estimator templates.
    auto fn() const {
        return [this](const ParamVector& x, const DataPoint& z) { return value(x, z); };
    }
    auto sampler() const {
        return [this](Rng& rng) { return sample_data(rng); };
    }
};

namespace detail {

class LinearObjective final : public StochasticObjective {
public:
    explicit LinearObjective(ParamVector a) : a_(std::move(a)), norm_a_(norm(a_)) {
        if (norm_a_ == 0.0) throw std::invalid_argument("make_linear: a must be nonzero");
    }

    double value(const ParamVector& x, const DataPoint&) const override { return dot(a_, x); }
    ParamVector grad_ae(const ParamVector&, const DataPoint&) const override { return a_; }
    double lipschitz() const override { return norm_a_; }
    int dim() const override { return static_cast<int>(a_.size()); }
    std::optional<ParamVector> smoothed_grad_closed_form(const ParamVector&,
                                                         double) const override {
        return a_;
    }
    DataPoint sample_data(Rng&) const override { return DataPoint{}; }  // z is ignored

private:
    ParamVector a_;
    double norm_a_;
};

class QuadraticObjective final : public StochasticObjective {
public:
    QuadraticObjective(int dim, double radius) : dim_(dim), radius_(radius) {
        if (dim < 1) throw std::invalid_argument("make_quadratic: dim must be >= 1");
        if (radius <= 0.0) throw std::invalid_argument("make_quadratic: radius must be > 0");
    }

    double value(const ParamVector& x, const DataPoint&) const override {
        return 0.5 * norm_sq(x);
    }
    ParamVector grad_ae(const ParamVector& x, const DataPoint&) const override { return x; }
    // Lipschitz only on the ball |x| <= radius; test objective, callers keep
    // iterates inside that ball.
    double lipschitz() const override { return radius_; }
    int dim() const override { return dim_; }
    std::optional<ParamVector> smoothed_grad_closed_form(const ParamVector& x,
                                                         double) const override {
        return x;  // smoothing adds the constant delta^2*d/(2(d+2)), gradient unchanged
    }
    DataPoint sample_data(Rng&) const override { return DataPoint{}; }  // z is ignored

private:
    int dim_;
    double radius_;
};

class PiecewiseLinearObjective final : public StochasticObjective {
public:
    PiecewiseLinearObjective(int dim, bool capped, double cap, double label_noise,
                             ParamVector x_star)
        : dim_(dim), capped_(capped), cap_(cap), label_noise_(label_noise),
          x_star_(std::move(x_star)) {
        if (dim < 1) throw std::invalid_argument("piecewise objective: dim must be >= 1");
        if (capped && cap <= 0.0) throw std::invalid_argument("piecewise objective: cap must be > 0");
        if (label_noise < 0.0)
            throw std::invalid_argument("piecewise objective: label_noise must be >= 0");
    }

    double value(const ParamVector& x, const DataPoint& z) const override {
        const double r = std::abs(dot(z.a, x) - z.b);
        return capped_ ? std::min(r, cap_) : r;
    }

    // Residual kinks resolve to the right limit: sign(0) = +1, and the flat
    // region of the capped loss is |residual| >= cap.
    ParamVector grad_ae(const ParamVector& x, const DataPoint& z) const override {
        const double r = dot(z.a, x) - z.b;
        if (capped_ && std::abs(r) >= cap_) return zeros(x.size());
        return r >= 0.0 ? z.a : scaled(z.a, -1.0);
    }

    double lipschitz() const override { return 1.0; }
    int dim() const override { return dim_; }

    DataPoint sample_data(Rng& rng) const override {
        DataPoint z;
        z.a = sample_unit_sphere(dim_, rng).u;
        z.b = dot(z.a, x_star_) + label_noise_ * (2.0 * rng.uniform() - 1.0);
        return z;
    }

private:
    int dim_;
    bool capped_;
    double cap_;
    double label_noise_;
    ParamVector x_star_;
};

}  // namespace detail

// f(x, z) = <a, x> for all z; L = |a|; the smoothed gradient is a itself.
inline std::unique_ptr<StochasticObjective> make_linear(ParamVector a) {
    return std::make_unique<detail::LinearObjective>(std::move(a));
}

// f(x, z) = 0.5*|x|^2 (z ignored); grad of the smoothing is the identity.
// Test-only objective: Lipschitz with L = radius on the ball |x| <= radius.
inline std::unique_ptr<StochasticObjective> make_quadratic(int dim, double radius = 4.0) {
    return std::make_unique<detail::QuadraticObjective>(dim, radius);
}

struct RegressionProblem {
    std::unique_ptr<StochasticObjective> objective;
    Dataset dataset;
    ParamVector x_star;  // planted parameter, for diagnostics
};

// Nonsmooth regression benchmark: data z = (a_z, b_z) with a_z uniform on the
// unit sphere and b_z = <a_z, x*> + label_noise * U[-1, 1] for a hidden
// unit-norm x*. The plain loss |<a_z, x> - b_z| is convex per sample; the
// capped variant min(|<a_z, x> - b_z|, cap) is nonconvex. L = 1 either way.
inline RegressionProblem make_piecewise_linear_regression(int dim, long n_data, Rng& rng,
                                                          bool capped = false,
                                                          double cap = 1.0,
                                                          double label_noise = 0.0) {
    if (n_data < 1) throw std::invalid_argument("make_piecewise_linear_regression: n_data must be >= 1");
    ParamVector x_star = sample_unit_sphere(dim, rng).u;
    auto obj = std::make_unique<detail::PiecewiseLinearObjective>(dim, capped, cap, label_noise,
                                                                  x_star);
    Dataset data;
    data.reserve(static_cast<std::size_t>(n_data));
    for (long i = 0; i < n_data; ++i) data.push_back(obj->sample_data(rng));
    return RegressionProblem{std::move(obj), std::move(data), std::move(x_star)};
}

// Dataset rows serialized as "a_1,...,a_d,b" per line.
inline void write_dataset_csv(std::FILE* out, const Dataset& data) {
    for (const DataPoint& z : data) {
        for (double v : z.a) std::fprintf(out, "%.17g,", v);
        std::fprintf(out, "%.17g\n", z.b);
    }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
    write_dataset_csv(out, data);
    std::fclose(out);
}

}  // namespace po2nc
