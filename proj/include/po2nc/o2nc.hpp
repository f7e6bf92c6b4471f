#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "po2nc/objectives.hpp"
#include "po2nc/oco.hpp"
#include "po2nc/privacy.hpp"
#include "po2nc/rng.hpp"
#include "po2nc/smoothing.hpp"
#include "po2nc/tree.hpp"
#include "po2nc/vec.hpp"

namespace po2nc {

enum class OracleKind { tree, naive, exact_debug };

// Thrown by plan_run when no valid schedule exists for the given data budget;
// carries the minimal feasible M in its message. The CLI maps this to exit
// code 2.
struct InfeasiblePlanError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline const char* to_string(OracleKind k) {
    switch (k) {
        case OracleKind::tree: return "tree";
        case OracleKind::naive: return "naive";
        case OracleKind::exact_debug: return "exact-debug";
    }
    return "?";
}

inline OracleKind oracle_kind_from_string(const std::string& s) {
    if (s == "tree") return OracleKind::tree;
    if (s == "naive") return OracleKind::naive;
    if (s == "exact-debug") return OracleKind::exact_debug;
    throw std::invalid_argument("unknown oracle kind: " + s);
}

// Named sub-stream tags of a run's master seed; every consumer of randomness
// sits at a documented address so tests can replay any single stream.
namespace stream {
inline constexpr std::uint64_t shuffle = 0x5348554646ULL;      // dataset shuffle
inline constexpr std::uint64_t interp = 0x53ULL;               // s_t^k draws
inline constexpr std::uint64_t oracle_dir = 0x446952ULL;       // estimator directions, per (k,t)
inline constexpr std::uint64_t tree_noise = 0x54524545ULL;     // tree xi draws, per epoch k
inline constexpr std::uint64_t naive_noise = 0x4e4f495345ULL;  // naive xi draws, per (k,t)
inline constexpr std::uint64_t pick = 0x5049434bULL;           // final output index
}  // namespace stream

// All hyperparameters of one optimization run. M is the data actually
// consumed: M = K*(B1 + B2*(T-1)), which equals 2KT under the planner's
// B1 = T+1, B2 = 1.
struct RunPlan {
    int d = 0;
    double delta = 0.0;
    double L = 0.0;
    double F_star = 0.0;
    long M = 0;           // consumed data size, K*(B1 + B2*(T-1))
    long M_requested = 0; // budget given to the planner (surplus unused)
    double rho = std::numeric_limits<double>::infinity();  // +inf = non-private
    int T = 0;
    long K = 0;
    int B1 = 0;
    int B2 = 0;
    double D = 0.0;  // OCO radius, delta/T
    std::uint64_t seed = 0;
    OracleKind oracle_kind = OracleKind::tree;

    bool is_private() const { return std::isfinite(rho); }

    // Constant tree-mechanism noise scale for this plan; 0 when non-private.
    double tree_sigma() const { return sigma_schedule(d, L, B2, T, rho); }

    // Per-release noise scale of the naive oracle (Gaussian mechanism on the
    // one-direction estimator of sensitivity 2dL/B with B = B2); 0 when
    // non-private.
    double naive_sigma() const {
        return is_private() ? static_cast<double>(d) * L / (static_cast<double>(B2) * rho) : 0.0;
    }

    // Data consumed by the oracle actually driving the run: the tree and
    // exact-debug oracles read the (B1, B2) partition, the naive oracle reads
    // K*T uniform batches of size B2.
    long data_needed() const {
        return oracle_kind == OracleKind::naive
                   ? K * static_cast<long>(T) * B2
                   : K * (static_cast<long>(B1) + static_cast<long>(B2) * (T - 1));
    }

    void validate() const {
        if (d < 1 || delta <= 0.0 || L <= 0.0 || F_star <= 0.0)
            throw std::invalid_argument("RunPlan: d, delta, L, F_star must be positive");
        if (std::isnan(rho) || rho <= 0.0)
            throw std::invalid_argument("RunPlan: rho must be > 0 (or +inf for non-private)");
        if (T < 2) throw std::invalid_argument("RunPlan: T must be >= 2");
        if (K < 1 || B1 < 1 || B2 < 1) throw std::invalid_argument("RunPlan: K, B1, B2 must be >= 1");
        if (M != K * (static_cast<long>(B1) + static_cast<long>(B2) * (T - 1)))
            throw std::invalid_argument("RunPlan: M must equal K*(B1 + B2*(T-1))");
        if (std::abs(D - delta / T) > 1e-12 * (delta / T))
            throw std::invalid_argument("RunPlan: D must equal delta/T");
        if (oracle_kind == OracleKind::tree && is_private() &&
            static_cast<double>(B1) < static_cast<double>(T) * B2 / 2.0)
            throw std::invalid_argument("RunPlan: tree oracle requires B1 >= T*B2/2");
    }
};

namespace detail {

inline double theorem_T(int d, double delta, double L, double F_star, double M, double rho) {
    const double dd = static_cast<double>(d);
    const double denom = F_star + L * delta;
    double t = std::pow(std::sqrt(dd) * L * delta * M / denom, 2.0 / 3.0);
    if (std::isfinite(rho))
        t = std::min(t, std::sqrt(std::pow(dd, 1.5) * L * delta * M / (denom * rho)));
    return t;
}

inline bool plan_feasible(int d, double delta, double L, double F_star, long M, double rho) {
    const long T = static_cast<long>(theorem_T(d, delta, L, F_star, static_cast<double>(M), rho));
    return T >= 2 && M / (2 * T) >= 1;
}

inline long minimal_feasible_M(int d, double delta, double L, double F_star, double rho) {
    long hi = 4;
    while (hi < (1L << 60) && !plan_feasible(d, delta, L, F_star, hi, rho)) hi *= 2;
    long lo = hi / 2;
    while (lo + 1 < hi) {
        const long mid = lo + (hi - lo) / 2;
        if (plan_feasible(d, delta, L, F_star, mid, rho)) hi = mid; else lo = mid;
    }
    while (!plan_feasible(d, delta, L, F_star, hi, rho)) ++hi;
    return hi;
}

}  // namespace detail

// Resolves the schedule of one run from the problem constants and the data
// budget: T = min{(sqrt(d) L delta M / (F*+L delta))^(2/3),
//                 (d^(3/2) L delta M / ((F*+L delta) rho))^(1/2)}
// floored to an integer >= 2 (the private branch drops out at rho = +inf),
// then B1 = T+1, B2 = 1, K = floor(M/2T), D = delta/T. Consumes exactly
// 2KT <= M data points; surplus is unused.
inline RunPlan plan_run(int d, double delta, double L, double F_star, long M, double rho) {
    if (d < 1 || delta <= 0.0 || L <= 0.0 || F_star <= 0.0 || M < 1)
        throw std::invalid_argument("plan_run: d, delta, L, F_star, M must be positive");
    if (std::isnan(rho) || rho <= 0.0)
        throw std::invalid_argument("plan_run: rho must be > 0 (or +inf for non-private)");

    const double t_real = detail::theorem_T(d, delta, L, F_star, static_cast<double>(M), rho);
    const long T = static_cast<long>(t_real);
    const long K = T >= 1 ? M / (2 * T) : 0;
    if (T < 2 || K < 1) {
        throw InfeasiblePlanError(
            "plan_run: infeasible (T=" + std::to_string(T) + ", K=" + std::to_string(K) +
            "); minimal feasible M is " +
            std::to_string(detail::minimal_feasible_M(d, delta, L, F_star, rho)));
    }

    RunPlan plan;
    plan.d = d;
    plan.delta = delta;
    plan.L = L;
    plan.F_star = F_star;
    plan.M_requested = M;
    plan.rho = rho;
    plan.T = static_cast<int>(T);
    plan.K = K;
    plan.B1 = static_cast<int>(T) + 1;
    plan.B2 = 1;
    plan.D = delta / static_cast<double>(T);
    plan.M = K * (static_cast<long>(plan.B1) + static_cast<long>(plan.B2) * (plan.T - 1));
    plan.validate();
    return plan;
}

// Contiguous disjoint batches over a seeded shuffle of the dataset. The tree
// partition gives epoch k one batch Z_1^k of size B1 followed by T-1 batches
// of size B2; the uniform partition (naive oracle) gives K*T batches of size
// B2. Surplus points beyond the partition are never touched.
class DataPartition {
public:
    DataPartition(const Dataset& dataset, const RunPlan& plan)
        : T_(plan.T), B1_(plan.B1), B2_(plan.B2),
          uniform_(plan.oracle_kind == OracleKind::naive) {
        const long needed = plan.data_needed();
        if (static_cast<long>(dataset.size()) < needed)
            throw std::invalid_argument("partition_dataset: need " + std::to_string(needed) +
                                        " data points, got " + std::to_string(dataset.size()));
        per_epoch_ = uniform_ ? static_cast<long>(T_) * B2_
                              : static_cast<long>(B1_) + static_cast<long>(B2_) * (T_ - 1);
        shuffled_ = dataset;
        Rng rng(derive_seed(plan.seed, stream::shuffle));
        for (std::size_t i = shuffled_.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
            std::swap(shuffled_[i - 1], shuffled_[j]);
        }
    }

    // Batch Z_t^k, 1-based in both indices.
    DataBatch batch(long k, int t) const {
        const long base = (k - 1) * per_epoch_;
        if (uniform_)
            return DataBatch(shuffled_).subspan(
                static_cast<std::size_t>(base + static_cast<long>(t - 1) * B2_),
                static_cast<std::size_t>(B2_));
        if (t == 1)
            return DataBatch(shuffled_).subspan(static_cast<std::size_t>(base),
                                                static_cast<std::size_t>(B1_));
        return DataBatch(shuffled_).subspan(
            static_cast<std::size_t>(base + B1_ + static_cast<long>(t - 2) * B2_),
            static_cast<std::size_t>(B2_));
    }

private:
    Dataset shuffled_;
    long per_epoch_ = 0;
    int T_, B1_, B2_;
    bool uniform_;
};

inline DataPartition partition_dataset(const Dataset& dataset, const RunPlan& plan) {
    return DataPartition(dataset, plan);
}

// One released gradient estimate, with the norm of the injected noise kept
// separate for audits.
struct OracleResult {
    ParamVector g_tilde;
    double noise_norm = 0.0;
};

namespace detail {

inline void check_step_order(long& cur_k, int& last_t, long k, int t, int T) {
    const bool ok = (k == cur_k && t == last_t + 1 && t <= T) || (k == cur_k + 1 && t == 1);
    if (!ok)
        throw std::logic_error("oracle: steps must arrive in order (k,1..T) with k increasing");
    cur_k = k;
    last_t = t;
}

}  // namespace detail

// Private variance-reduced gradient oracle: g_1^k = Grad(w_1^k, Z_1^k),
// g_t^k = g_{t-1}^k + Diff(w_t^k, w_{t-1}^k, Z_t^k), released as
// g_t^k + Tree(t) with the Corollary-2 sigma schedule. The pre-noise
// recursion is exposed for the zero-noise equivalence audits.
class TreeOracle {
public:
    TreeOracle(const StochasticObjective& obj, const DataPartition& part, const RunPlan& plan)
        : obj_(obj), part_(part), plan_(plan),
          sp_{plan.delta, plan.d, plan.L},
          tree_state_(plan.T, plan.d, plan.tree_sigma()),
          tree_rng_(0) {}

    OracleResult step(long k, int t, const ParamVector& w) {
        detail::check_step_order(cur_k_, last_t_, k, t, plan_.T);
        Rng dir_rng(derive_seed(plan_.seed, stream::oracle_dir, static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(t)));
        if (t == 1) {
            tree_rng_ = Rng(derive_seed(plan_.seed, stream::tree_noise, static_cast<std::uint64_t>(k)));
            tree_reset(tree_state_);
            g_running_ = grad_estimate(obj_.fn(), sp_, w, part_.batch(k, 1), dir_rng).g;
        } else {
            axpy(1.0, diff_estimate(obj_.fn(), sp_, w, w_prev_, part_.batch(k, t), dir_rng).g,
                 g_running_);
        }
        w_prev_ = w;
        const ParamVector noise = tree_noise(tree_state_, t, tree_rng_);
        OracleResult out{g_running_, norm(noise)};
        axpy(1.0, noise, out.g_tilde);
        return out;
    }

    // g_t^k before noise; equals g_1^k + sum_{i=2..t} d_i^k bit-exactly.
    const ParamVector& pre_noise() const { return g_running_; }

private:
    const StochasticObjective& obj_;
    const DataPartition& part_;
    const RunPlan& plan_;
    SmoothingParams sp_;
    TreeState tree_state_;
    Rng tree_rng_;
    ParamVector g_running_;
    ParamVector w_prev_;
    long cur_k_ = 0;
    int last_t_ = 0;
};

// Naive private oracle: a one-direction-per-data-point two-point estimator
// plus per-release Gaussian noise with sigma = dL/(B*rho), B = B2.
class NaiveOracle {
public:
    NaiveOracle(const StochasticObjective& obj, const DataPartition& part, const RunPlan& plan)
        : obj_(obj), part_(part), plan_(plan) {}

    OracleResult step(long k, int t, const ParamVector& w) {
        detail::check_step_order(cur_k_, last_t_, k, t, plan_.T);
        Rng dir_rng(derive_seed(plan_.seed, stream::oracle_dir, static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(t)));
        const DataBatch batch = part_.batch(k, t);
        const int d = plan_.d;
        const double coeff = static_cast<double>(d) / (2.0 * plan_.delta);
        ParamVector g = zeros(w.size());
        ParamVector plus, minus;
        for (const DataPoint& z : batch) {
            Direction dir = sample_unit_sphere(d, dir_rng);
            detail::displace(w, dir.u, plan_.delta, plus);
            detail::displace(w, dir.u, -plan_.delta, minus);
            axpy(coeff * (obj_.value(plus, z) - obj_.value(minus, z)), dir.u, g);
        }
        scale(g, 1.0 / static_cast<double>(batch.size()));

        Rng noise_rng(derive_seed(plan_.seed, stream::naive_noise, static_cast<std::uint64_t>(k),
                                  static_cast<std::uint64_t>(t)));
        ParamVector xi = noise_rng.normal_vec(w.size());
        scale(xi, plan_.naive_sigma());
        OracleResult out{std::move(g), norm(xi)};
        axpy(1.0, xi, out.g_tilde);
        return out;
    }

private:
    const StochasticObjective& obj_;
    const DataPartition& part_;
    const RunPlan& plan_;
    long cur_k_ = 0;
    int last_t_ = 0;
};

// Debug oracle: batch average of the objective's a.e. gradient at w_t^k, no
// smoothing, no noise. Only for harness sanity runs.
class ExactDebugOracle {
public:
    ExactDebugOracle(const StochasticObjective& obj, const DataPartition& part, const RunPlan& plan)
        : obj_(obj), part_(part), plan_(plan) {}

    OracleResult step(long k, int t, const ParamVector& w) {
        detail::check_step_order(cur_k_, last_t_, k, t, plan_.T);
        const DataBatch batch = part_.batch(k, t);
        ParamVector g = zeros(w.size());
        for (const DataPoint& z : batch) axpy(1.0, obj_.grad_ae(w, z), g);
        scale(g, 1.0 / static_cast<double>(batch.size()));
        return OracleResult{std::move(g), 0.0};
    }

private:
    const StochasticObjective& obj_;
    const DataPartition& part_;
    const RunPlan& plan_;
    long cur_k_ = 0;
    int last_t_ = 0;
};

// Per-step audit record of one run.
struct StepRecord {
    long k;
    int t;
    double g_tilde_norm;
    double noise_norm;
    double delta_norm;  // |Delta_t^k| in effect at this step
    double s;           // interpolation draw s_t^k
    ParamVector w;      // query point w_t^k
};

// Per-epoch record: the averaged iterate plus the accumulators the regret
// audit needs. The certificate slot is filled in by the harness.
struct EpochRecord {
    long k;
    ParamVector w_bar;
    double inner_sum = 0.0;    // sum_t <g~_t, Delta_t>
    ParamVector grad_sum;      // sum_t g~_t
    double grad_sq_sum = 0.0;  // sum_t |g~_t|^2
    double certificate = std::numeric_limits<double>::quiet_NaN();
};

struct Trace {
    std::vector<StepRecord> steps;    // K*T records in query order
    std::vector<EpochRecord> epochs;  // K records
    long picked_epoch = 0;            // 1-based index of the returned w_bar^k
};

struct RunResult {
    ParamVector w_bar;
    Trace trace;
};

// Online-to-Nonconvex Conversion: K epochs of T steps driven by projected
// OSD over the radius-D ball. Per step: x_{t+1} = x_t + Delta_t,
// w_t = x_t + s_t Delta_t with s_t ~ U[0,1] drawn before the oracle call;
// the oracle's estimate feeds the next OSD update. Epochs restart the OCO
// state and the tree epoch; only x_1^{k+1} = x_{T+1}^k carries over. The
// output is one w_bar^k drawn uniformly with the run's seeded stream.
template <class Oracle>
RunResult run_o2nc_with(Oracle& oracle, const RunPlan& plan, ParamVector x1) {
    plan.validate();
    if (x1.empty()) x1 = zeros(static_cast<std::size_t>(plan.d));
    if (static_cast<int>(x1.size()) != plan.d)
        throw std::invalid_argument("run_o2nc: x1 dimension does not match plan");

    Rng s_rng(derive_seed(plan.seed, stream::interp));
    Trace trace;
    trace.steps.reserve(static_cast<std::size_t>(plan.K) * plan.T);
    trace.epochs.reserve(static_cast<std::size_t>(plan.K));

    ParamVector x = std::move(x1);
    for (long k = 1; k <= plan.K; ++k) {
        OsdState osd(static_cast<std::size_t>(plan.d), plan.D);
        EpochRecord epoch;
        epoch.k = k;
        epoch.grad_sum = zeros(static_cast<std::size_t>(plan.d));
        ParamVector w_sum = zeros(static_cast<std::size_t>(plan.d));

        for (int t = 1; t <= plan.T; ++t) {
            const ParamVector delta_t = osd.delta();
            const double s = s_rng.uniform();
            ParamVector w = x;
            axpy(s, delta_t, w);

            OracleResult res = oracle.step(k, t, w);

            epoch.inner_sum += dot(res.g_tilde, delta_t);
            axpy(1.0, res.g_tilde, epoch.grad_sum);
            epoch.grad_sq_sum += norm_sq(res.g_tilde);
            axpy(1.0, w, w_sum);
            trace.steps.push_back(StepRecord{k, t, norm(res.g_tilde), res.noise_norm,
                                             norm(delta_t), s, std::move(w)});

            axpy(1.0, delta_t, x);  // x_{t+1} = x_t + Delta_t
            osd.step(res.g_tilde);
        }

        epoch.w_bar = scaled(w_sum, 1.0 / plan.T);
        trace.epochs.push_back(std::move(epoch));
    }

    Rng pick_rng(derive_seed(plan.seed, stream::pick));
    const long pick = static_cast<long>(pick_rng.uniform_int(static_cast<std::uint64_t>(plan.K)));
    trace.picked_epoch = pick + 1;
    RunResult out{trace.epochs[static_cast<std::size_t>(pick)].w_bar, std::move(trace)};
    return out;
}

inline RunResult run_o2nc(const StochasticObjective& obj, const Dataset& dataset,
                          const RunPlan& plan, ParamVector x1 = {}) {
    plan.validate();
    DataPartition part(dataset, plan);
    switch (plan.oracle_kind) {
        case OracleKind::tree: {
            TreeOracle oracle(obj, part, plan);
            return run_o2nc_with(oracle, plan, std::move(x1));
        }
        case OracleKind::naive: {
            NaiveOracle oracle(obj, part, plan);
            return run_o2nc_with(oracle, plan, std::move(x1));
        }
        case OracleKind::exact_debug: {
            ExactDebugOracle oracle(obj, part, plan);
            return run_o2nc_with(oracle, plan, std::move(x1));
        }
    }
    throw std::logic_error("run_o2nc: unreachable");
}

}  // namespace po2nc
