#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "po2nc/o2nc.hpp"
#include "po2nc/objectives.hpp"
#include "po2nc/stationarity.hpp"
#include "po2nc/tree.hpp"
#include "po2nc/version.hpp"

namespace po2nc {

// Thrown on file-system failures; the CLI maps this to exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace stream {
inline constexpr std::uint64_t certificate = 0x43455254ULL;  // certificate MC draws, per epoch
inline constexpr std::uint64_t dataset = 0x44415441ULL;      // dataset generation
}  // namespace stream

// Flat experiment configuration; JSON fields carry the same names. CLI flags
// override file values.
struct ExperimentConfig {
    std::string objective = "capped-pwl";  // linear | quadratic | pwl | capped-pwl
    int dim = 10;
    double cap = 1.0;                   // capped-pwl flat-region threshold
    double label_noise = 0.0;           // regression label noise amplitude, U[-s, s]
    std::uint64_t dataset_seed = 1;     // data generation stream
    double delta = 0.1;
    double L = 1.0;                     // linear: |a|; quadratic: domain radius; pwl: must be 1
    double fstar = 1.0;
    long M = 200000;                    // data budget handed to the planner
    double rho = std::numeric_limits<double>::infinity();  // "none" in JSON
    std::string oracle = "tree";
    std::vector<std::uint64_t> seeds = {1};
    long cert_n_mc = 50;                // data draws per averaged point
    int cert_n_points = 64;             // ball samples in the final certificate
    long cert_every = 1;                // epoch certificate cadence (1 and K always included)
    double x1_radius = 0.0;             // |x1|; x1 points along (1,..,1)/sqrt(d)
    bool write_dataset = false;
    std::string out_dir = "po2nc-out";

    void validate() const {
        if (dim < 1 || delta <= 0.0 || L <= 0.0 || fstar <= 0.0 || M < 1)
            throw std::invalid_argument("config: dim, delta, L, fstar, M must be positive");
        if (std::isnan(rho) || rho <= 0.0)
            throw std::invalid_argument("config: rho must be > 0 or \"none\"");
        if (seeds.empty()) throw std::invalid_argument("config: at least one replicate seed");
        if (cert_n_mc < 1 || cert_n_points < 1 || cert_every < 1)
            throw std::invalid_argument("config: certificate settings must be >= 1");
        if (label_noise < 0.0) throw std::invalid_argument("config: label_noise must be >= 0");
        if (objective != "linear" && objective != "quadratic" && objective != "pwl" &&
            objective != "capped-pwl")
            throw std::invalid_argument("config: unknown objective kind: " + objective);
        if ((objective == "pwl" || objective == "capped-pwl") && L != 1.0)
            throw std::invalid_argument("config: the regression objectives have L = 1");
        oracle_kind_from_string(oracle);
        if (x1_radius < 0.0) throw std::invalid_argument("config: x1_radius must be >= 0");
    }
};

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    auto get = [&j](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).template get<std::decay_t<decltype(slot)>>();
    };
    get("objective", c.objective);
    get("dim", c.dim);
    get("cap", c.cap);
    get("label_noise", c.label_noise);
    get("dataset_seed", c.dataset_seed);
    get("delta", c.delta);
    get("L", c.L);
    get("fstar", c.fstar);
    get("M", c.M);
    if (j.contains("rho")) {
        const auto& r = j.at("rho");
        if (r.is_string()) {
            if (r.get<std::string>() != "none")
                throw std::invalid_argument("config: rho must be a number or \"none\"");
            c.rho = std::numeric_limits<double>::infinity();
        } else {
            c.rho = r.get<double>();
        }
    }
    get("oracle", c.oracle);
    get("seeds", c.seeds);
    get("cert_n_mc", c.cert_n_mc);
    get("cert_n_points", c.cert_n_points);
    get("cert_every", c.cert_every);
    get("x1_radius", c.x1_radius);
    get("write_dataset", c.write_dataset);
    get("out_dir", c.out_dir);
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

struct Problem {
    std::unique_ptr<StochasticObjective> objective;
    Dataset dataset;
    ParamVector x1;
};

// Builds the objective, an M-point dataset, and the starting point from the
// config's dataset_seed. Deterministic per config.
inline Problem build_problem(const ExperimentConfig& c) {
    Problem p;
    Rng rng(derive_seed(c.dataset_seed, stream::dataset));
    if (c.objective == "linear") {
        ParamVector a = sample_unit_sphere(c.dim, rng).u;
        scale(a, c.L);
        p.objective = make_linear(std::move(a));
        p.dataset.resize(static_cast<std::size_t>(c.M));
    } else if (c.objective == "quadratic") {
        p.objective = make_quadratic(c.dim, c.L);
        p.dataset.resize(static_cast<std::size_t>(c.M));
    } else {
        auto prob = make_piecewise_linear_regression(c.dim, c.M, rng,
                                                     c.objective == "capped-pwl", c.cap,
                                                     c.label_noise);
        p.objective = std::move(prob.objective);
        p.dataset = std::move(prob.dataset);
    }
    p.x1 = ParamVector(static_cast<std::size_t>(c.dim),
                       c.x1_radius / std::sqrt(static_cast<double>(c.dim)));
    return p;
}

inline RunPlan plan_from_config(const ExperimentConfig& c) {
    RunPlan plan = plan_run(c.dim, c.delta, c.L, c.fstar, c.M, c.rho);
    plan.oracle_kind = oracle_kind_from_string(c.oracle);
    return plan;
}

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline int replicate_threads(std::size_t n_replicates) {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("PO2NC_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return static_cast<int>(std::min<std::size_t>(n, n_replicates));
}

}  // namespace detail

// Everything recorded about one replicate: the per-epoch certificate rows and
// the end-of-run summary. Wall time is reported on the console but kept out
// of the result files so identical (config, seed) runs are byte-identical.
struct ReplicateResult {
    std::uint64_t seed = 0;
    long picked_epoch = 0;
    ParamVector w_bar;
    std::vector<double> epoch_certificates;  // NaN where cadence skipped the epoch
    double final_certificate = 0.0;          // ball-sample certificate at w_bar
    RegretReport worst_regret{0.0, 0.0};     // epoch with the largest regret/bound gap
    double wall_time_s = 0.0;
};

// Runs one replicate and evaluates its certificates. The epoch certificate is
// the inner average over that epoch's w_t; the final certificate is a ball
// sample around the returned point.
inline ReplicateResult run_replicate(const StochasticObjective& obj, const Dataset& dataset,
                                     RunPlan plan, std::uint64_t seed, const ParamVector& x1,
                                     const ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    plan.seed = seed;
    RunResult run = run_o2nc(obj, dataset, plan, x1);

    ReplicateResult out;
    out.seed = seed;
    out.picked_epoch = run.trace.picked_epoch;
    out.w_bar = run.w_bar;
    out.epoch_certificates.assign(static_cast<std::size_t>(plan.K),
                                  std::numeric_limits<double>::quiet_NaN());

    std::vector<ParamVector> w_epoch(static_cast<std::size_t>(plan.T));
    for (long k = 1; k <= plan.K; ++k) {
        const bool wanted = (k == 1) || (k == plan.K) || ((k - 1) % c.cert_every == 0);
        EpochRecord& epoch = run.trace.epochs[static_cast<std::size_t>(k - 1)];
        const RegretReport reg = regret_audit_from_sums(epoch.inner_sum, epoch.grad_sum,
                                                        epoch.grad_sq_sum, plan.D);
        if (reg.regret - reg.bound > out.worst_regret.regret - out.worst_regret.bound)
            out.worst_regret = reg;
        if (!wanted) continue;
        for (int t = 1; t <= plan.T; ++t)
            w_epoch[static_cast<std::size_t>(t - 1)] =
                run.trace.steps[static_cast<std::size_t>((k - 1) * plan.T + t - 1)].w;
        Rng cert_rng(derive_seed(seed, stream::certificate, static_cast<std::uint64_t>(k)));
        const Certificate cert =
            inner_average_certificate(obj, w_epoch, plan.delta, c.cert_n_mc, cert_rng);
        epoch.certificate = cert.value;
        out.epoch_certificates[static_cast<std::size_t>(k - 1)] = cert.value;
    }

    Rng final_rng(derive_seed(seed, stream::certificate, 0));
    out.final_certificate = ball_sample_certificate(obj, out.w_bar, plan.delta, c.cert_n_points,
                                                    c.cert_n_mc, final_rng)
                                .value;
    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline constexpr const char* kResultCsvHeader = "seed,oracle,rho,T,K,epoch,certificate,data_used";

// One row per (seed, epoch) plus a "final" summary row per seed. data_used is
// cumulative; the certificate column is blank for epochs the cadence skipped.
inline std::string result_rows_csv(const ReplicateResult& r, const RunPlan& plan) {
    const long per_epoch = plan.data_needed() / plan.K;
    std::ostringstream os;
    const std::string prefix = std::to_string(r.seed) + "," + to_string(plan.oracle_kind) + "," +
                               detail::fmt_double(plan.rho) + "," + std::to_string(plan.T) + "," +
                               std::to_string(plan.K) + ",";
    for (long k = 1; k <= plan.K; ++k) {
        const double cert = r.epoch_certificates[static_cast<std::size_t>(k - 1)];
        os << prefix << k << ","
           << (std::isnan(cert) ? std::string() : detail::fmt_double(cert)) << ","
           << per_epoch * k << "\n";
    }
    os << prefix << "final," << detail::fmt_double(r.final_certificate) << ","
       << plan.data_needed() << "\n";
    return os.str();
}

inline nlohmann::json plan_to_json(const RunPlan& plan) {
    nlohmann::json j{
        {"d", plan.d},       {"delta", plan.delta},
        {"L", plan.L},       {"F_star", plan.F_star},
        {"M", plan.M},       {"M_requested", plan.M_requested},
        {"T", plan.T},       {"K", plan.K},
        {"B1", plan.B1},     {"B2", plan.B2},
        {"D", plan.D},       {"oracle", to_string(plan.oracle_kind)},
        {"sigma_tree", plan.tree_sigma()},
        {"sigma_naive", plan.naive_sigma()},
    };
    j["rho"] = plan.is_private() ? nlohmann::json(plan.rho) : nlohmann::json("none");
    return j;
}

// First line of every results.csv: a comment carrying the library version and
// the resolved plan, so the file is self-describing.
inline std::string result_csv_preamble(const RunPlan& plan) {
    return "# po2nc " + std::string(kVersion) + " plan=" + plan_to_json(plan).dump() + "\n";
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j{
        {"objective", c.objective}, {"dim", c.dim},
        {"cap", c.cap},             {"label_noise", c.label_noise},
        {"dataset_seed", c.dataset_seed},
        {"delta", c.delta},         {"L", c.L},
        {"fstar", c.fstar},         {"M", c.M},
        {"oracle", c.oracle},       {"seeds", c.seeds},
        {"cert_n_mc", c.cert_n_mc}, {"cert_n_points", c.cert_n_points},
        {"cert_every", c.cert_every},
        {"x1_radius", c.x1_radius}, {"write_dataset", c.write_dataset},
    };
    j["rho"] = std::isfinite(c.rho) ? nlohmann::json(c.rho) : nlohmann::json("none");
    return j;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

// Runs the replicates with at most PO2NC_THREADS workers; results land in
// seed order regardless of scheduling.
inline std::vector<ReplicateResult> run_replicates(const StochasticObjective& obj,
                                                   const Dataset& dataset, const RunPlan& plan,
                                                   const ParamVector& x1,
                                                   const ExperimentConfig& c) {
    std::vector<ReplicateResult> results(c.seeds.size());
    const int n_threads = replicate_threads(c.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= c.seeds.size()) return;
            results[i] = run_replicate(obj, dataset, plan, c.seeds[i], x1, c);
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace detail

struct ExperimentOutput {
    std::filesystem::path csv_path;
    std::filesystem::path summary_path;
    nlohmann::json summary;
    std::vector<ReplicateResult> replicates;
};

// Runs every replicate seed of the config, writes results.csv and
// summary.json under out_dir, and echoes per-seed wall times to stdout.
// Deterministic per (config, seed): the written files are byte-identical
// across repeated invocations.
inline ExperimentOutput run_experiment(const ExperimentConfig& c) {
    c.validate();
    Problem problem = build_problem(c);
    RunPlan plan = plan_from_config(c);

    std::error_code ec;
    std::filesystem::create_directories(c.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + c.out_dir + ": " + ec.message());

    std::vector<ReplicateResult> results =
        detail::run_replicates(*problem.objective, problem.dataset, plan, problem.x1, c);

    std::string csv = result_csv_preamble(plan);
    csv += kResultCsvHeader;
    csv += "\n";
    nlohmann::json seeds_json = nlohmann::json::array();
    for (const ReplicateResult& r : results) {
        csv += result_rows_csv(r, plan);
        nlohmann::json row{
            {"seed", r.seed},
            {"picked_epoch", r.picked_epoch},
            {"final_certificate", r.final_certificate},
            {"w_bar_norm", norm(r.w_bar)},
            {"regret_worst", r.worst_regret.regret},
            {"regret_bound", r.worst_regret.bound},
        };
        nlohmann::json certs = nlohmann::json::array();
        for (double v : r.epoch_certificates)
            certs.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
        row["epoch_certificates"] = std::move(certs);
        seeds_json.push_back(std::move(row));
        std::printf("seed %llu: %.2f s, final certificate %.6g\n",
                    static_cast<unsigned long long>(r.seed), r.wall_time_s,
                    r.final_certificate);
    }

    nlohmann::json summary{
        {"version", kVersion},
        {"config", config_to_json(c)},
        {"plan", plan_to_json(plan)},
        {"results", seeds_json},
    };

    ExperimentOutput out;
    out.csv_path = std::filesystem::path(c.out_dir) / "results.csv";
    out.summary_path = std::filesystem::path(c.out_dir) / "summary.json";
    detail::write_file(out.csv_path, csv);
    detail::write_file(out.summary_path, summary.dump(2) + "\n");
    if (c.write_dataset)
        write_dataset_csv((std::filesystem::path(c.out_dir) / "dataset.csv").string(),
                          problem.dataset);
    out.summary = std::move(summary);
    out.replicates = std::move(results);
    return out;
}

struct CompareOutput {
    std::filesystem::path report_path;
    nlohmann::json report;
};

// Matched-seed comparison of the tree and naive oracles on one problem:
// reports the analytic per-release noise of each mechanism, checks the
// per-release noise-std ratio sigma_naive/sigma_tree against its closed form
// T/(4 sqrt(2 ln T)), and lists final certificates side by side. The two
// oracles differ structurally (no variance reduction in the naive one), so
// zero-noise trajectories are not expected to coincide.
inline CompareOutput compare_oracles(const ExperimentConfig& c) {
    c.validate();
    Problem problem = build_problem(c);
    RunPlan plan = plan_from_config(c);

    std::error_code ec;
    std::filesystem::create_directories(c.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + c.out_dir + ": " + ec.message());

    RunPlan tree_plan = plan;
    tree_plan.oracle_kind = OracleKind::tree;
    RunPlan naive_plan = plan;
    naive_plan.oracle_kind = OracleKind::naive;

    ExperimentConfig tree_cfg = c;
    tree_cfg.oracle = "tree";
    ExperimentConfig naive_cfg = c;
    naive_cfg.oracle = "naive";

    std::vector<ReplicateResult> tree_res =
        detail::run_replicates(*problem.objective, problem.dataset, tree_plan, problem.x1, tree_cfg);
    std::vector<ReplicateResult> naive_res =
        detail::run_replicates(*problem.objective, problem.dataset, naive_plan, problem.x1, naive_cfg);

    const double sigma_tree = tree_plan.tree_sigma();
    const double sigma_naive = naive_plan.naive_sigma();
    const double theoretical_std_ratio =
        plan.T / (4.0 * std::sqrt(2.0 * std::log(static_cast<double>(plan.T))));

    nlohmann::json per_step = nlohmann::json::array();
    for (int t = 1; t <= plan.T; t *= 2) {
        const auto m = static_cast<double>(node(t).size());
        per_step.push_back(nlohmann::json{
            {"t", t},
            {"node_count", node(t).size()},
            {"tree_noise_variance", m * plan.d * sigma_tree * sigma_tree},
            {"naive_noise_variance", plan.d * sigma_naive * sigma_naive},
        });
    }

    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < tree_res.size(); ++i) {
        rows.push_back(nlohmann::json{
            {"seed", tree_res[i].seed},
            {"tree_final_certificate", tree_res[i].final_certificate},
            {"naive_final_certificate", naive_res[i].final_certificate},
        });
    }

    nlohmann::json report{
        {"version", kVersion},
        {"config", config_to_json(c)},
        {"plan", plan_to_json(plan)},
        {"sigma_tree", sigma_tree},
        {"sigma_naive", sigma_naive},
        {"theoretical_std_ratio", theoretical_std_ratio},
        {"theoretical_variance_ratio", theoretical_std_ratio * theoretical_std_ratio},
        {"per_step_noise_variance", std::move(per_step)},
        {"results", std::move(rows)},
        {"structural_note",
         "the naive oracle re-estimates the gradient from scratch each step while the tree "
         "oracle accumulates difference estimates, so matched-seed zero-noise trajectories "
         "differ; certificates are reported side by side"},
    };
    if (plan.is_private()) {
        const double measured = sigma_naive / sigma_tree;
        report["per_release_std_ratio"] = measured;
        if (std::abs(measured - theoretical_std_ratio) >
            1e-9 * std::abs(theoretical_std_ratio))
            throw std::logic_error("compare_oracles: sigma ratio deviates from T/(4 sqrt(2 ln T))");
    } else {
        report["per_release_std_ratio"] = "non-private (both sigmas are zero)";
    }

    CompareOutput out;
    out.report_path = std::filesystem::path(c.out_dir) / "compare.json";
    detail::write_file(out.report_path, report.dump(2) + "\n");
    std::printf("sigma_tree=%.6g sigma_naive=%.6g std ratio %.6g (theory %.6g, "
                "single-release variance ratio T^2/(32 ln T) = %.6g)\n",
                sigma_tree, sigma_naive, plan.is_private() ? sigma_naive / sigma_tree : 0.0,
                theoretical_std_ratio, theoretical_std_ratio * theoretical_std_ratio);
    out.report = std::move(report);
    return out;
}

}  // namespace po2nc
