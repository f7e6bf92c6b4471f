// po2nc command-line harness: seeded experiment execution, oracle comparison,
// and plan resolution. Exit codes: 0 success, 2 infeasible plan, 3 I/O error.

#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "po2nc/harness.hpp"

namespace {

struct PlanArgs {
    int d = 0;
    double delta = 0.0, L = 0.0, fstar = 0.0;
    long M = 0;
    double rho = std::numeric_limits<double>::infinity();
};

po2nc::ExperimentConfig resolve_config(const std::string& config_path,
                                       const std::vector<std::uint64_t>& seed_override,
                                       const std::string& oracle_override,
                                       const std::string& out_override) {
    po2nc::ExperimentConfig cfg = po2nc::load_config(config_path);
    if (!seed_override.empty()) cfg.seeds = seed_override;
    if (!oracle_override.empty()) cfg.oracle = oracle_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private zeroth-order optimization harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir, oracle;
    std::vector<std::uint64_t> seeds;

    CLI::App* run = app.add_subcommand("run", "Run the configured experiment");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--seed", seeds, "Replace the config's replicate seed list");
    run->add_option("--oracle", oracle, "tree | naive | exact-debug")
        ->check(CLI::IsMember({"tree", "naive", "exact-debug"}));
    run->add_option("--out", out_dir, "Output directory");

    CLI::App* cmp = app.add_subcommand("compare", "Matched-seed tree vs naive comparison");
    cmp->add_option("--config", config_path, "JSON config file")->required();
    cmp->add_option("--seed", seeds, "Replace the config's replicate seed list");
    cmp->add_option("--out", out_dir, "Output directory");

    PlanArgs pa;
    std::string rho_str = "none";
    CLI::App* plan = app.add_subcommand("plan", "Resolve and print a RunPlan as JSON");
    plan->add_option("--d", pa.d, "dimension")->required();
    plan->add_option("--delta", pa.delta, "stationarity radius")->required();
    plan->add_option("--L", pa.L, "Lipschitz constant")->required();
    plan->add_option("--fstar", pa.fstar, "objective gap upper bound")->required();
    plan->add_option("--M", pa.M, "data budget")->required();
    plan->add_option("--rho", rho_str, "RDP scale rho, or \"none\" (default)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            po2nc::run_experiment(resolve_config(config_path, seeds, oracle, out_dir));
        } else if (cmp->parsed()) {
            po2nc::compare_oracles(resolve_config(config_path, seeds, "", out_dir));
        } else {
            if (rho_str != "none") pa.rho = std::stod(rho_str);
            const po2nc::RunPlan resolved =
                po2nc::plan_run(pa.d, pa.delta, pa.L, pa.fstar, pa.M, pa.rho);
            std::printf("%s\n", po2nc::plan_to_json(resolved).dump(2).c_str());
        }
    } catch (const po2nc::InfeasiblePlanError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const po2nc::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
