// Command-line front end: loads a sectioned key-value config, dispatches one
// operation, and writes summary.json / series.csv (and optionally a map
// artifact) to the output directory.

#include "phi3/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    long seed = -1;
    long workers = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "path to a run config file");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override run.seed");
    cmd->add_option("--workers", args.workers, "override run.workers");
}

int execute(const CommonArgs& args, const std::string& op) {
    try {
        phi3::Config cfg = args.config_path.empty()
                               ? phi3::Config::parse_string("")
                               : phi3::Config::parse_file(args.config_path);
        if (args.seed >= 0) cfg.set("run.seed", std::to_string(args.seed));
        if (args.workers >= 0) cfg.set("run.workers", std::to_string(args.workers));
        const auto outcome = phi3::run_operation(cfg, op, args.out_dir);
        std::cout << phi3::json_to_string(outcome.summary) << "\n";
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return phi3::kExitError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Order-3 harmonic map calculus on discretized manifolds"};
    app.require_subcommand(1);

    CommonArgs energy_args, variation_args, ssu_args, liouville_args, flow_args, suite_args;
    std::string suite_level = "quick";
    std::string suite_mutation = "none";

    auto* energy = app.add_subcommand("energy", "energy of a configured map");
    add_common(energy, energy_args);

    auto* variation = app.add_subcommand("variation", "variational identity checks");
    auto* variation_verify = variation->add_subcommand("verify", "run the oracle suite");
    variation->require_subcommand(1);
    add_common(variation_verify, variation_args, false);

    auto* ssu = app.add_subcommand("ssu", "instability certificates");
    auto* ssu_check = ssu->add_subcommand("check", "evaluate a certificate");
    ssu->require_subcommand(1);
    add_common(ssu_check, ssu_args);

    auto* liouville = app.add_subcommand("liouville", "pinching constants and monotonicity");
    add_common(liouville, liouville_args);

    auto* flow = app.add_subcommand("flow", "gradient flow and homotopy shrinking");
    add_common(flow, flow_args);

    auto* suite = app.add_subcommand("verify-suite", "batched oracle checks");
    add_common(suite, suite_args, false);
    suite->add_option("--level", suite_level, "quick or full");
    suite->add_option("--mutation", suite_mutation, "inject a defect (mutation test mode)");

    CLI11_PARSE(app, argc, argv);

    if (energy->parsed()) return execute(energy_args, "energy");
    if (variation->parsed() && variation_verify->parsed())
        return execute(variation_args, "variation-verify");
    if (ssu->parsed() && ssu_check->parsed()) return execute(ssu_args, "ssu-check");
    if (liouville->parsed()) return execute(liouville_args, "liouville");
    if (flow->parsed()) return execute(flow_args, "flow");
    if (suite->parsed()) {
        try {
            phi3::Config cfg = suite_args.config_path.empty()
                                   ? phi3::Config::parse_string("")
                                   : phi3::Config::parse_file(suite_args.config_path);
            if (suite_args.seed >= 0) cfg.set("run.seed", std::to_string(suite_args.seed));
            cfg.set("operation.level", suite_level);
            cfg.set("operation.mutation", suite_mutation);
            const auto outcome = phi3::run_operation(cfg, "verify-suite", suite_args.out_dir);
            for (const auto& check : outcome.summary["checks"]) {
                std::cout << (check["pass"].get<bool>() ? "[pass] " : "[FAIL] ")
                          << check["name"].get<std::string>() << "\n";
            }
            return outcome.exit_code;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return phi3::kExitError;
        }
    }
    std::cerr << "error: no operation selected\n";
    return phi3::kExitError;
}
