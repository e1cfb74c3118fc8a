// qsmc: design, simulate and verify quasi-sliding-mode controllers.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qsmc/qsmc.hpp"

namespace {

using namespace qsmc;
using namespace qsmc::cli;

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<double> dt;
    std::optional<double> horizon;
    std::optional<std::string> mode;
    bool force = false;
    std::optional<unsigned long long> seed;  // reserved: runs are deterministic
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
    auto* opt = cmd->add_option("--config", f.config, "experiment config (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--dt", f.dt, "integration step [s]")->check(CLI::PositiveNumber);
    cmd->add_option("--horizon", f.horizon, "simulation horizon [s]")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", f.mode, "control evaluation: continuous or zoh")
        ->check(CLI::IsMember({"continuous", "zoh"}));
    cmd->add_flag("--force", f.force, "run even if design checks fail (guarantees void)");
    cmd->add_option("--seed", f.seed, "reserved; all runs are deterministic");
}

void apply_overrides(const CommonFlags& f, SimConfig& sim) {
    if (f.dt) sim.dt = *f.dt;
    if (f.horizon) sim.horizon = *f.horizon;
    if (f.mode) sim.mode = *f.mode == "zoh" ? ControlMode::ZeroOrderHold : ControlMode::Continuous;
}

ExperimentConfig load_with_overrides(const CommonFlags& f) {
    auto cfg = load_config(f.config);
    apply_overrides(f, cfg.sim);
    if (!f.out.empty()) cfg.output_dir = f.out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-sliding-mode control laboratory"};
    app.require_subcommand(1);

    CommonFlags design_f, sim_f, verify_f, compare_f, plot_f;
    std::string design_json_path;
    std::string example;
    std::optional<double> gain;
    std::optional<double> window;
    std::string script_path;

    auto* design_cmd = app.add_subcommand("design", "check surface, envelope and C1/C2 conditions");
    add_common(design_cmd, design_f, true);
    design_cmd->add_option("--json", design_json_path, "write the design report as JSON");

    auto* sim_cmd = app.add_subcommand("simulate", "simulate every initial condition, write CSV + metrics");
    add_common(sim_cmd, sim_f, true);

    auto* verify_cmd = app.add_subcommand("verify", "run a built-in example and check all clauses");
    verify_cmd->add_option("example", example, "example1 or example2")->required();
    add_common(verify_cmd, verify_f, false);

    auto* compare_cmd = app.add_subcommand("compare", "QSMC versus relay SMC chattering comparison");
    add_common(compare_cmd, compare_f, true);
    compare_cmd->add_option("--gain,-K", gain, "relay gain K")->check(CLI::PositiveNumber);
    compare_cmd->add_option("--window", window, "start of the chattering window [s]");

    auto* plot_cmd = app.add_subcommand("plot-script", "emit a gnuplot script for simulate's CSVs");
    add_common(plot_cmd, plot_f, true);
    plot_cmd->add_option("--script", script_path, "write the script here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kPass : kUsageError;
    }

    try {
        if (*design_cmd) {
            const auto cfg = load_with_overrides(design_f);
            nlohmann::json report;
            const int rc = cmd_design(cfg, std::cout, &report);
            if (!design_json_path.empty()) std::ofstream(design_json_path) << report.dump(2) << '\n';
            return rc;
        }
        if (*sim_cmd) {
            const auto cfg = load_with_overrides(sim_f);
            return cmd_simulate(cfg, {cfg.output_dir, sim_f.force, true}, std::cout);
        }
        if (*verify_cmd) {
            SimConfig sim;
            apply_overrides(verify_f, sim);
            return cmd_verify(example, std::cout, &sim);
        }
        if (*compare_cmd) {
            auto cfg = load_with_overrides(compare_f);
            if (window) cfg.compare.window_start = *window;
            return cmd_compare(cfg, std::cout, gain);
        }
        if (*plot_cmd) {
            const auto cfg = load_with_overrides(plot_f);
            const auto ex = build_experiment(cfg);
            const auto text =
                plot_script(cfg, ex.initial_conditions.size(), std::filesystem::path(cfg.output_dir));
            if (script_path.empty()) std::cout << text;
            else std::ofstream(script_path) << text;
            return kPass;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsageError;
    } catch (const expr::EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << '\n';
        return kNumericalAbort;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}
