// Command line front end: `dpe run <config>` and `dpe sweep <config>`.
//
// Exit codes: 0 honest or complete, 2 dishonest, 3 inconclusive,
// 1 for configuration, model-contract or I/O errors.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "dpe/runner/runner.hpp"

namespace {

int execute(bool is_sweep, const std::string& path, const dpe::runner::RunOptions& opt) {
    using namespace dpe::runner;
    try {
        const RawConfig cfg = read_config_file(path);
        const RunReport rep = is_sweep ? sweep(cfg, opt) : run(cfg, opt);
        write_outputs(rep);
        std::cout << "experiment: " << rep.experiment << "\n"
                  << "verdict: " << rep.verdict << "\n"
                  << "output: " << rep.output_dir << "\n";
        std::cerr << "wall time: " << rep.wall_seconds << " s\n";
        return rep.exit_code;
    } catch (const dpe::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
    } catch (const dpe::ContractViolation& e) {
        std::cerr << "model contract violation: " << e.what() << "\n";
    } catch (const dpe::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return exit_error;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dyson-Phillips evolution families: honesty diagnostics and model experiments"};
    app.require_subcommand(1);

    std::string output_dir;
    bool emit_svg = false, strict = false, lenient = false;
    app.add_option("--output-dir", output_dir, "Override [output] directory");
    app.add_flag("--emit-svg", emit_svg, "Write plots.svg next to the CSV tables");
    auto* strict_flag = app.add_flag("--strict", strict, "Strict kernel validation (abort on contract violations)");
    auto* lenient_flag = app.add_flag("--lenient", lenient, "Lenient kernel validation (keep and report the excess)");
    strict_flag->excludes(lenient_flag);

    // Global flags are also accepted after the subcommand; set before the
    // subcommands are created so they inherit it.
    app.fallthrough();

    std::string run_path, sweep_path;
    auto* run_cmd = app.add_subcommand("run", "Run one experiment");
    run_cmd->add_option("config", run_path, "Configuration file")->required();
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a refinement sweep over [sweep] values");
    sweep_cmd->add_option("config", sweep_path, "Configuration file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dpe::runner::exit_error;
    }

    dpe::runner::RunOptions opt;
    if (!output_dir.empty()) opt.output_dir = output_dir;
    if (emit_svg) opt.emit_svg = true;
    if (strict) opt.strict = true;
    if (lenient) opt.strict = false;

    if (*run_cmd) return execute(false, run_path, opt);
    return execute(true, sweep_path, opt);
}
