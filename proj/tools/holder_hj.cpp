// holder-hj: run experiments from a JSON config and render reports.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "holder_hj/config.hpp"
#include "holder_hj/experiments.hpp"
#include "holder_hj/io.hpp"
#include "holder_hj/summary.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failed = 1;
constexpr int exit_config = 2;

int run_command(const std::string& config_path, const std::optional<std::string>& out,
                const std::optional<std::uint64_t>& seed) {
    holder_hj::ExperimentConfig cfg;
    try {
        std::string text;
        try {
            text = holder_hj::read_text(config_path);
        } catch (const std::exception& e) {
            throw holder_hj::config_error(e.what());
        }
        cfg = holder_hj::parse_config_text(text);
        if (seed) {
            cfg.seed = *seed;
        }
        if (out) {
            cfg.output_dir = *out;
        }
        cfg.validate();
    } catch (const holder_hj::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }

    const std::filesystem::path dir(cfg.output_dir);
    holder_hj::RunResult result;
    try {
        result = holder_hj::run_experiment(cfg, dir);
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return exit_failed;
    }
    std::cout << holder_hj::emit_report(dir);
    for (const auto& r : result.rows) {
        if (!r.pass) {
            std::cerr << "FAILED " << r.check << ": measured " << holder_hj::format_number(r.measured) << ", expected "
                      << r.expected << " (tolerance " << r.tolerance << ")\n";
        }
    }
    return result.exit_code == 0 ? exit_ok : exit_failed;
}

int report_command(const std::string& dir) {
    try {
        std::cout << holder_hj::emit_report(dir);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return exit_failed;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hölder-estimate verification experiments for Hamilton-Jacobi viscosity solutions"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run the experiment named in a JSON config");
    run->add_option("--config", config_path, "Path to the JSON config")->required();
    run->add_option("--out", out, "Output directory (overrides output_dir)");
    run->add_option("--seed", seed, "Random seed (overrides seed)");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Render summary.csv of an artifact directory");
    report->add_option("--dir", report_dir, "Artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }
    if (run->parsed()) {
        return run_command(config_path, out, seed);
    }
    return report_command(report_dir);
}
