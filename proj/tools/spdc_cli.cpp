#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <spdckit/commands.hpp>

namespace {

int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        const std::string& format, const std::string& data_path, bool seed_given, std::uint64_t seed) {
    using namespace spdckit;

    RunConfig cfg = load_run_config(config_path);
    if (seed_given) cfg.seed = seed;

    DispersionCatalog local_catalog;
    const DispersionCatalog* catalog = nullptr;
    if (data_path.empty()) {
        catalog = &default_catalog();
    } else {
        local_catalog = load_dispersion_catalog(data_path);
        catalog = &local_catalog;
    }

    CommandContext ctx;
    ctx.cfg = cfg;
    ctx.catalog = catalog;
    ctx.out_dir = out_dir;
    ctx.format = (format == "json") ? output_format::json : output_format::csv;

    try {
        ctx.ensure_out_dir();
        run_named_command(ctx, command);
    } catch (...) {
        ctx.cleanup_partial();
        throw;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crossed-crystal down-conversion source toolkit: spectra, phase maps, "
                 "compensator optimization, state quality, and coincidence statistics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "spdc_out";
    std::string format = "csv";
    std::string data_path;
    std::uint64_t seed = 0;

    app.add_option("--config", config_path, "configuration file (sectioned key = value text)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--format", format, "table output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.add_option("--data", data_path, "dispersion data file overriding the built-in one");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "random seed overriding run.seed");

    // Global options may appear before or after the subcommand name.
    app.add_subcommand("spectrum", "per-temperature spectra and lobe summary")->fallthrough();
    app.add_subcommand("pm-curve", "signal/idler wavelengths and widths versus temperature")->fallthrough();
    app.add_subcommand("phase-map", "residual phase maps, ridge profile, compensator optimum")->fallthrough();
    app.add_subcommand("state", "two-qubit state, fidelity, visibilities, tomography")->fallthrough();
    app.add_subcommand("visibility", "analytic and Monte Carlo visibility versus pump power")->fallthrough();
    app.add_subcommand("all", "run every command into subdirectories")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad flags are configuration mistakes
    }

    std::string command = app.get_subcommands().front()->get_name();
    std::replace(command.begin(), command.end(), '-', '_');

    try {
        return run(command, config_path, out_dir, format, data_path, seed_opt->count() > 0, seed);
    } catch (const spdckit::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
