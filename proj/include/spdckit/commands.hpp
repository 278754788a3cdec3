#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spdckit/compensation.hpp"
#include "spdckit/csvio.hpp"
#include "spdckit/pair_statistics.hpp"
#include "spdckit/polarization.hpp"
#include "spdckit/runconfig.hpp"

namespace spdckit {

/**
 * Shared state of one command invocation: configuration, dispersion catalog,
 * output directory and format, plus bookkeeping of every path this run
 * created so a failed run can remove its partial outputs.
 */
struct CommandContext {
    RunConfig cfg;
    const DispersionCatalog* catalog = nullptr;
    std::filesystem::path out_dir;
    output_format format = output_format::csv;

    bool created_dir = false;
    std::vector<std::filesystem::path> created_paths;

    const DispersionCatalog& cat() const {
        if (!catalog) throw argument_error("command context has no dispersion catalog");
        return *catalog;
    }

    void ensure_out_dir() {
        namespace fs = std::filesystem;
        if (fs::exists(out_dir)) {
            if (!fs::is_directory(out_dir))
                throw config_error("output path '" + out_dir.string() + "' exists and is not a directory");
            return;
        }
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw config_error("cannot create output directory '" + out_dir.string() + "': " + ec.message());
        created_dir = true;
    }

    std::filesystem::path table_path(const std::string& stem) const {
        return out_dir / (stem + (format == output_format::csv ? ".csv" : ".json"));
    }

    void write_table(const std::string& stem, const Table& table) {
        const std::filesystem::path p = table_path(stem);
        if (format == output_format::csv)
            write_table_csv(p.string(), table);
        else
            write_table_json(p.string(), table);
        created_paths.push_back(p);
    }

    void write_report(const std::string& stem, const nlohmann::ordered_json& value) {
        const std::filesystem::path p = out_dir / (stem + ".json");
        write_json_file(p.string(), value);
        created_paths.push_back(p);
    }

    void write_text(const std::string& filename, const std::string& content) {
        const std::filesystem::path p = out_dir / filename;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw computation_error("cannot open '" + p.string() + "' for writing");
        out << content;
        if (!out) throw computation_error("failed writing '" + p.string() + "'");
        created_paths.push_back(p);
    }

    void track(const std::filesystem::path& p) { created_paths.push_back(p); }

    /// Remove everything this run created (best effort, for failure paths).
    void cleanup_partial() noexcept {
        namespace fs = std::filesystem;
        std::error_code ec;
        if (created_dir) {
            fs::remove_all(out_dir, ec);
            return;
        }
        for (auto it = created_paths.rbegin(); it != created_paths.rend(); ++it) fs::remove_all(*it, ec);
    }
};

namespace detail {

inline nlohmann::ordered_json opt_cell(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

inline void append_curve_row(Table& table, const CurveRow& row) {
    table.add_row({row.temperature_c, opt_cell(row.signal_nm), opt_cell(row.idler_nm),
                   opt_cell(row.signal_fwhm_nm), opt_cell(row.idler_fwhm_nm)});
}

inline Table curve_table() {
    Table t;
    t.columns = {"temperature_C", "lambda_s_nm", "lambda_i_nm", "fwhm_s_nm", "fwhm_i_nm"};
    return t;
}

} // namespace detail

/// Per-temperature spectra plus a summary of lobe centers and widths.
inline void cmd_spectrum(CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const std::vector<double> grid = make_grid(cfg.grid_min_nm, cfg.grid_max_nm, cfg.grid_step_nm);
    std::vector<double> temps = cfg.spectrum_temperatures_c;
    if (temps.empty()) temps.push_back(cfg.source.temperature_1_c);

    Table summary = detail::curve_table();
    for (double t : temps) {
        const Spectrum sp = spdc_spectrum(cfg.source, ctx.cat(), t, grid, "joint-marginal", false);
        Table st;
        st.columns = {"lambda_nm", "intensity"};
        for (std::size_t i = 0; i < sp.wavelength_nm.size(); ++i)
            st.add_row({sp.wavelength_nm[i], sp.intensity[i]});
        ctx.write_table("spectrum_T" + format_double(t) + "C", st);

        const std::vector<CurveRow> rows = phasematching_curve(cfg.source, ctx.cat(), t, t, 1.0);
        for (const CurveRow& row : rows) detail::append_curve_row(summary, row);
    }
    ctx.write_table("spectrum_summary", summary);
}

/// Phase-matching curve over the configured temperature range.
inline void cmd_pm_curve(CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const std::vector<CurveRow> rows =
        phasematching_curve(cfg.source, ctx.cat(), cfg.curve_t_min_c, cfg.curve_t_max_c, cfg.curve_t_step_c);
    Table t = detail::curve_table();
    for (const CurveRow& row : rows) detail::append_curve_row(t, row);
    ctx.write_table("pm_curve", t);
}

/// Residual phase maps (compensated and uncompensated), the weighted phase
/// profile along the energy-conservation curve, and the optimizer report.
inline void cmd_phase_map(CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const DispersionCatalog& cat = ctx.cat();
    const SignalIdler op = solve_signal_idler(cfg.source, cat, cfg.source.temperature_1_c);
    const std::vector<double> sgrid =
        make_grid(op.signal_nm - cfg.map_half_window_nm, op.signal_nm + cfg.map_half_window_nm, cfg.map_step_nm);
    const std::vector<double> igrid =
        make_grid(op.idler_nm - cfg.map_half_window_nm, op.idler_nm + cfg.map_half_window_nm, cfg.map_step_nm);

    auto emit_map = [&](const std::string& stem, const PhaseMap& map) {
        Table t;
        t.columns = {"lambda_s_nm", "lambda_i_nm", "phase_rad"};
        for (std::size_t is = 0; is < map.signal_grid_nm.size(); ++is)
            for (std::size_t ii = 0; ii < map.idler_grid_nm.size(); ++ii)
                t.add_row({map.signal_grid_nm[is], map.idler_grid_nm[ii], map.at(is, ii)});
        ctx.write_table(stem, t);
    };

    SourceConfig bare = cfg.source;
    bare.compensator_length_mm = 0.0;
    emit_map("phase_map_uncompensated", residual_phase_map(bare, cat, sgrid, igrid));
    emit_map("phase_map_compensated", residual_phase_map(cfg.source, cat, sgrid, igrid));

    const auto [band_lo, band_hi] = default_analysis_band(cfg.source, cat);
    const RidgeProfile ridge = residual_phase_ridge(cfg.source, cat, band_lo, band_hi, cfg.ridge_step_nm);
    Table rt;
    rt.columns = {"lambda_s_nm", "lambda_i_nm", "phase_rad", "weight"};
    for (std::size_t i = 0; i < ridge.signal_nm.size(); ++i)
        rt.add_row({ridge.signal_nm[i], ridge.idler_nm[i], ridge.phase_rad[i], ridge.weight[i]});
    ctx.write_table("ridge_profile", rt);

    if (cfg.map_optimize) {
        const CompensatorReport rep = optimize_compensator(cfg.source, cat, band_lo, band_hi);
        nlohmann::ordered_json j;
        j["optimum_mm"] = rep.optimum_mm;
        j["objective_at_optimum_rad2"] = rep.objective_at_optimum;
        j["weighted_std_at_optimum_rad"] = rep.weighted_std_at_optimum_rad;
        j["weighted_std_at_zero_rad"] = rep.weighted_std_at_zero_rad;
        j["reduction_factor"] = rep.reduction_factor;
        j["peak_to_peak_at_optimum_rad"] = rep.peak_to_peak_at_optimum_rad;
        j["multiple_minima"] = rep.multiple_minima;
        nlohmann::ordered_json scan = nlohmann::ordered_json::array();
        for (const auto& [mm, obj] : rep.scan) scan.push_back({{"length_mm", mm}, {"objective_rad2", obj}});
        j["scan"] = scan;
        ctx.write_report("compensator_report", j);
    }
}

/// Two-qubit state from the compensated source: density matrix, fidelity,
/// basis visibilities, and an optional simulated tomography round trip.
inline void cmd_state(CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const DispersionCatalog& cat = ctx.cat();
    const auto [band_lo, band_hi] = default_analysis_band(cfg.source, cat);
    const RidgeProfile ridge = residual_phase_ridge(cfg.source, cat, band_lo, band_hi, cfg.ridge_step_nm);
    const std::vector<double> grid = make_grid(band_lo, band_hi, cfg.ridge_step_nm);
    const CrystalSpectra spectra = crystal_spectra(cfg.source, cat, grid, true);
    const TwoQubitState state = build_state(ridge, spectra);

    std::string dm;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            if (c) dm += " ";
            dm += format_double(state.rho(r, c).real()) + " " + format_double(state.rho(r, c).imag());
        }
        dm += "\n";
    }
    ctx.write_text("density_matrix.txt", dm);

    Table summary;
    summary.columns = {"quantity", "value"};
    summary.add_row({"fidelity_phi_plus", fidelity(state, bell_phi_plus())});
    summary.add_row({"visibility_hv", correlation_visibility(state, analyzer_basis::hv)});
    summary.add_row({"visibility_da", correlation_visibility(state, analyzer_basis::da)});
    summary.add_row({"spectral_overlap", spectral_overlap(spectra.spectrum_h, spectra.spectrum_v)});
    summary.add_row({"purity", (state.rho * state.rho).trace().real()});
    summary.add_row({"ridge_weighted_std_rad", ridge.weighted_std_rad});
    summary.add_row({"ridge_peak_to_peak_rad", ridge.peak_to_peak_rad});

    if (cfg.tomography_counts > 0) {
        const auto counts = sample_tomography_counts(state, cfg.tomography_counts, cfg.seed);
        const auto& labels = tomography_labels();
        Table ct;
        ct.columns = {"signal_setting", "idler_setting", "counts"};
        for (int s = 0; s < 6; ++s)
            for (int i = 0; i < 6; ++i)
                ct.add_row({labels[s], labels[i], counts[s * 6 + i]});
        ctx.write_table("tomography_counts", ct);
        const TwoQubitState recon = reconstruct_from_counts(counts, cfg.tomography_counts);
        summary.add_row({"fidelity_tomography_phi_plus", fidelity(recon, bell_phi_plus())});
    }
    ctx.write_table("state_summary", summary);
}

namespace detail {

inline std::vector<double> power_grid(double p_min, double p_max, int points) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(points));
    if (p_min > 0.0) {
        const double ratio = p_max / p_min;
        for (int i = 0; i < points; ++i)
            out.push_back(p_min * std::pow(ratio, static_cast<double>(i) / (points - 1)));
    } else {
        for (int i = 0; i < points; ++i)
            out.push_back(p_min + (p_max - p_min) * static_cast<double>(i) / (points - 1));
    }
    out.back() = p_max;
    return out;
}

/// Simulated duration aiming at the target coincidence count in the brighter
/// port, clamped to keep degenerate configurations finite.
inline double mc_duration_s(const RatePrediction& rates, const DetectionModel& model, double target_counts) {
    const double true_rate = rates.true_coincidences_cps * 0.5 * (1.0 + model.emitted_visibility) * 0.5;
    const double acc_rate = 0.25 * rates.accidental_coincidences_cps;
    const double expected_cps = true_rate + acc_rate;
    if (!(expected_cps > 0.0)) return 1.0;
    return std::clamp(target_counts / expected_cps, 1e-6, 300.0);
}

} // namespace detail

/// Analytic visibility-versus-power tables for each coincidence window, with a
/// Monte Carlo overlay on the first window.
inline void cmd_visibility(CommandContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const double brightness_cps = cfg.brightness_kcps_per_mw * 1e3;
    const std::vector<double> powers = detail::power_grid(cfg.power_min_mw, cfg.power_max_mw, cfg.power_points);
    std::vector<double> windows_s;
    for (double w : cfg.windows_ns) windows_s.push_back(w * 1e-9);

    const std::vector<VisibilityPoint> rows = visibility_scan(powers, brightness_cps, cfg.detection, windows_s);
    Table at;
    at.columns = {"power_mw",   "window_ns", "generated_cps", "singles_s_cps", "singles_i_cps",
                  "true_cps",   "accidental_cps", "visibility", "pileup"};
    for (const VisibilityPoint& row : rows)
        at.add_row({row.power_mw, row.window_s * 1e9, row.rates.generated_pairs_cps, row.rates.singles_signal_cps,
                    row.rates.singles_idler_cps, row.rates.true_coincidences_cps,
                    row.rates.accidental_coincidences_cps, row.rates.visibility, row.pileup});
    ctx.write_table("visibility_analytic", at);

    if (!cfg.run_montecarlo) return;

    DetectionModel model = cfg.detection;
    model.coincidence_window_s = windows_s.front();
    const int mc_points = std::min(cfg.power_points, 10);
    const std::vector<double> mc_powers = detail::power_grid(cfg.power_min_mw, cfg.power_max_mw, mc_points);
    rng seed_base(cfg.seed);

    Table mt;
    mt.columns = {"power_mw",  "window_ns", "duration_s",          "coincidences_parallel",
                  "coincidences_orthogonal", "visibility",         "visibility_sigma",
                  "analytic_visibility",     "low_statistics"};
    std::vector<TimeTag> first_stream;
    for (int i = 0; i < mc_points; ++i) {
        const RatePrediction rates = rates_from_pump_power(mc_powers[i], brightness_cps, model);
        const double duration = detail::mc_duration_s(rates, model, static_cast<double>(cfg.mc_target_coincidences));
        const MonteCarloResult mc = montecarlo_timetags(duration, model, rates.generated_pairs_cps,
                                                        seed_base.derive(500 + static_cast<std::uint64_t>(i)).seed());
        if (i == 0 && !mc.streams.empty()) first_stream = mc.streams.front();
        mt.add_row({mc_powers[i], model.coincidence_window_s * 1e9, duration, mc.settings[0].coincidences,
                    mc.settings[1].coincidences, mc.visibility, mc.visibility_sigma, rates.visibility,
                    mc.low_statistics});
    }
    ctx.write_table("visibility_montecarlo", mt);

    if (!first_stream.empty()) {
        const std::filesystem::path bin = ctx.out_dir / "timetags_first_point.bin";
        write_timetags_binary(bin.string(), first_stream);
        ctx.track(bin);
        const std::filesystem::path csv = ctx.out_dir / "timetags_first_point.csv";
        write_timetags_csv(csv.string(), first_stream);
        ctx.track(csv);
    }
}

inline void run_named_command(CommandContext& ctx, const std::string& name);

/// Run every command into its own subdirectory.
inline void cmd_all(CommandContext& ctx) {
    static const char* const names[] = {"spectrum", "pm_curve", "phase_map", "state", "visibility"};
    for (const char* name : names) {
        CommandContext sub;
        sub.cfg = ctx.cfg;
        sub.catalog = ctx.catalog;
        sub.out_dir = ctx.out_dir / name;
        sub.format = ctx.format;
        auto merge = [&]() {
            if (sub.created_dir)
                ctx.created_paths.push_back(sub.out_dir);
            else
                ctx.created_paths.insert(ctx.created_paths.end(), sub.created_paths.begin(),
                                         sub.created_paths.end());
        };
        try {
            sub.ensure_out_dir();
            run_named_command(sub, name);
            merge();
        } catch (...) {
            merge();
            throw;
        }
    }
}

inline void run_named_command(CommandContext& ctx, const std::string& name) {
    if (name == "spectrum")
        cmd_spectrum(ctx);
    else if (name == "pm_curve")
        cmd_pm_curve(ctx);
    else if (name == "phase_map")
        cmd_phase_map(ctx);
    else if (name == "state")
        cmd_state(ctx);
    else if (name == "visibility")
        cmd_visibility(ctx);
    else if (name == "all")
        cmd_all(ctx);
    else
        throw argument_error("unknown command '" + name + "'");
}

} // namespace spdckit
