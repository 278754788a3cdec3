#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "spdckit/common.hpp"
#include "spdckit/keyvalue.hpp"
#include "spdckit/pair_statistics.hpp"
#include "spdckit/phasematching.hpp"

namespace spdckit {

/**
 * Full configuration for the command-line tool. Every field has a default
 * matching the reference source (405.4 nm pump, two 20 mm crystals,
 * 3.425 um poling, 30.01 mm compensator, 3.5 nm filter, 2.4 ns window), so an
 * empty config reproduces the headline numbers. A config file only overrides
 * what it names, and the whole file is schema-checked before any computation.
 */
struct RunConfig {
    SourceConfig source;
    DetectionModel detection;
    double brightness_kcps_per_mw = 640.0;
    std::uint64_t seed = 20260816;

    // [spectrum]
    std::vector<double> spectrum_temperatures_c; // empty: use source.temperature_1_c
    double grid_min_nm = 740.0;
    double grid_max_nm = 890.0;
    double grid_step_nm = 0.05;

    // [pm_curve]
    double curve_t_min_c = 22.0;
    double curve_t_max_c = 40.0;
    double curve_t_step_c = 0.5;

    // [phase_map]
    double map_half_window_nm = 1.0;
    double map_step_nm = 0.005;
    bool map_optimize = true;

    // [state]
    std::uint64_t tomography_counts = 100000;
    double ridge_step_nm = 0.02;

    // [visibility]
    double power_min_mw = 0.025;
    double power_max_mw = 40.0;
    int power_points = 25;
    std::vector<double> windows_ns = {2.4, 0.1};
    bool run_montecarlo = true;
    std::uint64_t mc_target_coincidences = 2000;

    void validate() const {
        source.validate();
        detection.validate();
        if (!(brightness_kcps_per_mw >= 0.0))
            throw config_error("detection.brightness_kcps_per_mw must be >= 0");
        for (double t : spectrum_temperatures_c)
            if (!(t > -273.15)) throw config_error("spectrum.temperatures_c contains an unphysical value");
        if (!(grid_step_nm > 0.0)) throw config_error("spectrum.grid_step_nm must be > 0");
        if (!(grid_min_nm < grid_max_nm)) throw config_error("spectrum.grid_min_nm must be below grid_max_nm");
        if (!(curve_t_step_c > 0.0)) throw config_error("pm_curve.t_step_c must be > 0");
        if (!(curve_t_min_c <= curve_t_max_c)) throw config_error("pm_curve.t_min_c must not exceed t_max_c");
        if (!(map_half_window_nm > 0.0)) throw config_error("phase_map.half_window_nm must be > 0");
        if (!(map_step_nm > 0.0)) throw config_error("phase_map.step_nm must be > 0");
        if (tomography_counts > 1000000000ull)
            throw config_error("state.tomography_counts must be at most 10^9");
        if (!(ridge_step_nm > 0.0)) throw config_error("state.ridge_step_nm must be > 0");
        if (!(power_min_mw >= 0.0)) throw config_error("visibility.p_min_mw must be >= 0");
        if (!(power_max_mw > power_min_mw)) throw config_error("visibility.p_max_mw must exceed p_min_mw");
        if (power_points < 2) throw config_error("visibility.points must be at least 2");
        if (windows_ns.empty()) throw config_error("visibility.windows_ns must list at least one window");
        for (double w : windows_ns)
            if (!(w > 0.0)) throw config_error("visibility.windows_ns entries must be > 0");
        if (mc_target_coincidences < 1)
            throw config_error("visibility.mc_target_coincidences must be >= 1");
    }
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"source",
         {"pump_wavelength_nm", "crystal_length_mm", "poling_period_um", "temperature_1_c",
          "temperature_mismatch_c", "compensator_length_mm", "pump_phase_rad", "pump_waist_um",
          "collection_waist_um"}},
        {"filter", {"enabled", "center_nm", "fwhm_nm", "peak_transmission", "shape"}},
        {"detection",
         {"efficiency_signal", "efficiency_idler", "detector_quantum_efficiency", "dark_counts_cps",
          "coincidence_window_ns", "saturation_rate_cps", "emitted_visibility", "brightness_kcps_per_mw"}},
        {"run", {"seed"}},
        {"spectrum", {"temperatures_c", "grid_min_nm", "grid_max_nm", "grid_step_nm"}},
        {"pm_curve", {"t_min_c", "t_max_c", "t_step_c"}},
        {"phase_map", {"half_window_nm", "step_nm", "optimize"}},
        {"state", {"tomography_counts", "ridge_step_nm"}},
        {"visibility",
         {"p_min_mw", "p_max_mw", "points", "windows_ns", "montecarlo", "mc_target_coincidences"}},
    };
    return schema;
}

inline void check_config_schema(const KeyValueFile& kv) {
    const auto& schema = config_schema();
    for (const std::string& section : kv.section_order) {
        auto it = schema.find(section);
        if (it == schema.end())
            throw config_error(kv.origin + ": unknown section [" + section + "]");
        for (const auto& [key, value] : kv.sections.at(section)) {
            (void)value;
            if (!it->second.count(key))
                throw config_error(kv.origin + ": unknown key '" + section + "." + key + "'");
        }
    }
}

} // namespace detail

/// Parse and schema-check a config file, applying overrides onto the defaults.
inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) {
        cfg.validate();
        return cfg;
    }
    const KeyValueFile kv = load_keyvalue(path);
    detail::check_config_schema(kv);

    auto get_d = [&](const char* sec, const char* key, double& target) {
        if (kv.has_key(sec, key)) target = kv_get_double(kv, sec, key);
    };
    auto get_b = [&](const char* sec, const char* key, bool& target) {
        if (kv.has_key(sec, key)) target = kv_get_bool(kv, sec, key);
    };

    get_d("source", "pump_wavelength_nm", cfg.source.pump_wavelength_nm);
    get_d("source", "crystal_length_mm", cfg.source.crystal_length_mm);
    get_d("source", "poling_period_um", cfg.source.poling_period_um);
    get_d("source", "temperature_1_c", cfg.source.temperature_1_c);
    get_d("source", "temperature_mismatch_c", cfg.source.temperature_mismatch_c);
    get_d("source", "compensator_length_mm", cfg.source.compensator_length_mm);
    get_d("source", "pump_phase_rad", cfg.source.pump_phase_rad);
    get_d("source", "pump_waist_um", cfg.source.pump_waist_um);
    get_d("source", "collection_waist_um", cfg.source.collection_waist_um);

    bool filter_enabled = cfg.source.filter.has_value();
    get_b("filter", "enabled", filter_enabled);
    if (!filter_enabled) {
        cfg.source.filter.reset();
    } else {
        FilterSpec filter = cfg.source.filter.value_or(FilterSpec{});
        get_d("filter", "center_nm", filter.center_nm);
        get_d("filter", "fwhm_nm", filter.fwhm_nm);
        get_d("filter", "peak_transmission", filter.peak_transmission);
        if (kv.has_key("filter", "shape")) {
            const std::string shape = kv_get_string(kv, "filter", "shape");
            if (shape == "gaussian")
                filter.shape = FilterSpec::shape_kind::gaussian;
            else if (shape == "tophat")
                filter.shape = FilterSpec::shape_kind::tophat;
            else
                throw config_error(kv.origin + ": filter.shape must be 'gaussian' or 'tophat', got '" +
                                   shape + "'");
        }
        cfg.source.filter = filter;
    }

    get_d("detection", "efficiency_signal", cfg.detection.efficiency_signal);
    get_d("detection", "efficiency_idler", cfg.detection.efficiency_idler);
    get_d("detection", "detector_quantum_efficiency", cfg.detection.detector_quantum_efficiency);
    get_d("detection", "dark_counts_cps", cfg.detection.dark_counts_cps);
    if (kv.has_key("detection", "coincidence_window_ns"))
        cfg.detection.coincidence_window_s = kv_get_double(kv, "detection", "coincidence_window_ns") * 1e-9;
    get_d("detection", "saturation_rate_cps", cfg.detection.saturation_rate_cps);
    get_d("detection", "emitted_visibility", cfg.detection.emitted_visibility);
    get_d("detection", "brightness_kcps_per_mw", cfg.brightness_kcps_per_mw);

    if (kv.has_key("run", "seed")) {
        const long long seed = kv_get_int(kv, "run", "seed");
        if (seed < 0) throw config_error(kv.origin + ": run.seed must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(seed);
    }

    if (kv.has_key("spectrum", "temperatures_c"))
        cfg.spectrum_temperatures_c = kv_get_double_list(kv, "spectrum", "temperatures_c");
    get_d("spectrum", "grid_min_nm", cfg.grid_min_nm);
    get_d("spectrum", "grid_max_nm", cfg.grid_max_nm);
    get_d("spectrum", "grid_step_nm", cfg.grid_step_nm);

    get_d("pm_curve", "t_min_c", cfg.curve_t_min_c);
    get_d("pm_curve", "t_max_c", cfg.curve_t_max_c);
    get_d("pm_curve", "t_step_c", cfg.curve_t_step_c);

    get_d("phase_map", "half_window_nm", cfg.map_half_window_nm);
    get_d("phase_map", "step_nm", cfg.map_step_nm);
    get_b("phase_map", "optimize", cfg.map_optimize);

    if (kv.has_key("state", "tomography_counts")) {
        const long long n = kv_get_int(kv, "state", "tomography_counts");
        if (n < 0) throw config_error(kv.origin + ": state.tomography_counts must be >= 0");
        cfg.tomography_counts = static_cast<std::uint64_t>(n);
    }
    get_d("state", "ridge_step_nm", cfg.ridge_step_nm);

    get_d("visibility", "p_min_mw", cfg.power_min_mw);
    get_d("visibility", "p_max_mw", cfg.power_max_mw);
    if (kv.has_key("visibility", "points")) {
        const long long n = kv_get_int(kv, "visibility", "points");
        if (n < 2 || n > 100000) throw config_error(kv.origin + ": visibility.points must be in [2, 100000]");
        cfg.power_points = static_cast<int>(n);
    }
    if (kv.has_key("visibility", "windows_ns"))
        cfg.windows_ns = kv_get_double_list(kv, "visibility", "windows_ns");
    get_b("visibility", "montecarlo", cfg.run_montecarlo);
    if (kv.has_key("visibility", "mc_target_coincidences")) {
        const long long n = kv_get_int(kv, "visibility", "mc_target_coincidences");
        if (n < 1) throw config_error(kv.origin + ": visibility.mc_target_coincidences must be >= 1");
        cfg.mc_target_coincidences = static_cast<std::uint64_t>(n);
    }

    cfg.validate();
    return cfg;
}

} // namespace spdckit
