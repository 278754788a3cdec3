#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spdckit/common.hpp"
#include "spdckit/dispersion.hpp"

namespace spdckit {

/// Spectral bandpass filter. Transmission is a pure function of wavelength.
struct FilterSpec {
    enum class shape_kind { gaussian, tophat };

    double center_nm = 786.0;
    double fwhm_nm = 3.5;
    double peak_transmission = 0.9;
    shape_kind shape = shape_kind::gaussian;

    void validate() const {
        if (!(fwhm_nm > 0.0)) throw config_error("filter.fwhm_nm must be > 0, got " + format_double(fwhm_nm));
        if (!(peak_transmission > 0.0 && peak_transmission <= 1.0))
            throw config_error("filter.peak_transmission must be in (0, 1], got " +
                               format_double(peak_transmission));
        if (!(center_nm > 0.0)) throw config_error("filter.center_nm must be > 0, got " + format_double(center_nm));
    }

    double transmission(double wavelength_nm) const {
        if (shape == shape_kind::tophat)
            return std::abs(wavelength_nm - center_nm) <= 0.5 * fwhm_nm ? peak_transmission : 0.0;
        const double arg = (wavelength_nm - center_nm) / fwhm_nm;
        return peak_transmission * std::exp(-4.0 * std::log(2.0) * arg * arg);
    }
};

/**
 * Static description of the crossed-crystal source: pump, the two identical
 * down-conversion crystals (lengths and poling period), their temperatures, the
 * birefringent compensator and the collection filter. Temperatures: crystal 1
 * sits at temperature_1_c; crystal 2 at temperature_1_c - temperature_mismatch_c
 * (the small residual the oven cannot remove).
 */
struct SourceConfig {
    double pump_wavelength_nm = 405.4;
    double crystal_length_mm = 20.0;
    double poling_period_um = 3.425;
    double temperature_1_c = 28.3;
    double temperature_mismatch_c = 0.076;
    double compensator_length_mm = 30.01;
    double pump_phase_rad = 0.0;
    double pump_waist_um = 18.0;
    double collection_waist_um = 24.0;
    std::optional<FilterSpec> filter = FilterSpec{};

    double temperature_2_c() const { return temperature_1_c - temperature_mismatch_c; }

    void validate() const {
        if (!(pump_wavelength_nm > 350.0 && pump_wavelength_nm < 500.0))
            throw config_error("source.pump_wavelength_nm must be in (350, 500), got " +
                               format_double(pump_wavelength_nm));
        if (!(crystal_length_mm > 0.0))
            throw config_error("source.crystal_length_mm must be > 0, got " + format_double(crystal_length_mm));
        if (!(poling_period_um > 1.0 && poling_period_um < 100.0))
            throw config_error("source.poling_period_um must be in (1, 100), got " +
                               format_double(poling_period_um));
        if (!(compensator_length_mm >= 0.0))
            throw config_error("source.compensator_length_mm must be >= 0, got " +
                               format_double(compensator_length_mm));
        if (!(pump_waist_um > 0.0))
            throw config_error("source.pump_waist_um must be > 0, got " + format_double(pump_waist_um));
        if (!(collection_waist_um > 0.0))
            throw config_error("source.collection_waist_um must be > 0, got " +
                               format_double(collection_waist_um));
        if (filter) filter->validate();
    }
};

/**
 * Relative spectral density sampled on a strictly increasing wavelength grid.
 * Non-empty spectra are normalized so the maximum sample is 1; absolute
 * transmission factors are deliberately not tracked.
 */
struct Spectrum {
    std::vector<double> wavelength_nm;
    std::vector<double> intensity;
    std::string label; // "signal", "idler" or "joint-marginal"

    void validate_and_normalize() {
        if (wavelength_nm.size() != intensity.size())
            throw argument_error("spectrum '" + label + "': grid and intensity sizes differ");
        for (std::size_t i = 1; i < wavelength_nm.size(); ++i)
            if (!(wavelength_nm[i] > wavelength_nm[i - 1]))
                throw argument_error("spectrum '" + label + "': wavelengths must be strictly increasing near " +
                                     format_double(wavelength_nm[i]) + " nm");
        double peak = 0.0;
        for (double v : intensity) {
            if (!(v >= 0.0))
                throw argument_error("spectrum '" + label + "': negative intensity " + format_double(v));
            peak = std::max(peak, v);
        }
        if (peak > 0.0)
            for (double& v : intensity) v /= peak;
    }
};

namespace detail {

/// n_z * u with u = 1/lambda in 1/um; the building block of the collinear mismatch.
inline double zweight(const DispersionModel& nz, double u_per_um, double temperature_c) {
    return refractive_index(nz, 1000.0 / u_per_um, temperature_c) * u_per_um;
}

/**
 * Quasi-phase-matching mismatch divided by 2*pi, in 1/um:
 *   f = n(lp)/lp - n(ls)/ls - n(li)/li - 1/period
 * expressed through u = 1/lambda, with the idler frequency fixed by energy
 * conservation. All three fields use the KTP z axis (type 0).
 */
inline double qpm_mismatch(const SourceConfig& cfg, const DispersionCatalog& cat, double u_signal_per_um,
                           double temperature_c) {
    const DispersionModel& nz = cat.by_axis("KTP", "z");
    const double u_pump = 1000.0 / cfg.pump_wavelength_nm;
    const double u_idler = u_pump - u_signal_per_um;
    return zweight(nz, u_pump, temperature_c) - zweight(nz, u_signal_per_um, temperature_c) -
           zweight(nz, u_idler, temperature_c) - 1.0 / cfg.poling_period_um;
}

} // namespace detail

/**
 * Collinear phase mismatch k_p - k_s - k_i - 2*pi/period in rad/m for a given
 * signal wavelength; the idler is fixed by energy conservation. Zero crossing
 * defines phase matching.
 */
inline double delta_k_per_m(const SourceConfig& cfg, const DispersionCatalog& cat, double signal_wavelength_nm,
                            double temperature_c) {
    if (!(signal_wavelength_nm > cfg.pump_wavelength_nm))
        throw argument_error("delta_k: signal wavelength " + format_double(signal_wavelength_nm) +
                             " nm must exceed the pump wavelength " + format_double(cfg.pump_wavelength_nm) +
                             " nm");
    const double us = 1000.0 / signal_wavelength_nm;
    return two_pi * 1e6 * detail::qpm_mismatch(cfg, cat, us, temperature_c);
}

struct SignalIdler {
    double signal_nm = 0.0;
    double idler_nm = 0.0;
};

namespace detail {

inline constexpr double solve_window_min_nm = 700.0;
inline constexpr double solve_window_max_nm = 950.0;

/// Degenerate-point mismatch tolerance in 1/um. Numerical noise of the mismatch
/// is a few 1e-15; anything below this is treated as exactly degenerate.
inline constexpr double degeneracy_tolerance = 1e-13;

} // namespace detail

/**
 * Solve energy conservation plus quasi-phase-matching for the signal/idler pair
 * at one temperature. Returns the pair with signal_nm < idler_nm; exactly at the
 * degeneracy temperature both equal twice the pump wavelength. Below degeneracy
 * (no real solution) a computation_error reports the mismatch sign at the search
 * window edges. The search window is 700 to 950 nm.
 */
inline SignalIdler solve_signal_idler(const SourceConfig& cfg, const DispersionCatalog& cat,
                                      double temperature_c) {
    cfg.validate();
    const double u_pump = 1000.0 / cfg.pump_wavelength_nm;
    const double u_deg = 0.5 * u_pump;
    const double degenerate_nm = 2.0 * cfg.pump_wavelength_nm;
    if (!(degenerate_nm > detail::solve_window_min_nm && degenerate_nm < detail::solve_window_max_nm))
        throw computation_error("solve_signal_idler: degenerate wavelength " + format_double(degenerate_nm) +
                                " nm falls outside the 700-950 nm search window");

    const double f_deg = detail::qpm_mismatch(cfg, cat, u_deg, temperature_c);
    if (std::abs(f_deg) <= detail::degeneracy_tolerance)
        return {degenerate_nm, degenerate_nm};
    if (f_deg < 0.0) {
        const double dk_lo = delta_k_per_m(cfg, cat, detail::solve_window_min_nm, temperature_c);
        const double dk_deg = two_pi * 1e6 * f_deg;
        throw computation_error(
            "not phase-matched at T = " + format_double(temperature_c) + " C: delta_k stays negative (" +
            format_double(dk_lo) + " rad/m at 700 nm, " + format_double(dk_deg) + " rad/m at degeneracy)");
    }

    // Above degeneracy the mismatch is positive at the degenerate point and falls
    // off on both sides; the signal root lies between degeneracy and the window edge.
    const double u_max = 1000.0 / detail::solve_window_min_nm;
    const double f_edge = detail::qpm_mismatch(cfg, cat, u_max, temperature_c);
    if (f_edge > 0.0)
        throw computation_error("not phase-matched at T = " + format_double(temperature_c) +
                                " C: delta_k positive across the whole 700 nm to degeneracy window (" +
                                format_double(two_pi * 1e6 * f_edge) + " rad/m at the 700 nm edge)");
    const double us = brent_root(
        [&](double u) { return detail::qpm_mismatch(cfg, cat, u, temperature_c); }, u_deg, u_max, 1e-15);
    const double ui = u_pump - us;
    return {1000.0 / us, 1000.0 / ui};
}

/**
 * Temperature at which signal and idler become degenerate, found by a bracketed
 * root search of the degenerate-point mismatch over the dispersion model's
 * temperature validity.
 */
inline double degeneracy_temperature_c(const SourceConfig& cfg, const DispersionCatalog& cat) {
    cfg.validate();
    const DispersionModel& nz = cat.by_axis("KTP", "z");
    const double u_deg = 500.0 / cfg.pump_wavelength_nm;
    auto f = [&](double t) { return detail::qpm_mismatch(cfg, cat, u_deg, t); };
    const double lo = nz.temperature_min_c;
    const double hi = nz.temperature_max_c;
    if ((f(lo) > 0.0) == (f(hi) > 0.0))
        throw computation_error("degeneracy temperature not bracketed inside the model validity [" +
                                format_double(lo) + ", " + format_double(hi) + "] C");
    return brent_root(f, lo, hi, 1e-11);
}

/**
 * Relative down-conversion spectrum I = sinc^2(delta_k * L / 2) on the grid,
 * normalized to peak 1. When apply_filter is set and the config has a filter, the
 * filter transmission multiplies the spectrum before renormalization (the filter
 * reshapes; absolute transmission is not tracked).
 */
inline Spectrum spdc_spectrum(const SourceConfig& cfg, const DispersionCatalog& cat, double temperature_c,
                              const std::vector<double>& wavelength_grid_nm,
                              const std::string& label = "joint-marginal", bool apply_filter = false) {
    cfg.validate();
    if (wavelength_grid_nm.empty()) throw argument_error("spdc_spectrum: empty wavelength grid");
    const double half_length_um = 0.5 * cfg.crystal_length_mm * 1e3;
    Spectrum sp;
    sp.label = label;
    sp.wavelength_nm = wavelength_grid_nm;
    sp.intensity.resize(wavelength_grid_nm.size());
    for (std::size_t i = 0; i < wavelength_grid_nm.size(); ++i) {
        const double us = 1000.0 / wavelength_grid_nm[i];
        const double x = two_pi * detail::qpm_mismatch(cfg, cat, us, temperature_c) * half_length_um;
        const double s = (x == 0.0) ? 1.0 : std::sin(x) / x;
        double v = s * s;
        if (apply_filter && cfg.filter) v *= cfg.filter->transmission(wavelength_grid_nm[i]);
        sp.intensity[i] = v;
    }
    sp.validate_and_normalize();
    return sp;
}

/// Uniform grid helper, inclusive of both ends (the last step may be shortened).
inline std::vector<double> make_grid(double min_v, double max_v, double step) {
    if (!(step > 0.0)) throw argument_error("make_grid: step must be > 0, got " + format_double(step));
    if (!(max_v > min_v)) throw argument_error("make_grid: max must exceed min");
    // Generate by index rather than accumulating the step, so long grids do
    // not drift and the endpoint lands exactly on max.
    const std::size_t steps = static_cast<std::size_t>(std::floor((max_v - min_v) / step + 1e-9));
    std::vector<double> g;
    g.reserve(steps + 2);
    for (std::size_t i = 0; i <= steps; ++i) g.push_back(min_v + static_cast<double>(i) * step);
    if (g.back() >= max_v - 1e-9 * step)
        g.back() = max_v;
    else
        g.push_back(max_v);
    return g;
}

/// Default analysis grid: 0.05 nm steps over 740 to 890 nm.
inline std::vector<double> default_wavelength_grid() { return make_grid(740.0, 890.0, 0.05); }

/**
 * Full width at half maximum by linear interpolation around the global peak.
 * Requires both half-level crossings inside the grid; otherwise raises
 * computation_error("truncated spectrum ...").
 */
inline double fwhm_nm(const Spectrum& sp) {
    if (sp.wavelength_nm.size() < 3) throw argument_error("fwhm: need at least 3 samples");
    std::size_t ipk = 0;
    for (std::size_t i = 1; i < sp.intensity.size(); ++i)
        if (sp.intensity[i] > sp.intensity[ipk]) ipk = i;
    const double half = 0.5 * sp.intensity[ipk];
    if (!(half > 0.0)) throw computation_error("fwhm: spectrum has no positive peak");

    double left = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = ipk; i > 0; --i) {
        if (sp.intensity[i - 1] <= half) {
            const double x0 = sp.wavelength_nm[i - 1], x1 = sp.wavelength_nm[i];
            const double y0 = sp.intensity[i - 1], y1 = sp.intensity[i];
            left = x0 + (x1 - x0) * (half - y0) / (y1 - y0);
            break;
        }
    }
    double right = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = ipk; i + 1 < sp.intensity.size(); ++i) {
        if (sp.intensity[i + 1] <= half) {
            const double x0 = sp.wavelength_nm[i], x1 = sp.wavelength_nm[i + 1];
            const double y0 = sp.intensity[i], y1 = sp.intensity[i + 1];
            right = x0 + (x1 - x0) * (y0 - half) / (y0 - y1);
            break;
        }
    }
    if (std::isnan(left) || std::isnan(right))
        throw computation_error("truncated spectrum: half level not bracketed inside the grid for '" + sp.label +
                                "'");
    return right - left;
}

/// One row of the temperature scan. Fields are empty where the quantity does not
/// exist at that temperature (no phase matching, or a lobe truncated by the grid).
struct CurveRow {
    double temperature_c = 0.0;
    std::optional<double> signal_nm;
    std::optional<double> idler_nm;
    std::optional<double> signal_fwhm_nm;
    std::optional<double> idler_fwhm_nm;
};

/**
 * Phase-matching characteristics versus temperature: solved wavelength pair and
 * the unfiltered lobe widths. Rows where no solution exists keep their
 * temperature and empty optionals rather than being dropped.
 */
inline std::vector<CurveRow> phasematching_curve(const SourceConfig& cfg, const DispersionCatalog& cat,
                                                 double t_min_c, double t_max_c, double t_step_c) {
    cfg.validate();
    if (!(t_step_c > 0.0)) throw argument_error("phasematching_curve: step must be > 0");
    if (!(t_max_c >= t_min_c)) throw argument_error("phasematching_curve: t_max must be >= t_min");
    const std::vector<double> grid = default_wavelength_grid();
    const double degenerate_nm = 2.0 * cfg.pump_wavelength_nm;
    std::vector<CurveRow> rows;
    for (double t = t_min_c; t <= t_max_c + 0.5 * t_step_c; t += t_step_c) {
        CurveRow row;
        row.temperature_c = t;
        try {
            const SignalIdler pair = solve_signal_idler(cfg, cat, t);
            row.signal_nm = pair.signal_nm;
            row.idler_nm = pair.idler_nm;
            const Spectrum full = spdc_spectrum(cfg, cat, t, grid, "joint-marginal", false);
            Spectrum sig, idl;
            sig.label = "signal";
            idl.label = "idler";
            for (std::size_t i = 0; i < full.wavelength_nm.size(); ++i) {
                if (full.wavelength_nm[i] < degenerate_nm) {
                    sig.wavelength_nm.push_back(full.wavelength_nm[i]);
                    sig.intensity.push_back(full.intensity[i]);
                } else if (full.wavelength_nm[i] > degenerate_nm) {
                    idl.wavelength_nm.push_back(full.wavelength_nm[i]);
                    idl.intensity.push_back(full.intensity[i]);
                }
            }
            sig.validate_and_normalize();
            idl.validate_and_normalize();
            try {
                row.signal_fwhm_nm = fwhm_nm(sig);
            } catch (const computation_error&) {
                // merged lobe near degeneracy: width undefined on the signal side
            }
            try {
                row.idler_fwhm_nm = fwhm_nm(idl);
            } catch (const computation_error&) {
            }
        } catch (const computation_error&) {
            // not phase-matched at this temperature; row stays marked empty
        }
        rows.push_back(row);
    }
    return rows;
}

/// Rayleigh range z_R = pi w^2 / lambda, waist in um, wavelength in nm, result in mm.
inline double rayleigh_range_mm(double waist_um, double wavelength_nm) {
    if (!(waist_um > 0.0)) throw argument_error("rayleigh_range: waist must be > 0, got " + format_double(waist_um));
    if (!(wavelength_nm > 0.0))
        throw argument_error("rayleigh_range: wavelength must be > 0, got " + format_double(wavelength_nm));
    const double w_mm = waist_um * 1e-3;
    const double lam_mm = wavelength_nm * 1e-6;
    return pi * w_mm * w_mm / lam_mm;
}

} // namespace spdckit
