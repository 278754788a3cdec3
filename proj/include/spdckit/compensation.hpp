#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spdckit/common.hpp"
#include "spdckit/dispersion.hpp"
#include "spdckit/phasematching.hpp"

namespace spdckit {

/**
 * Relative phase between the two pair amplitudes accumulated by dispersion in
 * the second down-conversion crystal:
 *
 *   phi = phi_pump + 2*pi*L*(n_y(ls)/ls + n_y(li)/li)
 *
 * with L one crystal length. The z-index contributions cancel through the
 * phase-matching condition, so only the y axis enters. n_y is evaluated at the
 * second crystal's temperature; its thermo-optic influence on this phase is a
 * few mrad and kept for consistency.
 */
inline double crossed_crystal_phase_rad(const SourceConfig& cfg, const DispersionCatalog& cat,
                                        double signal_nm, double idler_nm) {
    const DispersionModel& ny = cat.by_axis("KTP", "y");
    const double t = cfg.temperature_2_c();
    const double length_nm = cfg.crystal_length_mm * 1e6;
    return cfg.pump_phase_rad + two_pi * length_nm * (refractive_index(ny, signal_nm, t) / signal_nm +
                                                      refractive_index(ny, idler_nm, t) / idler_nm);
}

/**
 * Compensation phase of a YVO4 crystal of the given length, using the ordinary
 * minus extraordinary projection for both photons:
 *
 *   phi_C = 2*pi*L_yvo*[(n_o - n_e)(ls)/ls + (n_o - n_e)(li)/li]
 *
 * YVO4 is modeled temperature independent and always evaluated at its reference
 * temperature.
 */
inline double compensator_phase_rad(const DispersionCatalog& cat, double compensator_length_mm,
                                    double signal_nm, double idler_nm) {
    if (!(compensator_length_mm >= 0.0))
        throw argument_error("compensator_phase: length must be >= 0, got " +
                             format_double(compensator_length_mm));
    const DispersionModel& no = cat.by_axis("YVO4", "o");
    const DispersionModel& ne = cat.by_axis("YVO4", "e");
    const double t = no.reference_temperature_c;
    const double length_nm = compensator_length_mm * 1e6;
    auto term = [&](double lam) {
        return (refractive_index(no, lam, t) - refractive_index(ne, lam, t)) / lam;
    };
    return two_pi * length_nm * (term(signal_nm) + term(idler_nm));
}

/// Total relative phase (crossed-crystal plus compensator) at one wavelength pair.
inline double residual_phase_rad(const SourceConfig& cfg, const DispersionCatalog& cat, double signal_nm,
                                 double idler_nm) {
    return crossed_crystal_phase_rad(cfg, cat, signal_nm, idler_nm) +
           compensator_phase_rad(cat, cfg.compensator_length_mm, signal_nm, idler_nm);
}

/**
 * Dense phase surface over a signal x idler wavelength grid, mean subtracted
 * (only relative phase matters). Values are stored unwrapped; the constructor
 * verifies the sampling is fine enough for that to be meaningful, i.e. no
 * adjacent-cell step may exceed pi. At 2x20 mm the phase slope is a few hundred
 * rad/nm, so grids need steps below roughly 0.008 nm.
 */
struct PhaseMap {
    std::vector<double> signal_grid_nm;
    std::vector<double> idler_grid_nm;
    std::vector<double> phase_rad; // row-major, index = is * idler_grid.size() + ii
    SourceConfig config;           // snapshot of the generating configuration

    double at(std::size_t is, std::size_t ii) const { return phase_rad[is * idler_grid_nm.size() + ii]; }

    void validate() const {
        const std::size_t ns = signal_grid_nm.size(), ni = idler_grid_nm.size();
        if (ns == 0 || ni == 0) throw argument_error("phase map: empty grid");
        if (phase_rad.size() != ns * ni)
            throw argument_error("phase map: value array does not match the grid shape");
        for (std::size_t i = 1; i < ns; ++i)
            if (!(signal_grid_nm[i] > signal_grid_nm[i - 1]))
                throw argument_error("phase map: signal grid must be strictly increasing");
        for (std::size_t i = 1; i < ni; ++i)
            if (!(idler_grid_nm[i] > idler_grid_nm[i - 1]))
                throw argument_error("phase map: idler grid must be strictly increasing");
        for (std::size_t is = 0; is < ns; ++is)
            for (std::size_t ii = 0; ii < ni; ++ii) {
                if (ii + 1 < ni && std::abs(at(is, ii + 1) - at(is, ii)) > pi)
                    throw argument_error("phase map: grid too coarse to represent a continuous surface "
                                         "(adjacent idler cells step by more than pi near " +
                                         format_double(idler_grid_nm[ii]) + " nm); refine the grid step");
                if (is + 1 < ns && std::abs(at(is + 1, ii) - at(is, ii)) > pi)
                    throw argument_error("phase map: grid too coarse to represent a continuous surface "
                                         "(adjacent signal cells step by more than pi near " +
                                         format_double(signal_grid_nm[is]) + " nm); refine the grid step");
            }
    }
};

namespace detail {

inline double wrap_to_pi(double x) {
    x = std::fmod(x + pi, two_pi);
    if (x < 0.0) x += two_pi;
    return x - pi;
}

} // namespace detail

/**
 * Unwrap a wrapped phase array (same shape conventions as PhaseMap) by first
 * unwrapping one boundary line and then every line perpendicular to it. The two
 * path orders must agree on sufficiently sampled data; both are provided so that
 * agreement can be checked.
 */
inline std::vector<double> unwrap_rows_then_columns(const std::vector<double>& wrapped, std::size_t ns,
                                                    std::size_t ni) {
    if (wrapped.size() != ns * ni) throw argument_error("unwrap: array does not match the grid shape");
    std::vector<double> out(wrapped.size());
    out[0] = wrapped[0];
    for (std::size_t ii = 1; ii < ni; ++ii)
        out[ii] = out[ii - 1] + detail::wrap_to_pi(wrapped[ii] - wrapped[ii - 1]);
    for (std::size_t ii = 0; ii < ni; ++ii)
        for (std::size_t is = 1; is < ns; ++is)
            out[is * ni + ii] =
                out[(is - 1) * ni + ii] + detail::wrap_to_pi(wrapped[is * ni + ii] - wrapped[(is - 1) * ni + ii]);
    return out;
}

inline std::vector<double> unwrap_columns_then_rows(const std::vector<double>& wrapped, std::size_t ns,
                                                    std::size_t ni) {
    if (wrapped.size() != ns * ni) throw argument_error("unwrap: array does not match the grid shape");
    std::vector<double> out(wrapped.size());
    out[0] = wrapped[0];
    for (std::size_t is = 1; is < ns; ++is)
        out[is * ni] = out[(is - 1) * ni] + detail::wrap_to_pi(wrapped[is * ni] - wrapped[(is - 1) * ni]);
    for (std::size_t is = 0; is < ns; ++is)
        for (std::size_t ii = 1; ii < ni; ++ii)
            out[is * ni + ii] =
                out[is * ni + ii - 1] + detail::wrap_to_pi(wrapped[is * ni + ii] - wrapped[is * ni + ii - 1]);
    return out;
}

/**
 * Residual phase surface phi + phi_C over the grids, unwrapped and mean
 * subtracted. Compose with compensator_length_mm = 0 to get the bare
 * crossed-crystal map (minus its mean).
 */
inline PhaseMap residual_phase_map(const SourceConfig& cfg, const DispersionCatalog& cat,
                                   const std::vector<double>& signal_grid_nm,
                                   const std::vector<double>& idler_grid_nm) {
    cfg.validate();
    if (signal_grid_nm.empty() || idler_grid_nm.empty())
        throw argument_error("residual_phase_map: empty grid");
    PhaseMap map;
    map.signal_grid_nm = signal_grid_nm;
    map.idler_grid_nm = idler_grid_nm;
    map.config = cfg;
    map.phase_rad.resize(signal_grid_nm.size() * idler_grid_nm.size());
    double mean = 0.0;
    for (std::size_t is = 0; is < signal_grid_nm.size(); ++is)
        for (std::size_t ii = 0; ii < idler_grid_nm.size(); ++ii) {
            const double v = residual_phase_rad(cfg, cat, signal_grid_nm[is], idler_grid_nm[ii]);
            map.phase_rad[is * idler_grid_nm.size() + ii] = v;
            mean += v;
        }
    mean /= static_cast<double>(map.phase_rad.size());
    for (double& v : map.phase_rad) v -= mean;
    map.validate();
    return map;
}

/**
 * Residual phase along the energy-conservation curve 1/ls + 1/li = 1/lp, which
 * is where a CW-pumped pair actually lives; the dense map above varies by
 * thousands of radians across a box, but only this section is weighted by the
 * joint spectral density. Weights are the filtered spectral density at the first
 * crystal's temperature; the stored phase is weighted-mean subtracted.
 */
struct RidgeProfile {
    std::vector<double> signal_nm;
    std::vector<double> idler_nm;
    std::vector<double> phase_rad;
    std::vector<double> weight;
    double weighted_std_rad = 0.0;
    double peak_to_peak_rad = 0.0;
};

inline RidgeProfile residual_phase_ridge(const SourceConfig& cfg, const DispersionCatalog& cat,
                                         double band_min_nm, double band_max_nm, double step_nm = 0.02,
                                         std::optional<double> compensator_override_mm = std::nullopt) {
    cfg.validate();
    if (!(band_max_nm > band_min_nm)) throw argument_error("residual_phase_ridge: empty band");
    SourceConfig local = cfg;
    if (compensator_override_mm) {
        if (!(*compensator_override_mm >= 0.0))
            throw argument_error("residual_phase_ridge: compensator length must be >= 0");
        local.compensator_length_mm = *compensator_override_mm;
    }
    const std::vector<double> band = make_grid(band_min_nm, band_max_nm, step_nm);
    const Spectrum weights = spdc_spectrum(cfg, cat, cfg.temperature_1_c, band, "signal", true);
    const double u_pump = 1000.0 / cfg.pump_wavelength_nm;

    RidgeProfile prof;
    prof.signal_nm = band;
    prof.idler_nm.resize(band.size());
    prof.phase_rad.resize(band.size());
    prof.weight = weights.intensity;
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < band.size(); ++i) {
        const double li = 1000.0 / (u_pump - 1000.0 / band[i]);
        prof.idler_nm[i] = li;
        prof.phase_rad[i] = residual_phase_rad(local, cat, band[i], li);
        wsum += prof.weight[i];
        mean += prof.weight[i] * prof.phase_rad[i];
    }
    if (!(wsum > 0.0))
        throw computation_error("residual_phase_ridge: zero spectral weight over the band [" +
                                format_double(band_min_nm) + ", " + format_double(band_max_nm) + "] nm");
    mean /= wsum;
    double var = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < band.size(); ++i) {
        prof.phase_rad[i] -= mean;
        var += prof.weight[i] * prof.phase_rad[i] * prof.phase_rad[i];
        lo = std::min(lo, prof.phase_rad[i]);
        hi = std::max(hi, prof.phase_rad[i]);
    }
    prof.weighted_std_rad = std::sqrt(var / wsum);
    prof.peak_to_peak_rad = hi - lo;
    return prof;
}

/// Result of the compensator length optimization.
struct CompensatorReport {
    double optimum_mm = 0.0;
    double objective_at_optimum = 0.0;  // weighted phase variance, rad^2
    double weighted_std_at_optimum_rad = 0.0;
    double weighted_std_at_zero_rad = 0.0;
    double reduction_factor = 0.0;
    double peak_to_peak_at_optimum_rad = 0.0;
    bool multiple_minima = false;
    std::vector<std::pair<double, double>> scan; // (length_mm, objective)
};

/**
 * Find the compensator length minimizing the spectral-density-weighted variance
 * of the residual phase along the energy-conservation curve over the given
 * band. Coarse scan plus golden-section refinement; if the scan shows more than
 * one interior local minimum the global scan minimum is refined and the report
 * is flagged. The result is invariant under positive rescaling of the weights
 * (the objective is a weighted mean).
 */
inline CompensatorReport optimize_compensator(const SourceConfig& cfg, const DispersionCatalog& cat,
                                              double band_min_nm, double band_max_nm,
                                              double scan_max_mm = 80.0, double scan_step_mm = 0.5) {
    cfg.validate();
    if (!(scan_max_mm > 0.0) || !(scan_step_mm > 0.0) || scan_step_mm >= scan_max_mm)
        throw argument_error("optimize_compensator: invalid scan range");

    // The residual phase is affine in the compensator length, so precompute the
    // two components once and evaluate the quadratic objective cheaply.
    const RidgeProfile base = residual_phase_ridge(cfg, cat, band_min_nm, band_max_nm, 0.02, 0.0);
    const std::size_t n = base.signal_nm.size();
    std::vector<double> comp_unit(n);
    for (std::size_t i = 0; i < n; ++i)
        comp_unit[i] = compensator_phase_rad(cat, 1.0, base.signal_nm[i], base.idler_nm[i]);
    double wsum = 0.0;
    for (double w : base.weight) wsum += w;

    auto objective = [&](double length_mm) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += base.weight[i] * (base.phase_rad[i] + length_mm * comp_unit[i]);
        mean /= wsum;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = base.phase_rad[i] + length_mm * comp_unit[i] - mean;
            var += base.weight[i] * d * d;
        }
        return var / wsum;
    };

    CompensatorReport rep;
    std::size_t best = 0;
    for (double L = 0.0; L <= scan_max_mm + 0.5 * scan_step_mm; L += scan_step_mm) {
        rep.scan.emplace_back(L, objective(L));
        if (rep.scan.back().second < rep.scan[best].second) best = rep.scan.size() - 1;
    }
    int interior_minima = 0;
    for (std::size_t i = 1; i + 1 < rep.scan.size(); ++i)
        if (rep.scan[i].second < rep.scan[i - 1].second && rep.scan[i].second < rep.scan[i + 1].second)
            ++interior_minima;
    rep.multiple_minima = interior_minima > 1;

    const double lo = best > 0 ? rep.scan[best - 1].first : rep.scan[best].first;
    const double hi = best + 1 < rep.scan.size() ? rep.scan[best + 1].first : rep.scan[best].first;
    rep.optimum_mm = (lo < hi) ? golden_section_min(objective, lo, hi, 1e-7) : rep.scan[best].first;
    rep.objective_at_optimum = objective(rep.optimum_mm);
    rep.weighted_std_at_optimum_rad = std::sqrt(rep.objective_at_optimum);
    rep.weighted_std_at_zero_rad = std::sqrt(objective(0.0));
    rep.reduction_factor = rep.weighted_std_at_optimum_rad > 0.0
                               ? rep.weighted_std_at_zero_rad / rep.weighted_std_at_optimum_rad
                               : std::numeric_limits<double>::infinity();
    const RidgeProfile at_opt = residual_phase_ridge(cfg, cat, band_min_nm, band_max_nm, 0.02, rep.optimum_mm);
    rep.peak_to_peak_at_optimum_rad = at_opt.peak_to_peak_rad;
    return rep;
}

/// Band used for compensator optimization and state building: the filter window
/// when a filter is present, otherwise +-2 nm around the solved signal wavelength.
inline std::pair<double, double> default_analysis_band(const SourceConfig& cfg, const DispersionCatalog& cat) {
    if (cfg.filter) return {cfg.filter->center_nm - cfg.filter->fwhm_nm, cfg.filter->center_nm + cfg.filter->fwhm_nm};
    const SignalIdler pair = solve_signal_idler(cfg, cat, cfg.temperature_1_c);
    return {pair.signal_nm - 2.0, pair.signal_nm + 2.0};
}

} // namespace spdckit
