#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "spdckit/common.hpp"
#include "spdckit/keyvalue.hpp"

namespace spdckit {

enum class index_form {
    fraction_poles,   // n^2 = c0 + c1/(L^2 - c2) + c3*L^2
    oscillator_pair,  // n^2 = c0 + c1/(1 - c2/L^2) + c3/(1 - c4/L^2) + c5*L^2
};

/**
 * One refractive index model: a named (material, axis) Sellmeier fit plus an
 * optional two-term thermo-optic polynomial correction. Immutable after load;
 * evaluation is a pure function, safe to share across threads.
 */
struct DispersionModel {
    std::string name;          // section name in the data file, e.g. "ktp_z"
    std::string material;      // "KTP" or "YVO4"
    std::string axis;          // "y"/"z" for KTP, "o"/"e" for YVO4
    index_form form = index_form::fraction_poles;
    std::vector<double> coefficients;       // wavelength in um
    std::vector<double> thermo_first;       // cubic in 1/um, per kelvin; may be empty
    std::vector<double> thermo_second;      // cubic in 1/um, per kelvin^2; may be empty
    double reference_temperature_c = 25.0;
    double wavelength_min_nm = 0.0;
    double wavelength_max_nm = 0.0;
    double temperature_min_c = 0.0;
    double temperature_max_c = 0.0;
    std::string citation;

    bool has_thermo() const { return !thermo_first.empty(); }
};

namespace detail {

inline double eval_cubic_inv_lambda(const std::vector<double>& c, double inv_lambda_um) {
    double x = inv_lambda_um;
    return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
}

} // namespace detail

/**
 * n(lambda, T) for one model. Wavelengths are vacuum wavelengths in nm,
 * temperatures in degrees Celsius. Out of range inputs raise range_error naming
 * the model and the offending value; there is no silent extrapolation.
 */
inline double refractive_index(const DispersionModel& m, double wavelength_nm, double temperature_c) {
    if (!(wavelength_nm >= m.wavelength_min_nm && wavelength_nm <= m.wavelength_max_nm))
        throw range_error("model '" + m.name + "': wavelength " + format_double(wavelength_nm) +
                          " nm outside validity [" + format_double(m.wavelength_min_nm) + ", " +
                          format_double(m.wavelength_max_nm) + "] nm");
    if (!(temperature_c >= m.temperature_min_c && temperature_c <= m.temperature_max_c))
        throw range_error("model '" + m.name + "': temperature " + format_double(temperature_c) +
                          " C outside validity [" + format_double(m.temperature_min_c) + ", " +
                          format_double(m.temperature_max_c) + "] C");

    const double lam = wavelength_nm * 1e-3; // um
    const double l2 = lam * lam;
    double n2 = 0.0;
    const auto& c = m.coefficients;
    switch (m.form) {
    case index_form::fraction_poles:
        n2 = c[0] + c[1] / (l2 - c[2]) + c[3] * l2;
        break;
    case index_form::oscillator_pair:
        n2 = c[0] + c[1] / (1.0 - c[2] / l2) + c[3] / (1.0 - c[4] / l2) + c[5] * l2;
        break;
    }
    if (!(n2 > 0.0))
        throw computation_error("model '" + m.name + "': non-physical n^2 = " + format_double(n2) + " at " +
                                format_double(wavelength_nm) + " nm");
    double n = std::sqrt(n2);
    if (m.has_thermo()) {
        const double dt = temperature_c - m.reference_temperature_c;
        const double x = 1.0 / lam;
        n += detail::eval_cubic_inv_lambda(m.thermo_first, x) * dt +
             detail::eval_cubic_inv_lambda(m.thermo_second, x) * dt * dt;
    }
    return n;
}

/**
 * Analytic dn/dlambda in 1/nm, thermo polynomial included. The thermo correction
 * is additive in n, so the total derivative is d(sqrt(n^2))/dlam + d(dn_thermo)/dlam.
 * Used by the smoothness checks and nowhere else in the physics.
 */
inline double refractive_index_derivative(const DispersionModel& m, double wavelength_nm,
                                          double temperature_c) {
    refractive_index(m, wavelength_nm, temperature_c); // range checks
    const double lam = wavelength_nm * 1e-3; // um
    const double l2 = lam * lam;
    const auto& c = m.coefficients;
    double n2 = 0.0;
    double dn2_dlam = 0.0; // both per um
    switch (m.form) {
    case index_form::fraction_poles:
        n2 = c[0] + c[1] / (l2 - c[2]) + c[3] * l2;
        dn2_dlam = -c[1] * 2.0 * lam / ((l2 - c[2]) * (l2 - c[2])) + 2.0 * c[3] * lam;
        break;
    case index_form::oscillator_pair: {
        auto osc = [&](double s, double p) {
            double denom = 1.0 - p / l2;
            return -s * (2.0 * p / (lam * l2)) / (denom * denom);
        };
        n2 = c[0] + c[1] / (1.0 - c[2] / l2) + c[3] / (1.0 - c[4] / l2) + c[5] * l2;
        dn2_dlam = osc(c[1], c[2]) + osc(c[3], c[4]) + 2.0 * c[5] * lam;
        break;
    }
    }
    double d_total = dn2_dlam / (2.0 * std::sqrt(n2));
    if (m.has_thermo()) {
        const double dt = temperature_c - m.reference_temperature_c;
        const double x = 1.0 / lam;
        auto dpoly = [&](const std::vector<double>& a) {
            // d/dlam of a0 + a1 x + a2 x^2 + a3 x^3 with x = 1/lam
            return -(a[1] + 2.0 * a[2] * x + 3.0 * a[3] * x * x) / l2;
        };
        d_total += dpoly(m.thermo_first) * dt + dpoly(m.thermo_second) * dt * dt;
    }
    return d_total * 1e-3; // per nm
}

/// All loaded models, addressable by section name or by (material, axis).
struct DispersionCatalog {
    std::string source_path;
    std::map<std::string, DispersionModel> models;

    const DispersionModel& by_name(const std::string& name) const {
        auto it = models.find(name);
        if (it == models.end())
            throw config_error("dispersion catalog has no model named '" + name + "'");
        return it->second;
    }

    const DispersionModel& by_axis(const std::string& material, const std::string& axis) const {
        for (const auto& [k, m] : models)
            if (m.material == material && m.axis == axis) return m;
        throw config_error("dispersion catalog has no model for material '" + material + "' axis '" + axis + "'");
    }

    bool has_material(const std::string& material) const {
        for (const auto& [k, m] : models)
            if (m.material == material) return true;
        return false;
    }
};

inline DispersionCatalog load_dispersion_catalog(const std::string& path) {
    KeyValueFile kv = load_keyvalue(path);
    DispersionCatalog cat;
    cat.source_path = path;
    for (const auto& section : kv.section_order) {
        DispersionModel m;
        m.name = section;
        m.material = kv_get_string(kv, section, "material");
        m.axis = kv_get_string(kv, section, "axis");
        const std::string& form = kv_get_string(kv, section, "form");
        std::size_t expected = 0;
        if (form == "fraction_poles") {
            m.form = index_form::fraction_poles;
            expected = 4;
        } else if (form == "oscillator_pair") {
            m.form = index_form::oscillator_pair;
            expected = 6;
        } else {
            throw config_error(path + ": key '" + section + ".form' has unknown value '" + form + "'");
        }
        m.coefficients = kv_get_double_list(kv, section, "coefficients");
        if (m.coefficients.size() != expected)
            throw config_error(path + ": key '" + section + ".coefficients' needs " + std::to_string(expected) +
                               " values for form '" + form + "', got " + std::to_string(m.coefficients.size()));
        if (kv.has_key(section, "thermo_first") || kv.has_key(section, "thermo_second")) {
            m.thermo_first = kv_get_double_list(kv, section, "thermo_first");
            m.thermo_second = kv_get_double_list(kv, section, "thermo_second");
            if (m.thermo_first.size() != 4 || m.thermo_second.size() != 4)
                throw config_error(path + ": thermo coefficient lists in [" + section + "] must have 4 entries");
        }
        m.reference_temperature_c = kv_get_double(kv, section, "reference_temperature_c");
        auto wr = kv_get_double_list(kv, section, "wavelength_range_nm");
        auto tr = kv_get_double_list(kv, section, "temperature_range_c");
        if (wr.size() != 2 || !(wr[0] < wr[1]))
            throw config_error(path + ": key '" + section + ".wavelength_range_nm' must be 'min, max'");
        if (tr.size() != 2 || !(tr[0] < tr[1]))
            throw config_error(path + ": key '" + section + ".temperature_range_c' must be 'min, max'");
        m.wavelength_min_nm = wr[0];
        m.wavelength_max_nm = wr[1];
        m.temperature_min_c = tr[0];
        m.temperature_max_c = tr[1];
        m.citation = kv_get_string(kv, section, "citation");
        cat.models[section] = std::move(m);
    }
    if (cat.models.empty()) throw config_error(path + ": no dispersion models defined");
    return cat;
}

/// Compile-time default location of the dispersion data file.
inline std::string default_dispersion_path() {
#ifdef SPDCKIT_DATA_FILE
    return SPDCKIT_DATA_FILE;
#else
    return "data/dispersion.kv";
#endif
}

inline const DispersionCatalog& default_catalog() {
    static const DispersionCatalog cat = load_dispersion_catalog(default_dispersion_path());
    return cat;
}

/**
 * Birefringence n_slow - n_fast with a fixed sign convention per material:
 * KTP returns n_z - n_y, YVO4 returns n_e - n_o. Both are positive across the
 * toolkit's working band.
 */
inline double birefringence(const DispersionCatalog& cat, const std::string& material,
                            double wavelength_nm, double temperature_c) {
    if (material == "KTP")
        return refractive_index(cat.by_axis("KTP", "z"), wavelength_nm, temperature_c) -
               refractive_index(cat.by_axis("KTP", "y"), wavelength_nm, temperature_c);
    if (material == "YVO4")
        return refractive_index(cat.by_axis("YVO4", "e"), wavelength_nm, temperature_c) -
               refractive_index(cat.by_axis("YVO4", "o"), wavelength_nm, temperature_c);
    throw config_error("birefringence: unknown material '" + material + "' (expected KTP or YVO4)");
}

} // namespace spdckit
