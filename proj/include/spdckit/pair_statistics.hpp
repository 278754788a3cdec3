#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spdckit/common.hpp"
#include "spdckit/polarization.hpp"

namespace spdckit {

/**
 * Detector and counting-electronics parameters. The two arm efficiencies are
 * conditional (coincidence over singles) ratios and therefore already include
 * the detector quantum efficiency; the quantum efficiency is kept separately
 * for reference. Arm efficiencies of exactly zero are allowed so that a
 * blocked arm can be simulated.
 */
struct DetectionModel {
    double efficiency_signal = 0.18;
    double efficiency_idler = 0.18;
    double detector_quantum_efficiency = 0.40;
    double dark_counts_cps = 500.0;
    double coincidence_window_s = 2.4e-9;
    double saturation_rate_cps = 1.0e7;
    double emitted_visibility = 0.98;

    void validate() const {
        auto fraction = [](double v, const char* name, bool allow_zero) {
            if (!(v >= (allow_zero ? 0.0 : 1e-300) && v <= 1.0))
                throw config_error(std::string("detection model: ") + name + " must be in " +
                                   (allow_zero ? "[0,1]" : "(0,1]") + ", got " + format_double(v));
        };
        fraction(efficiency_signal, "efficiency_signal", true);
        fraction(efficiency_idler, "efficiency_idler", true);
        fraction(detector_quantum_efficiency, "detector_quantum_efficiency", false);
        fraction(emitted_visibility, "emitted_visibility", true);
        if (!(dark_counts_cps >= 0.0))
            throw config_error("detection model: dark_counts_cps must be >= 0, got " + format_double(dark_counts_cps));
        if (!(coincidence_window_s > 0.0))
            throw config_error("detection model: coincidence_window_s must be > 0, got " +
                               format_double(coincidence_window_s));
        if (!(saturation_rate_cps > 0.0))
            throw config_error("detection model: saturation_rate_cps must be > 0, got " +
                               format_double(saturation_rate_cps));
    }
};

/**
 * Analytic rate and visibility prediction at one pump power. The coincidence
 * window enters as a radius: two events are coincident when their time tags
 * differ by at most coincidence_window_s, so the accidental rate for
 * uncorrelated streams is 2 * R_s * R_i * t_c. This matches the Monte Carlo
 * counter in this header exactly.
 */
struct RatePrediction {
    double generated_pairs_cps = 0.0;
    double singles_signal_cps = 0.0;
    double singles_idler_cps = 0.0;
    double true_coincidences_cps = 0.0;
    double accidental_coincidences_cps = 0.0;
    double visibility = 0.0;
    bool no_data_limit = false; ///< true when both coincidence rates vanish and visibility defaults to V0
};

inline RatePrediction rates_from_pump_power(double power_mw, double brightness_cps_per_mw,
                                            const DetectionModel& model) {
    model.validate();
    if (!(power_mw >= 0.0)) throw argument_error("rates_from_pump_power: power must be >= 0 mW, got " +
                                                 format_double(power_mw));
    if (!(brightness_cps_per_mw >= 0.0))
        throw argument_error("rates_from_pump_power: brightness must be >= 0, got " +
                             format_double(brightness_cps_per_mw));
    RatePrediction out;
    out.true_coincidences_cps = brightness_cps_per_mw * power_mw;
    if (out.true_coincidences_cps > 0.0) {
        const double eta_product = model.efficiency_signal * model.efficiency_idler;
        if (!(eta_product > 0.0))
            throw argument_error("rates_from_pump_power: cannot infer the generated rate from a detected "
                                 "brightness when an arm efficiency is zero");
        out.generated_pairs_cps = out.true_coincidences_cps / eta_product;
    }
    out.singles_signal_cps = out.generated_pairs_cps * model.efficiency_signal + model.dark_counts_cps;
    out.singles_idler_cps = out.generated_pairs_cps * model.efficiency_idler + model.dark_counts_cps;
    out.accidental_coincidences_cps =
        2.0 * out.singles_signal_cps * out.singles_idler_cps * model.coincidence_window_s;
    const double total = out.true_coincidences_cps + out.accidental_coincidences_cps;
    if (total > 0.0) {
        out.visibility = model.emitted_visibility * out.true_coincidences_cps / total;
    } else {
        out.visibility = model.emitted_visibility;
        out.no_data_limit = true;
    }
    return out;
}

struct VisibilityPoint {
    double power_mw = 0.0;
    double window_s = 0.0;
    RatePrediction rates;
    bool pileup = false; ///< generated rate times window exceeds 0.1
};

/// Analytic visibility versus pump power for each coincidence window, rows
/// grouped by window in the order given.
inline std::vector<VisibilityPoint> visibility_scan(const std::vector<double>& powers_mw,
                                                    double brightness_cps_per_mw, const DetectionModel& model,
                                                    const std::vector<double>& windows_s) {
    if (powers_mw.empty()) throw argument_error("visibility_scan: empty power list");
    if (windows_s.empty()) throw argument_error("visibility_scan: empty window list");
    std::vector<VisibilityPoint> rows;
    rows.reserve(powers_mw.size() * windows_s.size());
    for (double w : windows_s) {
        DetectionModel m = model;
        m.coincidence_window_s = w;
        for (double p : powers_mw) {
            VisibilityPoint row;
            row.power_mw = p;
            row.window_s = w;
            row.rates = rates_from_pump_power(p, brightness_cps_per_mw, m);
            row.pileup = row.rates.generated_pairs_cps * w > 0.1;
            rows.push_back(row);
        }
    }
    return rows;
}

/// Pump power at which the analytic visibility drops to the target, found by
/// bisection on the decreasing branch of V(P). With dark counts the curve
/// first rises from zero (dark-dark accidentals dominate as P -> 0) and peaks
/// at P = dark * sqrt(eta_s * eta_i) / brightness, so the search starts there.
/// Throws when the target exceeds the peak or is not crossed inside [0, p_max].
inline double visibility_crossing_mw(double target_visibility, double brightness_cps_per_mw,
                                     const DetectionModel& model, double p_max_mw = 1000.0) {
    auto v = [&](double p) { return rates_from_pump_power(p, brightness_cps_per_mw, model).visibility; };
    double peak_mw = 0.0;
    if (model.dark_counts_cps > 0.0 && brightness_cps_per_mw > 0.0)
        peak_mw = std::min(model.dark_counts_cps *
                               std::sqrt(model.efficiency_signal * model.efficiency_idler) /
                               brightness_cps_per_mw,
                           p_max_mw);
    if (v(peak_mw) < target_visibility)
        throw computation_error("visibility_crossing_mw: the visibility never reaches " +
                                format_double(target_visibility) + "; it peaks at " +
                                format_double(v(peak_mw)) + " near " + format_double(peak_mw) + " mW");
    if (v(p_max_mw) > target_visibility)
        throw computation_error("visibility_crossing_mw: target " + format_double(target_visibility) +
                                " not reached below " + format_double(p_max_mw) + " mW");
    double lo = peak_mw, hi = p_max_mw;
    for (int i = 0; i < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (v(mid) > target_visibility ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct DetectorBudget {
    double total_singles_cps = 0.0;
    int detectors_needed = 2;
    double per_detector_load_cps = 0.0;
};

/**
 * Number of detectors needed to register the singles behind a target
 * coincidence rate while keeping every detector at or below 30% of its
 * saturation rate. At least two detectors (one per arm) are always reported.
 */
inline DetectorBudget detector_budget(double target_coincidence_cps, const DetectionModel& model) {
    model.validate();
    if (!(target_coincidence_cps >= 0.0))
        throw argument_error("detector_budget: target rate must be >= 0, got " +
                             format_double(target_coincidence_cps));
    DetectorBudget out;
    if (target_coincidence_cps > 0.0) {
        if (!(model.efficiency_signal > 0.0) || !(model.efficiency_idler > 0.0))
            throw argument_error("detector_budget: arm efficiencies must be > 0 to infer singles rates");
        out.total_singles_cps = target_coincidence_cps / model.efficiency_signal +
                                target_coincidence_cps / model.efficiency_idler;
    }
    const double per_detector_cap = 0.30 * model.saturation_rate_cps;
    const double needed = std::ceil(out.total_singles_cps / per_detector_cap);
    out.detectors_needed = std::max(2, static_cast<int>(needed));
    out.per_detector_load_cps = out.total_singles_cps / out.detectors_needed;
    return out;
}

// ---------------------------------------------------------------------------
// Time-tag Monte Carlo
// ---------------------------------------------------------------------------

/// One detection event: picosecond timestamp plus detector channel
/// (0 = signal arm, 1 = idler arm).
struct TimeTag {
    std::int64_t time_ps = 0;
    std::uint8_t channel = 0;
};

/// Linear analyzer angles in degrees for the two arms (0 = horizontal).
struct AnalyzerSetting {
    double signal_angle_deg = 0.0;
    double idler_angle_deg = 0.0;
};

inline std::vector<AnalyzerSetting> default_analyzer_settings() {
    return {{45.0, 45.0}, {45.0, 135.0}};
}

struct SettingResult {
    AnalyzerSetting setting;
    std::uint64_t coincidences = 0;        ///< counts with |t_s - t_i| <= t_c
    std::uint64_t accidental_sample = 0;   ///< same count in a delayed window
    std::uint64_t singles_signal = 0;
    std::uint64_t singles_idler = 0;
    double coincidence_rate_cps = 0.0;
    double accidental_rate_cps = 0.0;
};

struct MonteCarloResult {
    double duration_s = 0.0;
    double generated_rate_cps = 0.0;
    std::vector<SettingResult> settings;
    std::vector<std::vector<TimeTag>> streams; ///< per setting, merged arms, ordered by (time, channel)
    double visibility = 0.0;
    double visibility_sigma = 0.0;
    bool no_data = false;
    bool low_statistics = false; ///< expected coincidences under 10^3 at the first setting
};

namespace detail {

inline Eigen::Vector2cd analyzer_ket(double angle_deg) {
    const double a = angle_deg * pi / 180.0;
    Eigen::Vector2cd k;
    k << std::cos(a), std::sin(a);
    return k;
}

/// Joint analyzer passing probabilities for one pair: returns
/// {both, signal only, idler only} with the remainder absorbed.
struct JointPass {
    double both = 0.0;
    double signal_only = 0.0;
    double idler_only = 0.0;
};

inline JointPass joint_pass_probabilities(const TwoQubitState& state, const AnalyzerSetting& setting) {
    const Eigen::Vector2cd s = analyzer_ket(setting.signal_angle_deg);
    const Eigen::Vector2cd i = analyzer_ket(setting.idler_angle_deg);
    Eigen::Vector4cd joint;
    joint << s(0) * i(0), s(0) * i(1), s(1) * i(0), s(1) * i(1);
    const double p_both = std::clamp((joint.adjoint() * state.rho * joint)(0, 0).real(), 0.0, 1.0);
    // Marginal passing probabilities from the reduced states.
    Eigen::Matrix2cd rho_s = Eigen::Matrix2cd::Zero();
    Eigen::Matrix2cd rho_i = Eigen::Matrix2cd::Zero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                rho_s(a, b) += state.rho(2 * a + c, 2 * b + c);
                rho_i(a, b) += state.rho(2 * c + a, 2 * c + b);
            }
    const double p_s = std::clamp((s.adjoint() * rho_s * s)(0, 0).real(), 0.0, 1.0);
    const double p_i = std::clamp((i.adjoint() * rho_i * i)(0, 0).real(), 0.0, 1.0);
    JointPass jp;
    jp.both = p_both;
    jp.signal_only = std::max(0.0, p_s - p_both);
    jp.idler_only = std::max(0.0, p_i - p_both);
    return jp;
}

/// Exponential-gap arrival times over [0, duration), appended as picoseconds.
inline void append_poisson_stream(std::vector<std::int64_t>& out, rng& gen, double rate_cps, double duration_s) {
    if (!(rate_cps > 0.0)) return;
    double t = 0.0;
    while (true) {
        t += gen.exponential(rate_cps);
        if (t >= duration_s) break;
        out.push_back(static_cast<std::int64_t>(std::llround(t * 1e12)));
    }
}

/// Sort and make strictly increasing by bumping duplicate picosecond stamps.
inline void finalize_stream(std::vector<std::int64_t>& times) {
    std::sort(times.begin(), times.end());
    for (std::size_t k = 1; k < times.size(); ++k)
        if (times[k] <= times[k - 1]) times[k] = times[k - 1] + 1;
}

/// Count all pairs (s, i) with |t_s - (t_i + shift)| <= window. Both inputs
/// must be sorted ascending.
inline std::uint64_t count_pairs_within(const std::vector<std::int64_t>& s, const std::vector<std::int64_t>& i,
                                        std::int64_t window_ps, std::int64_t shift_ps) {
    std::uint64_t count = 0;
    std::size_t lo = 0;
    for (std::int64_t ts : s) {
        const std::int64_t min_t = ts - shift_ps - window_ps;
        const std::int64_t max_t = ts - shift_ps + window_ps;
        while (lo < i.size() && i[lo] < min_t) ++lo;
        for (std::size_t j = lo; j < i.size() && i[j] <= max_t; ++j) ++count;
    }
    return count;
}

} // namespace detail

/**
 * Time-tag Monte Carlo of the coincidence experiment. Pair emissions are a
 * Poisson process at the generated rate; each pair draws a joint analyzer
 * outcome from the two-qubit state, each photon then survives with its arm
 * efficiency, and dark counts are added as independent Poisson streams per
 * detector. Coincidences pair any two tags with |t_s - t_i| <= t_c, matching
 * the analytic accidental rate 2 R_s R_i t_c; a delayed window estimates the
 * accidental level from the same streams. The visibility is formed from the
 * first two settings (max and min port by default) with a binomial error bar.
 *
 * Everything is driven by the explicit seed; per-setting sub-streams are
 * derived from it, so results are reproducible and independent of evaluation
 * order.
 */
inline MonteCarloResult montecarlo_timetags(double duration_s, const DetectionModel& model,
                                            double generated_rate_cps, std::uint64_t seed,
                                            const TwoQubitState* state_in = nullptr,
                                            const std::vector<AnalyzerSetting>& settings_in = {}) {
    model.validate();
    if (!(duration_s > 0.0)) throw argument_error("montecarlo_timetags: duration must be > 0 s");
    if (!(generated_rate_cps >= 0.0)) throw argument_error("montecarlo_timetags: generated rate must be >= 0");

    const TwoQubitState state = state_in ? *state_in : werner_state(model.emitted_visibility);
    const std::vector<AnalyzerSetting> settings =
        settings_in.empty() ? default_analyzer_settings() : settings_in;

    MonteCarloResult result;
    result.duration_s = duration_s;
    result.generated_rate_cps = generated_rate_cps;

    const std::int64_t window_ps = std::llround(model.coincidence_window_s * 1e12);
    if (window_ps < 1)
        throw argument_error("montecarlo_timetags: coincidence window below the 1 ps tag resolution");
    const std::int64_t delay_ps = 16 * window_ps;

    // Expected coincidences at the first setting, used for the statistics flag.
    {
        const auto jp = detail::joint_pass_probabilities(state, settings.front());
        const double true_rate =
            generated_rate_cps * jp.both * model.efficiency_signal * model.efficiency_idler;
        const double rs = generated_rate_cps * (jp.both + jp.signal_only) * model.efficiency_signal +
                          model.dark_counts_cps;
        const double ri = generated_rate_cps * (jp.both + jp.idler_only) * model.efficiency_idler +
                          model.dark_counts_cps;
        const double expected = duration_s * (true_rate + 2.0 * rs * ri * model.coincidence_window_s);
        result.low_statistics = expected < 1000.0;
    }

    rng base(seed);
    for (std::size_t k = 0; k < settings.size(); ++k) {
        rng gen = base.derive(static_cast<std::uint64_t>(k));
        const auto jp = detail::joint_pass_probabilities(state, settings[k]);

        std::vector<std::int64_t> signal_times;
        std::vector<std::int64_t> idler_times;
        const double expected_pairs = generated_rate_cps * duration_s;
        signal_times.reserve(static_cast<std::size_t>(
            std::min(1e8, expected_pairs * model.efficiency_signal * 1.1 + duration_s * model.dark_counts_cps + 64)));
        idler_times.reserve(signal_times.capacity());

        double t = 0.0;
        if (generated_rate_cps > 0.0) {
            while (true) {
                t += gen.exponential(generated_rate_cps);
                if (t >= duration_s) break;
                const double u = gen.uniform01();
                bool pass_s = false, pass_i = false;
                if (u < jp.both) {
                    pass_s = pass_i = true;
                } else if (u < jp.both + jp.signal_only) {
                    pass_s = true;
                } else if (u < jp.both + jp.signal_only + jp.idler_only) {
                    pass_i = true;
                }
                const std::int64_t tp = static_cast<std::int64_t>(std::llround(t * 1e12));
                if (pass_s && gen.bernoulli(model.efficiency_signal)) signal_times.push_back(tp);
                if (pass_i && gen.bernoulli(model.efficiency_idler)) idler_times.push_back(tp);
            }
        }
        detail::append_poisson_stream(signal_times, gen, model.dark_counts_cps, duration_s);
        detail::append_poisson_stream(idler_times, gen, model.dark_counts_cps, duration_s);
        detail::finalize_stream(signal_times);
        detail::finalize_stream(idler_times);

        SettingResult sr;
        sr.setting = settings[k];
        sr.singles_signal = signal_times.size();
        sr.singles_idler = idler_times.size();
        sr.coincidences = detail::count_pairs_within(signal_times, idler_times, window_ps, 0);
        sr.accidental_sample = detail::count_pairs_within(signal_times, idler_times, window_ps, delay_ps);
        sr.coincidence_rate_cps = static_cast<double>(sr.coincidences) / duration_s;
        sr.accidental_rate_cps = static_cast<double>(sr.accidental_sample) / duration_s;
        result.settings.push_back(sr);

        std::vector<TimeTag> merged;
        merged.reserve(signal_times.size() + idler_times.size());
        for (std::int64_t tp : signal_times) merged.push_back({tp, 0});
        for (std::int64_t tp : idler_times) merged.push_back({tp, 1});
        std::sort(merged.begin(), merged.end(), [](const TimeTag& a, const TimeTag& b) {
            return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
        });
        result.streams.push_back(std::move(merged));
    }

    if (result.settings.size() >= 2) {
        const double a = static_cast<double>(result.settings[0].coincidences);
        const double b = static_cast<double>(result.settings[1].coincidences);
        if (a + b > 0.0) {
            result.visibility = (a - b) / (a + b);
            const double d = (a + b) * (a + b);
            result.visibility_sigma = std::sqrt((2.0 * b / d) * (2.0 * b / d) * a + (2.0 * a / d) * (2.0 * a / d) * b);
        } else {
            result.visibility = model.emitted_visibility;
            result.visibility_sigma = 1.0;
            result.no_data = true;
            result.low_statistics = true;
        }
    } else {
        result.visibility = std::numeric_limits<double>::quiet_NaN();
        result.visibility_sigma = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Time-tag stream export
// ---------------------------------------------------------------------------

/// Binary export: 9-byte little-endian records, int64 picoseconds then one
/// channel byte.
inline void write_timetags_binary(const std::string& path, const std::vector<TimeTag>& tags) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw computation_error("cannot open '" + path + "' for writing");
    for (const TimeTag& tag : tags) {
        unsigned char rec[9];
        std::uint64_t v = static_cast<std::uint64_t>(tag.time_ps);
        for (int i = 0; i < 8; ++i) rec[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        rec[8] = tag.channel;
        out.write(reinterpret_cast<const char*>(rec), 9);
    }
    if (!out) throw computation_error("failed writing time tags to '" + path + "'");
}

inline std::vector<TimeTag> read_timetags_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw computation_error("cannot open '" + path + "' for reading");
    std::vector<TimeTag> tags;
    unsigned char rec[9];
    while (in.read(reinterpret_cast<char*>(rec), 9)) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(rec[i]) << (8 * i);
        tags.push_back({static_cast<std::int64_t>(v), rec[8]});
    }
    if (in.gcount() != 0)
        throw computation_error("truncated time-tag record in '" + path + "'");
    return tags;
}

/// CSV export for small runs, header "time_ps,channel".
inline void write_timetags_csv(const std::string& path, const std::vector<TimeTag>& tags) {
    std::ofstream out(path);
    if (!out) throw computation_error("cannot open '" + path + "' for writing");
    out << "time_ps,channel\n";
    for (const TimeTag& tag : tags)
        out << tag.time_ps << "," << static_cast<int>(tag.channel) << "\n";
    if (!out) throw computation_error("failed writing time tags to '" + path + "'");
}

} // namespace spdckit
