#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spdckit/common.hpp"
#include "spdckit/compensation.hpp"
#include "spdckit/phasematching.hpp"

namespace spdckit {

using complexd = std::complex<double>;

/**
 * Two-qubit polarization density matrix over the ordered basis (HH, HV, VH, VV),
 * first letter signal, second idler. Construction validates hermiticity, unit
 * trace and positive semidefiniteness up to small numerical floors.
 */
struct TwoQubitState {
    Eigen::Matrix4cd rho;

    static constexpr double hermiticity_tol = 1e-12;
    static constexpr double trace_tol = 1e-12;
    static constexpr double eigenvalue_floor = -1e-10;

    void validate() const {
        const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        if (herm > hermiticity_tol)
            throw argument_error("two-qubit state: not Hermitian (max deviation " + format_double(herm) + ")");
        const complexd tr = rho.trace();
        if (std::abs(tr - complexd(1.0, 0.0)) > trace_tol)
            throw argument_error("two-qubit state: trace is " + format_double(tr.real()) + " + " +
                                 format_double(tr.imag()) + "i, expected 1");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()),
                                                           Eigen::EigenvaluesOnly);
        const double min_ev = es.eigenvalues().minCoeff();
        if (min_ev < eigenvalue_floor)
            throw argument_error("two-qubit state: negative eigenvalue " + format_double(min_ev));
    }
};

inline TwoQubitState make_state(const Eigen::Matrix4cd& rho) {
    TwoQubitState st{rho};
    st.validate();
    return st;
}

/// The Bell state (|HH> + |VV>)/sqrt(2) as a ket.
inline Eigen::Vector4cd bell_phi_plus() {
    Eigen::Vector4cd v;
    v << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    return v;
}

/// The Bell state (|HH> - |VV>)/sqrt(2).
inline Eigen::Vector4cd bell_phi_minus() {
    Eigen::Vector4cd v;
    v << 1.0 / std::sqrt(2.0), 0.0, 0.0, -1.0 / std::sqrt(2.0);
    return v;
}

inline TwoQubitState pure_state(const Eigen::Vector4cd& ket) {
    const double norm = ket.norm();
    if (std::abs(norm - 1.0) > 1e-9)
        throw argument_error("pure_state: ket norm is " + format_double(norm) + ", expected 1");
    return make_state(ket * ket.adjoint());
}

/// Werner-type mixture p |Phi+><Phi+| + (1-p) I/4.
inline TwoQubitState werner_state(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw argument_error("werner_state: p must be in [0,1], got " + format_double(p));
    const Eigen::Vector4cd phi = bell_phi_plus();
    Eigen::Matrix4cd rho = p * (phi * phi.adjoint()) + (1.0 - p) * 0.25 * Eigen::Matrix4cd::Identity();
    return make_state(rho);
}

/**
 * Bhattacharyya-style amplitude overlap of two relative spectra on a common
 * grid: integral of sqrt(Ia*Ib) normalized by the geometric mean of the two
 * total intensities. Equals 1 exactly when the spectra are proportional;
 * insensitive to overall scaling of either input.
 */
inline double spectral_overlap(const Spectrum& a, const Spectrum& b) {
    if (a.wavelength_nm.size() != b.wavelength_nm.size())
        throw argument_error("spectral_overlap: spectra are not on a common grid (sizes differ)");
    for (std::size_t i = 0; i < a.wavelength_nm.size(); ++i)
        if (std::abs(a.wavelength_nm[i] - b.wavelength_nm[i]) > 1e-9)
            throw argument_error("spectral_overlap: spectra are not on a common grid (wavelengths differ near " +
                                 format_double(a.wavelength_nm[i]) + " nm)");
    double cross = 0.0, ea = 0.0, eb = 0.0;
    for (std::size_t i = 0; i < a.intensity.size(); ++i) {
        cross += std::sqrt(a.intensity[i] * b.intensity[i]);
        ea += a.intensity[i];
        eb += b.intensity[i];
    }
    if (!(ea > 0.0) || !(eb > 0.0)) throw argument_error("spectral_overlap: zero-energy spectrum");
    return cross / std::sqrt(ea * eb);
}

/**
 * The spectra emitted by the two crystals into the same collection mode. The
 * pairs from crystal 1 arrive as |HH>, from crystal 2 as |VV>; balance is the
 * V/H amplitude ratio (1 = balanced pumping).
 */
struct CrystalSpectra {
    Spectrum spectrum_h;
    Spectrum spectrum_v;
    double balance = 1.0;

    void validate() const {
        if (!(balance > 0.0)) throw argument_error("crystal spectra: balance must be > 0");
        if (spectrum_h.wavelength_nm.size() != spectrum_v.wavelength_nm.size())
            throw argument_error("crystal spectra: H and V spectra are not on a common grid");
    }
};

/// Spectra of the two crystals at the configured temperatures, on the given grid.
inline CrystalSpectra crystal_spectra(const SourceConfig& cfg, const DispersionCatalog& cat,
                                      const std::vector<double>& grid_nm, bool apply_filter) {
    CrystalSpectra cs;
    cs.spectrum_h = spdc_spectrum(cfg, cat, cfg.temperature_1_c, grid_nm, "signal", apply_filter);
    cs.spectrum_v = spdc_spectrum(cfg, cat, cfg.temperature_2_c(), grid_nm, "signal", apply_filter);
    return cs;
}

namespace detail {

/// Accumulate the mixed state sum over ridge cells:
/// rho = sum_k w_k |psi(phi_k)><psi(phi_k)|, psi = (|VV> + b e^{i phi}|HH>)/sqrt(1+b^2),
/// then scale the HH-VV coherence by the which-crystal amplitude overlap.
inline TwoQubitState accumulate_state(const std::vector<double>& phase_rad, const std::vector<double>& weight,
                                      double balance, double amplitude_overlap) {
    if (phase_rad.size() != weight.size() || phase_rad.empty())
        throw argument_error("build_state: phase and weight arrays must match and be non-empty");
    double wsum = 0.0;
    complexd mean_phase(0.0, 0.0);
    for (std::size_t i = 0; i < phase_rad.size(); ++i) {
        if (!(weight[i] >= 0.0)) throw argument_error("build_state: negative spectral weight");
        wsum += weight[i];
        mean_phase += weight[i] * std::exp(complexd(0.0, phase_rad[i]));
    }
    if (!(wsum > 0.0)) throw argument_error("build_state: zero total spectral weight");
    mean_phase /= wsum;

    const double b2 = balance * balance;
    const double p_hh = b2 / (1.0 + b2);
    const double p_vv = 1.0 / (1.0 + b2);
    const complexd coh = (balance / (1.0 + b2)) * amplitude_overlap * mean_phase;

    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    rho(0, 0) = p_hh;
    rho(3, 3) = p_vv;
    rho(0, 3) = coh;
    rho(3, 0) = std::conj(coh);
    return make_state(rho);
}

} // namespace detail

/**
 * Two-qubit state from the residual phase along the energy-conservation curve
 * and the two crystals' spectra. The ridge grid must equal the spectra grid.
 * Cell weights are the mean of the two spectral densities; the which-crystal
 * distinguishability enters as the scalar amplitude overlap multiplying the
 * HH-VV coherence.
 */
inline TwoQubitState build_state(const RidgeProfile& ridge, const CrystalSpectra& spectra) {
    spectra.validate();
    if (ridge.signal_nm.size() != spectra.spectrum_h.wavelength_nm.size())
        throw argument_error("build_state: phase profile and spectra are not on a common grid (sizes differ)");
    for (std::size_t i = 0; i < ridge.signal_nm.size(); ++i)
        if (std::abs(ridge.signal_nm[i] - spectra.spectrum_h.wavelength_nm[i]) > 1e-9)
            throw argument_error("build_state: phase profile and spectra are not on a common grid near " +
                                 format_double(ridge.signal_nm[i]) + " nm");
    std::vector<double> w(ridge.signal_nm.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = 0.5 * (spectra.spectrum_h.intensity[i] + spectra.spectrum_v.intensity[i]);
    const double overlap = spectral_overlap(spectra.spectrum_h, spectra.spectrum_v);
    return detail::accumulate_state(ridge.phase_rad, w, spectra.balance, overlap);
}

/**
 * Same, but reading the phase off a dense map by bilinear interpolation at the
 * energy-conservation partner of every signal grid point. The map must cover the
 * spectra grid and the corresponding idler wavelengths. The extracted phase is
 * referenced to its weighted mean, as in the profile-based overload: a constant
 * offset is absorbed by the pump phase (experimentally, a phase plate), so only
 * the variation across the band degrades the state.
 */
inline TwoQubitState build_state(const PhaseMap& map, const CrystalSpectra& spectra) {
    spectra.validate();
    const std::vector<double>& grid = spectra.spectrum_h.wavelength_nm;
    const double u_pump = 1000.0 / map.config.pump_wavelength_nm;
    auto locate = [](const std::vector<double>& g, double x) -> std::size_t {
        if (x < g.front() || x > g.back())
            throw argument_error("build_state: phase map does not cover " + format_double(x) + " nm");
        auto it = std::upper_bound(g.begin(), g.end(), x);
        std::size_t hi = static_cast<std::size_t>(it - g.begin());
        if (hi == 0) hi = 1;
        if (hi == g.size()) hi = g.size() - 1;
        return hi;
    };
    std::vector<double> phase(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double ls = grid[k];
        const double li = 1000.0 / (u_pump - 1000.0 / ls);
        const std::size_t is = locate(map.signal_grid_nm, ls);
        const std::size_t ii = locate(map.idler_grid_nm, li);
        const double xs = (ls - map.signal_grid_nm[is - 1]) /
                          (map.signal_grid_nm[is] - map.signal_grid_nm[is - 1]);
        const double xi = (li - map.idler_grid_nm[ii - 1]) /
                          (map.idler_grid_nm[ii] - map.idler_grid_nm[ii - 1]);
        const double p00 = map.at(is - 1, ii - 1), p01 = map.at(is - 1, ii);
        const double p10 = map.at(is, ii - 1), p11 = map.at(is, ii);
        phase[k] = (1 - xs) * ((1 - xi) * p00 + xi * p01) + xs * ((1 - xi) * p10 + xi * p11);
    }
    std::vector<double> w(grid.size());
    double wsum = 0.0, wmean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = 0.5 * (spectra.spectrum_h.intensity[i] + spectra.spectrum_v.intensity[i]);
        wsum += w[i];
        wmean += w[i] * phase[i];
    }
    if (!(wsum > 0.0)) throw argument_error("build_state: zero total spectral weight");
    wmean /= wsum;
    for (double& p : phase) p -= wmean;
    const double overlap = spectral_overlap(spectra.spectrum_h, spectra.spectrum_v);
    return detail::accumulate_state(phase, w, spectra.balance, overlap);
}

/// Overlap <target|rho|target> with a normalized pure target state.
inline double fidelity(const TwoQubitState& state, const Eigen::Vector4cd& target) {
    if (std::abs(target.norm() - 1.0) > 1e-9)
        throw argument_error("fidelity: target ket is not normalized (norm " + format_double(target.norm()) + ")");
    const complexd v = (target.adjoint() * state.rho * target)(0, 0);
    double f = v.real();
    if (f < 0.0 && f > -1e-10) f = 0.0;
    if (f > 1.0 && f < 1.0 + 1e-10) f = 1.0;
    return f;
}

/**
 * Coincidence fringe visibility with the signal analyzer fixed in the given
 * state and the idler analyzer rotating through linear polarization angles. The
 * fringe p(theta) is an exact sinusoid in 2*theta computed from the conditional
 * state, so the visibility is (max-min)/(max+min) in closed form.
 */
inline double correlation_visibility(const TwoQubitState& state, const Eigen::Vector2cd& signal_analyzer) {
    const double norm = signal_analyzer.norm();
    if (std::abs(norm - 1.0) > 1e-9)
        throw argument_error("correlation_visibility: analyzer ket is not normalized");
    // Conditional (unnormalized) idler state after the signal projection.
    Eigen::Matrix2cd cond = Eigen::Matrix2cd::Zero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    cond(i, j) += std::conj(signal_analyzer(a)) * signal_analyzer(b) * state.rho(2 * a + i, 2 * b + j);
    const double mean = 0.5 * (cond(0, 0).real() + cond(1, 1).real());
    if (!(mean > 0.0)) return 0.0;
    const double cz = 0.5 * (cond(0, 0).real() - cond(1, 1).real());
    const double cx = cond(0, 1).real();
    return std::sqrt(cz * cz + cx * cx) / mean;
}

enum class analyzer_basis { hv, da };

inline double correlation_visibility(const TwoQubitState& state, analyzer_basis basis) {
    Eigen::Vector2cd a;
    if (basis == analyzer_basis::hv)
        a << 1.0, 0.0;
    else
        a << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    return correlation_visibility(state, a);
}

/**
 * Optional polarization-dependent loss on one arm (models the splitter's
 * transmission difference): rho -> (D x I) rho (D x I)^dag / trace with
 * D = diag(sqrt(t_h), sqrt(t_v)) acting on the chosen qubit.
 */
inline TwoQubitState apply_arm_attenuation(const TwoQubitState& state, bool signal_arm, double t_h, double t_v) {
    if (!(t_h >= 0.0 && t_h <= 1.0 && t_v >= 0.0 && t_v <= 1.0))
        throw argument_error("apply_arm_attenuation: transmissions must be in [0,1]");
    Eigen::Matrix2cd d = Eigen::Matrix2cd::Zero();
    d(0, 0) = std::sqrt(t_h);
    d(1, 1) = std::sqrt(t_v);
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix4cd k = Eigen::Matrix4cd::Zero();
    const Eigen::Matrix2cd& left = signal_arm ? d : id;
    const Eigen::Matrix2cd& right = signal_arm ? id : d;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int e = 0; e < 2; ++e)
                    k(2 * a + c, 2 * b + e) = left(a, b) * right(c, e);
    Eigen::Matrix4cd rho = k * state.rho * k.adjoint();
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) throw argument_error("apply_arm_attenuation: state fully absorbed");
    rho /= tr;
    return make_state(rho);
}

// ---------------------------------------------------------------------------
// Tomography
// ---------------------------------------------------------------------------

/// The six single-qubit analyzer kets used for tomography: H, V, D, A, R, L.
inline std::array<Eigen::Vector2cd, 6> tomography_kets() {
    const double s = 1.0 / std::sqrt(2.0);
    std::array<Eigen::Vector2cd, 6> kets;
    kets[0] << 1.0, 0.0;                        // H
    kets[1] << 0.0, 1.0;                        // V
    kets[2] << s, s;                            // D
    kets[3] << s, -s;                           // A
    kets[4] << s, complexd(0.0, s);             // R
    kets[5] << s, complexd(0.0, -s);            // L
    return kets;
}

inline const std::array<std::string, 6>& tomography_labels() {
    static const std::array<std::string, 6> labels = {"H", "V", "D", "A", "R", "L"};
    return labels;
}

/// Ideal coincidence probabilities for the 36 projector settings, row-major in
/// (signal, idler) with the H,V,D,A,R,L ordering.
inline std::array<double, 36> tomography_probabilities(const TwoQubitState& state) {
    const auto kets = tomography_kets();
    std::array<double, 36> p{};
    for (int s = 0; s < 6; ++s)
        for (int i = 0; i < 6; ++i) {
            Eigen::Vector4cd joint;
            joint << kets[s](0) * kets[i](0), kets[s](0) * kets[i](1), kets[s](1) * kets[i](0),
                kets[s](1) * kets[i](1);
            double v = (joint.adjoint() * state.rho * joint)(0, 0).real();
            p[s * 6 + i] = std::clamp(v, 0.0, 1.0);
        }
    return p;
}

namespace detail {

/// Projection of a Hermitian unit-trace matrix to the nearest (Frobenius)
/// positive semidefinite unit-trace matrix: eigenvalue water filling. Negative
/// eigenvalues are zeroed and their deficit is spread over the remaining ones,
/// smallest first.
inline Eigen::Matrix4cd project_to_physical(const Eigen::Matrix4cd& herm) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(herm);
    Eigen::Vector4d ev = es.eigenvalues(); // ascending
    double deficit = 0.0;
    for (int i = 0; i < 4; ++i) {
        const int remaining = 4 - i;
        const double adjusted = ev(i) + deficit / remaining;
        if (adjusted < 0.0) {
            deficit += ev(i);
            ev(i) = 0.0;
        } else {
            for (int j = i; j < 4; ++j) ev(j) += deficit / remaining;
            break;
        }
    }
    double total = ev.sum();
    if (total <= 0.0) {
        // Degenerate fallback: the maximally mixed state.
        return 0.25 * Eigen::Matrix4cd::Identity();
    }
    ev /= total;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace detail

/// Draw per-setting coincidence counts for the 36 analyzer combinations;
/// independent binomial draws from a per-setting sub-stream of the seed.
inline std::array<std::uint64_t, 36> sample_tomography_counts(const TwoQubitState& state,
                                                              std::uint64_t counts_per_setting,
                                                              std::uint64_t seed) {
    if (counts_per_setting < 1)
        throw argument_error("sample_tomography_counts: counts_per_setting must be >= 1");
    const auto p = tomography_probabilities(state);
    rng gen(seed);
    std::array<std::uint64_t, 36> counts{};
    for (int k = 0; k < 36; ++k) {
        rng sub = gen.derive(static_cast<std::uint64_t>(k));
        counts[k] = sub.binomial(counts_per_setting, p[k]);
    }
    return counts;
}

/**
 * Reconstruct a state from 36-setting tomography counts: linear inversion on
 * the Pauli components (36x16 least squares), then projection onto the
 * physical set (hermitize, unit trace, eigenvalue water filling to remove
 * negative weights).
 */
inline TwoQubitState reconstruct_from_counts(const std::array<std::uint64_t, 36>& counts,
                                             std::uint64_t counts_per_setting) {
    if (counts_per_setting < 1)
        throw argument_error("reconstruct_from_counts: counts_per_setting must be >= 1");
    std::array<double, 36> freq{};
    for (int k = 0; k < 36; ++k)
        freq[k] = static_cast<double>(counts[k]) / static_cast<double>(counts_per_setting);

    // Pauli operator basis (I, X, Y, Z) per qubit, 16 two-qubit products.
    std::array<Eigen::Matrix2cd, 4> pauli;
    pauli[0] = Eigen::Matrix2cd::Identity();
    pauli[1] << 0, 1, 1, 0;
    pauli[2] << 0, complexd(0, -1), complexd(0, 1), 0;
    pauli[3] << 1, 0, 0, -1;
    std::array<Eigen::Matrix4cd, 16> basis;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            Eigen::Matrix4cd m;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    m.block<2, 2>(2 * i, 2 * j) = pauli[a](i, j) * pauli[b];
            basis[a * 4 + b] = 0.25 * m; // so that rho = sum_m r_m basis_m with r_0 = trace-normalization
        }

    const auto kets = tomography_kets();
    Eigen::MatrixXd design(36, 16);
    Eigen::VectorXd rhs(36);
    for (int s = 0; s < 6; ++s)
        for (int i = 0; i < 6; ++i) {
            const int k = s * 6 + i;
            Eigen::Vector4cd joint;
            joint << kets[s](0) * kets[i](0), kets[s](0) * kets[i](1), kets[s](1) * kets[i](0),
                kets[s](1) * kets[i](1);
            for (int m = 0; m < 16; ++m)
                design(k, m) = (joint.adjoint() * basis[m] * joint)(0, 0).real();
            rhs(k) = freq[k];
        }
    const Eigen::VectorXd r = design.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);

    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    for (int m = 0; m < 16; ++m) rho += r(m) * basis[m];
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (tr > 0.0) rho /= tr;
    rho = detail::project_to_physical(rho);
    // Round tiny asymmetries left by the eigensolver back onto the Hermitian set.
    rho = (0.5 * (rho + rho.adjoint())).eval();
    rho /= rho.trace().real();
    return make_state(rho);
}

/// End-to-end simulated tomography: sample counts, then reconstruct.
inline TwoQubitState simulate_tomography(const TwoQubitState& state, std::uint64_t counts_per_setting,
                                         std::uint64_t seed) {
    return reconstruct_from_counts(sample_tomography_counts(state, counts_per_setting, seed),
                                   counts_per_setting);
}

} // namespace spdckit
