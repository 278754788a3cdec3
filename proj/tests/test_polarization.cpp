#include "support.hpp"

#include <cmath>

using namespace spdckit;
using Catch::Approx;
using testkit::cat;
using testkit::source;

namespace {

Spectrum gaussian_spectrum(const std::vector<double>& grid, double center_nm, double sigma_nm) {
    Spectrum sp;
    sp.label = "signal";
    sp.wavelength_nm = grid;
    sp.intensity.reserve(grid.size());
    for (double wl : grid) {
        const double z = (wl - center_nm) / sigma_nm;
        sp.intensity.push_back(std::exp(-0.5 * z * z));
    }
    return sp;
}

RidgeProfile flat_ridge(const std::vector<double>& grid, double phase) {
    RidgeProfile prof;
    prof.signal_nm = grid;
    prof.idler_nm = grid;
    prof.phase_rad.assign(grid.size(), phase);
    prof.weight.assign(grid.size(), 1.0);
    return prof;
}

double frobenius_distance(const TwoQubitState& a, const TwoQubitState& b) {
    return (a.rho - b.rho).norm();
}

} // namespace

TEST_CASE("density matrix validation") {
    Eigen::Matrix4cd rho = 0.25 * Eigen::Matrix4cd::Identity();
    rho(0, 1) = complexd(0.0, 0.1);
    rho(1, 0) = complexd(0.0, 0.1); // breaks conjugate symmetry
    CHECK_THROWS_MATCHES(make_state(rho), argument_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("not Hermitian")));

    CHECK_THROWS_MATCHES(make_state(0.5 * Eigen::Matrix4cd::Identity()), argument_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("trace")));

    Eigen::Matrix4cd indefinite = Eigen::Matrix4cd::Zero();
    indefinite(0, 0) = 1.5;
    indefinite(3, 3) = -0.5;
    CHECK_THROWS_MATCHES(make_state(indefinite), argument_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("negative eigenvalue")));
}

TEST_CASE("bell states and fidelity") {
    const TwoQubitState plus = pure_state(bell_phi_plus());
    CHECK(fidelity(plus, bell_phi_plus()) == Approx(1.0).margin(1e-12));
    CHECK(fidelity(plus, bell_phi_minus()) == Approx(0.0).margin(1e-12));

    Eigen::Vector4cd unnormalized;
    unnormalized << 1.0, 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(fidelity(plus, unnormalized), argument_error);
    CHECK_THROWS_AS(pure_state(unnormalized), argument_error);
}

TEST_CASE("werner family fidelity and fringe visibility") {
    for (double p : {0.3, 0.7, 0.98}) {
        const TwoQubitState st = werner_state(p);
        CHECK(fidelity(st, bell_phi_plus()) == Approx((1.0 + 3.0 * p) / 4.0).margin(1e-12));
        CHECK(correlation_visibility(st, analyzer_basis::hv) == Approx(p).margin(1e-12));
        CHECK(correlation_visibility(st, analyzer_basis::da) == Approx(p).margin(1e-12));
    }
    CHECK_THROWS_AS(werner_state(1.2), argument_error);

    Eigen::Vector2cd tilted;
    tilted << 1.0, 1.0; // unnormalized analyzer
    CHECK_THROWS_AS(correlation_visibility(werner_state(0.5), tilted), argument_error);
}

TEST_CASE("spectral overlap") {
    const std::vector<double> grid = make_grid(780.0, 790.0, 0.02);
    const Spectrum a = gaussian_spectrum(grid, 785.0, 1.0);
    Spectrum scaled = a;
    for (double& v : scaled.intensity) v *= 3.0;
    CHECK(spectral_overlap(a, scaled) == Approx(1.0).margin(1e-12));

    const Spectrum shifted = gaussian_spectrum(grid, 786.0, 1.0);
    CHECK(spectral_overlap(a, shifted) == Approx(std::exp(-1.0 / 8.0)).margin(1e-3));

    Spectrum other_grid = gaussian_spectrum(make_grid(780.0, 790.0, 0.04), 785.0, 1.0);
    CHECK_THROWS_AS(spectral_overlap(a, other_grid), argument_error);

    Spectrum dark = a;
    dark.intensity.assign(grid.size(), 0.0);
    CHECK_THROWS_AS(spectral_overlap(a, dark), argument_error);
}

TEST_CASE("state assembly from a flat phase profile") {
    const std::vector<double> grid = make_grid(780.0, 790.0, 0.1);
    CrystalSpectra cs;
    cs.spectrum_h = gaussian_spectrum(grid, 785.0, 1.2);
    cs.spectrum_v = cs.spectrum_h;

    const TwoQubitState ideal = build_state(flat_ridge(grid, 0.0), cs);
    CHECK(fidelity(ideal, bell_phi_plus()) == Approx(1.0).margin(1e-12));

    const TwoQubitState flipped = build_state(flat_ridge(grid, pi), cs);
    CHECK(fidelity(flipped, bell_phi_minus()) == Approx(1.0).margin(1e-12));
    CHECK(fidelity(flipped, bell_phi_plus()) == Approx(0.0).margin(1e-12));

    cs.balance = 2.0;
    const TwoQubitState lopsided = build_state(flat_ridge(grid, 0.0), cs);
    CHECK(lopsided.rho(0, 0).real() == Approx(0.8).margin(1e-12));
    CHECK(lopsided.rho(3, 3).real() == Approx(0.2).margin(1e-12));

    RidgeProfile wrong = flat_ridge(make_grid(781.0, 791.0, 0.1), 0.0);
    CHECK_THROWS_MATCHES(build_state(wrong, cs), argument_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("common grid")));
}

TEST_CASE("compensated source state against pinned figures") {
    const RidgeProfile ridge = residual_phase_ridge(source(), cat(), 782.5, 789.5);
    const CrystalSpectra cs = crystal_spectra(source(), cat(), ridge.signal_nm, true);

    CHECK(spectral_overlap(cs.spectrum_h, cs.spectrum_v) == Approx(0.9919).margin(0.002));

    const TwoQubitState st = build_state(ridge, cs);
    CHECK(fidelity(st, bell_phi_plus()) == Approx(0.99579).margin(0.002));
    CHECK(correlation_visibility(st, analyzer_basis::da) == Approx(0.99158).margin(0.002));
    CHECK(correlation_visibility(st, analyzer_basis::hv) > 0.999);
}

TEST_CASE("dense-map and profile state assembly agree") {
    SourceConfig cfg = source();
    const RidgeProfile ridge = residual_phase_ridge(cfg, cat(), 784.5, 787.5);
    const CrystalSpectra cs = crystal_spectra(cfg, cat(), ridge.signal_nm, true);
    const TwoQubitState from_ridge = build_state(ridge, cs);

    const double u_pump = 1000.0 / cfg.pump_wavelength_nm;
    const double idler_hi = 1000.0 / (u_pump - 1000.0 / 784.4);
    const double idler_lo = 1000.0 / (u_pump - 1000.0 / 787.6);
    const PhaseMap map = residual_phase_map(cfg, cat(), make_grid(784.4, 787.6, 0.005),
                                            make_grid(idler_lo - 0.1, idler_hi + 0.1, 0.005));
    const TwoQubitState from_map = build_state(map, cs);

    // The two constructions may disagree by a constant phase reference, which is
    // physically a free gauge; compare gauge-invariant figures of merit.
    CHECK(std::abs(fidelity(from_map, bell_phi_plus()) - fidelity(from_ridge, bell_phi_plus())) < 1e-4);
    CHECK(std::abs(correlation_visibility(from_map, analyzer_basis::da) -
                   correlation_visibility(from_ridge, analyzer_basis::da)) < 1e-4);

    // A map that stops short of the requested band is rejected.
    const PhaseMap narrow = residual_phase_map(cfg, cat(), make_grid(785.0, 786.0, 0.005),
                                               make_grid(idler_lo - 0.1, idler_hi + 0.1, 0.005));
    CHECK_THROWS_MATCHES(build_state(narrow, cs), argument_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("does not cover")));
}

TEST_CASE("arm attenuation") {
    const TwoQubitState plus = pure_state(bell_phi_plus());
    const TwoQubitState pass = apply_arm_attenuation(plus, true, 1.0, 1.0);
    CHECK(frobenius_distance(pass, plus) < 1e-12);

    const TwoQubitState blocked_v = apply_arm_attenuation(plus, true, 1.0, 0.0);
    CHECK(blocked_v.rho(0, 0).real() == Approx(1.0).margin(1e-12));
    CHECK(fidelity(blocked_v, bell_phi_plus()) == Approx(0.5).margin(1e-12));

    CHECK_THROWS_AS(apply_arm_attenuation(plus, false, 0.0, 0.0), argument_error);
    CHECK_THROWS_AS(apply_arm_attenuation(plus, true, 1.5, 0.5), argument_error);
}

TEST_CASE("tomography setting conventions") {
    const auto kets = tomography_kets();
    CHECK(kets[4](1) == complexd(0.0, 1.0 / std::sqrt(2.0)));  // R carries +i
    CHECK(kets[5](1) == complexd(0.0, -1.0 / std::sqrt(2.0))); // L carries -i
    CHECK(tomography_labels()[0] == "H");
    CHECK(tomography_labels()[5] == "L");

    // The six analyzers resolve the identity three times over, per qubit.
    const auto p = tomography_probabilities(werner_state(0.8));
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(sum == Approx(9.0).margin(1e-12));
}

TEST_CASE("tomography count sampling is seed-stable") {
    const TwoQubitState st = werner_state(0.9);
    const auto a = sample_tomography_counts(st, 100000, 42);
    const auto b = sample_tomography_counts(st, 100000, 42);
    const auto c = sample_tomography_counts(st, 100000, 43);
    CHECK(a == b);
    CHECK(a != c);
    CHECK_THROWS_AS(sample_tomography_counts(st, 0, 42), argument_error);
}

TEST_CASE("linear inversion recovers a state from ideal counts") {
    const TwoQubitState st = werner_state(0.9);
    const auto p = tomography_probabilities(st);
    std::array<std::uint64_t, 36> counts{};
    for (int k = 0; k < 36; ++k) counts[k] = static_cast<std::uint64_t>(std::llround(p[k] * 1e7));
    const TwoQubitState rec = reconstruct_from_counts(counts, static_cast<std::uint64_t>(1e7));
    CHECK(frobenius_distance(rec, st) < 1e-3);
    CHECK(fidelity(rec, bell_phi_plus()) == Approx(fidelity(st, bell_phi_plus())).margin(1e-4));
}

TEST_CASE("simulated tomography at high statistics") {
    const TwoQubitState target = pure_state(bell_phi_plus());
    const TwoQubitState rec = simulate_tomography(target, 10000000, 20260816);
    CHECK(fidelity(rec, bell_phi_plus()) >= 0.999);

    const TwoQubitState mixed = werner_state(0.9);
    const TwoQubitState rec_mixed = simulate_tomography(mixed, 1000000, 7);
    CHECK(frobenius_distance(rec_mixed, mixed) < 5e-3);
}

TEST_CASE("physical projection removes negative weights") {
    Eigen::Matrix4cd herm = Eigen::Matrix4cd::Zero();
    herm(0, 0) = 0.5;
    herm(1, 1) = 0.6;
    herm(2, 2) = -0.05;
    herm(3, 3) = -0.05;
    const Eigen::Matrix4cd proj = detail::project_to_physical(herm);
    CHECK(proj(0, 0).real() == Approx(0.45).margin(1e-9));
    CHECK(proj(1, 1).real() == Approx(0.55).margin(1e-9));
    CHECK(proj(2, 2).real() == Approx(0.0).margin(1e-9));
    CHECK(std::abs(proj.trace() - complexd(1.0, 0.0)) < 1e-9);
}
