#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace spdckit {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

/// Raised when an input file or run configuration is malformed. CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a physical quantity is evaluated outside its documented validity.
class range_error : public std::runtime_error {
public:
    explicit range_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for structurally invalid arguments (empty grids, mismatched shapes, ...).
class argument_error : public std::runtime_error {
public:
    explicit argument_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numerical procedure cannot produce a result (no root bracketed, ...).
class computation_error : public std::runtime_error {
public:
    explicit computation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest round-trip decimal representation, locale independent. Used for all
/// serialized numbers so that reruns produce byte-identical files.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// splitmix64 step, used to derive independent sub-streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Seeded random generator with fixed sampling transforms.
 *
 * std::mt19937_64 output is pinned by the C++ standard, but the std::*_distribution
 * classes are not, so every transform here is written out explicitly. Streams are
 * therefore reproducible bit for bit across standard libraries, which the command
 * line tools rely on for byte-identical reruns.
 */
class rng {
public:
    explicit rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Exponential waiting time for a process of the given rate (per unit time).
    double exponential(double rate) {
        if (!(rate > 0.0)) throw argument_error("rng::exponential requires rate > 0, got " + format_double(rate));
        double u = uniform01();
        return -std::log1p(-u) / rate;
    }

    /// Standard normal deviate (Box-Muller, pair cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(two_pi * u2);
        have_cached_ = true;
        return r * std::cos(two_pi * u2);
    }

    /**
     * Binomial draw. Exact Bernoulli summation for small trial counts; above 2^16
     * trials a clamped rounded normal approximation is used (at those sizes the
     * approximation error is far below sampling noise). The switch point is fixed
     * so results stay reproducible.
     */
    std::uint64_t binomial(std::uint64_t n, double p) {
        if (p < 0.0 || p > 1.0) throw argument_error("rng::binomial requires p in [0,1], got " + format_double(p));
        if (n == 0 || p == 0.0) return 0;
        if (p == 1.0) return n;
        if (n < 65536) {
            std::uint64_t k = 0;
            for (std::uint64_t i = 0; i < n; ++i)
                if (uniform01() < p) ++k;
            return k;
        }
        double mean = static_cast<double>(n) * p;
        double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
        double draw = std::round(mean + sd * normal());
        if (draw < 0.0) draw = 0.0;
        if (draw > static_cast<double>(n)) draw = static_cast<double>(n);
        return static_cast<std::uint64_t>(draw);
    }

    /// Independent generator for a named sub-stream of this generator's seed.
    rng derive(std::uint64_t stream) const {
        return rng(splitmix64(seed_ ^ splitmix64(stream ^ 0xa0761d6478bd642fULL)));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

/**
 * Brent root finder on [a, b]. Requires a sign change; converges to roughly
 * machine precision in the abscissa (tol is an absolute floor added to the
 * relative epsilon). Throws computation_error when the bracket is invalid.
 */
inline double brent_root(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-14, int max_iter = 200) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw computation_error("brent_root: no sign change on bracket [" + format_double(a) + ", " +
                                format_double(b) + "] (f = " + format_double(fa) + ", " + format_double(fb) + ")");
    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        double eps = std::numeric_limits<double>::epsilon();
        double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
        double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                double qq = fa / fc;
                double r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if (std::abs(d) > tol1)
            b += d;
        else
            b += (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    throw computation_error("brent_root: no convergence after " + std::to_string(max_iter) + " iterations");
}

/**
 * Golden-section minimization on [a, b] for a unimodal objective. Returns the
 * abscissa of the minimum to within xtol.
 */
inline double golden_section_min(const std::function<double(double)>& f, double a, double b,
                                 double xtol = 1e-7) {
    const double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > xtol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1; f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2; f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace spdckit
