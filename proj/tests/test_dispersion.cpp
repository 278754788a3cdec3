#include "support.hpp"

#include <cmath>

using namespace spdckit;
using Catch::Approx;
using testkit::cat;

TEST_CASE("catalog loads all four models with metadata") {
    const DispersionCatalog& c = cat();
    REQUIRE(c.models.size() == 4);
    CHECK(c.has_material("KTP"));
    CHECK(c.has_material("YVO4"));
    const DispersionModel& nz = c.by_name("ktp_z");
    CHECK(nz.material == "KTP");
    CHECK(nz.axis == "z");
    CHECK(nz.has_thermo());
    CHECK_FALSE(c.by_name("yvo4_o").has_thermo());
    CHECK_FALSE(c.by_name("yvo4_e").has_thermo());
    CHECK(c.by_axis("KTP", "y").name == "ktp_y");
    CHECK_THROWS_AS(c.by_name("bk7"), config_error);
    CHECK_THROWS_AS(c.by_axis("KTP", "q"), config_error);
}

TEST_CASE("refractive index reference values") {
    const DispersionCatalog& c = cat();
    const DispersionModel& nz = c.by_name("ktp_z");
    const DispersionModel& ny = c.by_name("ktp_y");

    // Pinned against independent evaluations of the same published forms.
    CHECK(refractive_index(nz, 405.4, 25.0) == Approx(1.962765243).margin(1e-8));
    CHECK(refractive_index(nz, 810.8, 25.0) == Approx(1.844385190).margin(1e-8));
    CHECK(refractive_index(nz, 1064.0, 25.0) == Approx(1.830151894).margin(1e-8));
    CHECK(refractive_index(ny, 405.4, 25.0) == Approx(1.838590881).margin(1e-8));
    CHECK(refractive_index(ny, 810.8, 25.0) == Approx(1.758387844).margin(1e-8));
    CHECK(refractive_index(ny, 1064.0, 25.0) == Approx(1.748024174).margin(1e-8));
    CHECK(refractive_index(ny, 783.0, 28.3) == Approx(1.760104062).margin(1e-8));

    CHECK(refractive_index(c.by_name("yvo4_o"), 810.8, 25.0) == Approx(1.971173086).margin(1e-8));
    CHECK(refractive_index(c.by_name("yvo4_e"), 810.8, 25.0) == Approx(2.184583876).margin(1e-8));
}

TEST_CASE("temperature dependence is additive and bounded to the validity range") {
    const DispersionCatalog& c = cat();
    const DispersionModel& nz = c.by_name("ktp_z");

    const double cold = refractive_index(nz, 810.8, 20.0);
    const double hot = refractive_index(nz, 810.8, 40.0);
    CHECK(hot > cold); // positive thermo-optic coefficient for KTP z

    CHECK_THROWS_MATCHES(refractive_index(nz, 200.0, 25.0), range_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("ktp_z")));
    CHECK_THROWS_AS(refractive_index(nz, 810.8, 80.0), range_error);
    CHECK_THROWS_AS(refractive_index(nz, 810.8, -5.0), range_error);

    // YVO4 entries carry no thermo polynomial: same value across their range.
    const DispersionModel& no = c.by_name("yvo4_o");
    CHECK(refractive_index(no, 810.8, 16.0) == refractive_index(no, 810.8, 34.0));
}

TEST_CASE("analytic wavelength derivative matches finite differences") {
    const DispersionCatalog& c = cat();
    for (const char* name : {"ktp_z", "ktp_y", "yvo4_o", "yvo4_e"}) {
        const DispersionModel& m = c.by_name(name);
        for (double wl : {500.0, 650.0, 810.8, 1000.0}) {
            const double t = 25.0;
            const double h = 0.01;
            const double fd = (refractive_index(m, wl + h, t) - refractive_index(m, wl - h, t)) / (2.0 * h);
            const double an = refractive_index_derivative(m, wl, t);
            CHECK_THAT(an, Catch::Matchers::WithinRel(fd, 1e-6));
        }
    }
}

TEST_CASE("dispersion is smooth and normally dispersive over the working range") {
    const DispersionCatalog& c = cat();
    const DispersionModel& nz = c.by_name("ktp_z");
    double prev = refractive_index(nz, 500.0, 25.0);
    double prev_d = refractive_index_derivative(nz, 500.0, 25.0);
    for (double wl = 501.0; wl <= 1000.0; wl += 1.0) {
        const double n = refractive_index(nz, wl, 25.0);
        const double d = refractive_index_derivative(nz, wl, 25.0);
        REQUIRE(n < prev);                      // dn/dlambda < 0 away from resonances
        REQUIRE(std::abs(d - prev_d) < 1e-4);   // derivative varies slowly: no kinks
        REQUIRE(std::isfinite(n));
        prev = n;
        prev_d = d;
    }
}

TEST_CASE("birefringence conventions") {
    const DispersionCatalog& c = cat();
    CHECK(birefringence(c, "KTP", 810.8, 25.0) ==
          Approx(refractive_index(c.by_name("ktp_z"), 810.8, 25.0) -
                 refractive_index(c.by_name("ktp_y"), 810.8, 25.0)));
    CHECK(birefringence(c, "KTP", 810.8, 25.0) > 0.0);
    CHECK(birefringence(c, "YVO4", 810.8, 25.0) ==
          Approx(refractive_index(c.by_name("yvo4_e"), 810.8, 25.0) -
                 refractive_index(c.by_name("yvo4_o"), 810.8, 25.0)));
    CHECK(birefringence(c, "YVO4", 810.8, 25.0) > 0.0); // positive uniaxial
    CHECK_THROWS_AS(birefringence(c, "BBO", 810.8, 25.0), config_error);
}

TEST_CASE("data file errors are caught at load time") {
    testkit::TempDir dir;
    const std::string tail = "reference_temperature_c = 25\nwavelength_range_nm = 400, 1000\n"
                             "temperature_range_c = 10, 60\ncitation = none\n";
    testkit::spit(dir.file("bad_form.kv"),
                  "[m]\nmaterial = X\naxis = o\nform = cubic_spline\ncoefficients = 1, 2, 3, 4\n" + tail);
    CHECK_THROWS_MATCHES(load_dispersion_catalog(dir.file("bad_form.kv")), config_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("cubic_spline")));

    testkit::spit(dir.file("bad_count.kv"),
                  "[m]\nmaterial = X\naxis = o\nform = fraction_poles\ncoefficients = 1, 2, 3\n" + tail);
    CHECK_THROWS_AS(load_dispersion_catalog(dir.file("bad_count.kv")), config_error);

    CHECK_THROWS_AS(load_dispersion_catalog(dir.file("missing.kv")), config_error);
}
