#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "noems/actuator.hpp"
#include "noems/config.hpp"

using namespace noems;

namespace {

constexpr double pi = std::numbers::pi;

PhaseShifterSpec linear_spec(double slope = 0.002, double length_nm = 10'000.0) {
    return {length_nm, 950.0, NeffCurve::linear(950.0, 1.5, slope, 10.0, 300.0), ActuatorParams{}};
}

PhaseShifterSpec bundled() { return config::load_phase_shifter(NOEMS_DATA_DIR "/phase_shifter.json").spec; }

}  // namespace

TEST_SUITE("actuator") {

TEST_CASE("curve interpolant passes through its nodes") {
    const auto spec = bundled();
    const auto& c = spec.neff_curve;
    for (const auto& s : c.samples()) CHECK(c(s.d_nm) == s.n_eff);
    for (std::size_t k = 1; k < c.samples().size(); ++k) {
        const auto a = c.samples()[k - 1];
        const auto b = c.samples()[k];
        const double mid = c(0.5 * (a.d_nm + b.d_nm));
        CHECK(mid < a.n_eff);
        CHECK(mid > b.n_eff);
    }
}

TEST_CASE("curve validation and coverage") {
    CHECK_THROWS_AS(NeffCurve(950.0, {{0, 2.0}, {10, 1.9}, {20, 1.8}}), GeometryError);
    CHECK_THROWS_AS(NeffCurve(950.0, {{0, 2.0}, {10, 1.9}, {10, 1.8}, {30, 1.7}}), GeometryError);
    CHECK_THROWS_AS(NeffCurve(950.0, {{0, 2.0}, {10, 1.9}, {20, 1.95}, {30, 1.7}}), GeometryError);
    const auto c = NeffCurve::linear(950.0, 1.5, 0.001, 50.0, 250.0);
    CHECK_THROWS_AS(c(49.0), CoverageError);
    CHECK(c(100.0) == doctest::Approx(1.4).epsilon(1e-14));
}

TEST_CASE("curve CSV round trip") {
    const auto spec = bundled();
    std::ostringstream out;
    spec.neff_curve.write_csv(out);
    std::istringstream in(out.str());
    const auto back = NeffCurve::read_csv(in, 950.0);
    REQUIRE(back.samples().size() == spec.neff_curve.samples().size());
    for (std::size_t k = 0; k < back.samples().size(); ++k) {
        CHECK(back.samples()[k].d_nm == spec.neff_curve.samples()[k].d_nm);
        CHECK(back.samples()[k].n_eff == spec.neff_curve.samples()[k].n_eff);
    }
    std::istringstream bad("d_nm,n_eff\n10,1.5\n20,x\n");
    CHECK_THROWS_AS(NeffCurve::read_csv(bad, 950.0), ParseError);
}

TEST_CASE("displacement law") {
    const ActuatorParams a;
    CHECK(displacement(a, 0.0) == 150.0);
    CHECK(displacement(a, 10.0) == doctest::Approx(90.0).epsilon(1e-14));
    for (double v : {0.5, 1.0, 2.5, 3.0, 5.0}) {
        const double ratio = (a.d0_nm - displacement(a, 2 * v)) / (a.d0_nm - displacement(a, v));
        CHECK(std::abs(ratio - 4.0) < 4e-12);
    }
    CHECK_THROWS_AS(displacement(a, -0.1), std::out_of_range);
    CHECK_THROWS_AS(displacement(a, 12.5), std::out_of_range);
    ActuatorParams contact = a;
    contact.v_max_V = 20.0;
    CHECK_THROWS_AS(contact.validate(), GeometryError);
}

TEST_CASE("maximum displacement around 80 nm at full bias") {
    ActuatorParams a;
    a.eta_nm_per_V2 = 80.0 / (a.v_max_V * a.v_max_V);
    CHECK(a.d0_nm - displacement(a, a.v_max_V) == doctest::Approx(80.0));
}

TEST_CASE("phase is zero at rest and monotone in bias") {
    const auto spec = bundled();
    CHECK(phase_shift(spec, 0.0) == 0.0);
    double prev = 0.0;
    for (int k = 1; k <= 120; ++k) {
        const double phi = phase_shift(spec, 0.1 * k);
        CHECK(phi >= prev);
        prev = phi;
    }
}

TEST_CASE("push beats pull on the solved curve") {
    const auto spec = bundled();
    for (double dy : {20.0, 40.0, 60.0})
        CHECK(std::abs(phase_for_displacement(spec, -dy)) > std::abs(phase_for_displacement(spec, dy)));
}

TEST_CASE("v_pi on a linear curve matches the closed form") {
    const auto spec = linear_spec();
    const double c = 2.0 * pi / spec.wavelength_nm * spec.length_nm * 0.002 * spec.actuator.eta_nm_per_V2;
    for (double bias : {0.0, 2.0, 5.0}) {
        // c (2 b dV + dV^2) = pi
        const double dv = -bias + std::sqrt(bias * bias + pi / c);
        CHECK(std::abs(v_pi(spec, bias) - dv) < 1e-4);
    }
}

TEST_CASE("v_pi falls with bias on the solved curve") {
    const auto spec = bundled();
    CHECK(v_pi(spec, 8.9) < v_pi(spec, 0.0));
}

TEST_CASE("figure of merit") {
    const auto spec = linear_spec(0.004);
    CHECK(figure_of_merit(spec) == doctest::Approx(v_pi(spec) * spec.length_nm * 1e-7));
    // Locally linear: V_pi L scales as sqrt(L) for quadratic actuation at zero bias; at a
    // large bias dphi is nearly linear in dV and the product stays put.
    const auto twice = linear_spec(0.004, 20'000.0);
    const double bias = 8.0;
    CHECK(figure_of_merit(twice, bias) == doctest::Approx(figure_of_merit(spec, bias)).epsilon(0.05));
    PhaseShifterSpec zero = spec;
    zero.length_nm = 0.0;
    CHECK_THROWS_AS(zero.validate(), GeometryError);
}

TEST_CASE("pi out of reach is a solver error") {
    const auto spec = linear_spec(1e-5);
    CHECK_THROWS_AS(v_pi(spec), SolverError);
}

TEST_CASE("one-third transduction needs sqrt(3) more bias") {
    const auto room = linear_spec();
    auto cold = room;
    cold.actuator.temperature_scale = 1.0 / 3.0;
    cold.actuator.v_max_V = 12.0;
    const double target = 0.7 * pi;
    auto bias_for = [&](const PhaseShifterSpec& s) {
        double lo = 0.0;
        double hi = s.actuator.v_max_V;
        for (int i = 0; i < 200; ++i) {
            const double m = 0.5 * (lo + hi);
            (phase_shift(s, m) < target ? lo : hi) = m;
        }
        return 0.5 * (lo + hi);
    };
    CHECK(bias_for(cold) / bias_for(room) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-9));
}

TEST_CASE("bias sweep writes the documented columns") {
    const auto spec = bundled();
    std::ostringstream out;
    write_sweep_csv(out, bias_sweep(spec, {0.0, 5.0, 10.0}));
    const std::string text = out.str();
    CHECK(text.rfind("V,V_squared,d_nm,delta_phi_rad\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

TEST_CASE("phase shifter config is strict") {
    const auto j = config::Json::parse(R"({"d0_nm":150,"eta_nm_per_V2":0.6,"v_max_V":12,"length_um":10,
        "wavelength_nm":950,"neff_curve_csv":"neff_950nm.csv","etaa":1})");
    CHECK_THROWS_AS(config::phase_shifter_from_json(j, NOEMS_DATA_DIR, "test"), ConfigError);
    const auto missing = config::Json::parse(R"({"d0_nm":150,"eta_nm_per_V2":0.6,"v_max_V":12,"length_um":10,
        "wavelength_nm":950,"neff_curve_csv":"nope.csv"})");
    CHECK_THROWS_WITH_AS(config::phase_shifter_from_json(missing, NOEMS_DATA_DIR, "test"),
                         doctest::Contains("nope.csv"), ConfigError);
}

}  // TEST_SUITE
