#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "noems/modesolver.hpp"
#include "noems/neff_curve.hpp"
#include "oracles.hpp"

using namespace noems;

namespace {

constexpr double lambda = 950.0;

SolverGrid folded(const CrossSection& cs, double dx, double dy) {
    SolverGrid g = SolverGrid::around(cs, dx, dy);
    g.lateral = Mirror::ex_even;
    return g;
}

}  // namespace

TEST_SUITE("modesolver") {

TEST_CASE("homogeneous closed box: top eigenvalue matches the discrete PEC oracle") {
    CrossSection cs = CrossSection::single_rail(320.0, 320.0, 2.0 + 1e-9, 2.0);
    const SolverGrid g = SolverGrid::around(cs, 80.0, 80.0, SolverGrid::minimum_margin_nm(lambda, 2.0));
    const ModeOperator op = assemble_operator(cs, g, lambda);
    const Eigen::MatrixXd a(op.matrix);
    const Eigen::VectorXcd ev = a.eigenvalues();
    double top = -INFINITY;
    for (const auto& e : ev) top = std::max(top, e.real());

    // Ex even about the membrane plane: cos(pi y / H), uniform in x.
    const double h = g.domain_height_nm;
    const double ky = 2.0 / g.dy_nm * std::sin(std::numbers::pi * g.dy_nm / (2.0 * h));
    const double k0 = 2.0 * std::numbers::pi / lambda;
    const double expected = k0 * k0 * 4.0 - ky * ky;
    CHECK(top == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::sqrt(top) / k0 < 2.0);
}

TEST_CASE("slot geometry assembles at the default grid") {
    const CrossSection cs;
    const ModeOperator op = assemble_operator(cs, folded(cs, 5.0, 5.0), lambda);
    CHECK(op.matrix.rows() == op.unknowns());
    CHECK(op.matrix.rows() == op.matrix.cols());
    CHECK(op.unknowns() > 100'000);
}

TEST_CASE("halving the steps quadruples the unknowns") {
    const CrossSection cs;
    const auto coarse = assemble_operator(cs, SolverGrid::around(cs, 20.0, 20.0), lambda);
    const auto fine = assemble_operator(cs, SolverGrid::around(cs, 10.0, 10.0), lambda);
    const double ratio = static_cast<double>(fine.unknowns()) / coarse.unknowns();
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("operator assembly is deterministic") {
    const CrossSection cs;
    const auto g = folded(cs, 20.0, 20.0);
    const auto a = assemble_operator(cs, g, lambda);
    const auto b = assemble_operator(cs, g, lambda);
    CHECK((Eigen::MatrixXd(a.matrix - b.matrix).array() == 0.0).all());
}

TEST_CASE("grid validation rejects small domains and unresolved features") {
    const CrossSection cs;
    CHECK_THROWS_AS(SolverGrid::around(cs, 5.0, 5.0, 500.0).validate(cs, lambda), GeometryError);
    CHECK_THROWS_AS(SolverGrid::around(cs, 50.0, 50.0).validate(cs, lambda), GeometryError);
    CrossSection lopsided = cs;
    lopsided.rail_width_right_nm = 200.0;
    SolverGrid g = SolverGrid::around(lopsided, 10.0, 10.0);
    g.lateral = Mirror::ex_even;
    CHECK_THROWS_AS(g.validate(lopsided, lambda), GeometryError);
    CrossSection bad = cs;
    bad.n_core = 0.9;
    CHECK_THROWS_AS(bad.validate(), GeometryError);
}

TEST_CASE("slab limit matches the analytic TE0 root") {
    const CrossSection cs = CrossSection::single_rail(400.0, 160.0);
    SolverGrid g = SolverGrid::around(cs, 5.0, 5.0, SolverGrid::default_margin_nm, 0.0);
    g.lateral = Mirror::ex_even;
    const auto mode = fundamental_te_mode(cs, g, lambda);
    REQUIRE(mode);
    CHECK(std::abs(mode->n_eff - oracle::slab_te0_neff(160.0, 3.48, 1.0, lambda)) < 1e-3);
}

TEST_CASE("guided modes obey bounds and normalization") {
    const CrossSection cs;
    const auto modes = solve_modes(cs, folded(cs, 20.0, 20.0), lambda, 3);
    REQUIRE(!modes.empty());
    for (std::size_t k = 0; k < modes.size(); ++k) {
        CHECK(modes[k].n_eff > cs.n_clad);
        CHECK(modes[k].n_eff < cs.n_core);
        CHECK(modes[k].te_fraction >= 0.0);
        CHECK(modes[k].te_fraction <= 1.0);
        CHECK(std::abs(modes[k].power() - 1.0) < 1e-9);
        if (k > 0) CHECK(modes[k].n_eff <= modes[k - 1].n_eff);
    }
    const auto te = modes[most_te_like(modes)];
    CHECK(te.n_eff == doctest::Approx(1.2).epsilon(0.125));
    CHECK(te.te_fraction > 0.8);
}

TEST_CASE("narrower slot raises the index") {
    CrossSection narrow;
    narrow.slot_width_nm = 50.0;
    const CrossSection wide;
    const auto g = [](const CrossSection& cs) { return folded(cs, 12.5, 20.0); };
    const auto a = fundamental_te_mode(narrow, g(narrow), lambda);
    const auto b = fundamental_te_mode(wide, g(wide), lambda);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->n_eff > b->n_eff);
}

TEST_CASE("zero slot equals a single merged rail") {
    CrossSection merged;
    merged.slot_width_nm = 0.0;
    const CrossSection single = CrossSection::single_rail(300.0, 160.0);
    const auto a = fundamental_te_mode(merged, folded(merged, 20.0, 20.0), lambda);
    const auto b = fundamental_te_mode(single, folded(single, 20.0, 20.0), lambda);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(std::abs(a->n_eff - b->n_eff) < 1e-6);
}

TEST_CASE("repeated solves are bit-identical") {
    const CrossSection cs;
    const auto g = folded(cs, 20.0, 20.0);
    const auto a = fundamental_te_mode(cs, g, lambda);
    const auto b = fundamental_te_mode(cs, g, lambda);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->n_eff == b->n_eff);
    CHECK(a->ex.values == b->ex.values);
}

TEST_CASE("equal rails give a mirror-symmetric fundamental field") {
    const CrossSection cs;
    const auto mode = fundamental_te_mode(cs, SolverGrid::around(cs, 20.0, 20.0), lambda);
    REQUIRE(mode);
    CHECK(lateral_asymmetry(*mode) < 1e-6);
}

TEST_CASE("folding the slot plane keeps the even supermode") {
    const CrossSection cs;
    const auto full = fundamental_te_mode(cs, SolverGrid::around(cs, 20.0, 20.0), lambda);
    const auto half = fundamental_te_mode(cs, folded(cs, 20.0, 20.0), lambda);
    REQUIRE(full);
    REQUIRE(half);
    CHECK(full->n_eff == doctest::Approx(half->n_eff).epsilon(1e-9));
}

TEST_CASE("curve builds do not depend on the job count") {
    CurveOptions o;
    o.dx_nm = 20.0;
    o.dy_nm = 20.0;
    const std::vector<double> d{80.0, 140.0, 200.0, 260.0};
    const auto serial = build_neff_curve(CrossSection{}, lambda, d, o);
    o.jobs = 4;
    const auto threaded = build_neff_curve(CrossSection{}, lambda, d, o);
    for (std::size_t k = 0; k < d.size(); ++k) CHECK(serial.samples()[k].n_eff == threaded.samples()[k].n_eff);
}

TEST_CASE("n_modes below one is rejected") {
    const CrossSection cs;
    CHECK_THROWS_AS(solve_modes(cs, folded(cs, 20.0, 20.0), lambda, 0), std::invalid_argument);
}

}  // TEST_SUITE
