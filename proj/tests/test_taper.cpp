#include <doctest.h>

#include <cmath>

#include "noems/taper.hpp"

using namespace noems;

namespace {

constexpr double lambda = 940.0;

TaperOptions coarse() {
    TaperOptions o;
    o.dx_nm = 25.0;
    o.dy_nm = 20.0;
    return o;
}

}  // namespace

TEST_SUITE("taper") {

TEST_CASE("self overlap is one") {
    TaperSolver solver(CrossSection{}, lambda, 600.0, coarse());
    const auto& m = solver.mode(400.0);
    CHECK(std::abs(std::abs(overlap(m, m)) - 1.0) < 1e-9);
}

TEST_CASE("opposite lateral parities are orthogonal") {
    const CrossSection cs;
    const auto modes = solve_modes(cs, SolverGrid::around(cs, 25.0, 20.0), lambda, 4);
    REQUIRE(modes.size() >= 2);
    bool found = false;
    for (std::size_t k = 1; k < modes.size(); ++k) {
        if (lateral_asymmetry(modes[k]) > 0.9 && lateral_asymmetry(modes[0]) < 1e-6) {
            CHECK(std::abs(overlap(modes[0], modes[k])) < 1e-9);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("nearby widths overlap better than distant ones") {
    TaperSolver solver(CrossSection{}, lambda, 600.0, coarse());
    const double near = std::abs(overlap(solver.mode(600.0), solver.mode(575.0)));
    const double far = std::abs(overlap(solver.mode(600.0), solver.mode(300.0)));
    CHECK(near > far);
    CHECK(near <= 1.0 + 1e-9);
}

TEST_CASE("overlap rejects mismatched grids") {
    TaperSolver a(CrossSection{}, lambda, 600.0, coarse());
    TaperSolver b(CrossSection{}, lambda, 500.0, coarse());
    CHECK_THROWS_AS(overlap(a.mode(300.0), b.mode(300.0)), GeometryError);
}

TEST_CASE("constant width costs nothing") {
    TaperSolver solver(CrossSection{}, lambda, 400.0, coarse());
    TaperProfile flat{{{0, 400}, {400, 400}, {800, 400}}};
    const auto loss = solver.loss(flat);
    CHECK(loss.total_db == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(!std::signbit(loss.total_db));
}

TEST_CASE("loss is reciprocal, non-negative and falls under refinement") {
    TaperSolver solver(CrossSection{}, lambda, 600.0, coarse());
    const auto base = TaperProfile::linear(600.0, 150.0, 5, 400.0);
    const auto forward = solver.loss(base);
    const auto backward = solver.loss(base.reversed());
    CHECK(std::abs(forward.total_db - backward.total_db) < 1e-9);
    CHECK(forward.segment_db.size() == 5);
    double sum = 0.0;
    for (double s : forward.segment_db) {
        CHECK(s >= 0.0);
        sum += s;
    }
    CHECK(sum == doctest::Approx(forward.total_db).epsilon(1e-12));
    double prev = forward.total_db;
    for (int factor : {2, 4, 8}) {
        const double l = solver.loss(base.refined(factor)).total_db;
        CHECK(l <= prev + 1e-12);
        prev = l;
    }
}

TEST_CASE("profiles validate their polyline") {
    CHECK_THROWS_AS((TaperProfile{{{0, 400}}}.validate()), GeometryError);
    CHECK_THROWS_AS((TaperProfile{{{0, 400}, {0, 300}}}.validate()), GeometryError);
    CHECK_THROWS_AS((TaperProfile{{{0, 400}, {10, -1}}}.validate()), GeometryError);
    const auto p = TaperProfile::linear(600.0, 150.0, 5, 400.0);
    CHECK(p.entry_width_nm() == 600.0);
    CHECK(p.exit_width_nm() == 150.0);
    CHECK(p.refined(3).segments() == 15);
    CHECK(p.refined(3).nodes.back().x_nm == doctest::Approx(2000.0));
}

}  // TEST_SUITE
