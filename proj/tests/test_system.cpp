#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "filippov/errors.hpp"
#include "filippov/system.hpp"
#include "test_util.hpp"

using namespace filippov;

TEST_CASE("z1 loads with one surface and two pieces") {
    PiecewiseSystem sys = testutil::scenario("z1");
    CHECK(sys.surface_count() == 1);
    CHECK(sys.piece_count() == 2);
    CHECK(sys.domain.mode == DomainMode::Plane);
}

TEST_CASE("ex43 loads with two surfaces and three pieces on the torus") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    CHECK(sys.surface_count() == 2);
    CHECK(sys.piece_count() == 3);
    CHECK(sys.domain.mode == DomainMode::Torus);
    CHECK(sys.domain.p == Catch::Approx(M_PI));
    CHECK(sys.domain.q == Catch::Approx(4.5));
    CHECK(sys.domain.y0 == -1.5);
}

TEST_CASE("active piece selection") {
    PiecewiseSystem sys = testutil::scenario("z1");
    Vec2 up = sys.active_piece({0, 0.5}).eval({0, 0.5});
    CHECK(up.x == 1.0);
    CHECK(up.y == -1.0);
    Vec2 down = sys.active_piece({0, -0.5}).eval({0, -0.5});
    CHECK(down.x == 1.0);
    CHECK(down.y == 1.0);
    CHECK_THROWS_AS(sys.active_piece({0, 0}), OnSurfaceError);
}

TEST_CASE("overlapping signatures are rejected") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "1" }
piece { signature = "+"; fx = "1"; fy = "-1" }
)";
    CHECK_THROWS_AS(load_scenario(text), ScenarioError);
}

TEST_CASE("coverage gaps are rejected") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "1" }
)";
    CHECK_THROWS_AS(load_scenario(text), ScenarioError);
}

TEST_CASE("regular value violations are caught at load") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "(y-1/2)^2" }
piece { signature = "+"; fx = "1"; fy = "1" }
piece { signature = "-"; fx = "1"; fy = "-1" }
)";
    CHECK_THROWS_AS(load_scenario(text), ScenarioError);
}

TEST_CASE("signature arity must match the surface count") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+-"; fx = "1"; fy = "1" }
piece { signature = "-"; fx = "1"; fy = "-1" }
)";
    CHECK_THROWS_AS(load_scenario(text), ScenarioError);
}

TEST_CASE("lie derivatives by iterated structural differentiation") {
    PiecewiseSystem z1 = testutil::scenario("z1");
    // piece 0 is the upper field (1,-1); h = y
    CHECK(z1.lie_derivative(0, 0, {0.3, 0.0}, 1) == -1.0);
    CHECK(z1.lie_derivative(1, 0, {0.3, 0.0}, 1) == 1.0);

    PiecewiseSystem ff = testutil::scenario("foldfold_center");
    CHECK(ff.lie_derivative(0, 0, {0, 0}, 1) == 0.0);
    CHECK(ff.lie_derivative(0, 0, {0, 0}, 2) == -1.0);
    CHECK(ff.lie_derivative(1, 0, {0, 0}, 2) == 1.0);

    CHECK_THROWS_AS(ff.lie_derivative(0, 0, {0, 0}, 5), OrderOverflowError);
    CHECK_THROWS_AS(ff.lie_derivative(0, 0, {0, 0}, 0), OrderOverflowError);
}

TEST_CASE("tangent field has identically zero normal derivative") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "0" }
piece { signature = "-"; fx = "1"; fy = "0" }
)";
    PiecewiseSystem sys = load_scenario(text);
    for (double x : {-0.5, 0.0, 0.8})
        CHECK(sys.lie_derivative(0, 0, {x, 0.0}, 1) == 0.0);
}

TEST_CASE("first lie derivative matches a finite-difference directional derivative") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    testutil::Rng rng(12);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        Point pt{rng.uniform(0, M_PI), rng.uniform(-1.4, 2.9)};
        int piece;
        try {
            piece = sys.active_piece_index(pt);
        } catch (const OnSurfaceError&) {
            continue;
        }
        for (int surf = 0; surf < 2; ++surf) {
            Vec2 f = sys.pieces[piece].eval(pt);
            const double h = 1e-6;
            Point fwd{pt.x + h * f.x, pt.y + h * f.y};
            Point bwd{pt.x - h * f.x, pt.y - h * f.y};
            double fd = (sys.surfaces[surf].eval(fwd) - sys.surfaces[surf].eval(bwd)) /
                        (2.0 * h);
            double lie = sys.lie_derivative(piece, surf, pt, 1);
            REQUIRE(std::fabs(lie - fd) < 1e-6 * (1.0 + std::fabs(fd)));
        }
        ++checked;
    }
    REQUIRE(checked > 900);
}

TEST_CASE("active piece is constant along segments that avoid the surfaces") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    testutil::Rng rng(77);
    int segments = 0;
    for (int i = 0; i < 300 && segments < 100; ++i) {
        Point a{rng.uniform(0, M_PI), rng.uniform(-1.4, 2.9)};
        double angle = rng.uniform(0, 2 * M_PI);
        Vec2 dir{std::cos(angle), std::sin(angle)};
        double len = rng.uniform(0.05, 0.3);
        Point b = a + len * dir;
        if (!sys.domain.contains(a) || !sys.domain.contains(b)) continue;
        // keep only segments whose h values keep their sign and stay bounded
        // away from 0 (so the segment lies in one connected component)
        bool clean = true;
        std::vector<int> signs0;
        for (int s = 0; s <= 20 && clean; ++s) {
            Point pt = a + (len * s / 20.0) * dir;
            for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
                double h = sys.surfaces[j].eval(pt);
                if (std::fabs(h) < 1e-3) {
                    clean = false;
                    break;
                }
                int sg = h > 0 ? 1 : -1;
                if (s == 0)
                    signs0.push_back(sg);
                else if (signs0[j] != sg)
                    clean = false;
            }
        }
        if (!clean) continue;
        int piece = -1;
        bool constant = true;
        for (int s = 0; s <= 20; ++s) {
            Point pt = a + (len * s / 20.0) * dir;
            int idx = sys.active_piece_index(pt);
            if (piece < 0) piece = idx;
            if (idx != piece) constant = false;
        }
        REQUIRE(constant);
        ++segments;
    }
    REQUIRE(segments >= 50);
}

TEST_CASE("sided views give exact one-sided limits across the wrap circle") {
    PiecewiseSystem sys = testutil::scenario("ex42");
    // circle y = 0: above is the (0,-1) piece, below (through the wrap) the
    // (0,1) piece
    Vec2 above = sys.sided_field(0, {0.3, 0.0}, +1);
    Vec2 below = sys.sided_field(0, {0.3, 0.0}, -1);
    CHECK(above.y == -1.0);
    CHECK(below.y == 1.0);
}

TEST_CASE("scenario parser reports malformed input") {
    CHECK_THROWS_AS(load_scenario("piece = {"), ScenarioError);
    CHECK_THROWS_AS(load_scenario("domain { mode = hexagon; x0=0; y0=0; p=1; q=1 }"),
                    ScenarioError);
    CHECK_THROWS_AS(load_scenario(""), ScenarioError);
    const char* no_domain = R"(surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "1" }
piece { signature = "-"; fx = "1"; fy = "1" }
)";
    CHECK_THROWS_AS(load_scenario(no_domain), ScenarioError);
}

TEST_CASE("reversed system negates the fields and keeps everything else") {
    PiecewiseSystem sys = testutil::scenario("z1");
    PiecewiseSystem rev = sys.reversed();
    Vec2 f = sys.pieces[0].eval({0.1, 0.5});
    Vec2 g = rev.pieces[0].eval({0.1, 0.5});
    CHECK(f.x == -g.x);
    CHECK(f.y == -g.y);
    CHECK(rev.surface_count() == sys.surface_count());
}
