#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "filippov/classify.hpp"
#include "filippov/errors.hpp"
#include "test_util.hpp"

using namespace filippov;

namespace {
const double kFoldX = std::asin(std::sqrt(0.6));  // sin^2 x = 3/5
}

TEST_CASE("z1 slides everywhere on the switching line") {
    PiecewiseSystem sys = testutil::scenario("z1");
    SigmaClass cls = classify_point(sys, 0, {0.3, 0.0});
    CHECK(cls.label == SigmaLabel::Sliding);
    CHECK(cls.f_plus_h == -1.0);
    CHECK(cls.f_minus_h == 1.0);
}

TEST_CASE("ex43 upper circle is crossing") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    SigmaClass cls = classify_point(sys, 1, {0.0, 1.5});
    CHECK(cls.label == SigmaLabel::Crossing);
    CHECK(cls.f_plus_h == Catch::Approx(6.0 / 5.0).margin(1e-12));
    CHECK(cls.f_minus_h == Catch::Approx(3.0 / 20.0).margin(1e-12));
}

TEST_CASE("fold-fold origin is a two-sided invisible order-2 tangency") {
    PiecewiseSystem sys = testutil::scenario("foldfold_center");
    SigmaClass cls = classify_point(sys, 0, {0.0, 0.0});
    REQUIRE(cls.label == SigmaLabel::Tangency);
    REQUIRE(cls.tangency.size() == 2);
    for (const auto& ts : cls.tangency) {
        CHECK(ts.order == 2);
        CHECK(ts.visibility == Visibility::Invisible);
    }
    CHECK(cls.tangent_on(+1));
    CHECK(cls.tangent_on(-1));
}

TEST_CASE("classify_point rejects off-surface points") {
    PiecewiseSystem sys = testutil::scenario("z1");
    CHECK_THROWS_AS(classify_point(sys, 0, {0.0, 0.1}), OffSurfaceError);
}

TEST_CASE("order overflow when every Lie derivative vanishes") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "0" }
piece { signature = "-"; fx = "1"; fy = "1" }
)";
    PiecewiseSystem sys = load_scenario(text);
    CHECK_THROWS_AS(classify_point(sys, 0, {0.2, 0.0}), OrderOverflowError);
}

TEST_CASE("sliding field values") {
    PiecewiseSystem z1 = testutil::scenario("z1");
    for (int k = 0; k < 32; ++k) {
        double x = -4.0 + 8.0 * k / 32.0;
        Vec2 zs = sliding_field(z1, 0, {x, 0.0});
        CHECK(std::fabs(zs.x - 1.0) <= 1e-12);
        CHECK(std::fabs(zs.y) <= 1e-12);
    }

    PiecewiseSystem z2 = testutil::scenario("z2_as_printed");
    Vec2 zs2 = sliding_field(z2, 0, {0.7, 0.0});
    CHECK(std::fabs(zs2.x) <= 1e-12);
    CHECK(std::fabs(zs2.y) <= 1e-12);

    PiecewiseSystem ex42 = testutil::scenario("ex42");
    Vec2 zs42 = sliding_field(ex42, 0, {0.25, 0.0});
    CHECK(std::fabs(zs42.x) <= 1e-12);
    CHECK(std::fabs(zs42.y) <= 1e-12);
}

TEST_CASE("sliding field is rejected off the sliding/escaping closure") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    CHECK_THROWS_AS(sliding_field(sys, 1, {0.0, 1.5}), WrongRegionError);  // crossing
}

TEST_CASE("degenerate sliding denominator is reported") {
    const char* text = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "-1" }
piece { signature = "-"; fx = "2"; fy = "-1" }
)";
    PiecewiseSystem sys = load_scenario(text);
    // F+h = F-h = -1: a crossing with zero denominator in the sliding formula
    CHECK_THROWS_AS(sliding_field(sys, 0, {0.0, 0.0}), WrongRegionError);
}

TEST_CASE("filippov segment endpoints") {
    PiecewiseSystem z1 = testutil::scenario("z1");
    auto [fp, fm] = filippov_segment(z1, 0, {0.0, 0.0});
    CHECK(fp.x == 1.0);
    CHECK(fp.y == -1.0);
    CHECK(fm.x == 1.0);
    CHECK(fm.y == 1.0);

    PiecewiseSystem ff = testutil::scenario("foldfold_center");
    auto [gp, gm] = filippov_segment(ff, 0, {0.0, 0.0});
    CHECK(gp.x == 1.0);
    CHECK(gp.y == 0.0);
    CHECK(gm.x == -1.0);
    CHECK(gm.y == 0.0);

    // a continuous point gives a degenerate segment
    const char* cont = R"(domain { mode = plane; x0 = -1; y0 = -1; p = 2; q = 2 }
surface { h = "y" }
piece { signature = "+"; fx = "1"; fy = "1" }
piece { signature = "-"; fx = "1"; fy = "1" }
)";
    PiecewiseSystem cs = load_scenario(cont);
    auto [cp, cm] = filippov_segment(cs, 0, {0.3, 0.0});
    CHECK((cp - cm).norm() == 0.0);
}

TEST_CASE("filippov segment midpoint is the field average") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    SurfaceScan scan = scan_surface(sys, 0, 32);
    for (const auto& [param, pt] : scan.points) {
        auto [fp, fm] = filippov_segment(sys, 0, pt);
        Vec2 mid = 0.5 * (fp + fm);
        Vec2 avg = 0.5 * (sys.sided_field(0, pt, +1) + sys.sided_field(0, pt, -1));
        CHECK(mid.x == avg.x);
        CHECK(mid.y == avg.y);
    }
}

TEST_CASE("scan of ex43 lower circle finds the two fold points") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    SurfaceScan scan = scan_surface(sys, 0, 256);
    REQUIRE(scan.tangencies.size() == 2);
    CHECK(scan.tangencies[0].param == Catch::Approx(kFoldX).margin(1e-6));
    CHECK(scan.tangencies[1].param == Catch::Approx(M_PI - kFoldX).margin(1e-6));

    // visible-visible at x*, invisible-invisible at pi - x*
    for (const auto& ts : scan.tangencies[0].cls.tangency) {
        CHECK(ts.order == 2);
        CHECK(ts.visibility == Visibility::Visible);
    }
    for (const auto& ts : scan.tangencies[1].cls.tangency) {
        CHECK(ts.order == 2);
        CHECK(ts.visibility == Visibility::Invisible);
    }

    REQUIRE(scan.intervals.size() == 2);
    CHECK(scan.intervals[0].label == SigmaLabel::Escaping);
    CHECK(scan.intervals[1].label == SigmaLabel::Sliding);
}

TEST_CASE("scan of ex43 upper circle is crossing off the folds") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    SurfaceScan scan = scan_surface(sys, 1, 256);
    REQUIRE(scan.tangencies.size() == 2);
    CHECK(scan.tangencies[0].param == Catch::Approx(kFoldX).margin(1e-6));
    CHECK(scan.tangencies[1].param == Catch::Approx(M_PI - kFoldX).margin(1e-6));
    for (const auto& iv : scan.intervals) CHECK(iv.label == SigmaLabel::Crossing);
}

TEST_CASE("scan of z1 is one all-sliding interval") {
    PiecewiseSystem sys = testutil::scenario("z1");
    SurfaceScan scan = scan_surface(sys, 0, 64);
    CHECK(scan.tangencies.empty());
    REQUIRE(scan.intervals.size() == 1);
    CHECK(scan.intervals[0].label == SigmaLabel::Sliding);
}

TEST_CASE("scan of the fold-fold line: crossing, tangency at 0, crossing") {
    PiecewiseSystem sys = testutil::scenario("foldfold_center");
    SurfaceScan scan = scan_surface(sys, 0, 64);
    REQUIRE(scan.tangencies.size() == 1);
    CHECK(scan.tangencies[0].param == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(scan.intervals.size() == 2);
    CHECK(scan.intervals[0].label == SigmaLabel::Crossing);
    CHECK(scan.intervals[1].label == SigmaLabel::Crossing);
}

TEST_CASE("interval labels agree with dense pointwise classification") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    SurfaceScan scan = scan_surface(sys, 0, 128);
    testutil::Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const ScanInterval& iv = scan.intervals[rng.uniform_int(0, 1)];
        double t = rng.uniform(iv.param0 + 1e-4, iv.param1 - 1e-4);
        Point pt = scan.point_at(t);
        CHECK(classify_point(sys, 0, pt).label == iv.label);
    }
}

TEST_CASE("sliding field is tangent and a convex combination") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    SurfaceScan scan = scan_surface(sys, 0, 128);
    int checked = 0;
    for (const auto& [param, pt] : scan.points) {
        SigmaClass cls = classify_point(sys, 0, pt);
        if (cls.label != SigmaLabel::Sliding && cls.label != SigmaLabel::Escaping) continue;
        Vec2 zs = sliding_field(sys, 0, pt);
        Vec2 grad = sys.surfaces[0].gradient(pt);
        CHECK(std::fabs(grad.dot(zs)) <= 1e-10);
        double lambda = sliding_weight(cls);
        CHECK(lambda >= 0.0);
        CHECK(lambda <= 1.0);
        Vec2 combo = lambda * sys.sided_field(0, pt, +1) +
                     (1.0 - lambda) * sys.sided_field(0, pt, -1);
        CHECK((combo - zs).norm() <= 1e-10);
        ++checked;
    }
    REQUIRE(checked > 64);
}
