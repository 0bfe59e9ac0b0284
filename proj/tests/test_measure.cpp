#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "filippov/errors.hpp"
#include "filippov/measure.hpp"
#include "test_util.hpp"

using namespace filippov;

TEST_CASE("flux residual of z1 is -2 everywhere") {
    PiecewiseSystem sys = testutil::scenario("z1");
    auto profiles = check_flux(sys, 32);
    REQUIRE(profiles.size() == 1);
    CHECK(profiles[0].max_abs_residual == Catch::Approx(2.0).margin(1e-15));
    CHECK(profiles[0].violation);
    for (const auto& s : profiles[0].samples)
        CHECK(s.residual == Catch::Approx(-2.0).margin(1e-15));
}

TEST_CASE("the fold-fold center is refractive") {
    PiecewiseSystem sys = testutil::scenario("foldfold_center");
    auto profiles = check_flux(sys, 64);
    CHECK(profiles[0].max_abs_residual <= 1e-12);
    CHECK_FALSE(profiles[0].violation);
}

TEST_CASE("ex44 flux residual is 1 + sin^2 x with maximum 2") {
    PiecewiseSystem sys = testutil::scenario("ex44");
    auto profiles = check_flux(sys, 32);
    REQUIRE(profiles.size() == 2);
    const FluxProfile& lower = profiles[0];  // surface 0 is y = 0
    CHECK(lower.max_abs_residual == Catch::Approx(2.0).margin(1e-12));
    CHECK(lower.violation);
    for (const auto& s : lower.samples) {
        double expect = 1.0 + std::pow(std::sin(s.pt.x), 2);
        CHECK(s.residual == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("striped Klein seam flux balances with the solved densities") {
    PiecewiseSystem sys = testutil::scenario("striped_klein");
    auto profiles = check_flux(sys, 64);
    REQUIRE(profiles.size() == 3);
    for (const auto& p : profiles) {
        CHECK(p.max_abs_residual <= 1e-12);
        CHECK_FALSE(p.violation);
    }
}

TEST_CASE("flux verdict is invariant under density rescaling") {
    PiecewiseSystem sys = testutil::scenario("striped_torus");
    auto before = check_flux(sys, 32);
    for (auto& pc : sys.pieces) pc.density = Expr::mul(Expr::number(5.0), pc.density);
    auto after = check_flux(sys, 32);
    for (std::size_t j = 0; j < before.size(); ++j) {
        CHECK(after[j].violation == before[j].violation);
        CHECK(after[j].max_abs_residual ==
              Catch::Approx(5.0 * before[j].max_abs_residual).margin(1e-12));
    }
}

TEST_CASE("divergence of constant pieces and the fold-fold fields vanishes") {
    PiecewiseSystem striped = testutil::scenario("striped_torus");
    for (std::size_t i = 0; i < striped.piece_count(); ++i) {
        DivergenceReport rep = check_divergence(striped, static_cast<int>(i), std::nullopt);
        CHECK(rep.max_abs == 0.0);
    }
    PiecewiseSystem ff = testutil::scenario("foldfold_center");
    DivergenceReport rep = check_divergence(ff, 0, Expr::number(1.0));
    CHECK(rep.max_abs == 0.0);
}

TEST_CASE("ex44 trig piece is divergence free with unit density") {
    PiecewiseSystem sys = testutil::scenario("ex44");
    DivergenceReport rep = check_divergence(sys, 0, Expr::number(1.0));
    CHECK(rep.max_abs <= 1e-12);
}

TEST_CASE("ex44 trig piece with the stated density is not divergence free") {
    PiecewiseSystem sys = testutil::scenario("ex44");
    DivergenceReport rep = check_divergence(sys, 0, std::nullopt);  // density sin(x)
    CHECK(rep.max_abs > 0.5);
    CHECK(rep.violation);

    // div(alpha F) = cos^2(x) (sin y - sqrt(3) cos y); frozen hand value
    const SmoothPiece& pc = sys.pieces[0];
    Expr div = Expr::add(Expr::mul(pc.density, pc.fx).derivative(Var::X),
                         Expr::mul(pc.density, pc.fy).derivative(Var::Y));
    CHECK(div.eval({M_PI / 4, -M_PI / 4}) ==
          Catch::Approx(-0.96592582628906831).margin(1e-12));
}

TEST_CASE("stripe density solver on the torus") {
    StripedSpec spec = StripedSpec::equal_heights(DomainMode::Torus, {0, 0, 0}, {1, 2, 4});
    StripedDensitySolution sol = solve_striped_density(spec);
    REQUIRE(sol.feasible);
    REQUIRE(sol.alpha.size() == 3);
    CHECK(sol.alpha[0] == Catch::Approx(12.0 / 7.0).margin(1e-15));
    CHECK(sol.alpha[1] == Catch::Approx(6.0 / 7.0).margin(1e-15));
    CHECK(sol.alpha[2] == Catch::Approx(3.0 / 7.0).margin(1e-15));
    CHECK(sol.alpha[0] / sol.alpha[1] == 2.0);
    CHECK(sol.alpha[0] / sol.alpha[2] == 4.0);
    CHECK(sol.residual <= 1e-14);
    double mass = (sol.alpha[0] + sol.alpha[1] + sol.alpha[2]) / 3.0;
    CHECK(mass == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("single stripe solves to the uniform density") {
    StripedSpec spec = StripedSpec::equal_heights(DomainMode::Torus, {2.0}, {3.0});
    StripedDensitySolution sol = solve_striped_density(spec);
    REQUIRE(sol.feasible);
    CHECK(sol.alpha[0] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("Klein solver flags the seam imbalance") {
    StripedSpec spec =
        StripedSpec::equal_heights(DomainMode::KleinBottle, {1.0, 2.0}, {1.0, 1.0});
    StripedDensitySolution sol = solve_striped_density(spec);
    CHECK_FALSE(sol.feasible);
    CHECK(sol.reason.find("seam") != std::string::npos);
}

TEST_CASE("Klein solver accepts balanced drifts") {
    StripedSpec spec =
        StripedSpec::equal_heights(DomainMode::KleinBottle, {1.0, 2.0}, {1.0, 2.0});
    StripedDensitySolution sol = solve_striped_density(spec);
    REQUIRE(sol.feasible);
    CHECK(sol.alpha[0] == Catch::Approx(4.0 / 3.0).margin(1e-15));
    CHECK(sol.alpha[1] == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK(sol.residual <= 1e-15);
}

TEST_CASE("invalid stripe specs are rejected with reasons") {
    StripedSpec bad = StripedSpec::equal_heights(DomainMode::Torus, {0.0}, {-1.0});
    CHECK_FALSE(solve_striped_density(bad).feasible);
    StripedSpec plane = StripedSpec::equal_heights(DomainMode::Plane, {0.0}, {1.0});
    CHECK_FALSE(solve_striped_density(plane).feasible);
}

TEST_CASE("push-forward of the solved stripe density is invariant") {
    PiecewiseSystem sys = testutil::scenario("striped_torus");
    std::vector<NamedBox> sets = {{"band", Rect{0.0, 0.05, 1.0, 0.30}}};
    auto entries = pushforward_test(sys, sets, {0.5, 1.0, 2.0}, 8);
    REQUIRE(entries.size() == 3);
    for (const auto& e : entries) {
        INFO("t = " << e.time);
        CHECK(e.relative_error <= 0.02);
        CHECK_FALSE(e.branched);
    }
}

TEST_CASE("push-forward with the uniform density detects the imbalance") {
    PiecewiseSystem sys = testutil::scenario("striped_torus_lebesgue");
    std::vector<NamedBox> sets = {{"band", Rect{0.0, 0.05, 1.0, 0.30}}};
    auto entries = pushforward_test(sys, sets, {0.5, 1.0, 2.0}, 8);
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.relative_error);
    CHECK(worst >= 0.05);
}

TEST_CASE("push-forward at t=0 is exact for in-stripe boxes") {
    PiecewiseSystem sys = testutil::scenario("striped_torus");
    std::vector<NamedBox> sets = {{"band", Rect{0.0, 0.05, 1.0, 0.30}}};
    auto entries = pushforward_test(sys, sets, {0.0}, 8);
    CHECK(entries[0].relative_error <= 1e-9);
}

TEST_CASE("z1 collapse: the outer cover loses nearly all mass") {
    PiecewiseSystem sys = testutil::scenario("z1");
    std::vector<NamedBox> sets = {{"A", Rect{0.0, 0.3, 0.2, 0.5}}};
    auto r16 = pushforward_test(sys, sets, {1.0}, 16);
    double nuA = r16[0].nu_ref;
    CHECK(nuA == Catch::Approx(0.04).margin(1e-9));
    CHECK(r16[0].cover_nu <= 0.1 * nuA);
    auto r32 = pushforward_test(sys, sets, {1.0}, 32);
    CHECK(r32[0].cover_nu < r16[0].cover_nu);
    // the transported-cell estimate collapses as well
    CHECK(r16[0].nu_image <= 0.05 * nuA);
}

TEST_CASE("cycle measure on the ex43 limit cycles") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    CycleMeasure upper = cycle_measure(sys, {0.0, 1.0}, M_PI);
    CHECK(upper.period() == Catch::Approx(M_PI));
    CHECK(upper.nu_box(Rect{0.0, -1.5, M_PI, 3.0}) == Catch::Approx(1.0).margin(1e-12));
    CHECK(upper.nu_box(Rect{0.0, 0.5, M_PI / 2, 1.5}) == Catch::Approx(0.5).margin(1e-9));
    CHECK(upper.nu_box(Rect{0.0, 2.0, M_PI, 3.0}) == 0.0);

    CycleMeasure lower = cycle_measure(sys, {0.0, -1.0}, M_PI);
    CHECK(lower.nu_box(Rect{0.0, -1.2, M_PI / 4, -0.8}) == Catch::Approx(0.25).margin(1e-9));
}

TEST_CASE("cycle measure is invariant under the flow") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    CycleMeasure cm = cycle_measure(sys, {0.0, 1.0}, M_PI);
    std::vector<Rect> boxes = {{0.0, 0.5, M_PI / 2, 1.5}, {0.3, 0.9, 2.0, 1.1}};
    for (double t : {1.0, M_PI}) {
        for (const Rect& box : boxes) {
            // push each orbit sample forward by t and re-measure
            std::vector<ArcSample> shifted;
            for (const auto& s : cm.samples()) {
                BranchTree tree = flow_point(sys, s.p, t, {});
                shifted.push_back({s.t, tree.nodes[tree.leaf_indices()[0]].arc.p_end()});
            }
            CycleMeasure pushed(sys.domain, shifted, cm.period());
            CHECK(std::fabs(pushed.nu_box(box) - cm.nu_box(box)) <= 1e-6);
        }
    }
}

TEST_CASE("cycle measure rejects non-closed orbits and orbits meeting N_Z") {
    PiecewiseSystem sys = testutil::scenario("ex43");
    CHECK_THROWS_AS(cycle_measure(sys, {0.0, 2.0}, M_PI), FlowError);   // not closed
    CHECK_THROWS_AS(cycle_measure(sys, {0.0, 0.5}, M_PI), FlowError);   // reaches sliding
}

TEST_CASE("the fold-fold return map is the identity") {
    PiecewiseSystem sys = testutil::scenario("foldfold_center");
    ReturnMapResult rm = return_map(sys, {0.0, 0.0}, {0.1, 0.2, 0.4});
    CHECK(rm.center);
    CHECK(rm.max_error <= 1e-6);
    for (std::size_t i = 0; i < rm.offsets.size(); ++i)
        CHECK(rm.returned[i] == Catch::Approx(rm.offsets[i]).margin(1e-6));
}

TEST_CASE("the perturbed fold-fold is not a center") {
    PiecewiseSystem sys = testutil::scenario("foldfold_perturbed");
    ReturnMapResult rm = return_map(sys, {0.0, 0.0}, {0.1, 0.2, 0.4});
    CHECK_FALSE(rm.center);
    CHECK(rm.max_error > 1e-3);
}

TEST_CASE("return map rejects degenerate offsets and non-tangency points") {
    PiecewiseSystem ff = testutil::scenario("foldfold_center");
    CHECK_THROWS_AS(return_map(ff, {0.0, 0.0}, {0.0}), WrongRegionError);
    PiecewiseSystem z1 = testutil::scenario("z1");
    CHECK_THROWS_AS(return_map(z1, {0.0, 0.0}, {0.1}), WrongRegionError);
}

TEST_CASE("aggregate verdicts") {
    PiecewiseSystem good = testutil::scenario("z2_refractive");
    MeasureReport rep = check_measure(good, {}, {}, 8);
    CHECK(rep.verdict == MeasureVerdict::ConsistentWithInvariance);

    PiecewiseSystem bad = testutil::scenario("z2_as_printed");
    MeasureReport rep2 = check_measure(bad, {}, {}, 8);
    CHECK(rep2.verdict == MeasureVerdict::ViolationDetected);
    CHECK(rep2.witness.find("flux") != std::string::npos);
}
