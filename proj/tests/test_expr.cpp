#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "filippov/errors.hpp"
#include "filippov/expr.hpp"
#include "test_util.hpp"

using namespace filippov;

TEST_CASE("parse and evaluate the cubic-trig component") {
    Expr e = parse_expr("(y-2)*(y-1)*(-3/5+sin(x)^2)");
    CHECK(e.eval({0.0, 0.0}) == Catch::Approx(-6.0 / 5.0).margin(1e-15));
}

TEST_CASE("variables and numbers") {
    Expr x = parse_expr("x");
    CHECK(x.eval({2.5, 0.0}) == 2.5);
    CHECK(parse_expr("2^3").eval({0, 0}) == 8.0);
    CHECK(parse_expr("sin(x)^2").eval({M_PI / 2, 0}) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("trig field component evaluates to -sqrt(3)") {
    Expr e = parse_expr("cos(x)*(-sqrt(3)*cos(y)+sin(y))");
    CHECK(e.eval({0, 0}) == Catch::Approx(-std::sqrt(3.0)).margin(1e-15));
    Expr named = parse_expr("cos(x)*(-sqrt3*cos(y)+sin(y))");
    CHECK(named.eval({0, 0}) == Catch::Approx(-std::sqrt(3.0)).margin(1e-15));
}

TEST_CASE("division by zero and sqrt of negative raise eval errors") {
    Expr e = parse_expr("1/0");  // parses fine
    CHECK_THROWS_AS(e.eval({0, 0}), EvalError);
    CHECK_THROWS_AS(parse_expr("sqrt(0-x)").eval({1, 0}), EvalError);
    CHECK(parse_expr("sqrt(0-x)").eval({-4.0, 0}) == 2.0);
}

TEST_CASE("precedence and unary minus") {
    CHECK(parse_expr("-3/5+1").eval({0, 0}) == Catch::Approx(0.4).margin(1e-15));
    CHECK(parse_expr("-x^2").eval({3, 0}) == -9.0);   // ^ binds tighter than unary -
    CHECK(parse_expr("2-3-4").eval({0, 0}) == -5.0);  // left associativity
    CHECK(parse_expr("2*3+4*5").eval({0, 0}) == 26.0);
    CHECK(parse_expr("(x^2)^3").eval({2, 0}) == 64.0);
}

TEST_CASE("parse errors carry offsets and expectations") {
    try {
        parse_expr("x + ");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(parse_expr("sin x"), ParseError);
    CHECK_THROWS_AS(parse_expr("2^x"), ParseError);
    CHECK_THROWS_AS(parse_expr("2^-1"), ParseError);
    CHECK_THROWS_AS(parse_expr("foo(3)"), ParseError);
    CHECK_THROWS_AS(parse_expr("z"), ParseError);
    CHECK_THROWS_AS(parse_expr(")("), ParseError);
    CHECK_THROWS_AS(parse_expr(""), ParseError);
}

TEST_CASE("derivatives match calculus identities") {
    Expr e = parse_expr("sin(x)^2");
    Expr dx = e.derivative(Var::X);
    for (double x : {0.3, 1.1, -0.7})
        CHECK(dx.eval({x, 0}) == Catch::Approx(2 * std::sin(x) * std::cos(x)).margin(1e-14));
    CHECK(dx.eval({0.3, 0}) ==
          Catch::Approx(central_difference(e, Var::X, {0.3, 0}, 1e-6)).margin(1e-7));

    Expr y = parse_expr("y");
    CHECK(y.derivative(Var::Y).eval({5, 7}) == 1.0);
    CHECK(y.derivative(Var::X).eval({5, 7}) == 0.0);
}

TEST_CASE("derivative of the cubic-trig component matches central differences") {
    Expr e = parse_expr("(y-2)*(y-1)*(-3/5+sin(x)^2)");
    Expr dx = e.derivative(Var::X);
    double fd = central_difference(e, Var::X, {0.5, 0.5}, 1e-5);
    CHECK(dx.eval({0.5, 0.5}) == Catch::Approx(fd).margin(1e-6));
}

TEST_CASE("abs evaluates but refuses differentiation") {
    Expr e = parse_expr("abs(x)");
    CHECK(e.eval({-3, 0}) == 3.0);
    CHECK(e.contains_abs());
    CHECK_THROWS_AS(e.derivative(Var::X), DerivativeError);
}

namespace {

// Random expression generator for the differentiation property: all node
// kinds except abs, with guarded denominators and sqrt arguments so the
// sampled square stays inside every domain.
Expr random_expr(testutil::Rng& rng, int depth) {
    if (depth == 0) {
        switch (rng.uniform_int(0, 3)) {
            case 0: return Expr::variable(Var::X);
            case 1: return Expr::variable(Var::Y);
            case 2: return Expr::number(rng.uniform(-2, 2));
            default: return Expr::named(rng.uniform_int(0, 1) ? "pi" : "sqrt3");
        }
    }
    switch (rng.uniform_int(0, 8)) {
        case 0: return Expr::add(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 1: return Expr::sub(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 2: return Expr::mul(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 3: {
            // denominator c + x^2 or c + y^2 with c >= 1/2 keeps |denom| >= 1/2
            Var v = rng.uniform_int(0, 1) ? Var::X : Var::Y;
            Expr denom = Expr::add(Expr::number(rng.uniform(0.5, 2.0)),
                                   Expr::pow(Expr::variable(v), 2));
            return Expr::div(random_expr(rng, depth - 1), denom);
        }
        case 4: return Expr::sin(random_expr(rng, depth - 1));
        case 5: return Expr::cos(random_expr(rng, depth - 1));
        case 6: {
            Var v = rng.uniform_int(0, 1) ? Var::X : Var::Y;
            Expr arg = Expr::add(Expr::number(rng.uniform(0.25, 2.0)),
                                 Expr::pow(Expr::variable(v), 2));
            return Expr::sqrt(arg);
        }
        case 7: return Expr::neg(random_expr(rng, depth - 1));
        default: return Expr::pow(random_expr(rng, depth - 1), rng.uniform_int(0, 3));
    }
}

}  // namespace

TEST_CASE("structural derivative agrees with central differences on random expressions") {
    testutil::Rng rng(2024);
    int checked = 0;
    for (int e = 0; e < 100; ++e) {
        Expr expr = random_expr(rng, rng.uniform_int(1, 5));
        Expr dx, dy;
        dx = expr.derivative(Var::X);
        dy = expr.derivative(Var::Y);
        for (int s = 0; s < 10; ++s) {
            Point pt{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            double fdx, fdy, vx, vy;
            try {
                fdx = central_difference(expr, Var::X, pt, 1e-5);
                fdy = central_difference(expr, Var::Y, pt, 1e-5);
                vx = dx.eval(pt);
                vy = dy.eval(pt);
            } catch (const EvalError&) {
                continue;  // rare domain fault in a wild composite; skip sample
            }
            if (std::fabs(fdx) > 1e4 || std::fabs(fdy) > 1e4) continue;
            REQUIRE(std::fabs(vx - fdx) <= 1e-6 * (1.0 + std::fabs(fdx)));
            REQUIRE(std::fabs(vy - fdy) <= 1e-6 * (1.0 + std::fabs(fdy)));
            ++checked;
        }
    }
    REQUIRE(checked > 500);
}

TEST_CASE("pretty-print o parse o pretty-print is a fixed point") {
    std::vector<std::string> corpus = {
        "(y-2)*(y-1)*(-3/5+sin(x)^2)",
        "cos(x)*(-sqrt3*cos(y)+sin(y))",
        "-x-x^2/10",
        "1/0",
        "2^3",
        "x*y/(1+x^2)",
        "sqrt(1+y^2)-abs(x)",
    };
    for (const auto& s : corpus) {
        std::string p1 = parse_expr(s).to_string();
        std::string p2 = parse_expr(p1).to_string();
        REQUIRE(p1 == p2);
    }
    testutil::Rng rng(31337);
    for (int i = 0; i < 200; ++i) {
        // The fixed point is a property of printed strings: one round trip
        // may canonicalize an arbitrary tree (e.g. a negated literal), after
        // which print o parse is stable.
        Expr e = random_expr(rng, rng.uniform_int(1, 5));
        std::string p1 = parse_expr(e.to_string()).to_string();
        std::string p2 = parse_expr(p1).to_string();
        REQUIRE(p1 == p2);
        std::string p3 = parse_expr(p2).to_string();
        REQUIRE(p2 == p3);
    }
}

TEST_CASE("printed expressions evaluate identically after reparse") {
    testutil::Rng rng(555);
    for (int i = 0; i < 100; ++i) {
        Expr e = random_expr(rng, 4);
        Expr round = parse_expr(e.to_string());
        for (int s = 0; s < 5; ++s) {
            Point pt{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            double a, b;
            try {
                a = e.eval(pt);
                b = round.eval(pt);
            } catch (const EvalError&) {
                continue;
            }
            REQUIRE(a == b);
        }
    }
}

TEST_CASE("random token streams never crash the parser") {
    const char* tokens[] = {"x",   "y",   "pi", "sqrt3", "sin", "cos",  "sqrt",
                            "abs", "1.5", "2",  "+",     "-",   "*",    "/",
                            "^",   "(",   ")",  "0",     "3e2", ".25"};
    testutil::Rng rng(777);
    int parsed_ok = 0;
    for (int i = 0; i < 2000; ++i) {
        std::string src;
        int len = rng.uniform_int(1, 12);
        for (int t = 0; t < len; ++t) {
            src += tokens[rng.uniform_int(0, 19)];
            if (rng.uniform_int(0, 1)) src += ' ';
        }
        try {
            Expr e = parse_expr(src);
            ++parsed_ok;
        } catch (const ParseError&) {
            // expected for most streams
        }
    }
    CHECK(parsed_ok > 0);
}
