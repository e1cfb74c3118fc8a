#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "ast_gen.hpp"
#include "qsmc/expr.hpp"

using namespace qsmc::expr;
using qsmc::testing::AstGen;
using std::numbers::pi;

namespace {

constexpr const char* kExample2Disturbance =
    "pw(t<=6, 0.5*sin(pi/2*t), t<=9, sin(pi*t), cos(pi*t)-1)";

double at(const Expr& e, double t, std::vector<double> x = {}) { return e.eval(t, x); }

std::optional<double> try_eval(const Expr& e, double t, const std::vector<double>& x) {
    try {
        return e.eval(t, x);
    } catch (const EvalError&) {
        return std::nullopt;
    }
}

}  // namespace

TEST(Parse, ReferenceExamples) {
    const auto d = parse("0.5*sin(t)", 2);
    for (double t : {0.0, 0.3, 2.0}) EXPECT_DOUBLE_EQ(at(d, t, {0, 0}), 0.5 * std::sin(t));

    const auto f = parse("x3*sin(2*x2)+x1*cos(x4)", 4);
    const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
    EXPECT_DOUBLE_EQ(at(f, 0.0, x), 0.3 * std::sin(0.4) + 0.1 * std::cos(0.4));
}

TEST(Parse, VariableOutOfRange) {
    try {
        parse("x5", 4);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1);
        EXPECT_EQ(e.column(), 1);
        EXPECT_NE(std::string(e.what()).find("out of range"), std::string::npos);
    }
    EXPECT_THROW(parse("x0", 4), ParseError);
    EXPECT_THROW(parse("x1", 0), ParseError);
}

TEST(Parse, SyntaxErrorsCarryLocation) {
    try {
        parse("1 +\n  * 2", 1);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_EQ(e.column(), 3);
    }
    EXPECT_THROW(parse("", 1), ParseError);
    EXPECT_THROW(parse("   ", 1), ParseError);
    EXPECT_THROW(parse("(1 + 2", 1), ParseError);
    EXPECT_THROW(parse("1 2", 1), ParseError);
    EXPECT_THROW(parse("2 $ 3", 1), ParseError);
}

TEST(Parse, UnknownIdentifierAndArity) {
    EXPECT_THROW(parse("foo(1)", 1), ParseError);
    EXPECT_THROW(parse("y", 1), ParseError);
    EXPECT_THROW(parse("sin(1, 2)", 1), ParseError);
    EXPECT_THROW(parse("min(1)", 1), ParseError);
    EXPECT_THROW(parse("max()", 1), ParseError);
    EXPECT_THROW(parse("sin", 1), ParseError);
}

TEST(Parse, ComparisonsOnlyInsidePiecewise) {
    EXPECT_THROW(parse("t < 1", 1), ParseError);
    EXPECT_THROW(parse("sin(t < 1)", 1), ParseError);
    EXPECT_THROW(parse("pw(t < 1, 2)", 1), ParseError);          // no default
    EXPECT_THROW(parse("pw(1, 2, 3)", 1), ParseError);           // condition not a comparison
    EXPECT_THROW(parse("pw(t < 1, 2, t > 3)", 1), ParseError);   // default is a comparison
    EXPECT_NO_THROW(parse("pw(t < 1, 2, t >= 3, 4, 5)", 1));
}

TEST(Eval, Example2Disturbance) {
    const auto d = parse(kExample2Disturbance, 4);
    const std::vector<double> x(4, 0.0);
    EXPECT_NEAR(at(d, 7.5, x), -1.0, 1e-12);
    EXPECT_EQ(at(d, 0.0, x), 0.0);
    EXPECT_NEAR(at(d, 3.0, x), 0.5 * std::sin(pi / 2 * 3.0), 1e-12);
    EXPECT_NEAR(at(d, 10.0, x), 0.0, 1e-12);
    EXPECT_NEAR(at(d, 9.5, x), -1.0, 1e-12);
}

TEST(Eval, PiecewiseFirstMatchWinsAtBreakpoints) {
    // value tags each branch so the winner is observable at the boundary
    const auto e = parse("pw(t<=6, 1, t<=9, 2, 3)", 0);
    EXPECT_EQ(at(e, 6.0), 1.0);
    EXPECT_EQ(at(e, 6.0 + 1e-12), 2.0);
    EXPECT_EQ(at(e, 9.0), 2.0);
    EXPECT_EQ(at(e, 9.0 + 1e-12), 3.0);
    // both branches agree in value at t = 6 for the example 2 disturbance
    EXPECT_NEAR(0.5 * std::sin(pi / 2 * 6.0), std::sin(pi * 6.0), 1e-12);
}

TEST(Eval, RightAssociativePower) {
    EXPECT_EQ(at(parse("2^3^2", 0), 0.0), 512.0);
    EXPECT_EQ(at(parse("(2^3)^2", 0), 0.0), 64.0);
    EXPECT_EQ(at(parse("2^-1", 0), 0.0), 0.5);
}

TEST(Eval, UnaryMinusBindsToBase) {
    // '-' base, then '^': -2^2 is (-2)^2
    EXPECT_EQ(at(parse("-2^2", 0), 0.0), 4.0);
    EXPECT_EQ(at(parse("1 - -1", 0), 0.0), 2.0);
    EXPECT_EQ(at(parse("--3", 0), 0.0), 3.0);
}

TEST(Eval, Functions) {
    EXPECT_EQ(at(parse("sign(0)", 0), 0.0), 0.0);
    EXPECT_EQ(at(parse("sign(-3)", 0), 0.0), -1.0);
    EXPECT_EQ(at(parse("min(2, 3) + max(2, 3)", 0), 0.0), 5.0);
    EXPECT_DOUBLE_EQ(at(parse("ln(exp(2))", 0), 0.0), 2.0);
    EXPECT_DOUBLE_EQ(at(parse("sqrt(16) + abs(-1.5)", 0), 0.0), 5.5);
    EXPECT_DOUBLE_EQ(at(parse("tan(pi/4)", 0), 0.0), std::tan(pi / 4));
    EXPECT_DOUBLE_EQ(at(parse("1.5e-3*2E2", 0), 0.0), 0.3);
}

TEST(Eval, DomainErrorsNameSubexpression) {
    try {
        at(parse("1 + ln(t - 5)", 0), 1.0);
        FAIL();
    } catch (const EvalError& e) {
        EXPECT_EQ(e.subexpression(), "ln((t - 5))");
    }
    EXPECT_THROW(at(parse("sqrt(-1)", 0), 0.0), EvalError);
    EXPECT_THROW(at(parse("1/(t-t)", 0), 3.0), EvalError);
    EXPECT_THROW(at(parse("ln(0)", 0), 0.0), EvalError);
    EXPECT_THROW(at(parse("(-8)^0.5", 0), 0.0), EvalError);
    EXPECT_EQ(at(parse("(-2)^3", 0), 0.0), -8.0);
}

TEST(Eval, ContextDimensionChecked) {
    const auto e = parse("x1 + x2", 2);
    const std::vector<double> one{1.0};
    EXPECT_THROW(e.eval(0.0, one), std::invalid_argument);
}

TEST(Eval, Precedence) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    const auto e = parse("x1 + x2 * x3", 3);
    const auto f = parse("x1 - x2 / x3 ^ 2", 3);
    for (int i = 0; i < 1000; ++i) {
        const std::vector<double> x{U(rng), U(rng), U(rng)};
        EXPECT_EQ(e.eval(0.0, x), x[0] + (x[1] * x[2]));
        EXPECT_EQ(f.eval(0.0, x), x[0] - x[1] / std::pow(x[2], 2.0));
    }
}

TEST(Eval, IsPure) {
    const auto e = parse(kExample2Disturbance, 0);
    for (double t : {0.1, 6.0, 7.3, 12.9}) EXPECT_EQ(at(e, t), at(e, t));
}

TEST(Pretty, Examples) {
    EXPECT_EQ(parse("1+2*3", 0).pretty(), "(1 + (2 * 3))");
    EXPECT_EQ(parse("-x1", 1).pretty(), "(-x1)");
    EXPECT_EQ(parse("pw(t<=6, 0.5, 1)", 0).pretty(), "pw(t <= 6, 0.5, 1)");
    EXPECT_EQ(parse("max(x1,pi)", 1).pretty(), "max(x1, pi)");
}

TEST(Pretty, RandomAstRoundTrip) {
    const int order = 3;
    AstGen gen(123456, order);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const Expr e(gen.gen(1 + i % 8), order);
        const auto text = e.pretty();
        const Expr back = parse(text, order);
        ASSERT_TRUE(back == e) << text;
        EXPECT_EQ(back.pretty(), text);
        const std::vector<double> x{U(rng), U(rng), U(rng)};
        const double t = std::abs(U(rng)) * 5.0;
        const auto a = try_eval(e, t, x), b = try_eval(back, t, x);
        ASSERT_EQ(a.has_value(), b.has_value()) << text;
        if (a && !std::isnan(*a)) {
            EXPECT_EQ(*a, *b) << text;
        }
    }
}

TEST(Builders, RejectMalformedNodes) {
    EXPECT_THROW(number(-1.0), std::invalid_argument);
    EXPECT_THROW(number(INFINITY), std::invalid_argument);
    EXPECT_THROW(state(0), std::invalid_argument);
    EXPECT_THROW(call(Func::Min, {number(1)}), std::invalid_argument);
    EXPECT_THROW(Expr(state(3), 2), std::invalid_argument);
    EXPECT_THROW(Expr(compare(RelOp::Less, number(1), number(2)), 0), std::invalid_argument);
}
