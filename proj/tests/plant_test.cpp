#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qsmc/plant.hpp"

using namespace qsmc;

TEST(Dynamics, PendulumExamples) {
    const auto p = builtin("pendulum");
    const std::vector<double> x0{0.0, 0.0};
    const auto dx = dynamics(p.plant, x0, 0.0, 0.0);
    EXPECT_EQ(dx[0], 0.0);
    EXPECT_EQ(dx[1], 0.0);
    const auto dx1 = dynamics(p.plant, x0, 1.0, 0.0);
    EXPECT_EQ(dx1[0], 0.0);
    EXPECT_NEAR(dx1[1], 1.0 / 0.9604, 1e-12);
    EXPECT_NEAR(dx1[1], 1.04123282, 1e-8);
}

TEST(Dynamics, IntegratorChain) {
    const auto p = make_expression_plant(2, "0", "1", "0", 1);
    const std::vector<double> x{1.0, 2.0};
    const auto dx = dynamics(p, x, 3.0, 0.0);
    EXPECT_EQ(dx, (std::vector<double>{2.0, 3.0}));
}

TEST(Dynamics, RejectsBadInput) {
    const auto p = builtin("pendulum");
    const std::vector<double> x3{0.0, 0.0, 0.0};
    const std::vector<double> x2{0.0, 0.0};
    EXPECT_THROW(dynamics(p.plant, x3, 0.0, 0.0), std::invalid_argument);
    EXPECT_THROW(dynamics(p.plant, x2, NAN, 0.0), std::invalid_argument);
}

TEST(Dynamics, StrictFeedbackStructure) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (const char* name : {"pendulum", "example2"}) {
        const auto ex = builtin(name);
        const auto n = static_cast<std::size_t>(ex.plant.order);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(n);
            for (auto& v : x) v = U(rng);
            const double t = std::abs(U(rng)) * 5;
            const auto a = dynamics(ex.plant, x, U(rng), t);
            const auto b = dynamics(ex.plant, x, U(rng) * 10, t);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                EXPECT_EQ(a[i], x[i + 1]);
                EXPECT_EQ(a[i], b[i]);
            }
        }
    }
}

TEST(ErrorState, Examples) {
    const auto p = builtin("pendulum");
    const std::vector<double> x{0.9, 0.9};
    const auto e = error_state(x, p.reference, 0.0);
    EXPECT_DOUBLE_EQ(e[0], 0.9);
    EXPECT_NEAR(e[1], -0.1, 1e-15);

    const auto q = builtin("example2");
    const std::vector<double> x4(4, 0.5);
    const auto e4 = error_state(x4, q.reference, 0.0);
    // y_d(0) = 1, y_d'(0) = 1, y_d''(0) = -0.25, y_d'''(0) = -1
    EXPECT_DOUBLE_EQ(e4[0], -0.5);
    EXPECT_DOUBLE_EQ(e4[1], -0.5);
    EXPECT_DOUBLE_EQ(e4[2], 0.75);
    EXPECT_DOUBLE_EQ(e4[3], 1.5);
}

TEST(ErrorState, ZeroOnReferenceAndReconstructsState) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (const char* name : {"pendulum", "example2"}) {
        const auto ex = builtin(name);
        for (int trial = 0; trial < 100; ++trial) {
            const double t = std::abs(U(rng)) * 4;
            const auto lift = ex.reference.lift(t);
            const auto e0 = error_state(lift, ex.reference, t);
            for (double v : e0.values()) EXPECT_EQ(v, 0.0);

            std::vector<double> x(lift.size());
            for (auto& v : x) v = U(rng);
            const auto e = error_state(x, ex.reference, t);
            for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(e[i] + lift[i], x[i], 1e-15);
        }
    }
}

TEST(Reference, BuiltinDerivativesAreConsistent) {
    for (const char* name : {"pendulum", "example2"}) {
        const auto ex = builtin(name);
        const int n = ex.reference.order();
        for (int k = 0; k <= 100; ++k) {
            const double t = 0.1 + 0.2 * k;
            for (int i = 0; i < n; ++i) {
                // central differences: error ~ h^2, check the 4x shrink on halving
                auto fd = [&](double h) {
                    return (ex.reference.value(i, t + h) - ex.reference.value(i, t - h)) / (2 * h);
                };
                const double exact = ex.reference.value(i + 1, t);
                const double e1 = std::abs(fd(1e-2) - exact);
                const double e2 = std::abs(fd(5e-3) - exact);
                EXPECT_LT(e1, 1e-4) << name << " i=" << i << " t=" << t;
                if (e1 > 1e-7) {
                    EXPECT_NEAR(e1 / e2, 4.0, 0.2) << name << " i=" << i << " t=" << t;
                }
            }
        }
    }
}

TEST(Builtin, Metadata) {
    const auto p = builtin("pendulum");
    EXPECT_EQ(p.plant.order, 2);
    EXPECT_EQ(p.plant.gain_floor, 1.0 / (0.01 * 9.8 * 9.8));
    EXPECT_EQ(p.initial_conditions.size(), 4u);
    EXPECT_EQ(p.initial_conditions[0].x0, (std::vector<double>{0.9, 0.9}));

    const auto q = builtin("example2");
    EXPECT_EQ(q.plant.order, 4);
    EXPECT_EQ(q.plant.gain_sign, 1);
    EXPECT_EQ(q.plant.gain_floor, 1.0);
    EXPECT_EQ(q.initial_conditions.size(), 3u);
    EXPECT_EQ(q.initial_conditions[2].x0, std::vector<double>(4, 0.7));

    EXPECT_THROW(builtin("unknown"), std::invalid_argument);
}

TEST(Builtin, Example2GainWithinOneToThree) {
    const auto q = builtin("example2");
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U(-100.0, 100.0);
    for (int i = 0; i < 10000; ++i) {
        const std::vector<double> x{U(rng), U(rng), U(rng), U(rng)};
        const double g = q.plant.gain(0.0, x);
        EXPECT_GE(g, 1.0);
        EXPECT_LE(g, 3.0);
    }
}

TEST(Builtin, Example2DisturbanceMatchesExpression) {
    const auto q = builtin("example2");
    const auto e = expr::parse("pw(t<=6, 0.5*sin(pi/2*t), t<=9, sin(pi*t), cos(pi*t)-1)", 0);
    for (int k = 0; k <= 2000; ++k) {
        const double t = k * 0.01;
        EXPECT_NEAR(q.plant.disturbance(t), e.eval(t, {}), 1e-15);
    }
}

TEST(ExpressionPlant, MatchesBuiltinPendulum) {
    const auto b = builtin("pendulum");
    const auto p = make_expression_plant(2, "-(9.8/9.8)*sin(x1) - (0.01/0.01)*x2 + sin(x2)",
                                         "1/(0.01*9.8^2)", "0.5*sin(t)", 1);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        const std::vector<double> x{U(rng), U(rng)};
        const double u = U(rng), t = std::abs(U(rng));
        const auto a = dynamics(b.plant, x, u, t);
        const auto c = dynamics(p, x, u, t);
        EXPECT_NEAR(a[1], c[1], 1e-12);
    }
}

TEST(ExpressionPlant, RejectsBadDeclarations) {
    EXPECT_THROW(make_expression_plant(2, "x3", "1", "0", 1), expr::ParseError);
    EXPECT_THROW(make_expression_plant(2, "0", "1", "x1", 1), expr::ParseError);  // d(t) only
    EXPECT_THROW(make_expression_plant(2, "0", "1", "0", 0), std::invalid_argument);
    EXPECT_THROW(make_expression_plant(0, "0", "1", "0", 1), std::invalid_argument);
    EXPECT_THROW(make_expression_reference({"sin(t)"}), std::invalid_argument);
}

TEST(ValidateAssumptions, PendulumReport) {
    const auto p = builtin("pendulum");
    const auto surface = binomial_surface(2, 2.0);
    const auto env = Envelope::make(4.0, 0.05, 3.0, 0.1);
    const auto rep =
        validate_assumptions(p.plant, p.reference, p.initial_conditions[0], &surface, &env);
    EXPECT_DOUBLE_EQ(std::abs(rep.initial_error[0]), 0.9);
    EXPECT_NEAR(std::abs(rep.initial_error[1]), 0.1, 1e-15);
    ASSERT_TRUE(rep.sigma0);
    EXPECT_NEAR(*rep.sigma0, 1.7, 1e-15);
    EXPECT_EQ(rep.c1, true);
    EXPECT_EQ(rep.gain_sign_check, Check::Satisfied);
    EXPECT_EQ(rep.gain_floor_check, Check::Satisfied);
    EXPECT_EQ(rep.disturbance_check, Check::Unverified);
    EXPECT_NE(rep.to_text().find("asserted, unverified"), std::string::npos);
    EXPECT_TRUE(rep.ok());
}

TEST(ValidateAssumptions, FlagsViolations) {
    auto p = builtin("pendulum");
    const auto surface = binomial_surface(2, 2.0);
    const auto small = Envelope::make(1.0, 0.05, 3.0, 0.1);
    const auto rep =
        validate_assumptions(p.plant, p.reference, p.initial_conditions[0], &surface, &small);
    EXPECT_EQ(rep.c1, false);
    EXPECT_FALSE(rep.ok());

    InitialCondition ic{{0.9, 0.9}, std::vector<double>{0.5, 1.0}};
    const auto rep2 = validate_assumptions(p.plant, p.reference, ic);
    EXPECT_EQ(rep2.error_bound_check, Check::Violated);

    const auto wrong_sign = make_expression_plant(2, "0", "sin(x1)", "0", 1);
    InitialCondition neg{{-0.5, 0.0}, std::nullopt};
    const auto rep3 = validate_assumptions(wrong_sign, p.reference, neg);
    EXPECT_EQ(rep3.gain_sign_check, Check::Violated);
}
