#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qsmc/expr.hpp"
#include "qsmc/reaching_envelope.hpp"
#include "qsmc/sliding_surface.hpp"

namespace qsmc {

using StateFn = std::function<double(double t, std::span<const double> x)>;
using TimeFn = std::function<double(double t)>;

/**
 * @brief Strict-feedback plant x_i' = x_{i+1}, x_n' = f(x) + g(x) u + d(t).
 *
 * f and g receive the time as well so that expression-defined plants may use
 * it; the builtins ignore it. gain_sign, dist_bound and gain_floor are the
 * declared assumption metadata, never used by the controller itself.
 */
struct PlantModel {
    std::string name;
    int order = 0;
    StateFn drift;
    StateFn gain;
    TimeFn disturbance;
    int gain_sign = 1;
    std::optional<double> dist_bound;
    std::optional<double> gain_floor;
};

/// y_des and its first n time derivatives.
struct ReferenceSignal {
    std::vector<TimeFn> derivatives;

    int order() const { return static_cast<int>(derivatives.size()) - 1; }
    double value(int i, double t) const { return derivatives.at(static_cast<std::size_t>(i))(t); }

    /// [y_des(t), ..., y_des^(n-1)(t)]: the state the plant would have on the reference.
    std::vector<double> lift(double t) const {
        std::vector<double> r(static_cast<std::size_t>(order()));
        for (int i = 0; i < order(); ++i) r[static_cast<std::size_t>(i)] = value(i, t);
        return r;
    }
};

struct InitialCondition {
    std::vector<double> x0;
    std::optional<std::vector<double>> error_bounds;
};

inline void dynamics_into(const PlantModel& plant, std::span<const double> x, double u, double t,
                          std::span<double> dx) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i + 1 < n; ++i) dx[i] = x[i + 1];
    dx[n - 1] = plant.drift(t, x) + plant.gain(t, x) * u + plant.disturbance(t);
}

inline std::vector<double> dynamics(const PlantModel& plant, std::span<const double> x, double u,
                                    double t) {
    if (x.size() != static_cast<std::size_t>(plant.order))
        throw std::invalid_argument("state dimension does not match plant order");
    if (!std::isfinite(u)) throw std::invalid_argument("control input must be finite");
    std::vector<double> dx(x.size());
    dynamics_into(plant, x, u, t, dx);
    return dx;
}

inline void error_state_into(std::span<const double> x, const ReferenceSignal& ref, double t,
                             std::span<double> e) {
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = x[i] - ref.value(static_cast<int>(i), t);
}

inline ErrorState error_state(std::span<const double> x, const ReferenceSignal& ref, double t) {
    if (x.size() != static_cast<std::size_t>(ref.order()))
        throw std::invalid_argument("state dimension does not match reference order");
    std::vector<double> e(x.size());
    error_state_into(x, ref, t, e);
    return ErrorState(std::move(e));
}

// ---------------------------------------------------------------------------
// Expression-defined plants and references

inline PlantModel make_expression_plant(int order, std::string_view f, std::string_view g,
                                        std::string_view d, int gain_sign,
                                        std::optional<double> dist_bound = std::nullopt,
                                        std::optional<double> gain_floor = std::nullopt) {
    if (order < 1) throw std::invalid_argument("plant order must be >= 1");
    if (gain_sign != 1 && gain_sign != -1)
        throw std::invalid_argument("gain_sign must be +1 or -1");
    if (dist_bound && !(*dist_bound > 0.0))
        throw std::invalid_argument("dist_bound must be positive");
    if (gain_floor && !(*gain_floor > 0.0))
        throw std::invalid_argument("gain_floor must be positive");
    auto fe = expr::parse(f, order);
    auto ge = expr::parse(g, order);
    auto de = expr::parse(d, 0);
    PlantModel p;
    p.name = "custom";
    p.order = order;
    p.drift = [fe](double t, std::span<const double> x) { return fe.eval(t, x); };
    p.gain = [ge](double t, std::span<const double> x) { return ge.eval(t, x); };
    p.disturbance = [de](double t) { return de.eval(t, {}); };
    p.gain_sign = gain_sign;
    p.dist_bound = dist_bound;
    p.gain_floor = gain_floor;
    return p;
}

inline ReferenceSignal make_expression_reference(const std::vector<std::string>& derivatives) {
    if (derivatives.size() < 2)
        throw std::invalid_argument("reference needs y_des and at least one derivative");
    ReferenceSignal r;
    for (const auto& src : derivatives) {
        auto e = expr::parse(src, 0);
        r.derivatives.push_back([e](double t) { return e.eval(t, {}); });
    }
    return r;
}

// ---------------------------------------------------------------------------
// Builtin examples

struct BuiltinExample {
    PlantModel plant;
    ReferenceSignal reference;
    std::vector<InitialCondition> initial_conditions;
};

namespace pendulum {
inline constexpr double mass = 0.01;
inline constexpr double length = 9.8;
inline constexpr double friction = 0.01;
inline constexpr double gravity = 9.8;
inline constexpr double control_gain = 1.0 / (mass * length * length);
}  // namespace pendulum

inline BuiltinExample builtin_pendulum() {
    using namespace pendulum;
    BuiltinExample ex;
    ex.plant.name = "pendulum";
    ex.plant.order = 2;
    ex.plant.drift = [](double, std::span<const double> x) {
        return -(gravity / length) * std::sin(x[0]) - (friction / mass) * x[1] + std::sin(x[1]);
    };
    ex.plant.gain = [](double, std::span<const double>) { return control_gain; };
    ex.plant.disturbance = [](double t) { return 0.5 * std::sin(t); };
    ex.plant.gain_sign = 1;
    ex.plant.gain_floor = control_gain;
    ex.reference.derivatives = {
        [](double t) { return std::sin(t); },
        [](double t) { return std::cos(t); },
        [](double t) { return -std::sin(t); },
    };
    for (double v : {0.9, 0.7, 0.3, 0.1}) ex.initial_conditions.push_back({{v, v}, std::nullopt});
    return ex;
}

inline double example2_disturbance(double t) {
    using std::numbers::pi;
    if (t <= 6.0) return 0.5 * std::sin(pi / 2.0 * t);
    if (t <= 9.0) return std::sin(pi * t);
    return std::cos(pi * t) - 1.0;
}

inline BuiltinExample builtin_example2() {
    BuiltinExample ex;
    ex.plant.name = "example2";
    ex.plant.order = 4;
    ex.plant.drift = [](double, std::span<const double> x) {
        return x[2] * std::sin(2.0 * x[1]) + x[0] * std::cos(x[3]);
    };
    ex.plant.gain = [](double, std::span<const double> x) { return 2.0 - std::sin(x[3]); };
    ex.plant.disturbance = example2_disturbance;
    ex.plant.gain_sign = 1;
    ex.plant.gain_floor = 1.0;
    // y_des = sin t + cos(t/2)
    ex.reference.derivatives = {
        [](double t) { return std::sin(t) + std::cos(0.5 * t); },
        [](double t) { return std::cos(t) - 0.5 * std::sin(0.5 * t); },
        [](double t) { return -std::sin(t) - 0.25 * std::cos(0.5 * t); },
        [](double t) { return -std::cos(t) + 0.125 * std::sin(0.5 * t); },
        [](double t) { return std::sin(t) + 0.0625 * std::cos(0.5 * t); },
    };
    for (double v : {0.5, 0.6, 0.7})
        ex.initial_conditions.push_back({{v, v, v, v}, std::nullopt});
    return ex;
}

inline BuiltinExample builtin(std::string_view name) {
    if (name == "pendulum") return builtin_pendulum();
    if (name == "example2") return builtin_example2();
    throw std::invalid_argument("unknown builtin plant '" + std::string(name) +
                                "' (expected pendulum or example2)");
}

// ---------------------------------------------------------------------------
// Assumption checks

enum class Check { Satisfied, Violated, Unverified };

inline std::string_view to_string(Check c) {
    switch (c) {
        case Check::Satisfied: return "satisfied";
        case Check::Violated: return "VIOLATED";
        case Check::Unverified: return "asserted, unverified";
    }
    return "?";
}

struct AssumptionReport {
    int gain_sign = 1;
    double gain_at_x0 = 0.0;
    Check gain_sign_check = Check::Unverified;
    Check gain_floor_check = Check::Unverified;
    Check disturbance_check = Check::Unverified;
    std::vector<double> initial_error;
    Check error_bound_check = Check::Unverified;
    std::optional<double> sigma0;
    std::optional<Rho0Suggestion> suggested_rho0;
    std::optional<bool> c1;

    bool ok() const {
        return gain_sign_check != Check::Violated && gain_floor_check != Check::Violated &&
               disturbance_check != Check::Violated && error_bound_check != Check::Violated &&
               c1.value_or(true);
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "  gain sign (declared " << (gain_sign > 0 ? "+1" : "-1")
           << ", g(x0) = " << gain_at_x0 << "): " << to_string(gain_sign_check) << '\n';
        os << "  gain floor: " << to_string(gain_floor_check) << '\n';
        os << "  disturbance bound: " << to_string(disturbance_check) << '\n';
        os << "  initial errors [";
        for (std::size_t i = 0; i < initial_error.size(); ++i)
            os << (i ? ", " : "") << std::abs(initial_error[i]);
        os << "]: " << to_string(error_bound_check) << '\n';
        if (sigma0) os << "  sigma(0) = " << *sigma0 << '\n';
        if (suggested_rho0)
            os << "  suggested rho0 = " << suggested_rho0->rho0
               << (suggested_rho0->degenerate ? " (degenerate: sigma(0) = 0)" : "") << '\n';
        if (c1) os << "  C1 rho0 > |sigma(0)|: " << (*c1 ? "satisfied" : "VIOLATED") << '\n';
        return os.str();
    }
};

/**
 * @brief Static check of the declared assumptions at the initial condition.
 *
 * Gain sign and floor can only be sampled here (at x0); the simulator keeps
 * monitoring them along the trajectory. When a surface is given, sigma(0) and
 * a suggested rho0 are reported; with an envelope as well, C1 is checked.
 */
inline AssumptionReport validate_assumptions(const PlantModel& plant, const ReferenceSignal& ref,
                                             const InitialCondition& ic,
                                             const SurfaceSpec* surface = nullptr,
                                             const Envelope* envelope = nullptr) {
    if (ic.x0.size() != static_cast<std::size_t>(plant.order) || ref.order() != plant.order)
        throw std::invalid_argument("plant, reference and initial condition orders disagree");
    AssumptionReport rep;
    rep.gain_sign = plant.gain_sign;
    rep.gain_at_x0 = plant.gain(0.0, ic.x0);
    rep.gain_sign_check =
        sign(rep.gain_at_x0) == plant.gain_sign ? Check::Satisfied : Check::Violated;
    if (plant.gain_floor)
        rep.gain_floor_check =
            std::abs(rep.gain_at_x0) >= *plant.gain_floor ? Check::Satisfied : Check::Violated;
    if (plant.dist_bound)
        rep.disturbance_check = std::abs(plant.disturbance(0.0)) < *plant.dist_bound
                                    ? Check::Satisfied
                                    : Check::Violated;

    const auto e = error_state(ic.x0, ref, 0.0);
    rep.initial_error.assign(e.values().begin(), e.values().end());
    std::vector<double> bounds;
    if (ic.error_bounds) {
        if (ic.error_bounds->size() != rep.initial_error.size())
            throw std::invalid_argument("error bound count does not match plant order");
        bounds = *ic.error_bounds;
        rep.error_bound_check = Check::Satisfied;
        for (std::size_t i = 0; i < bounds.size(); ++i)
            if (!(std::abs(rep.initial_error[i]) < bounds[i])) rep.error_bound_check = Check::Violated;
    } else {
        for (double v : rep.initial_error) bounds.push_back(std::abs(v));
    }

    if (surface) {
        rep.sigma0 = evaluate_sigma(e, *surface);
        rep.suggested_rho0 = suggest_rho0(*surface, bounds);
        if (envelope) rep.c1 = validate_c1(*envelope, *rep.sigma0);
    }
    return rep;
}

}  // namespace qsmc
