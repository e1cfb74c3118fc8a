#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsmc/sliding_surface.hpp"

namespace qsmc {

/**
 * @brief Reaching tube rho(t) = rho0 * exp(-mu t) + rho_inf and the QSM band epsilon.
 *
 * Construction only enforces positivity. The ordering rho_inf < epsilon < rho0
 * (condition C2) is checked separately by satisfies_c2() so that exploratory
 * runs can still build an envelope that violates it.
 */
struct Envelope {
    double rho0 = 0.0;
    double rho_inf = 0.0;
    double mu = 0.0;
    double epsilon = 0.0;

    static Envelope make(double rho0, double rho_inf, double mu, double epsilon) {
        auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!positive(rho0)) throw std::invalid_argument("rho0 must be a finite positive number");
        if (!positive(rho_inf))
            throw std::invalid_argument("rho_inf must be a finite positive number");
        if (!positive(mu)) throw std::invalid_argument("mu must be a finite positive number");
        if (!positive(epsilon))
            throw std::invalid_argument("epsilon must be a finite positive number");
        return Envelope{rho0, rho_inf, mu, epsilon};
    }

    friend bool operator==(const Envelope&, const Envelope&) = default;
};

namespace detail {
inline void require_time(double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("time must be non-negative");
}
}  // namespace detail

inline double rho(const Envelope& env, double t) {
    detail::require_time(t);
    return env.rho0 * std::exp(-env.mu * t) + env.rho_inf;
}

inline double rho_dot(const Envelope& env, double t) {
    detail::require_time(t);
    return -env.mu * env.rho0 * std::exp(-env.mu * t);
}

/// C1: rho0 > |sigma(0)|.
inline bool validate_c1(const Envelope& env, double sigma0) {
    return env.rho0 > std::abs(sigma0);
}

/// C2: rho_inf < epsilon < rho0.
inline bool satisfies_c2(const Envelope& env) {
    return env.rho_inf < env.epsilon && env.epsilon < env.rho0;
}

/// Upper bound on the time after which |sigma| < epsilon: ln(rho0 / (eps - rho_inf)) / mu.
inline double reaching_time_bound(const Envelope& env) {
    if (!(env.epsilon > env.rho_inf))
        throw std::invalid_argument(
            "reaching time bound undefined: epsilon must exceed rho_inf");
    return std::log(env.rho0 / (env.epsilon - env.rho_inf)) / env.mu;
}

struct Rho0Suggestion {
    double rho0 = 0.0;
    // sigma(0) is forced to zero; any positive rho0 satisfies C1
    bool degenerate = false;
};

inline constexpr double default_rho0_safety = 1.1;

/**
 * @brief Smallest rho0 (times a safety factor) that satisfies C1 for every
 *        initial error with |e^(i)(0)| <= ebounds[i].
 */
inline Rho0Suggestion suggest_rho0(const SurfaceSpec& spec, std::span<const double> ebounds,
                                   double safety = default_rho0_safety) {
    if (ebounds.size() != spec.order())
        throw std::invalid_argument("error bound count " + std::to_string(ebounds.size()) +
                                    " does not match surface order " +
                                    std::to_string(spec.order()));
    if (!(safety >= 1.0)) throw std::invalid_argument("safety factor must be >= 1");
    double worst = 0.0;
    const auto c = spec.coeffs();
    for (std::size_t i = 0; i < ebounds.size(); ++i) {
        if (!std::isfinite(ebounds[i]) || ebounds[i] < 0.0)
            throw std::invalid_argument("error bounds must be finite and non-negative");
        worst += std::abs(c[i]) * ebounds[i];
    }
    return Rho0Suggestion{safety * worst, worst == 0.0};
}

}  // namespace qsmc
