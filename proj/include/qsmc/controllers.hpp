#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "qsmc/reaching_envelope.hpp"
#include "qsmc/sliding_surface.hpp"

namespace qsmc {

struct ControlEval {
    double u = 0.0;
    bool clamped = false;    // sigma/rho was pulled back inside the band
    bool saturated = false;  // |u| hit u_max
};

/// Anything the simulator can close the loop with.
template <typename Law>
concept ControlLaw = requires(const Law& law, double sigma, double t) {
    { law.evaluate(sigma, t) } -> std::same_as<ControlEval>;
    { law.surface } -> std::convertible_to<SurfaceSpec>;
};

inline int require_gain_sign(int s) {
    if (s != 1 && s != -1) throw std::invalid_argument("gain sign must be +1 or -1");
    return s;
}

/**
 * @brief Approximation-free QSM law u = -sign(g) * tan(pi * sigma / (2 rho(t))).
 *
 * The ratio sigma/rho is clamped to +-(1 - clamp_delta) so the law stays
 * finite if an integration stage lands on or past the band edge, and the
 * output is saturated to +-u_max. clamp_delta == 0 disables the interior
 * clamp; then any |sigma| >= rho maps straight to the saturation limit.
 */
struct QsmcLaw {
    Envelope envelope;
    SurfaceSpec surface;
    int gain_sign = 1;
    double clamp_delta = 1e-9;
    double u_max = 1e6;

    static QsmcLaw make(Envelope env, SurfaceSpec surface, int gain_sign,
                        double clamp_delta = 1e-9, double u_max = 1e6) {
        require_gain_sign(gain_sign);
        if (!(clamp_delta >= 0.0 && clamp_delta < 1.0))
            throw std::invalid_argument("clamp_delta must lie in [0, 1)");
        if (!(u_max > 0.0)) throw std::invalid_argument("u_max must be positive");
        return QsmcLaw{env, std::move(surface), gain_sign, clamp_delta, u_max};
    }

    ControlEval evaluate(double sigma, double t) const {
        ControlEval out;
        const double r = sigma / rho(envelope, t);
        double tan_value = 0.0;
        if (clamp_delta > 0.0) {
            const double limit = 1.0 - clamp_delta;
            double rc = r;
            if (rc > limit) {
                rc = limit;
                out.clamped = true;
            } else if (rc < -limit) {
                rc = -limit;
                out.clamped = true;
            }
            tan_value = std::tan(std::numbers::pi * rc / 2.0);
        } else if (std::abs(r) >= 1.0) {
            tan_value = sign(r) * std::numeric_limits<double>::infinity();
        } else {
            tan_value = std::tan(std::numbers::pi * r / 2.0);
        }
        double u = -gain_sign * tan_value;
        if (u > u_max) {
            u = u_max;
            out.saturated = true;
        } else if (u < -u_max) {
            u = -u_max;
            out.saturated = true;
        }
        out.u = u;
        return out;
    }
};

inline double qsmc_control(const QsmcLaw& law, double sigma, double t) {
    return law.evaluate(sigma, t).u;
}

/// Classical relay SMC u = -sign(g) * K * sign(sigma); chattering reference.
struct BaselineSmcLaw {
    SurfaceSpec surface;
    double gain = 5.0;
    int gain_sign = 1;

    static BaselineSmcLaw make(SurfaceSpec surface, double gain, int gain_sign) {
        require_gain_sign(gain_sign);
        if (!(gain > 0.0) || !std::isfinite(gain))
            throw std::invalid_argument("baseline gain K must be positive");
        return BaselineSmcLaw{std::move(surface), gain, gain_sign};
    }

    ControlEval evaluate(double sigma, double /*t*/) const {
        return ControlEval{-gain_sign * gain * sign(sigma), false, false};
    }
};

inline double baseline_control(const BaselineSmcLaw& law, double sigma) {
    return law.evaluate(sigma, 0.0).u;
}

static_assert(ControlLaw<QsmcLaw>);
static_assert(ControlLaw<BaselineSmcLaw>);

}  // namespace qsmc
