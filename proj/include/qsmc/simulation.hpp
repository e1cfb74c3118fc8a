#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsmc/controllers.hpp"
#include "qsmc/plant.hpp"
#include "qsmc/reaching_envelope.hpp"
#include "qsmc/sliding_surface.hpp"

namespace qsmc {

/**
 * @brief Classic fixed-step fourth-order Runge-Kutta.
 *
 * System is called as system(t, x, dx) with spans. The workspace is kept
 * between steps so a run does not allocate.
 */
class Rk4 {
public:
    explicit Rk4(std::size_t n) : tmp_(n), k1_(n), k2_(n), k3_(n), k4_(n) {}

    template <typename System>
    void step(System&& system, std::span<double> x, double t, double dt) {
        const std::size_t n = x.size();
        const double half = dt / 2.0;
        system(t, std::span<const double>(x), std::span<double>(k1_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + half * k1_[i];
        system(t + half, std::span<const double>(tmp_), std::span<double>(k2_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + half * k2_[i];
        system(t + half, std::span<const double>(tmp_), std::span<double>(k3_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + dt * k3_[i];
        system(t + dt, std::span<const double>(tmp_), std::span<double>(k4_));
        for (std::size_t i = 0; i < n; ++i)
            x[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    std::vector<double> tmp_, k1_, k2_, k3_, k4_;
};

enum class ControlMode { Continuous, ZeroOrderHold };
enum class MonitorPolicy { Abort, Warn, Off };

struct SimConfig {
    double dt = 1e-3;
    double horizon = 20.0;
    ControlMode mode = ControlMode::Continuous;
    int record_stride = 1;
    MonitorPolicy monitor = MonitorPolicy::Abort;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw std::invalid_argument("horizon must be positive");
        if (!(dt < horizon)) throw std::invalid_argument("dt must be smaller than the horizon");
        if (record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
    }

    /// Number of integration steps; tolerant of dt not dividing T exactly in binary.
    std::int64_t steps() const {
        return static_cast<std::int64_t>(std::floor(horizon / dt + 1e-9));
    }
    std::int64_t sample_count() const { return steps() / record_stride + 1; }
};

struct Sample {
    double t = 0.0;
    std::vector<double> x;
    double u = 0.0;
    double sigma = 0.0;
    double rho = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> e;
    double ydes = 0.0;
};

enum class RunStatus { Completed, AbortedNonFinite, AbortedAssumption };

inline std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Completed: return "completed";
        case RunStatus::AbortedNonFinite: return "aborted: non-finite state";
        case RunStatus::AbortedAssumption: return "aborted: assumption violated";
    }
    return "?";
}

struct TrajectoryMeta {
    SimConfig config;
    RunStatus status = RunStatus::Completed;
    std::string diagnostic;
    std::int64_t clamp_steps = 0;       // steps in which the band clamp engaged
    std::int64_t saturation_steps = 0;  // steps in which |u| hit u_max
    std::int64_t monitor_violations = 0;
    std::optional<double> first_violation_time;
};

struct Trajectory {
    std::vector<Sample> samples;
    TrajectoryMeta meta;

    bool completed() const { return meta.status == RunStatus::Completed; }
};

namespace detail {
template <typename Law>
double band_at(const Law& law, double t) {
    if constexpr (requires { law.envelope; })
        return rho(law.envelope, t);
    else
        return std::numeric_limits<double>::quiet_NaN();
}

inline std::string dump_state(double t, std::span<const double> x) {
    std::ostringstream os;
    os.precision(17);
    os << "t=" << t << " x=[";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ']';
    return os.str();
}

inline bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}
}  // namespace detail

/**
 * @brief Integrates the closed loop of a strict-feedback plant under a control law.
 *
 * Continuous mode re-evaluates sigma and the law at every RK stage from the
 * stage state and time; zero-order hold computes u once from the step-start
 * state. The run stops early (keeping the samples so far) on a non-finite
 * state or, with MonitorPolicy::Abort, when g(x) loses its declared sign or
 * drops below the declared gain floor.
 */
template <ControlLaw Law>
Trajectory simulate(const PlantModel& plant, const ReferenceSignal& ref, const Law& law,
                    const InitialCondition& ic, const SimConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(plant.order);
    if (ic.x0.size() != n || ref.order() != plant.order || law.surface.order() != n)
        throw std::invalid_argument("plant, reference, surface and initial condition orders disagree");

    Trajectory traj;
    traj.meta.config = cfg;
    traj.samples.reserve(static_cast<std::size_t>(cfg.sample_count()));

    std::vector<double> x = ic.x0;
    std::vector<double> e(n), e_stage(n);
    Rk4 rk(n);
    bool clamp_flag = false, sat_flag = false;

    auto control_at = [&](double t, std::span<const double> xs, std::vector<double>& err) {
        error_state_into(xs, ref, t, err);
        const double sigma = evaluate_sigma(std::span<const double>(err), law.surface);
        const ControlEval ce = law.evaluate(sigma, t);
        clamp_flag |= ce.clamped;
        sat_flag |= ce.saturated;
        return std::pair{sigma, ce.u};
    };

    const std::int64_t steps = cfg.steps();
    for (std::int64_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        clamp_flag = sat_flag = false;
        const auto start = control_at(t, x, e);
        const double sigma = start.first;
        const double u = start.second;

        if (k % cfg.record_stride == 0) {
            Sample s;
            s.t = t;
            s.x = x;
            s.u = u;
            s.sigma = sigma;
            s.rho = detail::band_at(law, t);
            s.e = e;
            s.ydes = ref.value(0, t);
            traj.samples.push_back(std::move(s));
        }
        if (k == steps) break;

        if (cfg.monitor != MonitorPolicy::Off) {
            const double g = plant.gain(t, x);
            const bool bad = sign(g) != plant.gain_sign ||
                             (plant.gain_floor && std::abs(g) < *plant.gain_floor);
            if (bad) {
                ++traj.meta.monitor_violations;
                if (!traj.meta.first_violation_time) {
                    traj.meta.first_violation_time = t;
                    traj.meta.diagnostic = "gain assumption violated (g = " + std::to_string(g) +
                                           ") at " + detail::dump_state(t, x);
                }
                if (cfg.monitor == MonitorPolicy::Abort) {
                    traj.meta.status = RunStatus::AbortedAssumption;
                    return traj;
                }
            }
        }

        if (cfg.mode == ControlMode::Continuous) {
            rk.step(
                [&](double ts, std::span<const double> xs, std::span<double> dx) {
                    const double us = control_at(ts, xs, e_stage).second;
                    dynamics_into(plant, xs, us, ts, dx);
                },
                x, t, cfg.dt);
        } else {
            rk.step(
                [&](double ts, std::span<const double> xs, std::span<double> dx) {
                    dynamics_into(plant, xs, u, ts, dx);
                },
                x, t, cfg.dt);
        }
        if (clamp_flag) ++traj.meta.clamp_steps;
        if (sat_flag) ++traj.meta.saturation_steps;

        if (!detail::all_finite(x)) {
            traj.meta.status = RunStatus::AbortedNonFinite;
            traj.meta.diagnostic =
                "non-finite state after step " + std::to_string(k) + ": " +
                detail::dump_state(static_cast<double>(k + 1) * cfg.dt, x);
            return traj;
        }
    }
    return traj;
}

/// Independent runs over several initial conditions, one task per run.
template <ControlLaw Law>
std::vector<Trajectory> simulate_batch(const PlantModel& plant, const ReferenceSignal& ref,
                                       const Law& law, const std::vector<InitialCondition>& ics,
                                       const SimConfig& cfg) {
    std::vector<std::future<Trajectory>> jobs;
    jobs.reserve(ics.size());
    for (const auto& ic : ics)
        jobs.push_back(std::async(std::launch::async, [&plant, &ref, &law, &ic, &cfg] {
            return simulate(plant, ref, law, ic, cfg);
        }));
    std::vector<Trajectory> out;
    out.reserve(ics.size());
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

/// Smallest sample time after which every sample satisfies |sigma| <= epsilon.
inline std::optional<double> measure_reaching_time(const Trajectory& traj, double epsilon) {
    if (traj.samples.empty()) throw std::invalid_argument("empty trajectory");
    std::optional<double> t_r;
    for (auto it = traj.samples.rbegin(); it != traj.samples.rend(); ++it) {
        if (!(std::abs(it->sigma) <= epsilon)) break;
        t_r = it->t;
    }
    return t_r;
}

struct ChatterStats {
    double total_variation = 0.0;
    std::int64_t switch_count = 0;
};

/// Total variation of u and number of direction reversals of u over [window_start, end].
inline ChatterStats chattering_index(const Trajectory& traj, double window_start) {
    ChatterStats out;
    int last_dir = 0;
    const Sample* prev = nullptr;
    for (const auto& s : traj.samples) {
        if (s.t < window_start) continue;
        if (prev) {
            const double du = s.u - prev->u;
            out.total_variation += std::abs(du);
            const int dir = sign(du);
            if (dir != 0) {
                if (last_dir != 0 && dir != last_dir) ++out.switch_count;
                last_dir = dir;
            }
        }
        prev = &s;
    }
    return out;
}

inline constexpr double steady_state_fraction = 0.25;

inline double steady_state_start(const Trajectory& traj) {
    return (1.0 - steady_state_fraction) * traj.meta.config.horizon;
}

/// max |e^(0)| over the final quarter of the configured horizon (NaN if no samples there).
inline double steady_state_error(const Trajectory& traj) {
    const double start = steady_state_start(traj) - 1e-9;
    double worst = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : traj.samples)
        if (s.t >= start) worst = std::isnan(worst) ? std::abs(s.e[0]) : std::max(worst, std::abs(s.e[0]));
    return worst;
}

struct Metrics {
    std::optional<double> reaching_time;
    std::int64_t band_violations = 0;
    double max_band_ratio = 0.0;
    double steady_state_error = 0.0;
    double chattering_tv = 0.0;
    std::int64_t switch_count = 0;
    double control_peak = 0.0;
};

inline Metrics compute_metrics(const Trajectory& traj, double epsilon) {
    Metrics m;
    if (traj.samples.empty()) return m;
    m.reaching_time = measure_reaching_time(traj, epsilon);
    for (const auto& s : traj.samples) {
        if (std::isfinite(s.rho)) {
            const double ratio = std::abs(s.sigma) / s.rho;
            m.max_band_ratio = std::max(m.max_band_ratio, ratio);
            if (ratio >= 1.0) ++m.band_violations;
        }
        m.control_peak = std::max(m.control_peak, std::abs(s.u));
    }
    m.steady_state_error = steady_state_error(traj);
    const auto chat = chattering_index(traj, m.reaching_time.value_or(0.0));
    m.chattering_tv = chat.total_variation;
    m.switch_count = chat.switch_count;
    return m;
}

struct ClauseResult {
    bool evaluated = false;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    std::string note;
};

/**
 * Per-run check of the closed-loop guarantees:
 *  (a) |sigma| < rho at every sample,
 *  (b) measured reaching time <= ln(rho0 / (eps - rho_inf)) / mu,
 *  (c) steady-state |e| <= eps / a^{n-1}, only for binomial surfaces.
 */
struct GuaranteeReport {
    ClauseResult band;
    ClauseResult reaching;
    ClauseResult tracking;
    double time_resolution = 0.0;
    RunStatus status = RunStatus::Completed;

    bool all_pass() const {
        return status == RunStatus::Completed && band.pass && reaching.pass &&
               (!tracking.evaluated || tracking.pass);
    }
};

inline GuaranteeReport verify_guarantees(const Trajectory& traj, const Envelope& env,
                                     const SurfaceSpec& spec, double epsilon) {
    GuaranteeReport rep;
    rep.status = traj.meta.status;
    rep.time_resolution = traj.meta.config.dt * traj.meta.config.record_stride;

    rep.band.evaluated = true;
    std::int64_t violations = 0;
    double worst = 0.0;
    for (const auto& s : traj.samples) {
        const double r = rho(env, s.t);
        worst = std::max(worst, std::abs(s.sigma) / r);
        if (!(std::abs(s.sigma) < r)) ++violations;
    }
    rep.band.measured = worst;
    rep.band.bound = 1.0;
    rep.band.pass = violations == 0 && !traj.samples.empty() && traj.completed();
    rep.band.note = std::to_string(violations) + " violation(s)";

    rep.reaching.evaluated = true;
    rep.reaching.bound = reaching_time_bound(env);
    const auto t_r = traj.samples.empty() ? std::nullopt : measure_reaching_time(traj, epsilon);
    if (t_r) {
        rep.reaching.measured = *t_r;
        rep.reaching.pass = *t_r <= rep.reaching.bound && traj.completed();
    } else {
        rep.reaching.measured = std::numeric_limits<double>::quiet_NaN();
        rep.reaching.note = "band never reached";
    }

    if (spec.pole()) {
        rep.tracking.evaluated = true;
        rep.tracking.bound = tracking_bound(spec, epsilon, 0);
        rep.tracking.measured = steady_state_error(traj);
        rep.tracking.pass = traj.completed() && rep.tracking.measured <= rep.tracking.bound;
    } else {
        rep.tracking.note = "skipped: surface has no binomial pole";
    }
    return rep;
}

}  // namespace qsmc
