#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "json.hpp"
#include "qsmc/simulation.hpp"

namespace qsmc {

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Header: t,x1..xn,u,sigma,rho,e0..e{n-1},ydes; one row per sample, 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.samples.empty()) return;
    const std::size_t n = traj.samples.front().x.size();
    os << 't';
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    os << ",u,sigma,rho";
    for (std::size_t i = 0; i < n; ++i) os << ",e" << i;
    os << ",ydes\n";
    for (const auto& s : traj.samples) {
        os << format_full(s.t);
        for (double v : s.x) os << ',' << format_full(v);
        os << ',' << format_full(s.u) << ',' << format_full(s.sigma) << ',' << format_full(s.rho);
        for (double v : s.e) os << ',' << format_full(v);
        os << ',' << format_full(s.ydes) << '\n';
    }
}

namespace detail {
inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json clause_json(const ClauseResult& c) {
    nlohmann::json j;
    if (!c.evaluated) {
        j["status"] = "skipped";
    } else {
        j["status"] = c.pass ? "pass" : "fail";
        j["measured"] = number_or_null(c.measured);
        j["bound"] = number_or_null(c.bound);
    }
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}
}  // namespace detail

inline nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["measured_reaching_time"] =
        m.reaching_time ? nlohmann::json(*m.reaching_time) : nlohmann::json(nullptr);
    j["band_violations"] = m.band_violations;
    j["max_band_ratio"] = detail::number_or_null(m.max_band_ratio);
    j["steady_state_error"] = detail::number_or_null(m.steady_state_error);
    j["chattering_tv"] = detail::number_or_null(m.chattering_tv);
    j["switch_count"] = m.switch_count;
    j["control_peak"] = detail::number_or_null(m.control_peak);
    return j;
}

inline nlohmann::json guarantee_json(const GuaranteeReport& r) {
    nlohmann::json j;
    j["band_containment"] = detail::clause_json(r.band);
    j["reaching_time"] = detail::clause_json(r.reaching);
    j["tracking_bound"] = detail::clause_json(r.tracking);
    j["time_resolution"] = r.time_resolution;
    j["all_pass"] = r.all_pass();
    return j;
}

inline nlohmann::json meta_json(const TrajectoryMeta& m) {
    nlohmann::json j;
    j["status"] = std::string(to_string(m.status));
    if (!m.diagnostic.empty()) j["diagnostic"] = m.diagnostic;
    j["dt"] = m.config.dt;
    j["horizon"] = m.config.horizon;
    j["control_mode"] = m.config.mode == ControlMode::Continuous ? "continuous" : "zoh";
    j["record_stride"] = m.config.record_stride;
    j["clamp_steps"] = m.clamp_steps;
    j["saturation_steps"] = m.saturation_steps;
    j["monitor_violations"] = m.monitor_violations;
    return j;
}

}  // namespace qsmc
