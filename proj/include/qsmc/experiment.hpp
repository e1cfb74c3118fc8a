#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qsmc/controllers.hpp"
#include "qsmc/plant.hpp"
#include "qsmc/reaching_envelope.hpp"
#include "qsmc/simulation.hpp"
#include "qsmc/sliding_surface.hpp"
#include "qsmc/trajectory_io.hpp"

namespace qsmc::cli {

using nlohmann::json;

/// Exit codes shared by every subcommand.
enum ExitCode : int { kPass = 0, kChecksFailed = 1, kUsageError = 2, kNumericalAbort = 3 };

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

struct PlantSection {
    std::optional<std::string> builtin;
    int order = 0;
    std::string f, g, d;
    int gain_sign = 1;
    std::optional<double> dist_bound;
    std::optional<double> gain_floor;
    friend bool operator==(const PlantSection&, const PlantSection&) = default;
};

struct SurfaceSection {
    std::optional<double> pole;
    std::optional<std::vector<double>> coefficients;
    friend bool operator==(const SurfaceSection&, const SurfaceSection&) = default;
};

struct EnvelopeSection {
    double rho0 = 0.0, rho_inf = 0.0, mu = 0.0, epsilon = 0.0;
    friend bool operator==(const EnvelopeSection&, const EnvelopeSection&) = default;
};

struct ControllerSection {
    double clamp_delta = 1e-9;
    double u_max = 1e6;
    friend bool operator==(const ControllerSection&, const ControllerSection&) = default;
};

struct CompareSection {
    double baseline_gain = 5.0;
    double window_start = 2.0;
    friend bool operator==(const CompareSection&, const CompareSection&) = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    PlantSection plant;
    std::vector<std::string> reference;  // empty: use the builtin reference
    SurfaceSection surface;
    EnvelopeSection envelope;
    ControllerSection controller;
    SimConfig sim;
    std::vector<std::vector<double>> initial_conditions;  // empty: builtin defaults
    std::optional<std::vector<double>> error_bounds;
    CompareSection compare;
    std::string output_dir = "out";

    friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
        auto sim_eq = [](const SimConfig& x, const SimConfig& y) {
            return x.dt == y.dt && x.horizon == y.horizon && x.mode == y.mode &&
                   x.record_stride == y.record_stride && x.monitor == y.monitor;
        };
        return a.name == b.name && a.plant == b.plant && a.reference == b.reference &&
               a.surface == b.surface && a.envelope == b.envelope &&
               a.controller == b.controller && sim_eq(a.sim, b.sim) &&
               a.initial_conditions == b.initial_conditions && a.error_bounds == b.error_bounds &&
               a.compare == b.compare && a.output_dir == b.output_dir;
    }
};

// ---------------------------------------------------------------------------
// JSON <-> config

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where, std::string("missing key '") + key + "'");
    return *it;
}

inline double as_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where, "expected a number");
    return j.get<double>();
}

inline int as_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where, "expected an integer");
    return j.get<int>();
}

inline std::string as_string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> as_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where, "expected an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(as_number(j[i], where + "/" + std::to_string(i)));
    return v;
}

inline std::optional<double> optional_number(const json& j, const char* key,
                                             const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return as_number(*it, where + "/" + key);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    ExperimentConfig c;
    if (auto it = j.find("name"); it != j.end()) c.name = as_string(*it, "/name");

    const json& p = require(j, "plant", "");
    if (auto it = p.find("builtin"); it != p.end()) {
        c.plant.builtin = as_string(*it, "/plant/builtin");
    } else {
        c.plant.order = as_int(require(p, "order", "/plant"), "/plant/order");
        c.plant.f = as_string(require(p, "f", "/plant"), "/plant/f");
        c.plant.g = as_string(require(p, "g", "/plant"), "/plant/g");
        c.plant.d = as_string(require(p, "d", "/plant"), "/plant/d");
        c.plant.gain_sign = as_int(require(p, "gain_sign", "/plant"), "/plant/gain_sign");
        c.plant.dist_bound = optional_number(p, "dist_bound", "/plant");
        c.plant.gain_floor = optional_number(p, "gain_floor", "/plant");
    }

    if (auto it = j.find("reference"); it != j.end()) {
        const json& d = require(*it, "derivatives", "/reference");
        if (!d.is_array()) throw ConfigError("/reference/derivatives", "expected an array");
        for (std::size_t i = 0; i < d.size(); ++i)
            c.reference.push_back(as_string(d[i], "/reference/derivatives/" + std::to_string(i)));
    }

    const json& s = require(j, "surface", "");
    if (auto it = s.find("pole"); it != s.end()) c.surface.pole = as_number(*it, "/surface/pole");
    if (auto it = s.find("coefficients"); it != s.end())
        c.surface.coefficients = as_vector(*it, "/surface/coefficients");
    if (c.surface.pole.has_value() == c.surface.coefficients.has_value())
        throw ConfigError("/surface", "give exactly one of 'pole' or 'coefficients'");

    const json& e = require(j, "envelope", "");
    c.envelope.rho0 = as_number(require(e, "rho0", "/envelope"), "/envelope/rho0");
    c.envelope.rho_inf = as_number(require(e, "rho_inf", "/envelope"), "/envelope/rho_inf");
    c.envelope.mu = as_number(require(e, "mu", "/envelope"), "/envelope/mu");
    c.envelope.epsilon = as_number(require(e, "epsilon", "/envelope"), "/envelope/epsilon");

    if (auto it = j.find("controller"); it != j.end()) {
        if (auto v = optional_number(*it, "clamp_delta", "/controller")) c.controller.clamp_delta = *v;
        if (auto v = optional_number(*it, "u_max", "/controller")) c.controller.u_max = *v;
    }

    if (auto it = j.find("sim"); it != j.end()) {
        const json& sim = *it;
        if (auto v = optional_number(sim, "dt", "/sim")) c.sim.dt = *v;
        if (auto v = optional_number(sim, "horizon", "/sim")) c.sim.horizon = *v;
        if (auto m = sim.find("control_mode"); m != sim.end()) {
            const auto mode = as_string(*m, "/sim/control_mode");
            if (mode == "continuous") c.sim.mode = ControlMode::Continuous;
            else if (mode == "zoh") c.sim.mode = ControlMode::ZeroOrderHold;
            else throw ConfigError("/sim/control_mode", "expected 'continuous' or 'zoh'");
        }
        if (auto r = sim.find("record_stride"); r != sim.end())
            c.sim.record_stride = as_int(*r, "/sim/record_stride");
        if (auto m = sim.find("monitor"); m != sim.end()) {
            const auto mon = as_string(*m, "/sim/monitor");
            if (mon == "abort") c.sim.monitor = MonitorPolicy::Abort;
            else if (mon == "warn") c.sim.monitor = MonitorPolicy::Warn;
            else if (mon == "off") c.sim.monitor = MonitorPolicy::Off;
            else throw ConfigError("/sim/monitor", "expected 'abort', 'warn' or 'off'");
        }
    }

    if (auto it = j.find("initial_conditions"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("/initial_conditions", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            c.initial_conditions.push_back(
                as_vector((*it)[i], "/initial_conditions/" + std::to_string(i)));
    }
    if (auto it = j.find("error_bounds"); it != j.end() && !it->is_null())
        c.error_bounds = as_vector(*it, "/error_bounds");

    if (auto it = j.find("compare"); it != j.end()) {
        if (auto v = optional_number(*it, "baseline_gain", "/compare")) c.compare.baseline_gain = *v;
        if (auto v = optional_number(*it, "window_start", "/compare")) c.compare.window_start = *v;
    }
    if (auto it = j.find("output"); it != j.end())
        if (auto d = it->find("dir"); d != it->end()) c.output_dir = as_string(*d, "/output/dir");
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    if (c.plant.builtin) {
        j["plant"] = {{"builtin", *c.plant.builtin}};
    } else {
        j["plant"] = {{"order", c.plant.order}, {"f", c.plant.f},       {"g", c.plant.g},
                      {"d", c.plant.d},         {"gain_sign", c.plant.gain_sign}};
        if (c.plant.dist_bound) j["plant"]["dist_bound"] = *c.plant.dist_bound;
        if (c.plant.gain_floor) j["plant"]["gain_floor"] = *c.plant.gain_floor;
    }
    if (!c.reference.empty()) j["reference"] = {{"derivatives", c.reference}};
    if (c.surface.pole) j["surface"] = {{"pole", *c.surface.pole}};
    else j["surface"] = {{"coefficients", *c.surface.coefficients}};
    j["envelope"] = {{"rho0", c.envelope.rho0},
                     {"rho_inf", c.envelope.rho_inf},
                     {"mu", c.envelope.mu},
                     {"epsilon", c.envelope.epsilon}};
    j["controller"] = {{"clamp_delta", c.controller.clamp_delta}, {"u_max", c.controller.u_max}};
    const char* monitor = c.sim.monitor == MonitorPolicy::Abort  ? "abort"
                          : c.sim.monitor == MonitorPolicy::Warn ? "warn"
                                                                 : "off";
    j["sim"] = {{"dt", c.sim.dt},
                {"horizon", c.sim.horizon},
                {"control_mode", c.sim.mode == ControlMode::Continuous ? "continuous" : "zoh"},
                {"record_stride", c.sim.record_stride},
                {"monitor", monitor}};
    if (!c.initial_conditions.empty()) j["initial_conditions"] = c.initial_conditions;
    if (c.error_bounds) j["error_bounds"] = *c.error_bounds;
    j["compare"] = {{"baseline_gain", c.compare.baseline_gain},
                    {"window_start", c.compare.window_start}};
    j["output"] = {{"dir", c.output_dir}};
    return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    auto c = config_from_json(j);
    if (j.find("name") == j.end()) c.name = path.stem().string();
    return c;
}

// ---------------------------------------------------------------------------
// Built-in example configurations

inline ExperimentConfig example_config(std::string_view which) {
    ExperimentConfig c;
    if (which == "example1") {
        c.name = "example1";
        c.plant.builtin = "pendulum";
        c.surface.pole = 2.0;
        c.envelope = {4.0, 0.05, 3.0, 0.1};
        c.initial_conditions = {{0.9, 0.9}, {0.7, 0.7}, {0.3, 0.3}, {0.1, 0.1}};
    } else if (which == "example2" || which == "example2-binomial") {
        c.name = std::string(which);
        c.plant.builtin = "example2";
        if (which == "example2") c.surface.coefficients = std::vector<double>{6.0, 12.0, 8.0, 1.0};
        else c.surface.pole = 2.0;
        c.envelope = {5.0, 0.05, 3.0, 0.1};
        c.initial_conditions = {{0.5, 0.5, 0.5, 0.5}, {0.6, 0.6, 0.6, 0.6}, {0.7, 0.7, 0.7, 0.7}};
    } else {
        throw std::invalid_argument("unknown example '" + std::string(which) +
                                    "' (expected example1 or example2)");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Runtime objects

struct Experiment {
    ExperimentConfig config;
    PlantModel plant;
    ReferenceSignal reference;
    SurfaceSpec surface;
    Envelope envelope;
    std::vector<InitialCondition> initial_conditions;

    QsmcLaw law() const {
        return QsmcLaw::make(envelope, surface, plant.gain_sign, config.controller.clamp_delta,
                             config.controller.u_max);
    }
};

inline Experiment build_experiment(const ExperimentConfig& c) {
    Experiment ex{c, {}, {}, SurfaceSpec::from_coefficients({1.0}), {}, {}};
    std::vector<InitialCondition> builtin_ics;
    try {
        if (c.plant.builtin) {
            auto b = builtin(*c.plant.builtin);
            ex.plant = std::move(b.plant);
            ex.reference = std::move(b.reference);
            builtin_ics = std::move(b.initial_conditions);
        } else {
            ex.plant = make_expression_plant(c.plant.order, c.plant.f, c.plant.g, c.plant.d,
                                             c.plant.gain_sign, c.plant.dist_bound,
                                             c.plant.gain_floor);
        }
    } catch (const std::exception& e) {
        throw ConfigError("/plant", e.what());
    }
    const int n = ex.plant.order;

    if (!c.reference.empty()) {
        if (c.reference.size() != static_cast<std::size_t>(n + 1))
            throw ConfigError("/reference/derivatives",
                              "expected " + std::to_string(n + 1) + " expressions for order " +
                                  std::to_string(n));
        try {
            ex.reference = make_expression_reference(c.reference);
        } catch (const std::exception& e) {
            throw ConfigError("/reference/derivatives", e.what());
        }
    } else if (!c.plant.builtin) {
        throw ConfigError("/reference", "custom plants need explicit reference derivatives");
    }

    try {
        if (c.surface.pole) {
            ex.surface = binomial_surface(n, *c.surface.pole);
        } else {
            ex.surface = SurfaceSpec::from_coefficients(*c.surface.coefficients);
            if (ex.surface.order() != static_cast<std::size_t>(n))
                throw std::invalid_argument("expected " + std::to_string(n) + " coefficients");
        }
    } catch (const std::exception& e) {
        throw ConfigError("/surface", e.what());
    }

    try {
        ex.envelope = Envelope::make(c.envelope.rho0, c.envelope.rho_inf, c.envelope.mu,
                                     c.envelope.epsilon);
    } catch (const std::exception& e) {
        throw ConfigError("/envelope", e.what());
    }
    try {
        (void)QsmcLaw::make(ex.envelope, ex.surface, ex.plant.gain_sign,
                            c.controller.clamp_delta, c.controller.u_max);
    } catch (const std::exception& e) {
        throw ConfigError("/controller", e.what());
    }
    try {
        c.sim.validate();
    } catch (const std::exception& e) {
        throw ConfigError("/sim", e.what());
    }

    if (c.initial_conditions.empty()) {
        if (builtin_ics.empty())
            throw ConfigError("/initial_conditions", "at least one initial condition is required");
        ex.initial_conditions = builtin_ics;
    } else {
        for (std::size_t i = 0; i < c.initial_conditions.size(); ++i) {
            if (c.initial_conditions[i].size() != static_cast<std::size_t>(n))
                throw ConfigError("/initial_conditions/" + std::to_string(i),
                                  "expected " + std::to_string(n) + " values");
            ex.initial_conditions.push_back({c.initial_conditions[i], std::nullopt});
        }
    }
    if (c.error_bounds) {
        if (c.error_bounds->size() != static_cast<std::size_t>(n))
            throw ConfigError("/error_bounds", "expected " + std::to_string(n) + " values");
        for (double b : *c.error_bounds)
            if (!(b > 0.0)) throw ConfigError("/error_bounds", "bounds must be positive");
        for (auto& ic : ex.initial_conditions) ic.error_bounds = c.error_bounds;
    }
    return ex;
}

// ---------------------------------------------------------------------------
// design

struct DesignReport {
    std::vector<double> coefficients;
    std::optional<double> pole;
    bool hurwitz = false;
    bool c2 = false;
    std::optional<double> reaching_time_bound;
    std::vector<double> tracking_bounds;
    std::vector<AssumptionReport> per_ic;
    std::optional<Rho0Suggestion> suggested_rho0;

    bool all_pass() const {
        return hurwitz && c2 &&
               std::all_of(per_ic.begin(), per_ic.end(), [](const auto& r) { return r.ok(); });
    }
};

inline DesignReport design(const Experiment& ex) {
    DesignReport rep;
    rep.coefficients.assign(ex.surface.coeffs().begin(), ex.surface.coeffs().end());
    rep.pole = ex.surface.pole();
    rep.hurwitz = is_hurwitz(ex.surface.coeffs());
    rep.c2 = satisfies_c2(ex.envelope);
    if (ex.envelope.epsilon > ex.envelope.rho_inf)
        rep.reaching_time_bound = reaching_time_bound(ex.envelope);
    if (rep.pole)
        for (int i = 0; i < ex.plant.order; ++i)
            rep.tracking_bounds.push_back(tracking_bound(ex.surface, ex.envelope.epsilon, i));

    // worst case over all initial conditions (or declared bounds when present)
    std::vector<double> worst(static_cast<std::size_t>(ex.plant.order), 0.0);
    for (const auto& ic : ex.initial_conditions) {
        rep.per_ic.push_back(
            validate_assumptions(ex.plant, ex.reference, ic, &ex.surface, &ex.envelope));
        const auto& e = rep.per_ic.back().initial_error;
        for (std::size_t i = 0; i < worst.size(); ++i)
            worst[i] = std::max(worst[i], ic.error_bounds ? (*ic.error_bounds)[i] : std::abs(e[i]));
    }
    rep.suggested_rho0 = suggest_rho0(ex.surface, worst);
    return rep;
}

inline json design_json(const DesignReport& r) {
    json j;
    j["coefficients"] = r.coefficients;
    j["pole"] = r.pole ? json(*r.pole) : json(nullptr);
    j["hurwitz"] = r.hurwitz;
    j["c2"] = r.c2;
    j["reaching_time_bound"] = r.reaching_time_bound ? json(*r.reaching_time_bound) : json(nullptr);
    j["tracking_bounds"] = r.tracking_bounds;
    j["suggested_rho0"] = r.suggested_rho0 ? json(r.suggested_rho0->rho0) : json(nullptr);
    j["initial_conditions"] = json::array();
    for (const auto& ic : r.per_ic) {
        json e;
        e["initial_error"] = ic.initial_error;
        e["sigma0"] = ic.sigma0 ? json(*ic.sigma0) : json(nullptr);
        e["c1"] = ic.c1.value_or(false);
        e["gain_sign"] = std::string(to_string(ic.gain_sign_check));
        e["gain_floor"] = std::string(to_string(ic.gain_floor_check));
        e["disturbance_bound"] = std::string(to_string(ic.disturbance_check));
        e["error_bounds"] = std::string(to_string(ic.error_bound_check));
        e["ok"] = ic.ok();
        j["initial_conditions"].push_back(std::move(e));
    }
    j["all_pass"] = r.all_pass();
    return j;
}

inline void print_design(std::ostream& os, const Experiment& ex, const DesignReport& r) {
    os << std::setprecision(6);
    os << "surface coefficients [c1..cn]: [";
    for (std::size_t i = 0; i < r.coefficients.size(); ++i)
        os << (i ? ", " : "") << r.coefficients[i];
    os << "]";
    if (r.pole) os << "  (binomial, pole a = " << *r.pole << ")";
    os << "\nHurwitz: " << (r.hurwitz ? "yes" : "NO") << '\n';
    os << "envelope: rho(t) = " << ex.envelope.rho0 << " exp(-" << ex.envelope.mu << " t) + "
       << ex.envelope.rho_inf << ", epsilon = " << ex.envelope.epsilon << '\n';
    os << "C2 rho_inf < epsilon < rho0: " << (r.c2 ? "satisfied" : "VIOLATED") << '\n';
    if (r.reaching_time_bound)
        os << "reaching time bound t_r < " << std::setprecision(10) << *r.reaching_time_bound
           << std::setprecision(6) << " s\n";
    else
        os << "reaching time bound: undefined (epsilon <= rho_inf)\n";
    if (!r.tracking_bounds.empty()) {
        os << "tracking bounds |e^(i)| <";
        for (std::size_t i = 0; i < r.tracking_bounds.size(); ++i)
            os << "  i=" << i << ": " << r.tracking_bounds[i];
        os << '\n';
    } else {
        os << "tracking bounds: n/a (explicit coefficients)\n";
    }
    if (r.suggested_rho0) os << "suggested rho0 (all initial conditions): " << r.suggested_rho0->rho0 << '\n';
    for (std::size_t k = 0; k < r.per_ic.size(); ++k) {
        os << "initial condition " << k << " x0 = [";
        const auto& x0 = ex.initial_conditions[k].x0;
        for (std::size_t i = 0; i < x0.size(); ++i) os << (i ? ", " : "") << x0[i];
        os << "]\n" << r.per_ic[k].to_text();
    }
    os << "design checks: " << (r.all_pass() ? "PASS" : "FAIL") << '\n';
}

inline int cmd_design(const ExperimentConfig& cfg, std::ostream& os, json* out = nullptr) {
    const auto ex = build_experiment(cfg);
    const auto rep = design(ex);
    print_design(os, ex, rep);
    if (out) *out = design_json(rep);
    return rep.all_pass() ? kPass : kChecksFailed;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::filesystem::path out_dir;  // empty: config output dir
    bool force = false;
    bool write_files = true;
};

struct RunResult {
    Trajectory trajectory;
    Metrics metrics;
    GuaranteeReport report;
};

inline std::vector<RunResult> run_all(const Experiment& ex) {
    const auto law = ex.law();
    auto trajs = simulate_batch(ex.plant, ex.reference, law, ex.initial_conditions, ex.config.sim);
    std::vector<RunResult> out;
    for (auto& t : trajs) {
        RunResult r;
        r.metrics = compute_metrics(t, ex.envelope.epsilon);
        if (ex.envelope.epsilon > ex.envelope.rho_inf)
            r.report = verify_guarantees(t, ex.envelope, ex.surface, ex.envelope.epsilon);
        r.trajectory = std::move(t);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string run_file_stem(const ExperimentConfig& cfg, std::size_t index) {
    return cfg.name + "_ic" + std::to_string(index);
}

inline void print_run_line(std::ostream& os, std::size_t k, const RunResult& r) {
    os << "ic" << k << ": " << to_string(r.trajectory.meta.status)
       << "  violations=" << r.metrics.band_violations
       << "  max|sigma|/rho=" << std::setprecision(4) << r.metrics.max_band_ratio << "  t_r=";
    if (r.metrics.reaching_time) os << *r.metrics.reaching_time;
    else os << "none";
    os << "  sse=" << r.metrics.steady_state_error << "  |u|max=" << r.metrics.control_peak
       << "  clamp_steps=" << r.trajectory.meta.clamp_steps
       << "  sat_steps=" << r.trajectory.meta.saturation_steps
       << "  verdict=" << (r.report.all_pass() ? "pass" : "FAIL") << '\n';
    if (!r.trajectory.meta.diagnostic.empty())
        os << "      " << r.trajectory.meta.diagnostic << '\n';
}

inline int cmd_simulate(const ExperimentConfig& cfg, const SimulateOptions& opt, std::ostream& os) {
    const auto ex = build_experiment(cfg);
    const auto rep = design(ex);
    if (!rep.all_pass()) {
        if (!opt.force) {
            print_design(os, ex, rep);
            os << "refusing to simulate: design checks failed (use --force to override)\n";
            return kChecksFailed;
        }
        os << "WARNING: design checks failed; running anyway, guarantees void\n";
    }
    const auto results = run_all(ex);
    const auto dir = opt.out_dir.empty() ? std::filesystem::path(cfg.output_dir) : opt.out_dir;
    if (opt.write_files) std::filesystem::create_directories(dir);

    bool all_pass = true, aborted = false;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        print_run_line(os, k, r);
        all_pass &= r.report.all_pass();
        aborted |= r.trajectory.meta.status == RunStatus::AbortedNonFinite;
        if (!opt.write_files) continue;
        const auto stem = run_file_stem(cfg, k);
        {
            std::ofstream csv(dir / (stem + ".csv"));
            write_csv(csv, r.trajectory);
        }
        json m = metrics_json(r.metrics);
        m["guarantees"] = guarantee_json(r.report);
        m["run"] = meta_json(r.trajectory.meta);
        m["initial_condition"] = ex.initial_conditions[k].x0;
        m["guarantees_void"] = !rep.all_pass();
        std::ofstream(dir / (stem + "_metrics.json")) << m.dump(2) << '\n';
    }
    if (opt.write_files) os << "wrote " << results.size() << " run(s) to " << dir.string() << '\n';
    if (aborted) return kNumericalAbort;
    return all_pass ? kPass : kChecksFailed;
}

// ---------------------------------------------------------------------------
// verify

inline void print_verify_table(std::ostream& os, const std::string& label, const Experiment& ex,
                               const std::vector<RunResult>& results) {
    auto cell = [](const ClauseResult& c) -> std::string {
        if (!c.evaluated) return "skipped";
        std::ostringstream s;
        s << (c.pass ? "pass" : "FAIL") << " (" << std::setprecision(5) << c.measured << ")";
        return s.str();
    };
    os << label << ": coefficients [";
    for (std::size_t i = 0; i < ex.surface.order(); ++i)
        os << (i ? ", " : "") << ex.surface.coeffs()[i];
    os << "], t_r bound " << std::setprecision(6) << reaching_time_bound(ex.envelope);
    if (ex.surface.pole()) os << ", tracking bound " << tracking_bound(ex.surface, ex.envelope.epsilon, 0);
    os << '\n';
    os << std::left << std::setw(24) << "  x0" << std::setw(22) << "(a) band" << std::setw(22)
       << "(b) reaching" << "(c) tracking\n";
    for (std::size_t k = 0; k < results.size(); ++k) {
        std::ostringstream x0;
        x0 << "  [";
        const auto& x = ex.initial_conditions[k].x0;
        for (std::size_t i = 0; i < x.size(); ++i) x0 << (i ? " " : "") << x[i];
        x0 << "]";
        const auto& r = results[k].report;
        os << std::setw(24) << x0.str() << std::setw(22) << cell(r.band) << std::setw(22)
           << cell(r.reaching) << cell(r.tracking) << '\n';
    }
    os << std::right;
}

/// Runs every built-in initial condition for the named example and tabulates the clauses.
inline int cmd_verify(std::string_view example, std::ostream& os, const SimConfig* sim = nullptr) {
    std::vector<std::string> variants;
    if (example == "example1") variants = {"example1"};
    else if (example == "example2") variants = {"example2", "example2-binomial"};
    else {
        os << "unknown example '" << example << "' (expected example1 or example2)\n";
        return kUsageError;
    }
    bool all_pass = true, aborted = false;
    for (const auto& v : variants) {
        auto cfg = example_config(v);
        if (sim) cfg.sim = *sim;
        const auto ex = build_experiment(cfg);
        const auto results = run_all(ex);
        print_verify_table(os, v, ex, results);
        for (const auto& r : results) {
            all_pass &= r.report.all_pass();
            aborted |= r.trajectory.meta.status == RunStatus::AbortedNonFinite;
        }
    }
    os << "verify " << example << ": " << (all_pass ? "PASS" : "FAIL") << '\n';
    if (aborted) return kNumericalAbort;
    return all_pass ? kPass : kChecksFailed;
}

// ---------------------------------------------------------------------------
// compare

/// First sample at which sigma is zero or has changed sign relative to sigma(0).
inline std::optional<double> first_surface_hit(const Trajectory& traj) {
    if (traj.samples.empty()) return std::nullopt;
    const int s0 = sign(traj.samples.front().sigma);
    for (const auto& s : traj.samples)
        if (sign(s.sigma) != s0 || s.sigma == 0.0) return s.t;
    return std::nullopt;
}

struct ComparisonRow {
    ChatterStats qsmc, baseline;
    double qsmc_peak = 0.0, baseline_peak = 0.0;
    double qsmc_sse = 0.0, baseline_sse = 0.0;
    std::optional<double> baseline_hit;
    bool qsmc_pass = false;
    RunStatus qsmc_status = RunStatus::Completed;
    RunStatus baseline_status = RunStatus::Completed;
};

inline ComparisonRow compare_run(const Experiment& ex, const InitialCondition& ic,
                                 double baseline_gain, double window_start) {
    const auto qsmc_law = ex.law();
    const auto relay = BaselineSmcLaw::make(ex.surface, baseline_gain, ex.plant.gain_sign);
    const auto tq = simulate(ex.plant, ex.reference, qsmc_law, ic, ex.config.sim);
    const auto tb = simulate(ex.plant, ex.reference, relay, ic, ex.config.sim);
    ComparisonRow row;
    row.qsmc = chattering_index(tq, window_start);
    row.baseline = chattering_index(tb, window_start);
    for (const auto& s : tq.samples) row.qsmc_peak = std::max(row.qsmc_peak, std::abs(s.u));
    for (const auto& s : tb.samples) row.baseline_peak = std::max(row.baseline_peak, std::abs(s.u));
    row.qsmc_sse = steady_state_error(tq);
    row.baseline_sse = steady_state_error(tb);
    row.baseline_hit = first_surface_hit(tb);
    row.qsmc_pass = verify_guarantees(tq, ex.envelope, ex.surface, ex.envelope.epsilon).all_pass();
    row.qsmc_status = tq.meta.status;
    row.baseline_status = tb.meta.status;
    return row;
}

inline int cmd_compare(const ExperimentConfig& cfg, std::ostream& os,
                       std::optional<double> gain_override = std::nullopt,
                       std::vector<ComparisonRow>* rows_out = nullptr) {
    const auto ex = build_experiment(cfg);
    const double K = gain_override.value_or(cfg.compare.baseline_gain);
    if (!(K > 0.0)) {
        os << "baseline gain K must be positive\n";
        return kUsageError;
    }
    const double w = cfg.compare.window_start;
    os << "QSMC vs relay SMC (K = " << K << "), window [" << w << ", " << cfg.sim.horizon << "]\n";
    bool qsmc_ok = true, aborted = false;
    for (std::size_t k = 0; k < ex.initial_conditions.size(); ++k) {
        const auto row = compare_run(ex, ex.initial_conditions[k], K, w);
        os << std::setprecision(6) << "ic" << k << '\n'
           << "  " << std::left << std::setw(10) << "" << std::setw(16) << "chattering_tv"
           << std::setw(14) << "switch_count" << std::setw(16) << "control_peak"
           << "steady_state_error\n"
           << "  " << std::setw(10) << "qsmc" << std::setw(16) << row.qsmc.total_variation
           << std::setw(14) << row.qsmc.switch_count << std::setw(16) << row.qsmc_peak
           << row.qsmc_sse << '\n'
           << "  " << std::setw(10) << "baseline" << std::setw(16) << row.baseline.total_variation
           << std::setw(14) << row.baseline.switch_count << std::setw(16) << row.baseline_peak
           << row.baseline_sse << '\n'
           << std::right;
        if (!row.baseline_hit) os << "  note: baseline did not reach the sliding surface\n";
        else os << "  baseline first reaches sigma = 0 at t = " << *row.baseline_hit << '\n';
        if (row.baseline.total_variation > 0.0)
            os << "  tv ratio qsmc/baseline = " << row.qsmc.total_variation / row.baseline.total_variation
               << '\n';
        qsmc_ok &= row.qsmc_pass;
        aborted |= row.qsmc_status == RunStatus::AbortedNonFinite;
        if (rows_out) rows_out->push_back(row);
    }
    if (aborted) return kNumericalAbort;
    return qsmc_ok ? kPass : kChecksFailed;
}

// ---------------------------------------------------------------------------
// plot-script

/// gnuplot script plotting the CSVs that `simulate` writes for this config.
inline std::string plot_script(const ExperimentConfig& cfg, std::size_t runs,
                               const std::filesystem::path& dir) {
    std::ostringstream os;
    os << "# gnuplot script for " << cfg.name << "\n"
       << "set datafile separator ','\nset key autotitle columnhead\nset grid\n"
       << "set terminal pngcairo size 900,1200\nset output '" << cfg.name << ".png'\n"
       << "set multiplot layout 4,1\n";
    auto plot = [&](const std::string& title, const std::string& ycol, bool with_band) {
        os << "set title '" << title << "'\nplot ";
        for (std::size_t k = 0; k < runs; ++k) {
            const auto f = (dir / (run_file_stem(cfg, k) + ".csv")).string();
            os << (k ? ", " : "") << "'" << f << "' using 't':'" << ycol << "' with lines title 'ic"
               << k << "'";
            if (with_band && k == 0)
                os << ", '" << f << "' using 't':'rho' with lines dt 2 lc 'black' title 'rho', '" << f
                   << "' using 't':(-column('rho')) with lines dt 2 lc 'black' notitle";
        }
        os << '\n';
    };
    plot("output y = x1", "x1", false);
    plot("tracking error e0", "e0", false);
    plot("control input u", "u", false);
    plot("sliding variable sigma and envelope", "sigma", true);
    os << "unset multiplot\n";
    return os.str();
}

}  // namespace qsmc::cli
