#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qsmc/experiment.hpp"

using namespace qsmc;
using namespace qsmc::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(QSMC_SOURCE_DIR) / "configs";

json valid_json() {
    return json::parse(R"({
      "plant": {"order": 2, "f": "0", "g": "1", "d": "0", "gain_sign": 1},
      "reference": {"derivatives": ["0", "0", "0"]},
      "surface": {"pole": 1},
      "envelope": {"rho0": 2, "rho_inf": 0.05, "mu": 3, "epsilon": 0.1},
      "sim": {"horizon": 2},
      "initial_conditions": [[0.2, 0.0]]
    })");
}

std::string where_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.where();
    }
    return "<no error>";
}

fs::path temp_dir(const std::string& tag) {
    auto d = fs::temp_directory_path() / ("qsmc_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(Config, ErrorsCarryLocation) {
    auto j = valid_json();
    EXPECT_EQ(where_of(j), "<no error>");

    j = valid_json();
    j["envelope"]["mu"] = "fast";
    EXPECT_EQ(where_of(j), "/envelope/mu");

    j = valid_json();
    j["envelope"].erase("rho0");
    EXPECT_EQ(where_of(j), "/envelope");

    j = valid_json();
    j["surface"]["coefficients"] = {2, 1};
    EXPECT_EQ(where_of(j), "/surface");

    j = valid_json();
    j["sim"]["control_mode"] = "discrete";
    EXPECT_EQ(where_of(j), "/sim/control_mode");

    j = valid_json();
    j["initial_conditions"][0][1] = "x";
    EXPECT_EQ(where_of(j).rfind("/initial_conditions/0", 0), 0u);

    EXPECT_THROW(config_from_json(json::array()), ConfigError);
}

TEST(Config, BuildRejectsInconsistentSections) {
    auto c = config_from_json(valid_json());
    c.initial_conditions = {{0.1, 0.2, 0.3}};
    EXPECT_THROW(build_experiment(c), ConfigError);

    c = config_from_json(valid_json());
    c.surface.pole.reset();
    c.surface.coefficients = std::vector<double>{1.0, 2.0};  // leading coefficient must be 1
    EXPECT_THROW(build_experiment(c), ConfigError);

    c = config_from_json(valid_json());
    c.plant.f = "x7";
    EXPECT_THROW(build_experiment(c), ConfigError);

    c = config_from_json(valid_json());
    c.envelope.mu = -1.0;
    EXPECT_THROW(build_experiment(c), ConfigError);
}

TEST(Config, LoadMissingOrMalformedFile) {
    EXPECT_THROW(load_config(kConfigs / "does_not_exist.json"), ConfigError);
    const auto d = temp_dir("bad");
    std::ofstream(d / "broken.json") << "{ \"plant\": ";
    EXPECT_THROW(load_config(d / "broken.json"), ConfigError);
    fs::remove_all(d);
}

TEST(Config, RoundTripPreservesConfigAndTrajectories) {
    for (const char* name : {"example1.json", "example2.json", "example2_binomial.json",
                             "example2_custom.json", "integrator_chain.json", "c2_violation.json"}) {
        const auto c = load_config(kConfigs / name);
        const auto back = config_from_json(json::parse(config_to_json(c).dump()));
        EXPECT_TRUE(back == c) << name;
    }
    auto c = load_config(kConfigs / "example2_custom.json");
    c.sim.horizon = 1.0;
    const auto back = config_from_json(config_to_json(c));
    const auto a = run_all(build_experiment(c));
    const auto b = run_all(build_experiment(back));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        EXPECT_EQ(a[k].trajectory.samples.back().x, b[k].trajectory.samples.back().x);
}

TEST(Config, ExpressionConfigMatchesBuiltinExample2) {
    auto custom = load_config(kConfigs / "example2_custom.json");
    auto lit = load_config(kConfigs / "example2.json");
    custom.sim.horizon = lit.sim.horizon = 2.0;
    lit.initial_conditions.resize(custom.initial_conditions.size());
    const auto a = run_all(build_experiment(custom));
    const auto b = run_all(build_experiment(lit));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& xa = a[k].trajectory.samples.back().x;
        const auto& xb = b[k].trajectory.samples.back().x;
        for (std::size_t i = 0; i < xa.size(); ++i) EXPECT_NEAR(xa[i], xb[i], 1e-9);
    }
}

TEST(Design, Example1Passes) {
    std::ostringstream os;
    json j;
    EXPECT_EQ(cmd_design(load_config(kConfigs / "example1.json"), os, &j), kPass);
    EXPECT_NEAR(j["reaching_time_bound"].get<double>(), std::log(80.0) / 3.0, 1e-12);
    EXPECT_TRUE(j["hurwitz"].get<bool>());
    EXPECT_NE(os.str().find("asserted, unverified"), std::string::npos);
}

TEST(Design, C2ViolationFails) {
    std::ostringstream os;
    EXPECT_EQ(cmd_design(load_config(kConfigs / "c2_violation.json"), os), kChecksFailed);
}

TEST(Simulate, WritesFilesForIntegratorChain) {
    const auto d = temp_dir("sim");
    SimulateOptions opt;
    opt.out_dir = d;
    std::ostringstream os;
    EXPECT_EQ(cmd_simulate(load_config(kConfigs / "integrator_chain.json"), opt, os), kPass);
    const auto csv = d / "integrator_chain_ic0.csv";
    const auto metrics = d / "integrator_chain_ic0_metrics.json";
    ASSERT_TRUE(fs::exists(csv));
    ASSERT_TRUE(fs::exists(metrics));
    std::ifstream in(metrics);
    const auto m = json::parse(in);
    EXPECT_FALSE(m["guarantees_void"].get<bool>());
    EXPECT_EQ(m["guarantees"]["band_containment"]["status"], "pass");
    EXPECT_TRUE(m["guarantees"]["all_pass"].get<bool>());

    std::ifstream c(csv);
    std::size_t lines = 0;
    for (std::string l; std::getline(c, l);) ++lines;
    EXPECT_EQ(lines, 5002u);  // header + 5001 samples
    fs::remove_all(d);
}

TEST(Simulate, RefusesFailedDesignUnlessForced) {
    auto c = load_config(kConfigs / "c2_violation.json");
    c.sim.horizon = 0.5;
    const auto d = temp_dir("force");
    SimulateOptions opt;
    opt.out_dir = d;
    std::ostringstream refused;
    EXPECT_EQ(cmd_simulate(c, opt, refused), kChecksFailed);
    EXPECT_TRUE(fs::is_empty(d));

    opt.force = true;
    std::ostringstream forced;
    cmd_simulate(c, opt, forced);
    EXPECT_NE(forced.str().find("guarantees void"), std::string::npos);
    std::ifstream in(d / (run_file_stem(c, 0) + "_metrics.json"));
    ASSERT_TRUE(in);
    EXPECT_TRUE(json::parse(in)["guarantees_void"].get<bool>());
    fs::remove_all(d);
}

TEST(Verify, UnknownExampleIsUsageError) {
    std::ostringstream os;
    EXPECT_EQ(cmd_verify("example3", os), kUsageError);
}

TEST(Verify, Example1TableAllPass) {
    std::ostringstream os;
    EXPECT_EQ(cmd_verify("example1", os), kPass);
    EXPECT_NE(os.str().find("verify example1: PASS"), std::string::npos);
}

TEST(Compare, QsmcChattersFarLessThanRelay) {
    auto c = load_config(kConfigs / "example1.json");
    std::vector<ComparisonRow> rows;
    std::ostringstream os;
    EXPECT_EQ(cmd_compare(c, os, 5.0, &rows), kPass);
    ASSERT_EQ(rows.size(), c.initial_conditions.size());
    for (const auto& r : rows) {
        EXPECT_LE(r.qsmc.total_variation, r.baseline.total_variation / 5.0);
        EXPECT_LE(r.qsmc.switch_count * 10, r.baseline.switch_count);
        EXPECT_TRUE(r.baseline_hit.has_value());
    }
}

TEST(Compare, WeakRelayNeverReachesSurface) {
    // constant drift of 1 outruns a relay with K = 0.001, so sigma grows without crossing zero
    auto j = valid_json();
    j["plant"]["f"] = "1";
    j["initial_conditions"] = json::array({json::array({1.0, 0.0})});
    const auto c = config_from_json(j);
    std::ostringstream os;
    std::vector<ComparisonRow> rows;
    cmd_compare(c, os, 0.001, &rows);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_FALSE(rows[0].baseline_hit.has_value());
    EXPECT_NE(os.str().find("baseline did not reach the sliding surface"), std::string::npos);
    EXPECT_EQ(cmd_compare(c, os, 0.0), kUsageError);
}

TEST(PlotScript, ReferencesEveryRun) {
    const auto c = load_config(kConfigs / "example1.json");
    const auto s = plot_script(c, 4, "out");
    for (int k = 0; k < 4; ++k)
        EXPECT_NE(s.find("example1_ic" + std::to_string(k) + ".csv"), std::string::npos);
    EXPECT_NE(s.find("'rho'"), std::string::npos);
}
