#include <gtest/gtest.h>

#include "boltzgap/config.hpp"

using namespace boltzgap;

namespace {
std::string field_of(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.field;
    }
    return "";
}
fs::path source(const std::string& rel) { return fs::path(BOLTZGAP_SOURCE_DIR) / rel; }
}  // namespace

TEST(Config, PresetsParse) {
    for (auto& n : {"hard_sphere_n3", "hard_potential_gamma_half_n2"}) {
        RunConfig c = parse_config(preset(n));
        EXPECT_EQ(c.name, n);
    }
    RunConfig c3 = parse_config(preset("hard_sphere_n3"));
    EXPECT_EQ(c3.kernel.dimension, 3);
    EXPECT_DOUBLE_EQ(c3.kernel.gamma, 1.0);
    RunConfig c2 = parse_config(preset("hard_potential_gamma_half_n2"));
    EXPECT_EQ(c2.kernel.dimension, 2);
    EXPECT_DOUBLE_EQ(c2.kernel.gamma, 0.5);
}

TEST(Config, PresetFilesMatchBuiltIns) {
    for (auto& n : preset_names()) EXPECT_EQ(load_json_file(source("presets/" + n + ".json").string()), preset(n)) << n;
}

TEST(Config, MaxwellMoleculesRejected) {
    EXPECT_EQ(field_of(preset("maxwell_rejected")), "kernel.gamma");
    try {
        parse_config(preset("maxwell_rejected"));
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("Maxwell"), std::string::npos);
    }
}

TEST(Config, FieldPaths) {
    EXPECT_EQ(field_of(load_json_file(source("tests/configs/missing_gamma.json").string())), "kernel.gamma");
    EXPECT_EQ(field_of(load_json_file(source("tests/configs/bad_weight.json").string())), "weight.s");
    json j = preset("hard_potential_gamma_half_n2");
    j["grid"]["points_per_axis"] = 40;
    EXPECT_EQ(field_of(j), "grid.points_per_axis");
    j = preset("hard_potential_gamma_half_n2");
    j["experiment"]["delta_ladder"] = {0.4, 1.5};
    EXPECT_EQ(field_of(j), "experiment.delta_ladder[1]");
    j = preset("hard_potential_gamma_half_n2");
    j["solver"]["dt"] = "fast";
    EXPECT_EQ(field_of(j), "solver.dt");
    j = preset("hard_potential_gamma_half_n2");
    j["kernel"]["gamma"] = 1.5;
    EXPECT_EQ(field_of(j), "kernel.gamma");
    j = preset("hard_potential_gamma_half_n2");
    j["seed"] = -3;
    EXPECT_EQ(field_of(j), "seed");
    EXPECT_EQ(field_of(json::array()), "");
    EXPECT_THROW(parse_config(json::array()), ConfigError);
}

TEST(Config, SolverBudget) {
    RunConfig c = parse_config(load_json_file(source("tests/configs/dt_too_large.json").string()));
    VelocityGrid g(c.kernel.dimension, c.grid.points, c.grid.extent);
    try {
        check_solver_budget(c, g, c.make_kernel_spec());
        FAIL() << "budget not enforced";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field, "solver.dt");
    }
}

TEST(Config, UnknownPresetAndMissingFile) {
    EXPECT_THROW(preset("nope"), ConfigError);
    EXPECT_THROW(load_json_file("/nonexistent/config.json"), ConfigError);
}
