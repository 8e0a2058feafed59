#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "dynamics.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "spectral.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

struct KernelBlock {
    int dimension = 3;
    double gamma = 1, c_phi = 1;
    std::string angular = "hard_sphere";  // hard_sphere | constant | table
    std::vector<double> table;             // b on a uniform cos(theta) grid over [-1, 1]
    bool normalize = true;
};

struct GridBlock {
    int points = 15;
    double extent = 4.5;
    VelocityGrid::Rule rule = VelocityGrid::Rule::trapezoid;
    int order = 2;
};

struct SphereBlock {
    int polar = 16, azimuthal = 32;  // N = 3
    int points = 32;                 // N = 2
};

struct WeightBlock {
    WeightFunction primary = WeightFunction::stretched_exponential(0.5, 0.2);
    WeightFunction second = WeightFunction::stretched_exponential(1.0, 0.1);
};

struct ExperimentBlock {
    std::string initial = "near_equilibrium";  // near_equilibrium | maxwellian | shifted_maxwellian | mixture | polynomial_tail
    double epsilon = 0.05;
    double fit_start = 0.2;
    double min_decades = 2;
    double rate_tolerance = 0.10;
    std::vector<double> delta_ladder{0.4, 0.2, 0.1, 0.05};
    std::vector<double> p_set{2, 5, 10, 20};
    std::size_t povzner_samples = 10000;
    double povzner_s = 1.25;
    double moment_s = 0.2;
    double p_max = 20;
    int random_fields = 50;
    int sector_per_ray = 6;
    double sector_mu_fraction = 0.5;
    double semigroup_dt = 0.1;
    double semigroup_horizon = 5;  // in units of 1/lambda
    double gap_slack = 0.10;
    double reference_bound = -1;  // < 0: explicit bound with c_b = 1
    double eps_transfer = 1e-2, eps_match = 1e-2;
    double eps_xval = 2e-2;
    int xval_points = 21;
    double null_angle_deg = 2;
    double cons_pre_limit = 1e-3;
    int moment_points = 0;  // grid for the moment trajectories; 0: 21 (N = 2) or 11 (N = 3)
    double moment_t_end = 3.0;
};

struct RunConfig {
    std::string name = "custom";
    KernelBlock kernel;
    GridBlock grid;
    SphereBlock sphere;
    WeightBlock weight;
    SpectrumOptions spectrum;
    SolverConfig solver;
    ExperimentBlock experiment;
    std::string out;
    std::uint64_t seed = 20240917;
    int threads = 1;
    json raw;

    CollisionKernelSpec make_kernel_spec() const;
    VelocityGrid make_grid() const { return VelocityGrid(kernel.dimension, grid.points, grid.extent, grid.rule); }
    SphereQuadrature make_sphere() const {
        return kernel.dimension == 3 ? SphereQuadrature::product(sphere.polar, sphere.azimuthal)
                                     : SphereQuadrature::circle(sphere.points);
    }
};

inline CollisionKernelSpec RunConfig::make_kernel_spec() const {
    AngularProfile p = kernel.angular == "table" ? AngularProfile::tabulated(kernel.table) : AngularProfile::constant();
    if (kernel.angular == "hard_sphere" && kernel.gamma != 1.0)
        throw ConfigError("kernel.angular", "hard_sphere needs gamma = 1; use \"constant\" for other gamma");
    return make_kernel(kernel.dimension, kernel.gamma, kernel.c_phi, p, kernel.normalize);
}

namespace cfgdetail {

inline const json* child(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

inline double number(const json& j, const char* key, const std::string& base, double def, bool required = false) {
    const json* c = child(j, key);
    if (!c) {
        if (required) throw ConfigError(join(base, key), "required field is missing");
        return def;
    }
    if (!c->is_number()) throw ConfigError(join(base, key), "expected a number");
    double x = c->get<double>();
    if (!std::isfinite(x)) throw ConfigError(join(base, key), "must be finite");
    return x;
}

inline long integer(const json& j, const char* key, const std::string& base, long def, bool required = false) {
    const json* c = child(j, key);
    if (!c) {
        if (required) throw ConfigError(join(base, key), "required field is missing");
        return def;
    }
    if (!c->is_number_integer()) throw ConfigError(join(base, key), "expected an integer");
    return c->get<long>();
}

inline std::string text(const json& j, const char* key, const std::string& base, const std::string& def,
                        const std::vector<std::string>& allowed = {}) {
    const json* c = child(j, key);
    if (!c) return def;
    if (!c->is_string()) throw ConfigError(join(base, key), "expected a string");
    std::string s = c->get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
        std::string msg = "must be one of";
        for (auto& a : allowed) msg += " " + a;
        throw ConfigError(join(base, key), msg);
    }
    return s;
}

inline bool flag(const json& j, const char* key, const std::string& base, bool def) {
    const json* c = child(j, key);
    if (!c) return def;
    if (!c->is_boolean()) throw ConfigError(join(base, key), "expected true or false");
    return c->get<bool>();
}

inline std::vector<double> numbers(const json& j, const char* key, const std::string& base, std::vector<double> def) {
    const json* c = child(j, key);
    if (!c) return def;
    if (!c->is_array() || c->empty()) throw ConfigError(join(base, key), "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < c->size(); ++i) {
        if (!(*c)[i].is_number()) throw ConfigError(join(base, key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*c)[i].get<double>());
    }
    return out;
}

inline const json& block(const json& j, const char* key, const std::string& base, bool required = false) {
    static const json empty = json::object();
    const json* c = child(j, key);
    if (!c) {
        if (required) throw ConfigError(join(base, key), "required block is missing");
        return empty;
    }
    if (!c->is_object()) throw ConfigError(join(base, key), "expected an object");
    return *c;
}

inline WeightFunction weight(const json& j, const std::string& base, WeightFunction def, double gamma) {
    WeightFunction w = def;
    w.a = number(j, "a", base, def.a);
    w.s = number(j, "s", base, def.s);
    if (!(w.a > 0)) throw ConfigError(join(base, "a"), "must be positive");
    if (!(w.s > 0 && w.s < gamma / 2))
        throw ConfigError(join(base, "s"), "must lie in (0, gamma/2) = (0, " + fmt(gamma / 2) + ")");
    return w;
}

}  // namespace cfgdetail

// Validates and fills a RunConfig. Errors carry the offending field path.
inline RunConfig parse_config(const json& j) {
    using namespace cfgdetail;
    if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
    RunConfig c;
    c.raw = j;
    c.name = text(j, "name", "", c.name);
    const json& k = block(j, "kernel", "", true);
    c.kernel.dimension = int(integer(k, "dimension", "kernel", 3, true));
    if (c.kernel.dimension != 2 && c.kernel.dimension != 3) throw ConfigError("kernel.dimension", "must be 2 or 3");
    c.kernel.gamma = number(k, "gamma", "kernel", 1, true);
    if (c.kernel.gamma == 0)
        throw ConfigError("kernel.gamma", "gamma = 0 (Maxwell molecules) is outside the hard-potential range (0, 1]");
    if (!(c.kernel.gamma > 0 && c.kernel.gamma <= 1)) throw ConfigError("kernel.gamma", "must lie in (0, 1]");
    c.kernel.c_phi = number(k, "c_phi", "kernel", 1);
    if (!(c.kernel.c_phi > 0)) throw ConfigError("kernel.c_phi", "must be positive");
    c.kernel.normalize = flag(k, "normalize", "kernel", true);
    if (const json* a = child(k, "angular"); a && a->is_object()) {
        c.kernel.angular = "table";
        c.kernel.table = numbers(*a, "table", "kernel.angular", {});
        if (c.kernel.table.size() < 2) throw ConfigError("kernel.angular.table", "needs at least two values");
        for (std::size_t i = 0; i < c.kernel.table.size(); ++i)
            if (!(c.kernel.table[i] >= 0))
                throw ConfigError("kernel.angular.table[" + std::to_string(i) + "]", "must be nonnegative");
    } else {
        c.kernel.angular = text(k, "angular", "kernel", "hard_sphere", {"hard_sphere", "constant"});
    }
    if (c.kernel.angular == "hard_sphere" && c.kernel.gamma != 1.0)
        throw ConfigError("kernel.angular", "hard_sphere needs gamma = 1; use \"constant\"");
    if (child(k, "delta")) {
        double d = number(k, "delta", "kernel", 0.1);
        if (!(d > 0 && d < 1)) throw ConfigError("kernel.delta", "must lie in (0, 1)");
    }
    try {
        (void)c.make_kernel_spec();
    } catch (const DomainError& e) {
        throw ConfigError("kernel.angular", e.what());
    }

    const json& gr = block(j, "grid", "");
    c.grid.points = int(integer(gr, "points_per_axis", "grid", c.kernel.dimension == 3 ? 15 : 41));
    if (c.grid.points < 3 || c.grid.points % 2 == 0) throw ConfigError("grid.points_per_axis", "must be odd and >= 3");
    c.grid.extent = number(gr, "extent", "grid", c.kernel.dimension == 3 ? 4.5 : 5.0);
    if (!(c.grid.extent > 0)) throw ConfigError("grid.extent", "must be positive");
    c.grid.rule = text(gr, "rule", "grid", "trapezoid", {"trapezoid", "gauss"}) == "gauss" ? VelocityGrid::Rule::gauss
                                                                                         : VelocityGrid::Rule::trapezoid;
    if (c.grid.rule == VelocityGrid::Rule::gauss)
        throw ConfigError("grid.rule", "collision assembly needs the uniform trapezoid grid");
    c.grid.order = int(integer(gr, "interpolation_order", "grid", 2));
    if (c.grid.order < 1 || c.grid.order > 3) throw ConfigError("grid.interpolation_order", "must be 1, 2 or 3");

    const json& sp = block(j, "sphere", "");
    c.sphere.polar = int(integer(sp, "polar", "sphere", 16));
    c.sphere.azimuthal = int(integer(sp, "azimuthal", "sphere", 32));
    c.sphere.points = int(integer(sp, "points", "sphere", 32));
    if (c.sphere.polar < 2) throw ConfigError("sphere.polar", "must be >= 2");
    if (c.sphere.azimuthal < 3) throw ConfigError("sphere.azimuthal", "must be >= 3");
    if (c.sphere.points < 4 || c.sphere.points % 2) throw ConfigError("sphere.points", "must be even and >= 4");

    const json& w = block(j, "weight", "");
    c.weight.primary = weight(w, "weight", WeightFunction::stretched_exponential(0.5, 0.4 * c.kernel.gamma / 2),
                              c.kernel.gamma);
    c.weight.second = weight(block(w, "second", "weight"), "weight.second",
                             WeightFunction::stretched_exponential(1.0, 0.2 * c.kernel.gamma / 2), c.kernel.gamma);

    const json& s = block(j, "spectrum", "");
    std::string mode = text(s, "mode", "spectrum", "automatic", {"automatic", "symmetric", "general"});
    c.spectrum.mode = mode == "symmetric" ? SpectrumOptions::Mode::symmetric
                      : mode == "general" ? SpectrumOptions::Mode::general
                                          : SpectrumOptions::Mode::automatic;
    c.spectrum.tol_null = number(s, "tol_null", "spectrum", -1);
    c.spectrum.symmetric_defect_limit = number(s, "symmetric_defect_limit", "spectrum", 0.1);
    c.spectrum.shell_fraction = number(s, "shell_fraction", "spectrum", 0.2);
    if (!(c.spectrum.shell_fraction > 0 && c.spectrum.shell_fraction < 1))
        throw ConfigError("spectrum.shell_fraction", "must lie in (0, 1)");

    const json& so = block(j, "solver", "");
    c.solver.dt = number(so, "dt", "solver", 0.01);
    if (!(c.solver.dt > 0)) throw ConfigError("solver.dt", "must be positive");
    c.solver.t_end = number(so, "t_end", "solver", 1.6);
    if (!(c.solver.t_end > 0)) throw ConfigError("solver.t_end", "must be positive");
    c.solver.scheme = text(so, "scheme", "solver", "rk4", {"rk4", "lawson_rk4"}) == "rk4"
                          ? SolverConfig::Scheme::rk4
                          : SolverConfig::Scheme::lawson_rk4;
    c.solver.project = flag(so, "project", "solver", true);
    c.solver.snapshot_stride = int(integer(so, "snapshot_stride", "solver", 0));
    c.solver.pair_cutoff = number(so, "pair_cutoff", "solver", 1e-8);
    if (!(c.solver.pair_cutoff >= 0 && c.solver.pair_cutoff < 1e-3)) throw ConfigError("solver.pair_cutoff", "must lie in [0, 1e-3)");
    c.solver.weight = c.weight.primary;
    c.solver.exp_weight = c.weight.primary;

    const json& e = block(j, "experiment", "");
    auto& x = c.experiment;
    x.initial = text(e, "initial", "experiment", x.initial,
                     {"near_equilibrium", "maxwellian", "shifted_maxwellian", "mixture", "polynomial_tail"});
    x.epsilon = number(e, "epsilon", "experiment", x.epsilon);
    if (!(x.epsilon > 0 && x.epsilon < 1)) throw ConfigError("experiment.epsilon", "must lie in (0, 1)");
    x.fit_start = number(e, "fit_start", "experiment", x.fit_start);
    x.min_decades = number(e, "min_decades", "experiment", x.min_decades);
    x.rate_tolerance = number(e, "rate_tolerance", "experiment", x.rate_tolerance);
    x.delta_ladder = numbers(e, "delta_ladder", "experiment", x.delta_ladder);
    for (std::size_t i = 0; i < x.delta_ladder.size(); ++i)
        if (!(x.delta_ladder[i] > 0 && x.delta_ladder[i] < 1))
            throw ConfigError("experiment.delta_ladder[" + std::to_string(i) + "]", "must lie in (0, 1)");
    x.p_set = numbers(e, "p_set", "experiment", x.p_set);
    x.povzner_samples = std::size_t(integer(e, "povzner_samples", "experiment", long(x.povzner_samples)));
    x.povzner_s = number(e, "povzner_s", "experiment", x.povzner_s);
    if (!(x.povzner_s > 0 && x.povzner_s <= 2)) throw ConfigError("experiment.povzner_s", "must lie in (0, 2]");
    x.moment_s = number(e, "moment_s", "experiment", 0.4 * c.kernel.gamma / 2);
    if (!(x.moment_s > 0 && x.moment_s < c.kernel.gamma / 2))
        throw ConfigError("experiment.moment_s", "must lie in (0, gamma/2)");
    x.p_max = number(e, "p_max", "experiment", x.p_max);
    x.random_fields = int(integer(e, "random_fields", "experiment", x.random_fields));
    x.sector_per_ray = int(integer(e, "sector_per_ray", "experiment", x.sector_per_ray));
    x.sector_mu_fraction = number(e, "sector_mu_fraction", "experiment", x.sector_mu_fraction);
    if (!(x.sector_mu_fraction > 0 && x.sector_mu_fraction <= 1))
        throw ConfigError("experiment.sector_mu_fraction", "must lie in (0, 1]");
    x.semigroup_dt = number(e, "semigroup_dt", "experiment", x.semigroup_dt);
    x.semigroup_horizon = number(e, "semigroup_horizon", "experiment", x.semigroup_horizon);
    x.gap_slack = number(e, "gap_slack", "experiment", x.gap_slack);
    x.reference_bound = number(e, "reference_bound", "experiment", x.reference_bound);
    x.eps_transfer = number(e, "eps_transfer", "experiment", x.eps_transfer);
    x.eps_match = number(e, "eps_match", "experiment", x.eps_match);
    x.eps_xval = number(e, "eps_xval", "experiment", x.eps_xval);
    x.xval_points = int(integer(e, "xval_points", "experiment", x.xval_points));
    x.null_angle_deg = number(e, "null_angle_deg", "experiment", x.null_angle_deg);
    x.cons_pre_limit = number(e, "cons_pre_limit", "experiment", x.cons_pre_limit);
    x.moment_points = int(integer(e, "moment_points", "experiment", c.kernel.dimension == 3 ? 11 : 21));
    if (x.moment_points < 3 || x.moment_points % 2 == 0)
        throw ConfigError("experiment.moment_points", "must be odd and >= 3");
    x.moment_t_end = number(e, "moment_t_end", "experiment", x.moment_t_end);
    if (!(x.moment_t_end > 0)) throw ConfigError("experiment.moment_t_end", "must be positive");

    c.out = text(j, "output", "", "");
    if (const json* sd = child(j, "seed")) {
        if (!sd->is_number_unsigned() && !(sd->is_number_integer() && sd->get<long long>() >= 0))
            throw ConfigError("seed", "expected a nonnegative integer");
        c.seed = sd->get<std::uint64_t>();
    }
    c.threads = int(integer(j, "threads", "", 1));
    if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
    return c;
}

// Explicit RK4 stability budget dt <= 0.5 / max nu, checked against the grid.
inline void check_solver_budget(const RunConfig& c, const VelocityGrid& g, const CollisionKernelSpec& k) {
    if (c.solver.scheme != SolverConfig::Scheme::rk4) return;
    // nu is largest at a box corner
    Vec corner{0, 0, 0};
    for (int d = 0; d < g.dimension(); ++d) corner[d] = g.extent();
    double nu = 0;
    for (std::size_t j = 0; j < g.size(); ++j)
        nu += g.weight(j) * k.phi(norm(corner - g.node(j))) * std::exp(-norm2(g.node(j)));
    nu *= k.ell_b();
    if (c.solver.dt > 0.5 / nu)
        throw ConfigError("solver.dt", "exceeds the explicit stability budget 0.5/max(nu) = " + fmt(0.5 / nu));
}

inline json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot open config file " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
}

inline std::vector<std::string> preset_names() { return {"hard_sphere_n3", "hard_potential_gamma_half_n2", "maxwell_rejected"}; }

inline json preset(const std::string& name) {
    if (name == "hard_sphere_n3")
        return {{"name", name},
                {"kernel", {{"dimension", 3}, {"gamma", 1.0}, {"c_phi", 1.0}, {"angular", "hard_sphere"}}},
                {"grid", {{"points_per_axis", 15}, {"extent", 4.5}, {"interpolation_order", 2}}},
                {"sphere", {{"polar", 16}, {"azimuthal", 32}}},
                {"weight", {{"a", 0.5}, {"s", 0.2}, {"second", {{"a", 1.0}, {"s", 0.1}}}}},
                {"spectrum", {{"mode", "automatic"}}},
                {"solver", {{"scheme", "rk4"}, {"dt", 0.01}, {"t_end", 1.6}, {"project", true}}},
                {"experiment", {{"initial", "near_equilibrium"}, {"epsilon", 0.05}, {"fit_start", 0.2}}},
                {"seed", 20240917}};
    if (name == "hard_potential_gamma_half_n2")
        return {{"name", name},
                {"kernel", {{"dimension", 2}, {"gamma", 0.5}, {"c_phi", 1.0}, {"angular", "constant"}}},
                {"grid", {{"points_per_axis", 41}, {"extent", 5.0}, {"interpolation_order", 2}}},
                {"sphere", {{"points", 64}}},
                {"weight", {{"a", 0.5}, {"s", 0.1}, {"second", {{"a", 1.0}, {"s", 0.2}}}}},
                {"spectrum", {{"mode", "automatic"}}},
                {"solver", {{"scheme", "rk4"}, {"dt", 0.02}, {"t_end", 4.0}, {"project", true}}},
                {"experiment",
                 {{"initial", "near_equilibrium"},
                  {"epsilon", 0.05},
                  {"delta_ladder", {0.4, 0.2, 0.1, 0.05}},
                  {"p_set", {2, 5, 10, 20}},
                  {"povzner_s", 1.25},
                  {"sector_per_ray", 6}}},
                {"seed", 20240917}};
    if (name == "maxwell_rejected") {
        json j = preset("hard_potential_gamma_half_n2");
        j["name"] = name;
        j["kernel"]["gamma"] = 0.0;
        return j;
    }
    throw ConfigError("", "unknown preset " + name);
}

}  // namespace boltzgap
