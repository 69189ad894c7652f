#include "sbsde/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"

#include "sbsde/csv.hpp"
#include "sbsde/errors.hpp"
#include "sbsde/stats.hpp"
#include "sbsde/threading.hpp"
#include "sbsde/version.hpp"

namespace sbsde {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) fail("unknown key '" + item.key() + "' in " + where);
    }
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where + " must be finite");
    return d;
}

double get_number(const json& obj, const char* key, const char* where, double def) {
    if (!obj.contains(key)) return def;
    return as_number(obj.at(key), std::string(where) + "." + key);
}

std::size_t get_count(const json& obj, const char* key, const char* where, std::size_t def,
                      std::size_t min_value) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    const std::string label = std::string(where) + "." + key;
    unsigned long long n = 0;
    if (v.is_number_unsigned())
        n = v.get<unsigned long long>();
    else if (v.is_number_integer()) {
        const long long s = v.get<long long>();
        if (s < 0) fail(label + " must be a nonnegative integer");
        n = static_cast<unsigned long long>(s);
    } else {
        fail(label + " must be a nonnegative integer");
    }
    if (n < min_value) fail(label + " must be at least " + std::to_string(min_value));
    return static_cast<std::size_t>(n);
}

std::string get_string(const json& obj, const char* key, const char* where,
                       const std::string& def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(std::string(where) + "." + key + " must be a string");
    return v.get<std::string>();
}

LevySpec parse_levy(const json& obj) {
    check_keys(obj, "model.levy", {"intensity", "family", "par1", "par2"});
    LevySpec levy;
    levy.intensity = get_number(obj, "intensity", "model.levy", 0.0);
    const std::string fam = get_string(obj, "family", "model.levy", "normal");
    if (fam == "normal")
        levy.family = MarkFamily::normal;
    else if (fam == "exponential")
        levy.family = MarkFamily::exponential;
    else if (fam == "pareto")
        levy.family = MarkFamily::pareto;
    else
        fail("model.levy.family must be normal, exponential or pareto");
    levy.par1 = get_number(obj, "par1", "model.levy", 0.0);
    levy.par2 = get_number(obj, "par2", "model.levy", 1.0);
    try {
        validate_levy(levy);
    } catch (const UnsupportedInput& e) {
        fail(std::string("model.levy: ") + e.what());
    }
    return levy;
}

const std::vector<std::string> kTaskNames = {"forward", "bsde",     "oracle",     "martingale",
                                             "adjoint", "vi",       "reflection", "battery"};

} // namespace

ScenarioConfig parse_scenario_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("top level must be an object");
    check_keys(root, "top level",
               {"grid", "paths", "seed", "threads", "model", "driver", "control", "solver",
                "reflection", "tasks", "assertions", "output"});

    ScenarioConfig cfg;

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        if (!g.is_object()) fail("grid must be an object");
        check_keys(g, "grid", {"horizon", "n_steps"});
        cfg.horizon = get_number(g, "horizon", "grid", cfg.horizon);
        if (!(cfg.horizon > 0.0)) fail("grid.horizon must be positive");
        cfg.n_steps = get_count(g, "n_steps", "grid", cfg.n_steps, 1);
    }
    cfg.paths = get_count(root, "paths", "top level", cfg.paths, 1);
    cfg.seed = static_cast<std::uint64_t>(get_count(root, "seed", "top level", cfg.seed, 0));
    cfg.threads = static_cast<int>(get_count(root, "threads", "top level",
                                             static_cast<std::size_t>(cfg.threads), 1));
    if (cfg.threads > 256) fail("threads must be at most 256");

    if (root.contains("model")) {
        const json& m = root.at("model");
        if (!m.is_object()) fail("model must be an object");
        const std::string kind = get_string(m, "kind", "model", "geometric");
        if (kind == "geometric") {
            cfg.model = ModelKind::geometric;
            check_keys(m, "model", {"kind", "x0", "b0", "sigma0"});
            cfg.x0 = get_number(m, "x0", "model", cfg.x0);
            if (!(cfg.x0 > 0.0)) fail("model.x0 must be positive for the geometric model");
            cfg.b0 = get_number(m, "b0", "model", cfg.b0);
            cfg.sigma0 = get_number(m, "sigma0", "model", cfg.sigma0);
            if (cfg.sigma0 < 0.0) fail("model.sigma0 must be nonnegative");
        } else if (kind == "general") {
            cfg.model = ModelKind::general;
            check_keys(m, "model", {"kind", "x0", "b", "sigma", "theta", "levy"});
            cfg.x0 = get_number(m, "x0", "model", 0.0);
            cfg.gen_b = get_number(m, "b", "model", 0.0);
            cfg.gen_sigma = get_number(m, "sigma", "model", 0.0);
            if (cfg.gen_sigma < 0.0) fail("model.sigma must be nonnegative");
            cfg.gen_theta = get_number(m, "theta", "model", 0.0);
            if (m.contains("levy")) {
                if (!m.at("levy").is_object()) fail("model.levy must be an object");
                cfg.levy = parse_levy(m.at("levy"));
                cfg.has_levy = cfg.levy.intensity > 0.0;
            }
        } else {
            fail("model.kind must be geometric or general");
        }
    }

    if (root.contains("driver")) {
        const json& d = root.at("driver");
        if (!d.is_object()) fail("driver must be an object");
        const std::string kind = get_string(d, "kind", "driver", "none");
        if (kind == "none") {
            cfg.driver = DriverKind::none;
            check_keys(d, "driver", {"kind", "h"});
        } else if (kind == "linear") {
            cfg.driver = DriverKind::linear;
            check_keys(d, "driver", {"kind", "phi", "alpha", "c", "h"});
            cfg.drv_phi = get_number(d, "phi", "driver", 0.0);
            cfg.drv_alpha = get_number(d, "alpha", "driver", 0.0);
            cfg.drv_c = get_number(d, "c", "driver", 0.0);
        } else if (kind == "consumption") {
            cfg.driver = DriverKind::consumption;
            check_keys(d, "driver", {"kind", "alpha", "h"});
            cfg.cons_alpha = get_number(d, "alpha", "driver", 0.0);
            if (cfg.cons_alpha < 0.0) fail("driver.alpha must be nonnegative");
            if (cfg.model != ModelKind::geometric)
                fail("the consumption driver requires the geometric model");
        } else {
            fail("driver.kind must be none, linear or consumption");
        }
        cfg.h_name = get_string(d, "h", "driver", cfg.h_name);
        if (cfg.h_name != "bounded_exp" && cfg.h_name != "identity")
            fail("driver.h must be bounded_exp or identity");
    }

    if (root.contains("control")) {
        const json& c = root.at("control");
        if (!c.is_object()) fail("control must be an object");
        const std::string kind = get_string(c, "kind", "control", "zero");
        if (kind == "zero") {
            cfg.control = ControlKind::zero;
            check_keys(c, "control", {"kind"});
        } else if (kind == "linear") {
            cfg.control = ControlKind::linear;
            check_keys(c, "control", {"kind", "rate"});
            cfg.control_rate = get_number(c, "rate", "control", 0.0);
            if (cfg.control_rate < 0.0) fail("control.rate must be nonnegative");
        } else if (kind == "values") {
            cfg.control = ControlKind::values;
            check_keys(c, "control", {"kind", "values", "atoms"});
            if (!c.contains("values") || !c.at("values").is_array())
                fail("control.values must be an array of numbers");
            for (const json& v : c.at("values"))
                cfg.control_values.push_back(as_number(v, "control.values entry"));
            if (cfg.control_values.size() != cfg.n_steps + 1)
                fail("control.values must list one value per grid node (n_steps + 1)");
            if (c.contains("atoms")) {
                if (!c.at("atoms").is_array()) fail("control.atoms must be an array");
                for (const json& a : c.at("atoms")) {
                    if (!a.is_object()) fail("control.atoms entries must be objects");
                    check_keys(a, "control.atoms entry", {"node", "size"});
                    Atom atom;
                    atom.node = get_count(a, "node", "control.atoms entry", 0, 0);
                    atom.size = get_number(a, "size", "control.atoms entry", 0.0);
                    if (atom.node > cfg.n_steps) fail("control.atoms node is outside the grid");
                    cfg.control_atoms.push_back(atom);
                }
            }
        } else if (kind == "solve") {
            cfg.control = ControlKind::solve;
            check_keys(c, "control", {"kind"});
        } else {
            fail("control.kind must be zero, linear, values or solve");
        }
    }

    if (root.contains("solver")) {
        const json& s = root.at("solver");
        if (!s.is_object()) fail("solver must be an object");
        check_keys(s, "solver", {"basis_degree", "ridge", "tol", "max_iter"});
        cfg.basis.degree = static_cast<int>(
            get_count(s, "basis_degree", "solver", static_cast<std::size_t>(cfg.basis.degree), 0));
        if (cfg.basis.degree > 10) fail("solver.basis_degree must be at most 10");
        cfg.basis.ridge = get_number(s, "ridge", "solver", cfg.basis.ridge);
        if (cfg.basis.ridge < 0.0) fail("solver.ridge must be nonnegative");
        cfg.picard_tol = get_number(s, "tol", "solver", cfg.picard_tol);
        if (cfg.picard_tol < 0.0) fail("solver.tol must be nonnegative");
        cfg.picard_max_iter = get_count(s, "max_iter", "solver", cfg.picard_max_iter, 1);
    }

    if (root.contains("reflection")) {
        const json& r = root.at("reflection");
        if (!r.is_object()) fail("reflection must be an object");
        check_keys(r, "reflection",
                   {"rho", "max_sweeps", "tol", "epsilon_scale", "vi_tol", "c0"});
        cfg.reflection_rho = get_number(r, "rho", "reflection", cfg.reflection_rho);
        if (!(cfg.reflection_rho > 0.0 && cfg.reflection_rho <= 1.0))
            fail("reflection.rho must lie in (0, 1]");
        cfg.reflection_max_sweeps =
            get_count(r, "max_sweeps", "reflection", cfg.reflection_max_sweeps, 1);
        cfg.reflection_tol = get_number(r, "tol", "reflection", cfg.reflection_tol);
        if (!(cfg.reflection_tol > 0.0)) fail("reflection.tol must be positive");
        cfg.reflection_epsilon_scale =
            get_number(r, "epsilon_scale", "reflection", cfg.reflection_epsilon_scale);
        if (cfg.reflection_epsilon_scale < 0.0) fail("reflection.epsilon_scale must be nonnegative");
        cfg.reflection_vi_tol = get_number(r, "vi_tol", "reflection", cfg.reflection_vi_tol);
        if (!(cfg.reflection_vi_tol > 0.0)) fail("reflection.vi_tol must be positive");
        cfg.reflection_c0 = get_number(r, "c0", "reflection", cfg.reflection_c0);
        if (cfg.reflection_c0 < 0.0) fail("reflection.c0 must be nonnegative");
    }

    if (root.contains("tasks")) {
        if (!root.at("tasks").is_array()) fail("tasks must be an array of task names");
        cfg.tasks.clear();
        for (const json& t : root.at("tasks")) {
            if (!t.is_string()) fail("tasks entries must be strings");
            const std::string name = t.get<std::string>();
            bool known = false;
            for (const std::string& k : kTaskNames)
                if (name == k) known = true;
            if (!known) fail("unknown task '" + name + "'");
            cfg.tasks.push_back(name);
        }
        if (cfg.tasks.empty()) fail("tasks must not be empty");
    }

    if (root.contains("assertions")) {
        const json& a = root.at("assertions");
        if (!a.is_object()) fail("assertions must be an object");
        check_keys(a, "assertions", {"max_excess", "complementarity"});
        if (a.contains("max_excess"))
            cfg.assert_max_excess = as_number(a.at("max_excess"), "assertions.max_excess");
        if (a.contains("complementarity"))
            cfg.assert_complementarity =
                as_number(a.at("complementarity"), "assertions.complementarity");
    }

    if (root.contains("output")) {
        const json& o = root.at("output");
        if (!o.is_object()) fail("output must be an object");
        check_keys(o, "output", {"dir"});
        cfg.out_dir = get_string(o, "dir", "output", "");
    }

    return cfg;
}

std::string effective_config_json(const ScenarioConfig& cfg) {
    json root;
    root["grid"] = {{"horizon", cfg.horizon}, {"n_steps", cfg.n_steps}};
    root["paths"] = cfg.paths;
    root["seed"] = cfg.seed;
    root["threads"] = cfg.threads;

    json model;
    if (cfg.model == ModelKind::geometric) {
        model["kind"] = "geometric";
        model["x0"] = cfg.x0;
        model["b0"] = cfg.b0;
        model["sigma0"] = cfg.sigma0;
    } else {
        model["kind"] = "general";
        model["x0"] = cfg.x0;
        model["b"] = cfg.gen_b;
        model["sigma"] = cfg.gen_sigma;
        model["theta"] = cfg.gen_theta;
        if (cfg.has_levy) {
            const char* fam = cfg.levy.family == MarkFamily::normal        ? "normal"
                              : cfg.levy.family == MarkFamily::exponential ? "exponential"
                                                                           : "pareto";
            model["levy"] = {{"intensity", cfg.levy.intensity},
                             {"family", fam},
                             {"par1", cfg.levy.par1},
                             {"par2", cfg.levy.par2}};
        }
    }
    root["model"] = std::move(model);

    json driver;
    switch (cfg.driver) {
    case DriverKind::none:
        driver["kind"] = "none";
        break;
    case DriverKind::linear:
        driver["kind"] = "linear";
        driver["phi"] = cfg.drv_phi;
        driver["alpha"] = cfg.drv_alpha;
        driver["c"] = cfg.drv_c;
        break;
    case DriverKind::consumption:
        driver["kind"] = "consumption";
        driver["alpha"] = cfg.cons_alpha;
        break;
    }
    driver["h"] = cfg.h_name;
    root["driver"] = std::move(driver);

    json control;
    switch (cfg.control) {
    case ControlKind::zero:
        control["kind"] = "zero";
        break;
    case ControlKind::linear:
        control["kind"] = "linear";
        control["rate"] = cfg.control_rate;
        break;
    case ControlKind::values: {
        control["kind"] = "values";
        control["values"] = cfg.control_values;
        if (!cfg.control_atoms.empty()) {
            json atoms = json::array();
            for (const Atom& a : cfg.control_atoms)
                atoms.push_back({{"node", a.node}, {"size", a.size}});
            control["atoms"] = std::move(atoms);
        }
        break;
    }
    case ControlKind::solve:
        control["kind"] = "solve";
        break;
    }
    root["control"] = std::move(control);

    root["solver"] = {{"basis_degree", cfg.basis.degree},
                      {"ridge", cfg.basis.ridge},
                      {"tol", cfg.picard_tol},
                      {"max_iter", cfg.picard_max_iter}};
    root["reflection"] = {{"rho", cfg.reflection_rho},
                          {"max_sweeps", cfg.reflection_max_sweeps},
                          {"tol", cfg.reflection_tol},
                          {"epsilon_scale", cfg.reflection_epsilon_scale},
                          {"vi_tol", cfg.reflection_vi_tol},
                          {"c0", cfg.reflection_c0}};
    root["tasks"] = cfg.tasks;
    if (cfg.assert_max_excess || cfg.assert_complementarity) {
        json asrt;
        if (cfg.assert_max_excess) asrt["max_excess"] = *cfg.assert_max_excess;
        if (cfg.assert_complementarity) asrt["complementarity"] = *cfg.assert_complementarity;
        root["assertions"] = std::move(asrt);
    }
    if (!cfg.out_dir.empty()) root["output"] = {{"dir", cfg.out_dir}};
    return root.dump(2) + "\n";
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

SingularControl build_control(const ScenarioConfig& cfg, const TimeGrid& grid) {
    switch (cfg.control) {
    case ControlKind::zero:
        return zero_control(grid);
    case ControlKind::linear:
        return linear_control(grid, cfg.control_rate);
    case ControlKind::values: {
        SingularControl xi = control_from_values(cfg.control_values, cfg.control_atoms);
        const ControlValidation v = validate_control(xi, grid);
        if (!v.ok) {
            std::string msg = "control.values is not an admissible control:";
            for (const std::string& s : v.violations) msg += " " + s + ";";
            throw ConfigError(msg);
        }
        return xi;
    }
    case ControlKind::solve:
        throw ConfigError("control kind 'solve' is produced by the reflection task; "
                          "put 'reflection' before tasks that consume the control");
    }
    throw ConfigError("unreachable control kind");
}

PathBundle build_forward(const ScenarioConfig& cfg, const SingularControl& xi,
                         std::shared_ptr<const NoiseBundle> noise) {
    if (cfg.model == ModelKind::geometric)
        return simulate_geometric_consumption(cfg.b0, cfg.sigma0, cfg.x0, xi, std::move(noise));
    ForwardCoefficients coeff;
    const double b = cfg.gen_b, sigma = cfg.gen_sigma, theta = cfg.gen_theta;
    if (b != 0.0) coeff.b = [b](double, double) { return b; };
    if (sigma != 0.0) coeff.sigma = [sigma](double, double) { return sigma; };
    if (theta != 0.0) coeff.theta = [theta](double, double) { return theta; };
    if (cfg.has_levy) {
        coeff.beta = [](double, double, double mark) { return mark; };
        const double comp = cfg.levy.intensity * mark_mean(cfg.levy);
        coeff.jump_compensator = [comp](double, double) { return comp; };
    }
    return simulate_forward(coeff, cfg.x0, xi, std::move(noise));
}

namespace {

std::function<double(double)> terminal_map(const std::string& h_name) {
    if (h_name == "identity") return [](double x) { return x; };
    return [](double x) { return 1.0 - std::exp(-x); };
}

} // namespace

SingularDriver build_driver(const ScenarioConfig& cfg) {
    SingularDriver driver;
    const auto h = terminal_map(cfg.h_name);
    driver.terminal = [h](const PathBundle& pb) {
        const Eigen::Index last = pb.X.cols() - 1;
        Eigen::VectorXd out(pb.X.rows());
        for (Eigen::Index p = 0; p < pb.X.rows(); ++p) out(p) = h(pb.X(p, last));
        return out;
    };
    switch (cfg.driver) {
    case DriverKind::none:
        break;
    case DriverKind::linear: {
        const double phi = cfg.drv_phi, alpha = cfg.drv_alpha, c = cfg.drv_c;
        driver.g = [phi, alpha, c](std::size_t, std::size_t, double, double y, double xi) {
            return phi + alpha * y + c * xi;
        };
        driver.lip_g = std::fabs(alpha);
        break;
    }
    case DriverKind::consumption: {
        const double alpha = cfg.cons_alpha;
        driver.g = [alpha](std::size_t, std::size_t, double, double y, double) {
            return alpha * y;
        };
        driver.lip_g = alpha;
        break;
    }
    }
    return driver;
}

LinearDriverSpec build_linear_driver(const ScenarioConfig& cfg) {
    if (cfg.driver != DriverKind::linear)
        throw ConfigError("the closed-form oracle requires driver.kind = linear");
    LinearDriverSpec spec;
    const double phi = cfg.drv_phi, alpha = cfg.drv_alpha, c = cfg.drv_c;
    spec.phi = [phi](double) { return phi; };
    spec.alpha = [alpha](double) { return alpha; };
    spec.c = [c](double) { return c; };
    return spec;
}

ConsumptionModel build_consumption_model(const ScenarioConfig& cfg) {
    if (cfg.model != ModelKind::geometric)
        throw ConfigError("the consumption problem requires the geometric model");
    if (cfg.driver != DriverKind::consumption)
        throw ConfigError("the consumption problem requires driver.kind = consumption");
    ConsumptionModel model = make_consumption_model(cfg.x0, cfg.b0, cfg.sigma0, cfg.cons_alpha);
    if (cfg.h_name == "identity") {
        model.h = [](double x) { return x; };
        model.h_x = [](double) { return 1.0; };
    }
    return model;
}

namespace {

/* Path-level objective contributions along a solved surface: terminal plus
   the driver integrals. Their mean reproduces the node-0 value up to the
   regression tolerance; the paths are the pairing unit for common-noise
   difference quotients. */
Eigen::VectorXd per_path_contributions(const SingularDriver& driver, const PathBundle& pb,
                                       const Eigen::MatrixXd& Y) {
    const TimeGrid& grid = pb.grid;
    const std::size_t n_steps = grid.n_steps();
    const std::vector<double>& xiv = pb.control.values;
    const double dt = grid.dt();
    Eigen::VectorXd out = Y.col(static_cast<Eigen::Index>(n_steps));
    for (Eigen::Index p = 0; p < Y.rows(); ++p) {
        const std::size_t pu = static_cast<std::size_t>(p);
        double acc = 0.0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double t = grid.node(i);
            const double y = Y(p, static_cast<Eigen::Index>(i));
            double dxi = xiv[i + 1] - xiv[i];
            if (i == 0) dxi += xiv[0];
            if (driver.g) acc += driver.g(pu, i, t, y, xiv[i]) * dxi;
            if (driver.b) acc += driver.b(pu, i, t, y) * dt;
        }
        out(p) += acc;
    }
    return out;
}

} // namespace

ObjectiveFn build_objective(const ScenarioConfig& cfg, std::shared_ptr<const NoiseBundle> noise) {
    if (!noise) throw std::invalid_argument("build_objective: missing noise");
    return [cfg, noise](const SingularControl& xi) {
        const PathBundle pb = build_forward(cfg, xi, noise);
        const SingularDriver driver = build_driver(cfg);
        const BsdeSolution sol =
            picard_solve(driver, pb, cfg.basis, cfg.picard_tol, cfg.picard_max_iter);
        ObjectiveEvaluation ev;
        ev.y0 = sol.Y.col(0).mean();
        ev.value = ev.y0; // psi is the identity here
        ev.per_path = per_path_contributions(driver, pb, sol.Y);
        return ev;
    };
}

std::vector<std::pair<std::string, std::vector<double>>>
standard_variations(const TimeGrid& grid, const SingularControl& xi_hat) {
    const std::size_t n = grid.n_nodes();
    const double T = grid.horizon();
    std::vector<std::pair<std::string, std::vector<double>>> out;

    std::vector<double> down(n), up(n);
    for (std::size_t i = 0; i < n; ++i) {
        down[i] = -xi_hat.values[i];
        up[i] = xi_hat.values[i];
    }
    out.emplace_back("down_candidate", std::move(down));
    out.emplace_back("up_candidate", std::move(up));

    const auto ramp = [&](double start) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::max(0.0, grid.node(i) - start);
        return v;
    };
    out.emplace_back("ramp_full", ramp(0.0));
    out.emplace_back("ramp_from_quarter", ramp(0.25 * T));
    out.emplace_back("ramp_from_half", ramp(0.5 * T));
    out.emplace_back("ramp_from_three_quarters", ramp(0.75 * T));

    const auto plateau = [&](double stop) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::min(grid.node(i), stop);
        return v;
    };
    out.emplace_back("plateau_early", plateau(0.25 * T));
    out.emplace_back("plateau_half", plateau(0.5 * T));
    return out;
}

BatteryResult run_variation_battery(const ScenarioConfig& cfg,
                                    std::shared_ptr<const NoiseBundle> noise,
                                    const SingularControl& xi_hat,
                                    const std::vector<double>& steps) {
    const TimeGrid grid(cfg.horizon, cfg.n_steps);
    if (xi_hat.values.size() != grid.n_nodes())
        throw std::invalid_argument("run_variation_battery: candidate does not match the grid");
    if (cfg.driver != DriverKind::consumption)
        throw ConfigError("the variation battery needs the consumption driver; the analytic "
                          "derivative reads the consumption Hamiltonian surfaces");
    const ObjectiveFn objective = build_objective(cfg, noise);

    // Surfaces solved once at the candidate feed the analytic derivative.
    const ConsumptionModel model = build_consumption_model(cfg);
    const ControlProblemSpec spec = consumption_control_problem(model);
    const SingularDriver driver = build_driver(cfg);
    const PathBundle pb =
        simulate_geometric_consumption(cfg.b0, cfg.sigma0, cfg.x0, xi_hat, noise);
    const BsdeSolution sol =
        picard_solve(driver, pb, cfg.basis, cfg.picard_tol, cfg.picard_max_iter);
    const Eigen::MatrixXd Z = extract_Z(sol.Y, pb, cfg.basis);
    const Eigen::MatrixXd lambda = simulate_lambda(spec, pb, sol.Y, Z);
    AdjointSettings adj;
    adj.tol = cfg.picard_tol;
    adj.max_iter = cfg.picard_max_iter;
    const AdjointSolution adjoint = solve_adjoint_p(spec, pb, sol.Y, lambda, cfg.basis, adj);
    const AnalyticGateauxInputs analytic{&spec, &pb, &sol.Y, &lambda, &adjoint.p};

    BatteryResult result;
    result.passed = true;
    for (auto& [name, beta] : standard_variations(grid, xi_hat)) {
        BatteryRow row;
        row.name = name;
        row.admissible = true;
        for (double a : steps) {
            SingularControl pert = xi_hat;
            for (std::size_t i = 0; i < beta.size(); ++i) pert.values[i] += a * beta[i];
            if (!validate_control(pert, grid).ok) {
                row.admissible = false;
                break;
            }
        }
        if (row.admissible) {
            row.gateaux = gateaux_derivative(objective, xi_hat, beta, steps, &analytic);
            if (row.gateaux.numeric > 3.0 * row.gateaux.numeric_se) result.passed = false;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

namespace {

CsvTable battery_table(const BatteryResult& battery) {
    CsvTable table;
    std::vector<std::string> names;
    std::vector<double> adm, num, nse, ana, ase;
    for (const BatteryRow& row : battery.rows) {
        names.push_back(row.name);
        adm.push_back(row.admissible ? 1.0 : 0.0);
        num.push_back(row.gateaux.numeric);
        nse.push_back(row.gateaux.numeric_se);
        ana.push_back(row.gateaux.analytic);
        ase.push_back(row.gateaux.analytic_se);
    }
    table.label_column("variation", std::move(names));
    table.exact_column("admissible", std::move(adm));
    table.stat_column("numeric", std::move(num), std::move(nse));
    table.stat_column("analytic", std::move(ana), std::move(ase));
    return table;
}

ScenarioConfig apply_overrides(ScenarioConfig cfg, const RunOverrides& ov) {
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.paths) cfg.paths = *ov.paths;
    if (ov.threads) cfg.threads = *ov.threads;
    if (ov.out_dir) cfg.out_dir = *ov.out_dir;
    return cfg;
}

std::string resolve_out_dir(const ScenarioConfig& cfg, const char* leaf) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    const char* root = std::getenv("SBSDE_OUT_ROOT");
    const std::string base = (root != nullptr && *root != '\0') ? root : ".";
    return base + "/" + leaf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write failed for " + path);
}

std::vector<double> pad_to(std::vector<double> v, std::size_t n) {
    v.resize(n, 0.0);
    return v;
}

struct ColumnStats {
    std::vector<double> mean, se;
};

ColumnStats surface_stats(const Eigen::MatrixXd& surface) {
    ColumnStats s;
    s.mean.resize(static_cast<std::size_t>(surface.cols()));
    s.se.resize(static_cast<std::size_t>(surface.cols()));
    for (Eigen::Index j = 0; j < surface.cols(); ++j) {
        const MeanSe ms = mean_and_se(surface.col(j));
        s.mean[static_cast<std::size_t>(j)] = ms.mean;
        s.se[static_cast<std::size_t>(j)] = ms.se;
    }
    return s;
}

} // namespace

RunOutcome run_scenario(const ScenarioConfig& cfg_in, const std::string& config_text,
                        const RunOverrides& overrides) {
    const auto t_start = std::chrono::steady_clock::now();
    const ScenarioConfig cfg = apply_overrides(cfg_in, overrides);
    set_default_threads(cfg.threads);

    RunOutcome outcome;
    outcome.out_dir = resolve_out_dir(cfg, "run");
    std::filesystem::create_directories(outcome.out_dir);
    write_text_file(outcome.out_dir + "/config.json", config_text);

    const std::string effective = effective_config_json(cfg);
    json report;
    report["tool"] = "sbsde";
    report["version"] = version();
    report["command"] = "run";
    report["config_hash"] = hex64(fnv1a64(config_text));
    report["effective_config_hash"] = hex64(fnv1a64(effective));
    report["seed"] = cfg.seed;
    report["paths"] = cfg.paths;
    report["threads"] = cfg.threads;
    report["tasks"] = cfg.tasks;
    json summary = json::object();

    const TimeGrid grid(cfg.horizon, cfg.n_steps);
    const std::size_t n_nodes = grid.n_nodes();
    const LevySpec levy = (cfg.model == ModelKind::general && cfg.has_levy) ? cfg.levy : LevySpec{};
    const std::shared_ptr<const NoiseBundle> noise =
        sample_noise(grid, cfg.paths, cfg.seed, levy);

    CsvTable nodes;
    {
        std::vector<double> t(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) t[i] = grid.node(i);
        nodes.exact_column("t", std::move(t));
    }

    std::optional<SingularControl> xi;
    std::optional<PathBundle> bundle;
    Eigen::MatrixXd Y, Z, lambda, p_surface;
    std::optional<GammaPath> gamma;
    std::optional<ViReport> vi;
    bool xi_written = false;

    const auto ensure_control = [&]() -> const SingularControl& {
        if (!xi) xi = build_control(cfg, grid);
        return *xi;
    };
    const auto ensure_bundle = [&]() -> const PathBundle& {
        if (!bundle) bundle = build_forward(cfg, ensure_control(), noise);
        return *bundle;
    };
    const auto write_xi_column = [&]() {
        if (!xi_written && xi) {
            nodes.exact_column("xi", xi->values);
            xi_written = true;
        }
    };

    const auto finalize = [&](int code, const std::string& message) {
        outcome.exit_code = code;
        outcome.message = message;
        write_xi_column();
        if (nodes.n_rows() > 0) nodes.write_file(outcome.out_dir + "/nodes.csv");
        report["summary"] = summary;
        report["exit_code"] = code;
        report["message"] = message;
        report["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t_start)
                                .count();
        write_text_file(outcome.out_dir + "/report.json", report.dump(2) + "\n");
        return outcome;
    };

    try {
        for (const std::string& task : cfg.tasks) {
            if (task == "forward") {
                const PathBundle& pb = ensure_bundle();
                const ColumnStats xs = surface_stats(pb.X);
                nodes.stat_column("x", xs.mean, xs.se);
                summary["forward"] = {{"paths", pb.n_paths()}, {"x0", pb.x0}};
            } else if (task == "bsde") {
                const PathBundle& pb = ensure_bundle();
                const SingularDriver driver = build_driver(cfg);
                const BsdeSolution sol =
                    picard_solve(driver, pb, cfg.basis, cfg.picard_tol, cfg.picard_max_iter);
                Y = sol.Y;
                const ColumnStats ys = surface_stats(Y);
                nodes.stat_column("y", ys.mean, ys.se);
                CsvTable residuals;
                std::vector<double> iter(sol.residuals.size());
                for (std::size_t i = 0; i < iter.size(); ++i) iter[i] = static_cast<double>(i + 1);
                residuals.exact_column("iteration", std::move(iter));
                residuals.exact_column("residual", sol.residuals);
                residuals.write_file(outcome.out_dir + "/residuals.csv");
                if (!noise->has_jumps()) {
                    Z = extract_Z(Y, pb, cfg.basis);
                    const ColumnStats zs = surface_stats(Z);
                    nodes.stat_column("z", zs.mean, zs.se);
                }
                summary["bsde"] = {{"iterations", sol.residuals.size()},
                                   {"final_residual", sol.residuals.empty() ? 0.0
                                                                            : sol.residuals.back()},
                                   {"tolerance", sol.tolerance_used},
                                   {"y0", sol.Y.col(0).mean()}};
            } else if (task == "oracle") {
                const PathBundle& pb = ensure_bundle();
                const LinearDriverSpec ldrv = build_linear_driver(cfg);
                gamma = gamma_process(ldrv.alpha, pb.control, grid);
                const SingularDriver driver = build_driver(cfg);
                const BsdeSolution oracle =
                    linear_solution(ldrv, driver.terminal(pb), pb, cfg.basis);
                const ColumnStats os = surface_stats(oracle.Y);
                nodes.stat_column("y_oracle", os.mean, os.se);
                double gap = 0.0;
                if (Y.size() != 0) {
                    const ColumnStats ds = surface_stats(Y - oracle.Y);
                    for (double d : ds.mean) gap = std::max(gap, std::fabs(d));
                    nodes.stat_column("y_gap", ds.mean, ds.se);
                }
                summary["oracle"] = {{"y0", oracle.Y.col(0).mean()},
                                     {"max_abs_node_gap", gap}};
                if (Y.size() == 0) Y = oracle.Y; // downstream tasks can use the oracle surface
            } else if (task == "martingale") {
                const PathBundle& pb = ensure_bundle();
                const LinearDriverSpec ldrv = build_linear_driver(cfg);
                if (!gamma) gamma = gamma_process(ldrv.alpha, pb.control, grid);
                if (Y.size() == 0)
                    throw ConfigError("the martingale task needs a solved surface; "
                                      "run bsde or oracle first");
                const MartingaleReport mr = martingale_check(*gamma, Y, ldrv, pb);
                nodes.stat_column("martingale_increment", pad_to(mr.increment_mean, n_nodes),
                                  pad_to(mr.increment_se, n_nodes));
                summary["martingale"] = {{"max_abs_mean", mr.max_abs_mean},
                                         {"argmax_node", mr.argmax_node}};
            } else if (task == "adjoint") {
                const PathBundle& pb = ensure_bundle();
                const ConsumptionModel model = build_consumption_model(cfg);
                const ControlProblemSpec spec = consumption_control_problem(model);
                if (Y.size() == 0)
                    throw ConfigError("the adjoint task needs the bsde task first");
                lambda = simulate_lambda(spec, pb, Y, Z);
                AdjointSettings adj;
                adj.tol = cfg.picard_tol;
                adj.max_iter = cfg.picard_max_iter;
                const AdjointSolution sol = solve_adjoint_p(spec, pb, Y, lambda, cfg.basis, adj);
                p_surface = sol.p;
                const ColumnStats ls = surface_stats(lambda);
                const ColumnStats ps = surface_stats(p_surface);
                const ColumnStats qs = surface_stats(sol.q);
                nodes.stat_column("lambda", ls.mean, ls.se);
                nodes.stat_column("p", ps.mean, ps.se);
                nodes.stat_column("q", qs.mean, qs.se);
                summary["adjoint"] = {{"outer_iterations", sol.outer_iterations},
                                      {"q_update_norm", sol.q_update_norm}};
            } else if (task == "vi") {
                const PathBundle& pb = ensure_bundle();
                const ConsumptionModel model = build_consumption_model(cfg);
                const ControlProblemSpec spec = consumption_control_problem(model);
                if (Y.size() == 0 || lambda.size() == 0 || p_surface.size() == 0)
                    throw ConfigError("the vi task needs the bsde and adjoint tasks first");
                vi = check_variational_inequality(spec, pb, Y, lambda, p_surface,
                                                  cfg.reflection_vi_tol);
            } else if (task == "reflection") {
                const ConsumptionModel model = build_consumption_model(cfg);
                ReflectionSettings settings;
                settings.rho = cfg.reflection_rho;
                settings.max_sweeps = cfg.reflection_max_sweeps;
                settings.tol = cfg.reflection_tol;
                settings.epsilon_scale = cfg.reflection_epsilon_scale;
                settings.vi_tol = cfg.reflection_vi_tol;
                settings.c0 = cfg.reflection_c0;
                settings.basis = cfg.basis;
                settings.picard_tol = cfg.picard_tol;
                settings.picard_max_iter = cfg.picard_max_iter;
                if (cfg.control == ControlKind::values)
                    settings.initial_xi = cfg.control_values;
                ReflectionSolveResult res =
                    solve_reflection_fixed_point(model, grid, noise, settings);

                CsvTable sweeps;
                std::vector<double> idx, upd, exc, off;
                for (std::size_t s = 0; s < res.trace.sweeps.size(); ++s) {
                    const SweepRecord& r = res.trace.sweeps[s];
                    idx.push_back(static_cast<double>(s + 1));
                    upd.push_back(r.update_norm);
                    exc.push_back(r.complementarity.max_excess);
                    off.push_back(r.complementarity.off_boundary_mass);
                }
                sweeps.exact_column("sweep", std::move(idx));
                sweeps.exact_column("update_norm", std::move(upd));
                sweeps.exact_column("barrier_max_excess", std::move(exc));
                sweeps.exact_column("off_boundary_mass", std::move(off));
                sweeps.write_file(outcome.out_dir + "/sweeps.csv");

                summary["reflection"] = {{"converged", res.trace.converged},
                                         {"sweeps", res.trace.sweeps.size()},
                                         {"c0", res.trace.c0},
                                         {"total_consumption", res.xi.total()}};
                xi = res.xi;
                bundle = std::move(res.paths);
                Y = std::move(res.Y);
                Z = std::move(res.Z);
                lambda = std::move(res.lambda);
                p_surface = std::move(res.p);
                vi = res.vi;
                const ColumnStats xs = surface_stats(bundle->X);
                nodes.stat_column("x", xs.mean, xs.se);
                const ColumnStats ys = surface_stats(Y);
                nodes.stat_column("y", ys.mean, ys.se);
                const ColumnStats ps = surface_stats(p_surface);
                nodes.stat_column("p", ps.mean, ps.se);
                if (!res.trace.converged)
                    return finalize(3, "candidate control not established within the sweep "
                                       "budget; see sweeps.csv");
            } else if (task == "battery") {
                const SingularControl& cand = ensure_control();
                const BatteryResult battery = run_variation_battery(cfg, noise, cand);
                battery_table(battery).write_file(outcome.out_dir + "/battery.csv");
                summary["battery"] = {{"passed", battery.passed},
                                      {"variations", battery.rows.size()}};
                if (!battery.passed)
                    return finalize(4, "an admissible variation has a significantly positive "
                                       "derivative; see battery.csv");
            }

            if (vi) {
                summary["vi"] = {{"max_excess", vi->max_excess},
                                 {"complementarity_residual", vi->complementarity_residual},
                                 {"consistent", vi->consistent}};
            }
        }

        if (vi) {
            nodes.stat_column("barrier", vi->barrier_mean, vi->barrier_se);
            if (cfg.assert_max_excess && vi->max_excess > *cfg.assert_max_excess)
                return finalize(4, "max_excess " + format_double(vi->max_excess) +
                                       " exceeds the asserted bound " +
                                       format_double(*cfg.assert_max_excess));
            if (cfg.assert_complementarity &&
                vi->complementarity_residual > *cfg.assert_complementarity)
                return finalize(4, "complementarity residual " +
                                       format_double(vi->complementarity_residual) +
                                       " exceeds the asserted bound " +
                                       format_double(*cfg.assert_complementarity));
        } else if (cfg.assert_max_excess || cfg.assert_complementarity) {
            throw ConfigError("assertions need the vi or reflection task");
        }
    } catch (const NonConvergence& e) {
        CsvTable residuals;
        std::vector<double> iter(e.history().size());
        for (std::size_t i = 0; i < iter.size(); ++i) iter[i] = static_cast<double>(i + 1);
        residuals.exact_column("iteration", std::move(iter));
        residuals.exact_column("residual", e.history());
        residuals.write_file(outcome.out_dir + "/residuals.csv");
        return finalize(3, std::string("not established: ") + e.what());
    }

    return finalize(0, "ok");
}

RunOutcome run_convergence(const ScenarioConfig& cfg_in, const std::string& config_text,
                           const RunOverrides& overrides, const std::string& axis,
                           const std::vector<std::size_t>& levels) {
    const auto t_start = std::chrono::steady_clock::now();
    ScenarioConfig cfg = apply_overrides(cfg_in, overrides);
    set_default_threads(cfg.threads);
    if (axis != "grid" && axis != "paths" && axis != "iterations")
        throw ConfigError("axis must be grid, paths or iterations");
    if (levels.empty()) throw ConfigError("need at least one level");
    for (std::size_t l : levels)
        if (l == 0) throw ConfigError("levels must be positive");
    if (cfg.control == ControlKind::solve)
        throw ConfigError("the convergence study needs an explicit control, not 'solve'");
    if (cfg.control == ControlKind::values && axis == "grid")
        throw ConfigError("control.values pins the grid; use the linear or zero control "
                          "for a grid study");

    RunOutcome outcome;
    outcome.out_dir = resolve_out_dir(cfg, "converge");
    std::filesystem::create_directories(outcome.out_dir);
    write_text_file(outcome.out_dir + "/config.json", config_text);

    json report;
    report["tool"] = "sbsde";
    report["version"] = version();
    report["command"] = "converge";
    report["config_hash"] = hex64(fnv1a64(config_text));
    report["effective_config_hash"] = hex64(fnv1a64(effective_config_json(cfg)));
    report["axis"] = axis;
    report["levels"] = levels;

    CsvTable table;
    if (axis == "iterations") {
        std::size_t max_iter = 0;
        for (std::size_t l : levels) max_iter = std::max(max_iter, l);
        const TimeGrid grid(cfg.horizon, cfg.n_steps);
        const LevySpec levy =
            (cfg.model == ModelKind::general && cfg.has_levy) ? cfg.levy : LevySpec{};
        const auto noise = sample_noise(grid, cfg.paths, cfg.seed, levy);
        const SingularControl xi = build_control(cfg, grid);
        const PathBundle pb = build_forward(cfg, xi, noise);
        const SingularDriver driver = build_driver(cfg);
        std::vector<double> history;
        try {
            // a vanishing tolerance forces the full iteration budget
            const BsdeSolution sol = picard_solve(driver, pb, cfg.basis, 1e-300, max_iter);
            history = sol.residuals;
        } catch (const NonConvergence& e) {
            history = e.history();
        }
        std::vector<double> iter(history.size());
        for (std::size_t i = 0; i < iter.size(); ++i) iter[i] = static_cast<double>(i + 1);
        table.exact_column("iteration", std::move(iter));
        table.exact_column("residual", std::move(history));
    } else {
        std::vector<double> level_col, y0, y0_se, iters, final_res, oracle_gap;
        for (std::size_t level : levels) {
            ScenarioConfig level_cfg = cfg;
            if (axis == "grid")
                level_cfg.n_steps = level;
            else
                level_cfg.paths = level;
            const TimeGrid grid(level_cfg.horizon, level_cfg.n_steps);
            const LevySpec levy =
                (level_cfg.model == ModelKind::general && level_cfg.has_levy) ? level_cfg.levy
                                                                              : LevySpec{};
            const auto noise = sample_noise(grid, level_cfg.paths, level_cfg.seed, levy);
            const SingularControl xi = build_control(level_cfg, grid);
            const PathBundle pb = build_forward(level_cfg, xi, noise);
            const SingularDriver driver = build_driver(level_cfg);
            const BsdeSolution sol = picard_solve(driver, pb, level_cfg.basis,
                                                  level_cfg.picard_tol, level_cfg.picard_max_iter);
            level_col.push_back(static_cast<double>(level));
            const Eigen::VectorXd contributions = per_path_contributions(driver, pb, sol.Y);
            const MeanSe ms = mean_and_se(contributions);
            y0.push_back(sol.Y.col(0).mean());
            y0_se.push_back(ms.se);
            iters.push_back(static_cast<double>(sol.residuals.size()));
            final_res.push_back(sol.residuals.empty() ? 0.0 : sol.residuals.back());
            if (level_cfg.driver == DriverKind::linear) {
                const BsdeSolution oracle = linear_solution(build_linear_driver(level_cfg),
                                                            driver.terminal(pb), pb,
                                                            level_cfg.basis);
                double gap = 0.0;
                for (Eigen::Index j = 0; j < sol.Y.cols(); ++j)
                    gap = std::max(gap, std::fabs((sol.Y.col(j) - oracle.Y.col(j)).mean()));
                oracle_gap.push_back(gap);
            }
        }
        table.exact_column("level", std::move(level_col));
        table.stat_column("y0", std::move(y0), std::move(y0_se));
        table.exact_column("iterations", std::move(iters));
        table.exact_column("final_residual", std::move(final_res));
        if (!oracle_gap.empty()) table.exact_column("oracle_gap", std::move(oracle_gap));
    }
    table.write_file(outcome.out_dir + "/levels.csv");

    outcome.exit_code = 0;
    outcome.message = "ok";
    report["exit_code"] = 0;
    report["message"] = "ok";
    report["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t_start)
                            .count();
    write_text_file(outcome.out_dir + "/report.json", report.dump(2) + "\n");
    return outcome;
}

RunOutcome run_battery(const ScenarioConfig& cfg_in, const std::string& config_text,
                       const RunOverrides& overrides,
                       const std::optional<std::vector<double>>& candidate_values) {
    const auto t_start = std::chrono::steady_clock::now();
    const ScenarioConfig cfg = apply_overrides(cfg_in, overrides);
    set_default_threads(cfg.threads);

    RunOutcome outcome;
    outcome.out_dir = resolve_out_dir(cfg, "battery");
    std::filesystem::create_directories(outcome.out_dir);
    write_text_file(outcome.out_dir + "/config.json", config_text);

    json report;
    report["tool"] = "sbsde";
    report["version"] = version();
    report["command"] = "battery";
    report["config_hash"] = hex64(fnv1a64(config_text));
    report["effective_config_hash"] = hex64(fnv1a64(effective_config_json(cfg)));

    const TimeGrid grid(cfg.horizon, cfg.n_steps);
    const LevySpec levy = (cfg.model == ModelKind::general && cfg.has_levy) ? cfg.levy : LevySpec{};
    const auto noise = sample_noise(grid, cfg.paths, cfg.seed, levy);

    SingularControl cand = zero_control(grid);
    bool established = true;
    if (candidate_values) {
        if (candidate_values->size() != grid.n_nodes())
            throw ConfigError("candidate file must list one value per grid node");
        cand = control_from_values(*candidate_values);
        const ControlValidation v = validate_control(cand, grid);
        if (!v.ok) throw ConfigError("candidate file is not an admissible control");
    } else if (cfg.control == ControlKind::solve) {
        const ConsumptionModel model = build_consumption_model(cfg);
        ReflectionSettings settings;
        settings.rho = cfg.reflection_rho;
        settings.max_sweeps = cfg.reflection_max_sweeps;
        settings.tol = cfg.reflection_tol;
        settings.epsilon_scale = cfg.reflection_epsilon_scale;
        settings.vi_tol = cfg.reflection_vi_tol;
        settings.c0 = cfg.reflection_c0;
        settings.basis = cfg.basis;
        settings.picard_tol = cfg.picard_tol;
        settings.picard_max_iter = cfg.picard_max_iter;
        ReflectionSolveResult res = solve_reflection_fixed_point(model, grid, noise, settings);
        established = res.trace.converged;
        cand = std::move(res.xi);
    } else {
        cand = build_control(cfg, grid);
    }

    const auto finalize = [&](int code, const std::string& message) {
        outcome.exit_code = code;
        outcome.message = message;
        report["exit_code"] = code;
        report["message"] = message;
        report["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t_start)
                                .count();
        write_text_file(outcome.out_dir + "/report.json", report.dump(2) + "\n");
        return outcome;
    };

    if (!established)
        return finalize(3, "candidate control not established within the sweep budget");

    const BatteryResult battery = run_variation_battery(cfg, noise, cand);
    battery_table(battery).write_file(outcome.out_dir + "/battery.csv");
    report["summary"] = {{"battery", {{"passed", battery.passed},
                                      {"variations", battery.rows.size()},
                                      {"candidate_total", cand.total()}}}};

    if (!battery.passed)
        return finalize(4, "an admissible variation has a significantly positive derivative; "
                           "see battery.csv");
    return finalize(0, "ok");
}

} // namespace sbsde
