#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sbsde/linear.hpp"
#include "sbsde/skorohod.hpp"

namespace sbsde {

enum class ModelKind { geometric, general };
enum class DriverKind { none, linear, consumption };
enum class ControlKind { zero, linear, values, solve };

/* Parsed scenario. The JSON schema is strict: unknown keys anywhere are
   rejected, every value is range-checked at parse time, and the parsed
   struct re-serializes losslessly (canonical key order). */
struct ScenarioConfig {
    // grid / ensemble
    double horizon = 1.0;
    std::size_t n_steps = 128;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    int threads = 1;

    // model
    ModelKind model = ModelKind::geometric;
    double x0 = 2.0;
    double b0 = 0.05, sigma0 = 0.2;           // geometric
    double gen_b = 0.0, gen_sigma = 0.0,      // general: constant coefficients,
           gen_theta = 0.0;                   // additive jumps beta = mark
    bool has_levy = false;
    LevySpec levy;

    // driver
    DriverKind driver = DriverKind::none;
    double drv_phi = 0.0, drv_alpha = 0.0, drv_c = 0.0; // linear
    double cons_alpha = 0.0;                            // consumption
    std::string h_name = "bounded_exp";                 // bounded_exp | identity

    // control
    ControlKind control = ControlKind::zero;
    double control_rate = 0.0;
    std::vector<double> control_values;
    std::vector<Atom> control_atoms;

    // solvers
    RegressionBasis basis{};
    double picard_tol = 0.0;
    std::size_t picard_max_iter = 40;
    double reflection_rho = 0.5;
    std::size_t reflection_max_sweeps = 50;
    double reflection_tol = 1e-4;
    double reflection_epsilon_scale = 1e-3;
    double reflection_vi_tol = 5e-2;
    double reflection_c0 = 0.0;

    // pipeline: ordered subset of
    //   forward, bsde, oracle, martingale, adjoint, vi, reflection, battery
    std::vector<std::string> tasks{"forward"};

    // optional hard gates; violation exits with code 4
    std::optional<double> assert_max_excess;
    std::optional<double> assert_complementarity;

    std::string out_dir; // empty: resolved from flags / environment
};

ScenarioConfig parse_scenario_json(const std::string& text); // throws ConfigError
std::string effective_config_json(const ScenarioConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

/* Pipeline building blocks (shared by the CLI, the tests and the bindings). */
SingularControl build_control(const ScenarioConfig& cfg, const TimeGrid& grid);
PathBundle build_forward(const ScenarioConfig& cfg, const SingularControl& xi,
                         std::shared_ptr<const NoiseBundle> noise);
SingularDriver build_driver(const ScenarioConfig& cfg);
LinearDriverSpec build_linear_driver(const ScenarioConfig& cfg);
ConsumptionModel build_consumption_model(const ScenarioConfig& cfg);

/* The performance functional J(xi) = psi(Y(0)) for the configured driver
   (psi = identity here), evaluated with common noise across calls. */
ObjectiveFn build_objective(const ScenarioConfig& cfg, std::shared_ptr<const NoiseBundle> noise);

/* The eight standard variations tested by the battery: +/- the candidate
   itself, four ramps starting at 0, T/4, T/2, 3T/4, and two early/late bump
   profiles. Each is admissible at the candidate or marked otherwise. */
std::vector<std::pair<std::string, std::vector<double>>>
standard_variations(const TimeGrid& grid, const SingularControl& xi_hat);

struct BatteryRow {
    std::string name;
    bool admissible = false;
    GateauxResult gateaux;
};

struct BatteryResult {
    std::vector<BatteryRow> rows;
    bool passed = false; // every admissible row's numeric value <= 3 se above 0
};

BatteryResult run_variation_battery(const ScenarioConfig& cfg,
                                    std::shared_ptr<const NoiseBundle> noise,
                                    const SingularControl& xi_hat,
                                    const std::vector<double>& steps = {2e-2, 1e-2});

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
};

struct RunOutcome {
    int exit_code = 0;     // 0 ok, 2 config, 3 non-convergence, 4 failed assertion
    std::string out_dir;
    std::string message;
};

/* Executes cfg.tasks in order, writes nodes.csv / residuals.csv / sweeps.csv /
   battery.csv as applicable plus report.json, and copies the given verbatim
   config text next to them. */
RunOutcome run_scenario(const ScenarioConfig& cfg, const std::string& config_text,
                        const RunOverrides& overrides);

/* Error-vs-level study. axis: "grid" (n_steps levels), "paths", or
   "iterations" (residual per successive-approximation iteration). */
RunOutcome run_convergence(const ScenarioConfig& cfg, const std::string& config_text,
                           const RunOverrides& overrides, const std::string& axis,
                           const std::vector<std::size_t>& levels);

/* Variation battery at a candidate control (from file values or the
   reflection solver, per config). Exit code 4 when the necessary condition
   fails on an admissible variation. */
RunOutcome run_battery(const ScenarioConfig& cfg, const std::string& config_text,
                       const RunOverrides& overrides,
                       const std::optional<std::vector<double>>& candidate_values);

} // namespace sbsde
