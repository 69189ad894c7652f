#include <memory>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sbsde/control.hpp"
#include "sbsde/errors.hpp"
#include "sbsde/forward.hpp"
#include "sbsde/grid.hpp"
#include "sbsde/linear.hpp"
#include "sbsde/maximum_principle.hpp"
#include "sbsde/noise.hpp"
#include "sbsde/picard.hpp"
#include "sbsde/regression.hpp"
#include "sbsde/skorohod.hpp"
#include "sbsde/version.hpp"

namespace py = pybind11;
using namespace sbsde;

namespace {

std::shared_ptr<NoiseBundle> sample_noise_py(const TimeGrid& grid, std::size_t n_paths,
                                             std::uint64_t seed, const LevySpec& levy) {
    // pybind11 holders are non-const; the bundle is immutable by convention
    return std::const_pointer_cast<NoiseBundle>(sample_noise(grid, n_paths, seed, levy));
}

} // namespace

PYBIND11_MODULE(_sbsde, m) {
    m.doc() = "Backward equations driven by singular controls: solvers, closed-form "
              "oracles, optimality diagnostics and the consumption fixed point.";
    m.attr("__version__") = version();

    py::register_exception<NonConvergence>(m, "NonConvergenceError");

    py::class_<TimeGrid>(m, "TimeGrid")
        .def(py::init<double, std::size_t>(), py::arg("horizon"), py::arg("n_steps"))
        .def_property_readonly("horizon", &TimeGrid::horizon)
        .def_property_readonly("n_steps", &TimeGrid::n_steps)
        .def_property_readonly("n_nodes", &TimeGrid::n_nodes)
        .def_property_readonly("dt", &TimeGrid::dt)
        .def("node", &TimeGrid::node, py::arg("i"))
        .def_property_readonly("nodes", &TimeGrid::nodes);

    py::class_<Atom>(m, "Atom")
        .def(py::init([](std::size_t node, double size) { return Atom{node, size}; }),
             py::arg("node"), py::arg("size"))
        .def_readwrite("node", &Atom::node)
        .def_readwrite("size", &Atom::size);

    py::class_<SingularControl>(m, "SingularControl")
        .def(py::init<>())
        .def_readwrite("values", &SingularControl::values)
        .def_readwrite("atoms", &SingularControl::atoms)
        .def("has_atoms", &SingularControl::has_atoms)
        .def("total", &SingularControl::total)
        .def("atom_at", &SingularControl::atom_at, py::arg("node"))
        .def("continuous_part", &SingularControl::continuous_part);

    m.def("zero_control", &zero_control, py::arg("grid"));
    m.def("linear_control", &linear_control, py::arg("grid"), py::arg("rate"));
    m.def("control_from_values", &control_from_values, py::arg("values"),
          py::arg("atoms") = std::vector<Atom>{});

    py::class_<ControlValidation>(m, "ControlValidation")
        .def_readonly("ok", &ControlValidation::ok)
        .def_readonly("violations", &ControlValidation::violations);
    m.def("validate_control", &validate_control, py::arg("control"), py::arg("grid"));

    m.def(
        "stieltjes_integral",
        [](const std::vector<double>& f, const SingularControl& xi) {
            return stieltjes_integral(f, xi);
        },
        py::arg("f"), py::arg("control"));
    m.def(
        "stieltjes_integral_window",
        [](const std::vector<double>& f, const SingularControl& xi, std::size_t a,
           std::size_t b) { return stieltjes_integral(f, xi, a, b); },
        py::arg("f"), py::arg("control"), py::arg("a_node"), py::arg("b_node"));

    py::enum_<MarkFamily>(m, "MarkFamily")
        .value("normal", MarkFamily::normal)
        .value("exponential", MarkFamily::exponential)
        .value("pareto", MarkFamily::pareto);

    py::class_<LevySpec>(m, "LevySpec")
        .def(py::init<>())
        .def_readwrite("intensity", &LevySpec::intensity)
        .def_readwrite("family", &LevySpec::family)
        .def_readwrite("par1", &LevySpec::par1)
        .def_readwrite("par2", &LevySpec::par2);
    m.def("validate_levy", &validate_levy, py::arg("spec"));
    m.def("mark_mean", &mark_mean, py::arg("spec"));
    m.def("mark_second_moment", &mark_second_moment, py::arg("spec"));

    py::class_<JumpEvent>(m, "JumpEvent")
        .def_readonly("time", &JumpEvent::time)
        .def_readonly("mark", &JumpEvent::mark);

    py::class_<NoiseBundle, std::shared_ptr<NoiseBundle>>(m, "NoiseBundle")
        .def_readonly("seed", &NoiseBundle::seed)
        .def_readonly("db", &NoiseBundle::db)
        .def_readonly("jumps", &NoiseBundle::jumps)
        .def("n_paths", &NoiseBundle::n_paths)
        .def("has_jumps", &NoiseBundle::has_jumps);
    m.def("sample_noise", &sample_noise_py, py::arg("grid"), py::arg("n_paths"), py::arg("seed"),
          py::arg("levy") = LevySpec{});

    py::class_<ForwardCoefficients>(m, "ForwardCoefficients")
        .def(py::init<>())
        .def_readwrite("b", &ForwardCoefficients::b)
        .def_readwrite("sigma", &ForwardCoefficients::sigma)
        .def_readwrite("beta", &ForwardCoefficients::beta)
        .def_readwrite("jump_compensator", &ForwardCoefficients::jump_compensator)
        .def_readwrite("theta", &ForwardCoefficients::theta);

    py::class_<PathBundle>(m, "PathBundle")
        .def_readonly("grid", &PathBundle::grid)
        .def_readonly("X", &PathBundle::X)
        .def_readonly("control", &PathBundle::control)
        .def_readonly("x0", &PathBundle::x0)
        .def("n_paths", &PathBundle::n_paths);

    m.def(
        "simulate_forward",
        [](const ForwardCoefficients& coeff, double x0, const SingularControl& xi,
           std::shared_ptr<NoiseBundle> noise) {
            return simulate_forward(coeff, x0, xi, std::move(noise));
        },
        py::arg("coefficients"), py::arg("x0"), py::arg("control"), py::arg("noise"));
    m.def(
        "simulate_geometric_consumption",
        [](double b0, double sigma0, double x0, const SingularControl& xi,
           std::shared_ptr<NoiseBundle> noise) {
            return simulate_geometric_consumption(b0, sigma0, x0, xi, std::move(noise));
        },
        py::arg("b0"), py::arg("sigma0"), py::arg("x0"), py::arg("control"), py::arg("noise"));

    py::class_<RegressionBasis>(m, "RegressionBasis")
        .def(py::init<>())
        .def(py::init([](int degree, double ridge) {
                 RegressionBasis b;
                 b.degree = degree;
                 b.ridge = ridge;
                 return b;
             }),
             py::arg("degree"), py::arg("ridge") = 1e-8)
        .def_readwrite("degree", &RegressionBasis::degree)
        .def_readwrite("ridge", &RegressionBasis::ridge);
    m.def("feature_count", &feature_count, py::arg("degree"));
    m.def(
        "estimate_conditional_expectation",
        [](const Eigen::VectorXd& targets, const Eigen::VectorXd& x, double xi_value,
           const RegressionBasis& basis) {
            return estimate_conditional_expectation(targets, x, xi_value, basis);
        },
        py::arg("targets"), py::arg("x"), py::arg("xi_value"),
        py::arg("basis") = RegressionBasis{});

    py::class_<SingularDriver>(m, "SingularDriver")
        .def(py::init<>())
        .def_readwrite("g", &SingularDriver::g)
        .def_readwrite("b", &SingularDriver::b)
        .def_readwrite("terminal", &SingularDriver::terminal)
        .def_readwrite("lip_g", &SingularDriver::lip_g)
        .def_readwrite("lip_b", &SingularDriver::lip_b);

    py::class_<BsdeSolution>(m, "BsdeSolution")
        .def_readonly("Y", &BsdeSolution::Y)
        .def_readonly("Z", &BsdeSolution::Z)
        .def_readonly("residuals", &BsdeSolution::residuals)
        .def_readonly("tolerance_used", &BsdeSolution::tolerance_used);

    m.def("picard_solve", &picard_solve, py::arg("driver"), py::arg("paths"), py::arg("basis"),
          py::arg("tol") = 0.0, py::arg("max_iter") = 25);
    m.def("extract_Z", &extract_Z, py::arg("Y"), py::arg("paths"), py::arg("basis"));

    py::class_<DriverBounds>(m, "DriverBounds")
        .def(py::init<>())
        .def_readwrite("c1", &DriverBounds::c1)
        .def_readwrite("c2", &DriverBounds::c2)
        .def_readwrite("xi_total", &DriverBounds::xi_total)
        .def_readwrite("horizon", &DriverBounds::horizon);
    py::class_<ContractionReport>(m, "ContractionReport")
        .def_readonly("ratios", &ContractionReport::ratios)
        .def_readonly("geometric_rate", &ContractionReport::geometric_rate)
        .def_readonly("eventually_contracting", &ContractionReport::eventually_contracting)
        .def_readonly("factorial_bound", &ContractionReport::factorial_bound)
        .def_readonly("bound_satisfied", &ContractionReport::bound_satisfied);
    m.def("contraction_diagnostics", &contraction_diagnostics, py::arg("residuals"),
          py::arg("bounds") = std::optional<DriverBounds>{}, py::arg("slack") = 1.0);

    py::class_<GammaPath>(m, "GammaPath").def_readonly("values", &GammaPath::values);
    py::class_<LinearDriverSpec>(m, "LinearDriverSpec")
        .def(py::init<>())
        .def_readwrite("phi", &LinearDriverSpec::phi)
        .def_readwrite("alpha", &LinearDriverSpec::alpha)
        .def_readwrite("c", &LinearDriverSpec::c);
    m.def("gamma_process", &gamma_process, py::arg("alpha"), py::arg("control"), py::arg("grid"));
    m.def("linear_solution", &linear_solution, py::arg("driver"), py::arg("terminal"),
          py::arg("paths"), py::arg("basis") = RegressionBasis{});
    py::class_<MartingaleReport>(m, "MartingaleReport")
        .def_readonly("increment_mean", &MartingaleReport::increment_mean)
        .def_readonly("increment_se", &MartingaleReport::increment_se)
        .def_readonly("max_abs_mean", &MartingaleReport::max_abs_mean)
        .def_readonly("argmax_node", &MartingaleReport::argmax_node);
    m.def("martingale_check", &martingale_check, py::arg("gamma"), py::arg("Y"),
          py::arg("driver"), py::arg("paths"));

    py::class_<ControlProblemSpec>(m, "ControlProblemSpec")
        .def(py::init<>())
        .def_readwrite("b", &ControlProblemSpec::b)
        .def_readwrite("b_x", &ControlProblemSpec::b_x)
        .def_readwrite("sigma", &ControlProblemSpec::sigma)
        .def_readwrite("sigma_x", &ControlProblemSpec::sigma_x)
        .def_readwrite("theta", &ControlProblemSpec::theta)
        .def_readwrite("theta_x", &ControlProblemSpec::theta_x)
        .def_readwrite("g1", &ControlProblemSpec::g1)
        .def_readwrite("g1_x", &ControlProblemSpec::g1_x)
        .def_readwrite("g1_y", &ControlProblemSpec::g1_y)
        .def_readwrite("g1_z", &ControlProblemSpec::g1_z)
        .def_readwrite("g1_xi", &ControlProblemSpec::g1_xi)
        .def_readwrite("g2", &ControlProblemSpec::g2)
        .def_readwrite("g2_y", &ControlProblemSpec::g2_y)
        .def_readwrite("g2_xi", &ControlProblemSpec::g2_xi)
        .def_readwrite("f", &ControlProblemSpec::f)
        .def_readwrite("f_x", &ControlProblemSpec::f_x)
        .def_readwrite("phi_term", &ControlProblemSpec::phi_term)
        .def_readwrite("phi_term_x", &ControlProblemSpec::phi_term_x)
        .def_readwrite("psi", &ControlProblemSpec::psi)
        .def_readwrite("psi_y", &ControlProblemSpec::psi_y)
        .def_readwrite("h", &ControlProblemSpec::h)
        .def_readwrite("h_x", &ControlProblemSpec::h_x)
        .def_readwrite("g1_depends_on_xi", &ControlProblemSpec::g1_depends_on_xi)
        .def_readwrite("g2_depends_on_xi", &ControlProblemSpec::g2_depends_on_xi);

    py::class_<HamiltonianValue>(m, "HamiltonianValue")
        .def_readonly("h1", &HamiltonianValue::h1)
        .def_readonly("h2", &HamiltonianValue::h2);
    m.def("hamiltonian", &hamiltonian, py::arg("spec"), py::arg("t"), py::arg("x"), py::arg("y"),
          py::arg("z"), py::arg("xi"), py::arg("p"), py::arg("q"), py::arg("lam"));
    m.def("simulate_lambda", &simulate_lambda, py::arg("spec"), py::arg("paths"), py::arg("Y"),
          py::arg("Z") = Eigen::MatrixXd());

    py::class_<AdjointSettings>(m, "AdjointSettings")
        .def(py::init<>())
        .def_readwrite("tol", &AdjointSettings::tol)
        .def_readwrite("max_iter", &AdjointSettings::max_iter)
        .def_readwrite("max_outer", &AdjointSettings::max_outer)
        .def_readwrite("q_tol", &AdjointSettings::q_tol);
    py::class_<AdjointSolution>(m, "AdjointSolution")
        .def_readonly("p", &AdjointSolution::p)
        .def_readonly("q", &AdjointSolution::q)
        .def_readonly("outer_iterations", &AdjointSolution::outer_iterations)
        .def_readonly("q_update_norm", &AdjointSolution::q_update_norm)
        .def_readonly("residuals", &AdjointSolution::residuals);
    m.def("solve_adjoint_p", &solve_adjoint_p, py::arg("spec"), py::arg("paths"), py::arg("Y"),
          py::arg("lam"), py::arg("basis") = RegressionBasis{},
          py::arg("settings") = AdjointSettings{});

    py::class_<ViReport>(m, "ViReport")
        .def_readonly("max_excess", &ViReport::max_excess)
        .def_readonly("complementarity_residual", &ViReport::complementarity_residual)
        .def_readonly("excess_series", &ViReport::excess_series)
        .def_readonly("residual_series", &ViReport::residual_series)
        .def_readonly("barrier_mean", &ViReport::barrier_mean)
        .def_readonly("barrier_se", &ViReport::barrier_se)
        .def_readonly("tolerance", &ViReport::tolerance)
        .def_readonly("consistent", &ViReport::consistent);
    m.def("check_variational_inequality", &check_variational_inequality, py::arg("spec"),
          py::arg("paths"), py::arg("Y"), py::arg("lam"), py::arg("p"), py::arg("tolerance"));

    py::class_<DerivativeCheck>(m, "DerivativeCheck")
        .def_readonly("max_rel_error", &DerivativeCheck::max_rel_error)
        .def_readonly("worst_field", &DerivativeCheck::worst_field)
        .def_readonly("ok", &DerivativeCheck::ok);
    m.def("check_derivatives", &check_derivatives, py::arg("spec"), py::arg("seed"),
          py::arg("n_points") = 100, py::arg("rel_tol") = 1e-4);

    py::class_<ReflectionOutput>(m, "ReflectionOutput")
        .def_readonly("reflected", &ReflectionOutput::reflected)
        .def_readonly("xi", &ReflectionOutput::xi)
        .def_readonly("sup_violation", &ReflectionOutput::sup_violation)
        .def_readonly("boundary_integral", &ReflectionOutput::boundary_integral);
    m.def("skorohod_map", &skorohod_map, py::arg("free_path"), py::arg("grid"));

    py::class_<ComplementarityDiagnostics>(m, "ComplementarityDiagnostics")
        .def_readonly("max_excess", &ComplementarityDiagnostics::max_excess)
        .def_readonly("off_boundary_mass", &ComplementarityDiagnostics::off_boundary_mass)
        .def_readonly("epsilon", &ComplementarityDiagnostics::epsilon);
    m.def("complementarity_report", &complementarity_report, py::arg("barrier"),
          py::arg("control"), py::arg("epsilon"));

    py::class_<ConsumptionModel>(m, "ConsumptionModel")
        .def(py::init<>())
        .def_readwrite("x0", &ConsumptionModel::x0)
        .def_readwrite("b0", &ConsumptionModel::b0)
        .def_readwrite("sigma0", &ConsumptionModel::sigma0)
        .def_readwrite("alpha", &ConsumptionModel::alpha)
        .def_readwrite("h", &ConsumptionModel::h)
        .def_readwrite("h_x", &ConsumptionModel::h_x);
    m.def("make_consumption_model", &make_consumption_model, py::arg("x0"), py::arg("b0"),
          py::arg("sigma0"), py::arg("alpha"));
    m.def("consumption_control_problem", &consumption_control_problem, py::arg("model"));

    py::class_<ReflectionSettings>(m, "ReflectionSettings")
        .def(py::init<>())
        .def_readwrite("rho", &ReflectionSettings::rho)
        .def_readwrite("max_sweeps", &ReflectionSettings::max_sweeps)
        .def_readwrite("tol", &ReflectionSettings::tol)
        .def_readwrite("epsilon_scale", &ReflectionSettings::epsilon_scale)
        .def_readwrite("vi_tol", &ReflectionSettings::vi_tol)
        .def_readwrite("c0", &ReflectionSettings::c0)
        .def_readwrite("basis", &ReflectionSettings::basis)
        .def_readwrite("picard_tol", &ReflectionSettings::picard_tol)
        .def_readwrite("picard_max_iter", &ReflectionSettings::picard_max_iter)
        .def_readwrite("initial_xi", &ReflectionSettings::initial_xi);

    py::class_<SweepRecord>(m, "SweepRecord")
        .def_readonly("xi_values", &SweepRecord::xi_values)
        .def_readonly("barrier", &SweepRecord::barrier)
        .def_readonly("update_norm", &SweepRecord::update_norm)
        .def_readonly("complementarity", &SweepRecord::complementarity);
    py::class_<FixedPointTrace>(m, "FixedPointTrace")
        .def_readonly("sweeps", &FixedPointTrace::sweeps)
        .def_readonly("converged", &FixedPointTrace::converged)
        .def_readonly("c0", &FixedPointTrace::c0);
    py::class_<ReflectionSolveResult>(m, "ReflectionSolveResult")
        .def_readonly("xi", &ReflectionSolveResult::xi)
        .def_readonly("paths", &ReflectionSolveResult::paths)
        .def_readonly("Y", &ReflectionSolveResult::Y)
        .def_readonly("Z", &ReflectionSolveResult::Z)
        .def_readonly("lam", &ReflectionSolveResult::lambda)
        .def_readonly("p", &ReflectionSolveResult::p)
        .def_readonly("q", &ReflectionSolveResult::q)
        .def_readonly("trace", &ReflectionSolveResult::trace)
        .def_readonly("vi", &ReflectionSolveResult::vi);
    m.def(
        "solve_reflection_fixed_point",
        [](const ConsumptionModel& model, const TimeGrid& grid,
           std::shared_ptr<NoiseBundle> noise, const ReflectionSettings& settings) {
            return solve_reflection_fixed_point(model, grid, std::move(noise), settings);
        },
        py::arg("model"), py::arg("grid"), py::arg("noise"),
        py::arg("settings") = ReflectionSettings{});
}
