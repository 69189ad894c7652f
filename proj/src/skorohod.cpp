#include "sbsde/skorohod.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "sbsde/errors.hpp"

namespace sbsde {

ReflectionOutput skorohod_map(const std::vector<double>& free_path, const TimeGrid& grid) {
    if (free_path.size() != grid.n_nodes())
        throw std::invalid_argument("skorohod_map: path does not match the grid");
    for (double v : free_path)
        if (!std::isfinite(v)) throw std::invalid_argument("skorohod_map: path has non-finite values");

    const std::size_t n = free_path.size();
    std::vector<double> values(n);
    double running = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        running = std::max(running, -free_path[i]);
        values[i] = running;
    }

    ReflectionOutput out;
    out.reflected.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.reflected[i] = free_path[i] + values[i];
    std::vector<Atom> atoms;
    if (values[0] > 0.0) atoms.push_back(Atom{0, values[0]});
    out.xi = control_from_values(std::move(values), std::move(atoms));
    for (double r : out.reflected)
        out.sup_violation = std::max(out.sup_violation, std::max(0.0, -r));
    out.boundary_integral = stieltjes_integral(out.reflected, out.xi);
    return out;
}

ComplementarityDiagnostics complementarity_report(const std::vector<double>& barrier,
                                                  const SingularControl& xi, double epsilon) {
    if (barrier.size() != xi.values.size())
        throw std::invalid_argument("complementarity_report: barrier does not match the control");
    if (epsilon < 0.0)
        throw std::invalid_argument("complementarity_report: epsilon must be nonnegative");

    ComplementarityDiagnostics diag;
    diag.epsilon = epsilon;
    const std::size_t n = barrier.size();
    for (std::size_t i = 0; i < n; ++i) {
        diag.max_excess = std::max(diag.max_excess, std::max(0.0, barrier[i]));
        double mass = i + 1 < n ? xi.values[i + 1] - xi.values[i] : 0.0;
        if (i == 0) mass += xi.values[0];
        if (barrier[i] < -epsilon) diag.off_boundary_mass += mass;
    }
    return diag;
}

ConsumptionModel make_consumption_model(double x0, double b0, double sigma0, double alpha) {
    if (!(x0 > 0.0)) throw std::invalid_argument("make_consumption_model: x0 must be positive");
    ConsumptionModel model;
    model.x0 = x0;
    model.b0 = [b0](double) { return b0; };
    model.sigma0 = [sigma0](double) { return sigma0; };
    model.alpha = [alpha](double) { return alpha; };
    model.h = [](double x) { return 1.0 - std::exp(-x); };
    model.h_x = [](double x) { return std::exp(-x); };
    return model;
}

ControlProblemSpec consumption_control_problem(const ConsumptionModel& model) {
    ControlProblemSpec spec;
    const auto b0 = model.b0;
    const auto sigma0 = model.sigma0;
    const auto alpha = model.alpha;
    spec.b = [b0](double t, double x) { return b0(t) * x; };
    spec.b_x = [b0](double t, double) { return b0(t); };
    spec.sigma = [sigma0](double t, double x) { return sigma0(t) * x; };
    spec.sigma_x = [sigma0](double t, double) { return sigma0(t); };
    spec.theta = [](double, double x) { return -x; };
    spec.theta_x = [](double, double) { return -1.0; };
    spec.g2 = [alpha](double t, double y, double) { return alpha(t) * y; };
    spec.g2_y = [alpha](double t, double, double) { return alpha(t); };
    spec.psi = [](double y) { return y; };
    spec.psi_y = [](double) { return 1.0; };
    spec.h = model.h;
    spec.h_x = model.h_x;
    return spec;
}

ReflectionSolveResult solve_reflection_fixed_point(const ConsumptionModel& model,
                                                   const TimeGrid& grid,
                                                   std::shared_ptr<const NoiseBundle> noise,
                                                   const ReflectionSettings& settings) {
    if (!noise) throw std::invalid_argument("solve_reflection_fixed_point: missing noise");
    if (!(settings.rho > 0.0 && settings.rho <= 1.0))
        throw std::invalid_argument("solve_reflection_fixed_point: rho must lie in (0, 1]");
    if (settings.max_sweeps == 0)
        throw std::invalid_argument("solve_reflection_fixed_point: need at least one sweep");
    const std::size_t n_nodes = grid.n_nodes();

    std::vector<double> cand_values(n_nodes, 0.0);
    if (settings.initial_xi) {
        if (settings.initial_xi->size() != n_nodes)
            throw std::invalid_argument(
                "solve_reflection_fixed_point: warm start does not match the grid");
        cand_values = *settings.initial_xi;
        cand_values[0] = 0.0; // the candidate stays continuous; see below
    }

    const ControlProblemSpec spec = consumption_control_problem(model);
    const std::function<double(double)> alpha = model.alpha;

    SingularDriver driver;
    driver.g = [alpha](std::size_t, std::size_t, double t, double y, double) {
        return alpha(t) * y;
    };
    const auto h = model.h;
    driver.terminal = [h](const PathBundle& pb) {
        const Eigen::Index last = pb.X.cols() - 1;
        Eigen::VectorXd out(pb.X.rows());
        for (Eigen::Index p = 0; p < pb.X.rows(); ++p) out(p) = h(pb.X(p, last));
        return out;
    };

    FixedPointTrace trace;
    trace.c0 = settings.c0;

    std::optional<PathBundle> bundle;
    Eigen::MatrixXd Y, Z, lambda, p_surface, q_surface;
    SingularControl cand = control_from_values(cand_values);

    for (std::size_t sweep = 0; sweep < settings.max_sweeps; ++sweep) {
        bundle = simulate_geometric_consumption(model.b0, model.sigma0, model.x0, cand, noise);
        BsdeSolution sol = picard_solve(driver, *bundle, settings.basis, settings.picard_tol,
                                        settings.picard_max_iter);
        Y = std::move(sol.Y);
        Z = extract_Z(Y, *bundle, settings.basis);
        lambda = simulate_lambda(spec, *bundle, Y, Z);
        AdjointSettings adj;
        adj.tol = settings.picard_tol;
        adj.max_iter = settings.picard_max_iter;
        AdjointSolution adjoint = solve_adjoint_p(spec, *bundle, Y, lambda, settings.basis, adj);
        p_surface = std::move(adjoint.p);
        q_surface = std::move(adjoint.q);

        // mean barrier under the current candidate
        std::vector<double> barrier(n_nodes);
        double sup_barrier = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            const double t = grid.node(i);
            double acc = 0.0;
            for (Eigen::Index pi = 0; pi < bundle->X.rows(); ++pi) {
                acc += p_surface(pi, static_cast<Eigen::Index>(i)) *
                           spec.theta(t, bundle->X(pi, static_cast<Eigen::Index>(i))) +
                       lambda(pi, static_cast<Eigen::Index>(i)) *
                           spec.g2(t, Y(pi, static_cast<Eigen::Index>(i)), cand.values[i]);
            }
            barrier[i] = acc / static_cast<double>(bundle->X.rows());
            sup_barrier = std::max(sup_barrier, std::fabs(barrier[i]));
        }
        if (sweep == 0 && settings.c0 <= 0.0) trace.c0 = std::max(sup_barrier, 1e-8);

        /* Push the candidate through the reflection: a positive barrier pulls
           mass in, the running max keeps the result nondecreasing, damping
           keeps successive linearizations honest. Node 0 is pinned to zero so
           the candidate stays continuous; origin demand is carried into the
           first interval by the running max. */
        std::vector<double> blended(n_nodes);
        double update_norm = 0.0;
        double running = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            running = std::max(running, cand.values[i] + barrier[i] / trace.c0);
            const double raw = std::max(0.0, running);
            blended[i] = (1.0 - settings.rho) * cand.values[i] + settings.rho * raw;
        }
        blended[0] = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i)
            update_norm = std::max(update_norm, std::fabs(blended[i] - cand.values[i]));

        SweepRecord record;
        record.xi_values = blended;
        record.barrier = barrier;
        record.update_norm = update_norm;
        record.complementarity =
            complementarity_report(barrier, cand, settings.epsilon_scale * sup_barrier);
        trace.sweeps.push_back(std::move(record));

        if (update_norm < settings.tol) {
            trace.converged = true;
            break; // the state above was computed under `cand`; keep it
        }
        cand = control_from_values(blended);
    }

    ViReport vi =
        check_variational_inequality(spec, *bundle, Y, lambda, p_surface, settings.vi_tol);

    return ReflectionSolveResult{std::move(cand),      std::move(*bundle), std::move(Y),
                                 std::move(Z),         std::move(lambda),  std::move(p_surface),
                                 std::move(q_surface), std::move(trace),   std::move(vi)};
}

} // namespace sbsde
