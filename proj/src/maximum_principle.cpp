#include "sbsde/maximum_principle.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "sbsde/errors.hpp"
#include "sbsde/stats.hpp"
#include "sbsde/threading.hpp"

namespace sbsde {

namespace {

double sup_node_mean_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double sup = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double m = (a.col(j) - b.col(j)).cwiseAbs().mean();
        if (m > sup) sup = m;
    }
    return sup;
}

double sup_node_mean_abs(const Eigen::MatrixXd& a) {
    double sup = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double m = a.col(j).cwiseAbs().mean();
        if (m > sup) sup = m;
    }
    return sup;
}

void require_surface(const Eigen::MatrixXd& m, const PathBundle& paths, const char* what) {
    if (m.rows() != paths.X.rows() || m.cols() != paths.X.cols())
        throw std::invalid_argument(std::string(what) + " surface does not match the bundle");
}

} // namespace

HamiltonianValue hamiltonian(const ControlProblemSpec& spec, double t, double x, double y,
                             double z, double xi, double p, double q, double lambda) {
    HamiltonianValue v;
    if (spec.f) v.h1 += spec.f(t, x);
    if (spec.b) v.h1 += spec.b(t, x) * p;
    if (spec.sigma) v.h1 += spec.sigma(t, x) * q;
    if (spec.g1) v.h1 += lambda * spec.g1(t, x, y, z, xi);
    if (spec.theta) v.h2 += p * spec.theta(t, x);
    if (spec.g2) v.h2 += lambda * spec.g2(t, y, xi);
    return v;
}

Eigen::MatrixXd simulate_lambda(const ControlProblemSpec& spec, const PathBundle& paths,
                                const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z) {
    if (paths.control.has_atoms())
        throw UnsupportedInput(
            "simulate_lambda: control has atoms; the exponential form needs a continuous "
            "control");
    require_surface(Y, paths, "simulate_lambda: Y");
    const bool have_z = Z.size() != 0;
    if (have_z) require_surface(Z, paths, "simulate_lambda: Z");

    const TimeGrid& grid = paths.grid;
    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_steps = grid.n_steps();
    const double dt = grid.dt();
    const std::vector<double>& xiv = paths.control.values;
    const Eigen::MatrixXd& db = paths.noise->db;

    Eigen::MatrixXd lambda(static_cast<Eigen::Index>(n_paths),
                           static_cast<Eigen::Index>(n_steps + 1));
    parallel_for_blocks(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const Eigen::Index pi = static_cast<Eigen::Index>(p);
            const double lam0 = spec.psi_y ? spec.psi_y(Y(pi, 0)) : 0.0;
            double log_factor = 0.0;
            lambda(pi, 0) = lam0;
            for (std::size_t i = 0; i < n_steps; ++i) {
                const double t = grid.node(i);
                const double x = paths.X(pi, static_cast<Eigen::Index>(i));
                const double y = Y(pi, static_cast<Eigen::Index>(i));
                const double z = have_z ? Z(pi, static_cast<Eigen::Index>(i)) : 0.0;
                const double xi = xiv[i];
                double drift = 0.0;
                if (spec.g1_y) drift += spec.g1_y(t, x, y, z, xi);
                double vol = 0.0;
                if (spec.g1_z) vol = spec.g1_z(t, x, y, z, xi);
                log_factor += (drift - 0.5 * vol * vol) * dt + vol * db(pi, static_cast<Eigen::Index>(i));
                if (spec.g2_y) log_factor += spec.g2_y(t, y, xi) * (xiv[i + 1] - xiv[i]);
                lambda(pi, static_cast<Eigen::Index>(i + 1)) = lam0 * std::exp(log_factor);
            }
        }
    });
    return lambda;
}

AdjointSolution solve_adjoint_p(const ControlProblemSpec& spec, const PathBundle& paths,
                                const Eigen::MatrixXd& Y, const Eigen::MatrixXd& lambda,
                                const RegressionBasis& basis, const AdjointSettings& settings) {
    require_surface(Y, paths, "solve_adjoint_p: Y");
    require_surface(lambda, paths, "solve_adjoint_p: lambda");

    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_nodes = paths.grid.n_nodes();
    const std::vector<double>& xiv = paths.control.values;
    const Eigen::MatrixXd& X = paths.X;

    const bool q_feedback = static_cast<bool>(spec.sigma_x);
    const bool brownian_only = !paths.noise->has_jumps();
    if (q_feedback && !brownian_only)
        throw UnsupportedInput(
            "solve_adjoint_p: the diffusion derivative couples the solution to its dB "
            "integrand, which can only be read off under Brownian noise");

    Eigen::MatrixXd q_frozen = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_paths),
                                                     static_cast<Eigen::Index>(n_nodes));

    SingularDriver driver;
    driver.terminal = [&spec, &lambda](const PathBundle& pb) {
        const Eigen::Index last = pb.X.cols() - 1;
        Eigen::VectorXd out(pb.X.rows());
        for (Eigen::Index p = 0; p < pb.X.rows(); ++p) {
            const double x = pb.X(p, last);
            double v = 0.0;
            if (spec.phi_term_x) v += spec.phi_term_x(x);
            if (spec.h_x) v += lambda(p, last) * spec.h_x(x);
            out(p) = v;
        }
        return out;
    };
    if (spec.theta_x) {
        driver.g = [&spec, &X](std::size_t p, std::size_t i, double t, double pval, double) {
            return spec.theta_x(t, X(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i))) *
                   pval;
        };
    } else {
        driver.g = [](std::size_t, std::size_t, double, double, double) { return 0.0; };
    }
    if (spec.f_x || spec.b_x || spec.g1_x || q_feedback) {
        /* The z slot of g1_x is fed 0: the backward surface's dB integrand is
           not threaded through here, and no shipped problem reads it. */
        driver.b = [&spec, &X, &Y, &lambda, &q_frozen, &xiv, q_feedback](
                       std::size_t p, std::size_t i, double t, double pval) {
            const Eigen::Index pi = static_cast<Eigen::Index>(p);
            const Eigen::Index ii = static_cast<Eigen::Index>(i);
            const double x = X(pi, ii);
            double v = 0.0;
            if (spec.f_x) v += spec.f_x(t, x);
            if (spec.b_x) v += spec.b_x(t, x) * pval;
            if (q_feedback) v += spec.sigma_x(t, x) * q_frozen(pi, ii);
            if (spec.g1_x) v += lambda(pi, ii) * spec.g1_x(t, x, Y(pi, ii), 0.0, xiv[i]);
            return v;
        };
    }

    AdjointSolution out;
    for (std::size_t outer = 0;; ++outer) {
        BsdeSolution sol = picard_solve(driver, paths, basis, settings.tol, settings.max_iter);
        out.p = std::move(sol.Y);
        out.residuals = std::move(sol.residuals);
        out.outer_iterations = outer + 1;
        if (!q_feedback) {
            out.q = brownian_only ? extract_Z(out.p, paths, basis)
                                  : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_paths),
                                                          static_cast<Eigen::Index>(n_nodes));
            out.q_update_norm = 0.0;
            break;
        }
        Eigen::MatrixXd q_new = extract_Z(out.p, paths, basis);
        const double delta = sup_node_mean_abs_diff(q_new, q_frozen);
        const double q_tol_eff = settings.q_tol > 0.0
                                     ? settings.q_tol
                                     : 1e-3 * (1.0 + sup_node_mean_abs(q_new));
        q_frozen = std::move(q_new); // driver.b holds a reference; next solve sees the update
        out.q = q_frozen;
        out.q_update_norm = delta;
        if (delta < q_tol_eff || outer + 1 >= settings.max_outer) break;
    }
    return out;
}

ViReport check_variational_inequality(const ControlProblemSpec& spec, const PathBundle& paths,
                                      const Eigen::MatrixXd& Y, const Eigen::MatrixXd& lambda,
                                      const Eigen::MatrixXd& p, double tolerance) {
    if (spec.g1_depends_on_xi || spec.g2_depends_on_xi)
        throw UnsupportedInput(
            "check_variational_inequality: drivers reading the control make the barrier "
            "sign test inconclusive; use the directional-derivative battery instead");
    require_surface(Y, paths, "check_variational_inequality: Y");
    require_surface(lambda, paths, "check_variational_inequality: lambda");
    require_surface(p, paths, "check_variational_inequality: p");

    const TimeGrid& grid = paths.grid;
    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_nodes = grid.n_nodes();
    const std::size_t n_steps = grid.n_steps();
    const std::vector<double>& xiv = paths.control.values;

    ViReport report;
    report.tolerance = tolerance;
    report.excess_series.resize(n_nodes);
    report.residual_series.resize(n_nodes);
    report.barrier_mean.resize(n_nodes);
    report.barrier_se.resize(n_nodes);

    Eigen::VectorXd barrier(static_cast<Eigen::Index>(n_paths));
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double t = grid.node(i);
        const Eigen::Index ii = static_cast<Eigen::Index>(i);
        for (std::size_t pth = 0; pth < n_paths; ++pth) {
            const Eigen::Index pi = static_cast<Eigen::Index>(pth);
            double s = 0.0;
            if (spec.theta) s += p(pi, ii) * spec.theta(t, paths.X(pi, ii));
            if (spec.g2) s += lambda(pi, ii) * spec.g2(t, Y(pi, ii), xiv[i]);
            barrier(pi) = s;
        }
        const MeanSe ms = mean_and_se(barrier);
        report.barrier_mean[i] = ms.mean;
        report.barrier_se[i] = ms.se;
        report.excess_series[i] = barrier.cwiseMax(0.0).mean();
        if (report.excess_series[i] > report.max_excess)
            report.max_excess = report.excess_series[i];

        double mass = 0.0; // control mass attached to node i under the left-point convention
        if (i < n_steps) mass = xiv[i + 1] - xiv[i];
        if (i == 0) mass += xiv[0];
        report.residual_series[i] = std::fabs(ms.mean * mass);
    }

    SingularControl xi_copy = paths.control;
    report.complementarity_residual = std::fabs(stieltjes_integral(report.barrier_mean, xi_copy));
    report.consistent = report.max_excess <= tolerance &&
                        report.complementarity_residual <= tolerance;
    return report;
}

GateauxResult gateaux_derivative(const ObjectiveFn& objective, const SingularControl& xi_hat,
                                 const std::vector<double>& beta, const std::vector<double>& steps,
                                 const AnalyticGateauxInputs* analytic, double psi_slope) {
    if (beta.size() != xi_hat.values.size())
        throw std::invalid_argument("gateaux_derivative: variation does not match the control");
    if (steps.empty()) throw std::invalid_argument("gateaux_derivative: need at least one step");
    for (double a : steps)
        if (!(a > 0.0)) throw std::invalid_argument("gateaux_derivative: steps must be positive");

    const ObjectiveEvaluation base = objective(xi_hat);
    const std::size_t n_nodes = xi_hat.values.size();

    GateauxResult result;
    result.quotients.reserve(steps.size());
    std::vector<Eigen::VectorXd> path_quotients; // psi-linearised, one vector per step
    path_quotients.reserve(steps.size());

    for (double a : steps) {
        SingularControl pert = xi_hat;
        for (std::size_t i = 0; i < n_nodes; ++i) pert.values[i] += a * beta[i];
        for (std::size_t i = 0; i < n_nodes; ++i) {
            const bool bad = !std::isfinite(pert.values[i]) || pert.values[i] < 0.0 ||
                             (i > 0 && pert.values[i] < pert.values[i - 1]);
            if (bad)
                throw UnsupportedInput(
                    "gateaux_derivative: the variation leaves the admissible set at step " +
                    std::to_string(a));
        }
        const ObjectiveEvaluation ev = objective(pert);
        result.quotients.push_back((ev.value - base.value) / a);
        if (ev.per_path.size() == base.per_path.size() && base.per_path.size() > 0)
            path_quotients.push_back(psi_slope * (ev.per_path - base.per_path) / a);
        else
            path_quotients.emplace_back();
    }

    // Extrapolate the two smallest steps linearly to a = 0; one step means no
    // extrapolation and the quotient stands as the estimate.
    if (steps.size() == 1) {
        result.numeric = result.quotients[0];
        if (path_quotients[0].size() > 0) result.numeric_se = mean_and_se(path_quotients[0]).se;
    } else {
        std::size_t small = 0, second = 1;
        if (steps[second] < steps[small]) std::swap(small, second);
        for (std::size_t k = 2; k < steps.size(); ++k) {
            if (steps[k] < steps[small]) {
                second = small;
                small = k;
            } else if (steps[k] < steps[second]) {
                second = k;
            }
        }
        const double a_small = steps[small];
        const double a_big = steps[second];
        if (a_big == a_small)
            throw std::invalid_argument("gateaux_derivative: steps must be distinct");
        const double w_small = a_big / (a_big - a_small);
        const double w_big = -a_small / (a_big - a_small);
        result.numeric = w_small * result.quotients[small] + w_big * result.quotients[second];
        if (path_quotients[small].size() > 0 && path_quotients[second].size() > 0) {
            const Eigen::VectorXd extrap =
                w_small * path_quotients[small] + w_big * path_quotients[second];
            result.numeric_se = mean_and_se(extrap).se;
        }
    }

    if (analytic != nullptr) {
        const ControlProblemSpec& spec = *analytic->spec;
        const PathBundle& paths = *analytic->paths;
        const Eigen::MatrixXd& Y = *analytic->Y;
        const Eigen::MatrixXd& lambda = *analytic->lambda;
        const Eigen::MatrixXd& p = *analytic->p;
        const TimeGrid& grid = paths.grid;
        if (grid.n_nodes() != n_nodes)
            throw std::invalid_argument("gateaux_derivative: surfaces do not match the control");
        const std::size_t n_steps = grid.n_steps();
        const std::vector<double>& xiv = xi_hat.values;
        const double dt = grid.dt();

        Eigen::VectorXd per_path(paths.X.rows());
        for (Eigen::Index pi = 0; pi < paths.X.rows(); ++pi) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n_nodes; ++i) {
                const double t = grid.node(i);
                const double x = paths.X(pi, static_cast<Eigen::Index>(i));
                const double y = Y(pi, static_cast<Eigen::Index>(i));
                const double lam = lambda(pi, static_cast<Eigen::Index>(i));
                const double pv = p(pi, static_cast<Eigen::Index>(i));

                double h2 = 0.0;
                if (spec.theta) h2 += pv * spec.theta(t, x);
                if (spec.g2) h2 += lam * spec.g2(t, y, xiv[i]);
                double dbeta = 0.0;
                if (i < n_steps) dbeta = beta[i + 1] - beta[i];
                if (i == 0) dbeta += beta[0]; // beta(0-) = 0, same origin rule as xi
                acc += h2 * dbeta;

                double dxi = 0.0;
                if (i < n_steps) dxi = xiv[i + 1] - xiv[i];
                if (i == 0) dxi += xiv[0];
                if (spec.g2_xi) acc += beta[i] * lam * spec.g2_xi(t, y, xiv[i]) * dxi;
                if (spec.g1_xi && i < n_steps)
                    acc += beta[i] * lam * spec.g1_xi(t, x, y, 0.0, xiv[i]) * dt;
            }
            per_path(pi) = acc;
        }
        const MeanSe ms = mean_and_se(per_path);
        result.analytic = ms.mean;
        result.analytic_se = ms.se;
    }
    return result;
}

namespace {

struct FdPoint {
    double t, x, y, z, xi;
};

void audit(double fd, double exact, const char* field, DerivativeCheck& check) {
    const double denom = std::max(1e-6, std::fabs(exact));
    const double rel = std::fabs(fd - exact) / denom;
    if (rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_field = field;
    }
}

} // namespace

DerivativeCheck check_derivatives(const ControlProblemSpec& spec, std::uint64_t seed,
                                  std::size_t n_points, double rel_tol) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> ut(0.0, 1.5), ux(0.3, 3.0), uy(-1.5, 2.5),
        uz(-1.0, 1.0), uxi(0.0, 2.0);

    DerivativeCheck check;
    auto central = [](const std::function<double(double)>& f, double v) {
        const double h = 1e-5 * (1.0 + std::fabs(v));
        return (f(v + h) - f(v - h)) / (2.0 * h);
    };

    for (std::size_t k = 0; k < n_points; ++k) {
        const FdPoint pt{ut(eng), ux(eng), uy(eng), uz(eng), uxi(eng)};
        if (spec.b && spec.b_x)
            audit(central([&](double v) { return spec.b(pt.t, v); }, pt.x), spec.b_x(pt.t, pt.x),
                  "b_x", check);
        if (spec.sigma && spec.sigma_x)
            audit(central([&](double v) { return spec.sigma(pt.t, v); }, pt.x),
                  spec.sigma_x(pt.t, pt.x), "sigma_x", check);
        if (spec.theta && spec.theta_x)
            audit(central([&](double v) { return spec.theta(pt.t, v); }, pt.x),
                  spec.theta_x(pt.t, pt.x), "theta_x", check);
        if (spec.g1) {
            if (spec.g1_x)
                audit(central([&](double v) { return spec.g1(pt.t, v, pt.y, pt.z, pt.xi); }, pt.x),
                      spec.g1_x(pt.t, pt.x, pt.y, pt.z, pt.xi), "g1_x", check);
            if (spec.g1_y)
                audit(central([&](double v) { return spec.g1(pt.t, pt.x, v, pt.z, pt.xi); }, pt.y),
                      spec.g1_y(pt.t, pt.x, pt.y, pt.z, pt.xi), "g1_y", check);
            if (spec.g1_z)
                audit(central([&](double v) { return spec.g1(pt.t, pt.x, pt.y, v, pt.xi); }, pt.z),
                      spec.g1_z(pt.t, pt.x, pt.y, pt.z, pt.xi), "g1_z", check);
            if (spec.g1_xi)
                audit(central([&](double v) { return spec.g1(pt.t, pt.x, pt.y, pt.z, v); }, pt.xi),
                      spec.g1_xi(pt.t, pt.x, pt.y, pt.z, pt.xi), "g1_xi", check);
        }
        if (spec.g2) {
            if (spec.g2_y)
                audit(central([&](double v) { return spec.g2(pt.t, v, pt.xi); }, pt.y),
                      spec.g2_y(pt.t, pt.y, pt.xi), "g2_y", check);
            if (spec.g2_xi)
                audit(central([&](double v) { return spec.g2(pt.t, pt.y, v); }, pt.xi),
                      spec.g2_xi(pt.t, pt.y, pt.xi), "g2_xi", check);
        }
        if (spec.f && spec.f_x)
            audit(central([&](double v) { return spec.f(pt.t, v); }, pt.x), spec.f_x(pt.t, pt.x),
                  "f_x", check);
        if (spec.phi_term && spec.phi_term_x)
            audit(central([&](double v) { return spec.phi_term(v); }, pt.x),
                  spec.phi_term_x(pt.x), "phi_term_x", check);
        if (spec.psi && spec.psi_y)
            audit(central([&](double v) { return spec.psi(v); }, pt.y), spec.psi_y(pt.y), "psi_y",
                  check);
        if (spec.h && spec.h_x)
            audit(central([&](double v) { return spec.h(v); }, pt.x), spec.h_x(pt.x), "h_x",
                  check);
    }
    check.ok = check.max_rel_error <= rel_tol;
    return check;
}

} // namespace sbsde
