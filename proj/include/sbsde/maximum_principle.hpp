#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbsde/picard.hpp"

namespace sbsde {

/* Control problem data: forward coefficients, recursive-utility drivers and
   objective pieces, each with the partial derivatives the adjoint equations
   need. Empty std::function fields mean "identically zero". The flags declare
   whether the drivers read their xi argument; the variational-inequality
   check only applies when they do not (the xi-derivative terms then appear in
   the Gateaux expression instead).

     performance J = E[ int_0^T f(t, X) dt + phi_term(X(T)) ] + psi(Y(0))
     dY driver pieces: g1(t, x, y, z, xi) dt part, g2(t, y, xi) dxi part
     BSDE terminal: Y(T) = h(X(T))

   Hamiltonians:
     H1 = f + b p + sigma q + lambda g1      (dt part)
     H2 = p theta + lambda g2                (dxi part)            */
struct ControlProblemSpec {
    // forward coefficients and their x-derivatives
    std::function<double(double, double)> b, b_x;
    std::function<double(double, double)> sigma, sigma_x;
    std::function<double(double, double)> theta, theta_x;
    // dt-driver g1(t, x, y, z, xi) and partials
    std::function<double(double, double, double, double, double)> g1, g1_x, g1_y, g1_z, g1_xi;
    // dxi-driver g2(t, y, xi) and partials
    std::function<double(double, double, double)> g2, g2_y, g2_xi;
    // objective pieces and derivatives
    std::function<double(double, double)> f, f_x;
    std::function<double(double)> phi_term, phi_term_x;
    std::function<double(double)> psi, psi_y;
    std::function<double(double)> h, h_x;
    bool g1_depends_on_xi = false;
    bool g2_depends_on_xi = false;
};

struct HamiltonianValue {
    double h1 = 0.0;
    double h2 = 0.0;
};

HamiltonianValue hamiltonian(const ControlProblemSpec& spec, double t, double x, double y,
                             double z, double xi, double p, double q, double lambda);

/* Forward adjoint dlambda = lambda (g1_y dt + g2_y dxi + g1_z dB),
   lambda(0) = psi_y(Y(p, 0)). Both Hamiltonians are affine in lambda, so the
   solution is a stochastic exponential; it is integrated in log space (with
   the usual -g1_z^2/2 dt correction), which is what makes the zero-noise case
   agree with gamma_process to near machine precision instead of O(dxi).
   Requires a control without atoms. Returns a paths x nodes surface. */
Eigen::MatrixXd simulate_lambda(const ControlProblemSpec& spec, const PathBundle& paths,
                                const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z);

/* Backward adjoint

     p(t) = E[ phi_term_x(X_T) + lambda_T h_x(X_T)
               + int_t^T dH1/dx ds + int_t^T dH2/dx dxi | F_t ],

   solved by reusing picard_solve with driver g := dH2/dx = theta_x p and
   drift b := dH1/dx = f_x + b_x p + sigma_x q + lambda g1_x, q read off with
   extract_Z. The drift depends on q, which the successive-approximation
   driver cannot see, so q is frozen surface-wise and refreshed in an outer
   loop (q = 0 first; skipped entirely when sigma_x is zero). */
struct AdjointSolution {
    Eigen::MatrixXd p; // paths x nodes
    Eigen::MatrixXd q;
    std::size_t outer_iterations = 0;
    double q_update_norm = 0.0;
    std::vector<double> residuals; // from the last inner solve
};

struct AdjointSettings {
    double tol = 0.0; // forwarded to picard_solve; <= 0 selects its default
    std::size_t max_iter = 25;
    std::size_t max_outer = 5;
    double q_tol = 0.0; // <= 0 selects 1e-3 * (1 + sup-node mean |q|)
};

AdjointSolution solve_adjoint_p(const ControlProblemSpec& spec, const PathBundle& paths,
                                const Eigen::MatrixXd& Y, const Eigen::MatrixXd& lambda,
                                const RegressionBasis& basis, const AdjointSettings& settings = {});

/* Optimality diagnostics for a candidate control: the barrier
   S(t) = p theta(t, X) + lambda g2(t, Y, xi) must be <= 0 everywhere and its
   dxi integral must vanish. max_excess is the sup over nodes of the sample
   mean of S^+; complementarity_residual is |stieltjes integral of the
   node-wise mean barrier against xi| (the candidate control is deterministic,
   so the mean barrier is the object the reflection construction drives to
   zero on the support of dxi). residual_series holds per-node absolute
   contributions |S_mean(t_i) dxi_i|. Refuses specs whose drivers read xi. */
struct ViReport {
    double max_excess = 0.0;
    double complementarity_residual = 0.0;
    std::vector<double> excess_series;   // mean positive part per node
    std::vector<double> residual_series; // |mean barrier * dxi| per node
    std::vector<double> barrier_mean;    // node-wise mean of p theta + lambda g2
    std::vector<double> barrier_se;
    double tolerance = 0.0;
    bool consistent = false;
};

ViReport check_variational_inequality(const ControlProblemSpec& spec, const PathBundle& paths,
                                      const Eigen::MatrixXd& Y, const Eigen::MatrixXd& lambda,
                                      const Eigen::MatrixXd& p, double tolerance);

/* One evaluation of the performance functional at a control. per_path holds
   contributions whose mean is `value` up to the psi nonlinearity; they are
   the common-random-number pairing unit for difference quotients. y0 is the
   node-0 value of the solved backward equation. */
struct ObjectiveEvaluation {
    double value = 0.0;
    double y0 = 0.0;
    Eigen::VectorXd per_path;
};

using ObjectiveFn = std::function<ObjectiveEvaluation(const SingularControl&)>;

/* Directional derivative of J at xi_hat along the variation beta (node values,
   beta(0-) = 0, finite variation; xi_hat + a beta must stay admissible for
   every step size used, else UnsupportedInput).

   numeric: common-random-number one-sided quotients (J(xi + a beta) - J(xi))/a
   for the given decreasing steps, linearly extrapolated to a = 0 from the two
   smallest steps (Richardson). The standard error is the delta-method one:
   psi' is frozen at the base Y(0) and per-path quotient differences are
   treated as the sampling unit.

   analytic: sample mean of
     int_0^T H2 dbeta + int_0^T beta lambda (g2_xi dxi + g1_xi dt)
   along the surfaces supplied for xi_hat. */
struct GateauxResult {
    double numeric = 0.0;
    double numeric_se = 0.0;
    double analytic = 0.0;
    double analytic_se = 0.0;
    std::vector<double> quotients; // one per step, before extrapolation
};

struct AnalyticGateauxInputs {
    const ControlProblemSpec* spec = nullptr;
    const PathBundle* paths = nullptr;
    const Eigen::MatrixXd* Y = nullptr;
    const Eigen::MatrixXd* lambda = nullptr;
    const Eigen::MatrixXd* p = nullptr;
};

GateauxResult gateaux_derivative(const ObjectiveFn& objective, const SingularControl& xi_hat,
                                 const std::vector<double>& beta, const std::vector<double>& steps,
                                 const AnalyticGateauxInputs* analytic = nullptr,
                                 double psi_slope = 1.0);

/* Central finite-difference audit of every declared derivative field at
   random evaluation points. ok when the worst relative error (guarded by an
   absolute floor) is below rel_tol. */
struct DerivativeCheck {
    double max_rel_error = 0.0;
    std::string worst_field;
    bool ok = true;
};

DerivativeCheck check_derivatives(const ControlProblemSpec& spec, std::uint64_t seed,
                                  std::size_t n_points = 100, double rel_tol = 1e-4);

} // namespace sbsde
