#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sbsde/regression.hpp"

namespace sbsde {

/* Driver of the backward equation solved by successive approximation:

     Y(t) = E[ terminal + int_t^T g(s, Y, xi) dxi(s) + int_t^T b(s, Y) ds | F_t ].

   g and b receive (path, node, t, y[, xi]) so frozen per-path surfaces
   (an adjoint reusing this solver, say) can enter through the closure; the
   mathematical signature is g(t, y, xi) and b(t, y). Empty b means zero.
   lip_g / lip_b are declared Lipschitz bounds in y used only by diagnostics. */
struct SingularDriver {
    std::function<double(std::size_t, std::size_t, double, double, double)> g;
    std::function<double(std::size_t, std::size_t, double, double)> b;
    std::function<Eigen::VectorXd(const PathBundle&)> terminal;
    double lip_g = 0.0;
    double lip_b = 0.0;
};

struct BsdeSolution {
    Eigen::MatrixXd Y;              // paths x nodes; terminal column is exact
    Eigen::MatrixXd Z;              // empty until extract_Z fills it
    std::vector<double> residuals;  // phi_n = sup over nodes of mean |Y^n - Y^{n-1}|
    double tolerance_used = 0.0;
};

/* Successive approximation from Y^0 = 0, conditional expectations replaced by
   per-node polynomial regression on (X(t_i), xi(t_i)). The terminal column is
   set pathwise on every iteration, never fitted. Stops when the residual
   drops below tol; tol <= 0 selects 1e-4 * (1 + |mean terminal|). Requires a
   control without atoms. Throws NonConvergence (with the residual history)
   if max_iter is exhausted. */
BsdeSolution picard_solve(const SingularDriver& driver, const PathBundle& paths,
                          const RegressionBasis& basis, double tol = 0.0,
                          std::size_t max_iter = 25);

/* Martingale-increment readout of the dB integrand:

     Z(t_i) = fitted E[ (Y(t_{i+1}) - fitted E[Y(t_{i+1})|state_i]) * dB_i / dt | state_i ].

   Defined on nodes 0..n-1; the terminal column is left zero. Requires a
   Brownian filtration: jump noise in the bundle is refused. */
Eigen::MatrixXd extract_Z(const Eigen::MatrixXd& Y, const PathBundle& paths,
                          const RegressionBasis& basis);

/* Declared driver bounds for the factorial residual envelope
   phi_{n+1} <= sup phi_1 * (c1 * xi(T) + c2 * T)^n / n!. */
struct DriverBounds {
    double c1 = 0.0;
    double c2 = 0.0;
    double xi_total = 0.0;
    double horizon = 0.0;
};

struct ContractionReport {
    std::vector<double> ratios;          // residual[n+1] / residual[n]
    double geometric_rate = 0.0;         // exp of the fitted log-residual slope
    bool eventually_contracting = false; // ratios stay < 1 from some index on
    std::vector<double> factorial_bound; // envelope per iteration, if bounds given
    bool bound_satisfied = true;         // residuals <= slack * envelope
};

/* Needs at least 3 recorded residuals. `slack` loosens the factorial envelope
   check to absorb regression noise (the envelope is exact only for exact
   conditional expectations). */
ContractionReport contraction_diagnostics(const std::vector<double>& residuals,
                                          const std::optional<DriverBounds>& bounds = {},
                                          double slack = 1.0);

} // namespace sbsde
