#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sbsde/picard.hpp"

namespace sbsde {

/* Coefficient paths of the affine driver g(t, y, xi) = phi(t) + alpha(t) y + c(t) xi.
   Empty fields mean zero. */
struct LinearDriverSpec {
    std::function<double(double)> phi;
    std::function<double(double)> alpha;
    std::function<double(double)> c;
};

/* Integrating factor Gamma(t) = exp( int_0^t alpha dxi ), left-point sums,
   accumulated in log space. Deterministic because the control is. Requires a
   control without atoms (with jumps the factor is a product, not an
   exponential, and the closed form below does not apply as written). */
struct GammaPath {
    std::vector<double> values; // per node, values[0] = 1
};

GammaPath gamma_process(const std::function<double(double)>& alpha, const SingularControl& xi,
                        const TimeGrid& grid);

/* Closed-form solution of the affine backward equation,

     Y(t_i) = fitted E[ (Gamma(T)/Gamma(t_i)) * terminal
                        + sum_{j >= i} (Gamma(t_j)/Gamma(t_i)) (phi_j + c_j xi_j) dxi_j | state_i ],

   with the terminal node set pathwise. Used as the reference the iterative
   solver is measured against; the two discretize the integrating factor
   differently, so they agree up to O(dt) plus regression noise. */
BsdeSolution linear_solution(const LinearDriverSpec& driver, const Eigen::VectorXd& terminal,
                             const PathBundle& paths, const RegressionBasis& basis);

/* Mean increments of M(t) = Gamma(t) Y(t) + int_0^t Gamma (phi + c xi) dxi,
   which is a martingale for the exact solution, so every node-wise mean
   increment should vanish up to sampling error and O(dt) discretization. */
struct MartingaleReport {
    std::vector<double> increment_mean; // node i -> mean of M(t_{i+1}) - M(t_i)
    std::vector<double> increment_se;
    double max_abs_mean = 0.0;
    std::size_t argmax_node = 0;
};

MartingaleReport martingale_check(const GammaPath& gamma, const Eigen::MatrixXd& Y,
                                  const LinearDriverSpec& driver, const PathBundle& paths);

} // namespace sbsde
