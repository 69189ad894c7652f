#pragma once

#include <functional>
#include <memory>

#include <Eigen/Dense>

#include "sbsde/control.hpp"
#include "sbsde/noise.hpp"

namespace sbsde {

/* Coefficients of the controlled jump diffusion

     dX = b(t,X) dt + sigma(t,X) dB + jumps - compensator dt + theta(t,X) dxi.

   Empty std::function fields mean "identically zero". When `beta` is set and
   the noise has positive jump intensity, `jump_compensator(t, x)` must supply
   the mark-distribution integral of beta(t, x, .) times the intensity; it is
   subtracted continuously each step so the compound Poisson term enters
   compensated. Requiring it explicitly keeps the compensation exact instead
   of guessing it from the mark mean. */
struct ForwardCoefficients {
    std::function<double(double, double)> b;
    std::function<double(double, double)> sigma;
    std::function<double(double, double, double)> beta; // (t, x, mark)
    std::function<double(double, double)> jump_compensator;
    std::function<double(double, double)> theta;
};

/* Simulated state surface plus everything that produced it. X(p, i) is path
   p at node i. X(t_0) = x0 on every path; an atom at node 0 (legal for the
   control) is applied to the stepping state only, so its effect shows from
   node 1 on. One documented exception lives in the geometric scheme below. */
struct PathBundle {
    TimeGrid grid;
    Eigen::MatrixXd X; // paths x nodes
    std::shared_ptr<const NoiseBundle> noise;
    SingularControl control;
    double x0 = 0.0;

    std::size_t n_paths() const noexcept { return static_cast<std::size_t>(X.rows()); }
};

/* Euler scheme, coefficients frozen at the left node of each step. The
   continuous part of dxi over (t_i, t_{i+1}] enters with theta(t_i, X_i);
   an atom at node i+1 is applied after the diffusive update with theta
   evaluated at the pre-jump state, i.e. diffusion first, then the singular
   step at the same node. */
PathBundle simulate_forward(const ForwardCoefficients& coeff, double x0,
                            const SingularControl& xi,
                            std::shared_ptr<const NoiseBundle> noise);

/* Relative-consumption geometric dynamics

     dX = X (b0(t) dt + sigma0(t) dB) - X(t-) dxi,

   simulated in log space so X stays positive between consumption events:

     X(t_i) = x0 * exp( sum_{j<i} (b0 - sigma0^2/2) dt + sigma0 dB_j )
                 * exp( -xi_c(t_i) ) * prod_{atoms at k <= i} (1 - dxi_k).

   Note the atom product runs over atoms at nodes <= i: an atom at node 0
   multiplies into X(t_0) here, unlike the Euler scheme above. An atom of
   size >= 1 would empty or flip the state and is refused. */
PathBundle simulate_geometric_consumption(const std::function<double(double)>& b0,
                                          const std::function<double(double)>& sigma0,
                                          double x0, const SingularControl& xi,
                                          std::shared_ptr<const NoiseBundle> noise);
PathBundle simulate_geometric_consumption(double b0, double sigma0, double x0,
                                          const SingularControl& xi,
                                          std::shared_ptr<const NoiseBundle> noise);

} // namespace sbsde
