#include "sbsde/linear.hpp"

#include <cmath>
#include <stdexcept>

#include "sbsde/errors.hpp"
#include "sbsde/stats.hpp"
#include "sbsde/threading.hpp"

namespace sbsde {

GammaPath gamma_process(const std::function<double(double)>& alpha, const SingularControl& xi,
                        const TimeGrid& grid) {
    if (xi.has_atoms())
        throw UnsupportedInput(
            "gamma_process: control has atoms; the exponential form needs a continuous "
            "control");
    if (xi.values.size() != grid.n_nodes())
        throw std::invalid_argument("gamma_process: control does not match the grid");
    GammaPath gamma;
    gamma.values.resize(grid.n_nodes());
    double log_gamma = 0.0;
    gamma.values[0] = 1.0;
    for (std::size_t i = 0; i + 1 < grid.n_nodes(); ++i) {
        const double a = alpha ? alpha(grid.node(i)) : 0.0;
        log_gamma += a * (xi.values[i + 1] - xi.values[i]); // left-point sum
        gamma.values[i + 1] = std::exp(log_gamma);
    }
    return gamma;
}

BsdeSolution linear_solution(const LinearDriverSpec& driver, const Eigen::VectorXd& terminal,
                             const PathBundle& paths, const RegressionBasis& basis) {
    const TimeGrid& grid = paths.grid;
    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_steps = grid.n_steps();
    if (static_cast<std::size_t>(terminal.size()) != n_paths)
        throw std::invalid_argument("linear_solution: terminal size does not match path count");

    const GammaPath gamma = gamma_process(driver.alpha, paths.control, grid);
    const std::vector<double>& xiv = paths.control.values;

    // source(t_j) = Gamma_j * (phi_j + c_j xi_j) dxi_j, deterministic
    std::vector<double> source(n_steps, 0.0);
    for (std::size_t j = 0; j < n_steps; ++j) {
        const double t = grid.node(j);
        const double inhom = (driver.phi ? driver.phi(t) : 0.0) +
                             (driver.c ? driver.c(t) : 0.0) * xiv[j];
        source[j] = gamma.values[j] * inhom * (xiv[j + 1] - xiv[j]);
    }

    BsdeSolution sol;
    sol.Y.resize(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(n_steps + 1));
    sol.Y.col(static_cast<Eigen::Index>(n_steps)) = terminal; // Y(T) = terminal pathwise

    // W_i = Gamma_T terminal + sum_{j >= i} source_j, fitted as W_i / Gamma_i
    Eigen::VectorXd w = gamma.values[n_steps] * terminal;
    Eigen::VectorXd target(static_cast<Eigen::Index>(n_paths));
    for (std::size_t i = n_steps; i-- > 0;) {
        w.array() += source[i];
        target = w / gamma.values[i];
        const NodeRegression reg(paths.X.col(static_cast<Eigen::Index>(i)), xiv[i], basis);
        sol.Y.col(static_cast<Eigen::Index>(i)) = reg.fitted(target);
    }
    return sol;
}

MartingaleReport martingale_check(const GammaPath& gamma, const Eigen::MatrixXd& Y,
                                  const LinearDriverSpec& driver, const PathBundle& paths) {
    const TimeGrid& grid = paths.grid;
    const std::size_t n_steps = grid.n_steps();
    if (gamma.values.size() != grid.n_nodes())
        throw std::invalid_argument("martingale_check: gamma does not match the grid");
    if (Y.cols() != static_cast<Eigen::Index>(grid.n_nodes()) || Y.rows() != paths.X.rows())
        throw std::invalid_argument("martingale_check: Y surface does not match the bundle");

    const std::vector<double>& xiv = paths.control.values;
    MartingaleReport report;
    report.increment_mean.resize(n_steps);
    report.increment_se.resize(n_steps);

    /* M(t_{i+1}) - M(t_i) per path; the running compensator sum enters as its
       increment Gamma_i (phi_i + c_i xi_i) dxi_i, a deterministic shift. */
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = grid.node(i);
        const double inhom = (driver.phi ? driver.phi(t) : 0.0) +
                             (driver.c ? driver.c(t) : 0.0) * xiv[i];
        const double shift = gamma.values[i] * inhom * (xiv[i + 1] - xiv[i]);
        const Eigen::VectorXd incr =
            gamma.values[i + 1] * Y.col(static_cast<Eigen::Index>(i + 1)) -
            gamma.values[i] * Y.col(static_cast<Eigen::Index>(i)) +
            Eigen::VectorXd::Constant(Y.rows(), shift);
        const MeanSe ms = mean_and_se(incr);
        report.increment_mean[i] = ms.mean;
        report.increment_se[i] = ms.se;
        if (std::fabs(ms.mean) > report.max_abs_mean) {
            report.max_abs_mean = std::fabs(ms.mean);
            report.argmax_node = i;
        }
    }
    return report;
}

} // namespace sbsde
