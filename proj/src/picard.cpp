#include "sbsde/picard.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "sbsde/errors.hpp"
#include "sbsde/stats.hpp"
#include "sbsde/threading.hpp"

namespace sbsde {

namespace {

/* Prepared per-node regressions, reused across iterations (the design depends
   on the state surfaces only, never on the iterate). Above the memory budget
   the cache falls back to rebuilding each node's design on demand. */
class NodeRegressionSet {
public:
    NodeRegressionSet(const PathBundle& paths, const RegressionBasis& basis,
                      std::size_t budget_bytes = std::size_t(512) << 20)
        : paths_(paths), basis_(basis) {
        const std::size_t n_nodes = paths.grid.n_nodes();
        const std::size_t bytes =
            paths.n_paths() * feature_count(basis.degree) * n_nodes * sizeof(double);
        cache_all_ = bytes <= budget_bytes;
        if (cache_all_) cache_.resize(n_nodes);
    }

    const NodeRegression& at(std::size_t node) {
        if (cache_all_) {
            if (!cache_[node])
                cache_[node] = std::make_unique<NodeRegression>(make(node));
            return *cache_[node];
        }
        scratch_ = std::make_unique<NodeRegression>(make(node));
        return *scratch_;
    }

private:
    NodeRegression make(std::size_t node) const {
        return NodeRegression(paths_.X.col(static_cast<Eigen::Index>(node)),
                              paths_.control.values[node], basis_);
    }

    const PathBundle& paths_;
    RegressionBasis basis_;
    bool cache_all_ = false;
    std::vector<std::unique_ptr<NodeRegression>> cache_;
    std::unique_ptr<NodeRegression> scratch_;
};

double sup_node_mean_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double sup = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        const double m = (a.col(i) - b.col(i)).cwiseAbs().mean();
        if (m > sup) sup = m;
    }
    return sup;
}

} // namespace

BsdeSolution picard_solve(const SingularDriver& driver, const PathBundle& paths,
                          const RegressionBasis& basis, double tol, std::size_t max_iter) {
    if (!driver.g) throw std::invalid_argument("picard_solve: driver g is required");
    if (!driver.terminal) throw std::invalid_argument("picard_solve: terminal map is required");
    if (paths.control.has_atoms())
        throw UnsupportedInput(
            "picard_solve: control has atoms; the iteration is defined for continuous "
            "controls only");
    if (max_iter == 0) throw std::invalid_argument("picard_solve: max_iter must be positive");

    const TimeGrid& grid = paths.grid;
    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_steps = grid.n_steps();
    const double dt = grid.dt();
    const std::vector<double>& xiv = paths.control.values;

    const Eigen::VectorXd terminal = driver.terminal(paths);
    if (static_cast<std::size_t>(terminal.size()) != n_paths)
        throw std::invalid_argument("picard_solve: terminal size does not match path count");

    const double tol_eff = tol > 0.0 ? tol : 1e-4 * (1.0 + std::fabs(terminal.mean()));

    NodeRegressionSet regressions(paths, basis);

    BsdeSolution sol;
    sol.tolerance_used = tol_eff;
    sol.Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_paths),
                                  static_cast<Eigen::Index>(n_steps + 1));
    Eigen::MatrixXd next(sol.Y.rows(), sol.Y.cols());
    Eigen::VectorXd running(static_cast<Eigen::Index>(n_paths));
    Eigen::VectorXd target(static_cast<Eigen::Index>(n_paths));

    for (std::size_t it = 1; it <= max_iter; ++it) {
        next.col(static_cast<Eigen::Index>(n_steps)) = terminal; // pathwise, never fitted
        running.setZero();
        for (std::size_t i = n_steps; i-- > 0;) {
            const double t = grid.node(i);
            const double xi_i = xiv[i];
            const double dxi = xiv[i + 1] - xi_i;
            parallel_for_blocks(n_paths, [&](std::size_t begin, std::size_t end) {
                for (std::size_t p = begin; p < end; ++p) {
                    const auto pi = static_cast<Eigen::Index>(p);
                    const double y = sol.Y(pi, static_cast<Eigen::Index>(i));
                    double acc = running[pi] + driver.g(p, i, t, y, xi_i) * dxi;
                    if (driver.b) acc += driver.b(p, i, t, y) * dt;
                    running[pi] = acc;
                    target[pi] = terminal[pi] + acc;
                }
            });
            next.col(static_cast<Eigen::Index>(i)) = regressions.at(i).fitted(target);
        }
        const double phi = sup_node_mean_abs_diff(next, sol.Y);
        sol.residuals.push_back(phi);
        sol.Y.swap(next);
        if (phi < tol_eff) return sol;
    }
    throw NonConvergence("picard_solve: no convergence within " + std::to_string(max_iter) +
                             " iterations (tolerance " + std::to_string(tol_eff) + ")",
                         sol.residuals);
}

Eigen::MatrixXd extract_Z(const Eigen::MatrixXd& Y, const PathBundle& paths,
                          const RegressionBasis& basis) {
    if (!paths.noise) throw std::invalid_argument("extract_Z: paths carry no noise bundle");
    if (paths.noise->has_jumps())
        throw UnsupportedInput(
            "extract_Z: jump noise present; the martingale-increment readout assumes a "
            "Brownian filtration");
    if (Y.rows() != paths.X.rows() || Y.cols() != paths.X.cols())
        throw std::invalid_argument("extract_Z: Y surface does not match the path bundle");

    const std::size_t n_steps = paths.grid.n_steps();
    const double dt = paths.grid.dt();
    NodeRegressionSet regressions(paths, basis);

    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
    for (std::size_t i = 0; i < n_steps; ++i) {
        const NodeRegression& reg = regressions.at(i);
        const Eigen::VectorXd next = Y.col(static_cast<Eigen::Index>(i + 1));
        const Eigen::VectorXd martingale_part = next - reg.fitted(next);
        const Eigen::VectorXd target =
            martingale_part.cwiseProduct(paths.noise->db.col(static_cast<Eigen::Index>(i))) / dt;
        Z.col(static_cast<Eigen::Index>(i)) = reg.fitted(target);
    }
    return Z; // terminal column stays zero: no dB increment starts at T
}

ContractionReport contraction_diagnostics(const std::vector<double>& residuals,
                                          const std::optional<DriverBounds>& bounds,
                                          double slack) {
    if (residuals.size() < 3)
        throw std::invalid_argument(
            "contraction_diagnostics: need at least 3 recorded residuals");

    ContractionReport report;
    report.ratios.reserve(residuals.size() - 1);
    for (std::size_t n = 0; n + 1 < residuals.size(); ++n)
        report.ratios.push_back(residuals[n] > 0.0 ? residuals[n + 1] / residuals[n] : 0.0);

    // contracting from some index on, and still contracting at the end
    std::size_t first_bad_tail = report.ratios.size();
    while (first_bad_tail > 0 && report.ratios[first_bad_tail - 1] < 1.0) --first_bad_tail;
    report.eventually_contracting = first_bad_tail < report.ratios.size();

    // least-squares slope of log residuals over iteration index
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t m = 0;
        for (std::size_t n = 0; n < residuals.size(); ++n) {
            if (residuals[n] <= 0.0) continue;
            const double xn = static_cast<double>(n);
            const double yn = std::log(residuals[n]);
            sx += xn; sy += yn; sxx += xn * xn; sxy += xn * yn;
            ++m;
        }
        if (m >= 2) {
            const double denom = static_cast<double>(m) * sxx - sx * sx;
            if (denom > 0.0)
                report.geometric_rate = std::exp((static_cast<double>(m) * sxy - sx * sy) / denom);
        }
    }

    if (bounds) {
        const double mass = bounds->c1 * bounds->xi_total + bounds->c2 * bounds->horizon;
        double envelope = residuals.front(); // phi_1 * mass^n / n!
        report.factorial_bound.push_back(envelope);
        for (std::size_t n = 1; n < residuals.size(); ++n) {
            envelope *= mass / static_cast<double>(n);
            report.factorial_bound.push_back(envelope);
            if (residuals[n] > slack * envelope + 1e-14) report.bound_satisfied = false;
        }
    }
    return report;
}

} // namespace sbsde
