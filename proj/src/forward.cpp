#include "sbsde/forward.hpp"

#include <cmath>
#include <stdexcept>

#include "sbsde/errors.hpp"
#include "sbsde/threading.hpp"

namespace sbsde {

namespace {

void check_inputs(const SingularControl& xi, const std::shared_ptr<const NoiseBundle>& noise) {
    if (!noise) throw std::invalid_argument("simulate: noise bundle is required");
    if (xi.values.size() != noise->grid.n_nodes())
        throw std::invalid_argument("simulate: control does not match the noise grid");
    const ControlValidation v = validate_control(xi, noise->grid);
    if (!v.ok)
        throw std::invalid_argument("simulate: invalid control: " + v.violations.front());
}

} // namespace

PathBundle simulate_forward(const ForwardCoefficients& coeff, double x0,
                            const SingularControl& xi,
                            std::shared_ptr<const NoiseBundle> noise) {
    check_inputs(xi, noise);
    if (!std::isfinite(x0)) throw std::invalid_argument("simulate_forward: x0 must be finite");
    if (coeff.beta && noise->levy.intensity > 0.0 && !coeff.jump_compensator)
        throw UnsupportedInput(
            "simulate_forward: jump coefficient given without its compensator integral");

    const TimeGrid& grid = noise->grid;
    const std::size_t n_paths = noise->n_paths();
    const std::size_t n_steps = grid.n_steps();
    const double dt = grid.dt();

    PathBundle out{grid, {}, noise, xi, x0};
    out.X.resize(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(n_steps + 1));

    // continuous dxi over (t_i, t_{i+1}] and the atom sitting at each node
    std::vector<double> atom(n_steps + 1, 0.0);
    for (const Atom& a : xi.atoms) atom[a.node] = a.size;
    std::vector<double> dxi_cont(n_steps, 0.0);
    for (std::size_t i = 0; i < n_steps; ++i)
        dxi_cont[i] = (xi.values[i + 1] - xi.values[i]) - atom[i + 1];

    const bool with_jumps =
        coeff.beta && noise->levy.intensity > 0.0;

    parallel_for_blocks(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const auto pi = static_cast<Eigen::Index>(p);
            out.X(pi, 0) = x0; // recorded value; an atom at node 0 moves the stepping state only
            double x = x0;
            if (atom[0] > 0.0 && coeff.theta) x += coeff.theta(grid.node(0), x) * atom[0];
            const auto& events = noise->jumps[p];
            std::size_t next_event = 0;
            for (std::size_t i = 0; i < n_steps; ++i) {
                const double t = grid.node(i);
                const double t_next = grid.node(i + 1);
                double xd = x;
                if (coeff.b) xd += coeff.b(t, x) * dt;
                if (coeff.sigma)
                    xd += coeff.sigma(t, x) * noise->db(pi, static_cast<Eigen::Index>(i));
                if (with_jumps) {
                    while (next_event < events.size() && events[next_event].time <= t_next) {
                        xd += coeff.beta(t, x, events[next_event].mark);
                        ++next_event;
                    }
                    xd -= coeff.jump_compensator(t, x) * dt;
                }
                if (coeff.theta && dxi_cont[i] != 0.0) xd += coeff.theta(t, x) * dxi_cont[i];
                // singular step after the diffusive one, theta at the pre-jump state
                if (coeff.theta && atom[i + 1] > 0.0)
                    xd += coeff.theta(t_next, xd) * atom[i + 1];
                out.X(pi, static_cast<Eigen::Index>(i + 1)) = xd;
                x = xd;
            }
        }
    });
    return out;
}

PathBundle simulate_geometric_consumption(const std::function<double(double)>& b0,
                                          const std::function<double(double)>& sigma0,
                                          double x0, const SingularControl& xi,
                                          std::shared_ptr<const NoiseBundle> noise) {
    check_inputs(xi, noise);
    if (!(x0 > 0.0) || !std::isfinite(x0))
        throw std::invalid_argument("simulate_geometric_consumption: x0 must be positive");
    if (noise->levy.intensity > 0.0)
        throw UnsupportedInput(
            "simulate_geometric_consumption: dynamics have no jump term; sample Brownian noise");
    for (const Atom& a : xi.atoms)
        if (a.size >= 1.0)
            throw UnsupportedInput(
                "simulate_geometric_consumption: a relative consumption atom of size >= 1 "
                "empties the state");

    const TimeGrid& grid = noise->grid;
    const std::size_t n_paths = noise->n_paths();
    const std::size_t n_steps = grid.n_steps();
    const double dt = grid.dt();

    PathBundle out{grid, {}, noise, xi, x0};
    out.X.resize(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(n_steps + 1));

    const std::vector<double> xi_cont = xi.continuous_part();
    // log of the accumulated atom product (1 - dxi_k), atoms at nodes <= i
    std::vector<double> log_atom_prod(n_steps + 1, 0.0);
    {
        std::vector<double> atom(n_steps + 1, 0.0);
        for (const Atom& a : xi.atoms) atom[a.node] = a.size;
        double acc = 0.0;
        for (std::size_t i = 0; i <= n_steps; ++i) {
            if (atom[i] > 0.0) acc += std::log1p(-atom[i]);
            log_atom_prod[i] = acc;
        }
    }
    std::vector<double> drift(n_steps), vol(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = grid.node(i);
        const double s = sigma0 ? sigma0(t) : 0.0;
        drift[i] = (b0 ? b0(t) : 0.0) * dt - 0.5 * s * s * dt;
        vol[i] = s;
    }
    const double log_x0 = std::log(x0);

    parallel_for_blocks(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const auto pi = static_cast<Eigen::Index>(p);
            double log_diff = 0.0;
            out.X(pi, 0) = std::exp(log_x0 - xi_cont[0] + log_atom_prod[0]);
            for (std::size_t i = 0; i < n_steps; ++i) {
                log_diff += drift[i] + vol[i] * noise->db(pi, static_cast<Eigen::Index>(i));
                out.X(pi, static_cast<Eigen::Index>(i + 1)) =
                    std::exp(log_x0 + log_diff - xi_cont[i + 1] + log_atom_prod[i + 1]);
            }
        }
    });
    return out;
}

PathBundle simulate_geometric_consumption(double b0, double sigma0, double x0,
                                          const SingularControl& xi,
                                          std::shared_ptr<const NoiseBundle> noise) {
    return simulate_geometric_consumption([b0](double) { return b0; },
                                          [sigma0](double) { return sigma0; }, x0, xi,
                                          std::move(noise));
}

} // namespace sbsde
