#include "sbsde/control.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace sbsde {

double SingularControl::atom_at(std::size_t node) const {
    for (const Atom& a : atoms)
        if (a.node == node) return a.size;
    return 0.0;
}

std::vector<double> SingularControl::continuous_part() const {
    std::vector<double> out = values;
    double removed = 0.0;
    std::size_t next_atom = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        while (next_atom < atoms.size() && atoms[next_atom].node == i)
            removed += atoms[next_atom++].size;
        out[i] -= removed;
    }
    return out;
}

SingularControl zero_control(const TimeGrid& grid) {
    SingularControl xi;
    xi.values.assign(grid.n_nodes(), 0.0);
    return xi;
}

SingularControl linear_control(const TimeGrid& grid, double rate) {
    if (rate < 0.0 || !std::isfinite(rate))
        throw std::invalid_argument("linear_control: rate must be nonnegative and finite");
    SingularControl xi;
    xi.values.resize(grid.n_nodes());
    for (std::size_t i = 0; i < grid.n_nodes(); ++i) xi.values[i] = rate * grid.node(i);
    return xi;
}

SingularControl control_from_values(std::vector<double> values, std::vector<Atom> atoms) {
    SingularControl xi;
    xi.values = std::move(values);
    xi.atoms = std::move(atoms);
    return xi;
}

ControlValidation validate_control(const SingularControl& xi, const TimeGrid& grid) {
    ControlValidation report;
    auto fail = [&report](std::string msg) {
        report.ok = false;
        report.violations.push_back(std::move(msg));
    };

    if (xi.values.size() != grid.n_nodes()) {
        fail("node count " + std::to_string(xi.values.size()) + " does not match grid (" +
             std::to_string(grid.n_nodes()) + ")");
        return report; // everything below indexes by node
    }
    for (std::size_t i = 0; i < xi.values.size(); ++i) {
        if (!std::isfinite(xi.values[i])) fail("non-finite value at node " + std::to_string(i));
    }
    if (!report.ok) return report;

    if (xi.values[0] < 0.0) fail("negative value at node 0");
    for (std::size_t i = 1; i < xi.values.size(); ++i)
        if (xi.values[i] < xi.values[i - 1])
            fail("decrease between nodes " + std::to_string(i - 1) + " and " + std::to_string(i));

    for (std::size_t k = 0; k < xi.atoms.size(); ++k) {
        const Atom& a = xi.atoms[k];
        if (a.node >= grid.n_nodes()) {
            fail("atom beyond the grid at node " + std::to_string(a.node));
            continue;
        }
        if (k > 0 && xi.atoms[k - 1].node >= a.node)
            fail("atoms not strictly sorted at node " + std::to_string(a.node));
        if (!(a.size >= 0.0) || !std::isfinite(a.size)) {
            fail("atom with negative or non-finite size at node " + std::to_string(a.node));
            continue;
        }
        const double increment =
            a.node == 0 ? xi.values[0] : xi.values[a.node] - xi.values[a.node - 1];
        if (a.size > increment + 1e-15 * (1.0 + std::fabs(xi.values[a.node])))
            fail("atom larger than the increment into node " + std::to_string(a.node));
    }

    // mass at the origin is an atom by definition and must be declared as one
    if (xi.values[0] > 0.0 && xi.atom_at(0) != xi.values[0])
        fail("node 0 carries mass " + std::to_string(xi.values[0]) +
             " not declared as an atom at node 0");

    return report;
}

double stieltjes_integral(const std::vector<double>& f, const SingularControl& xi,
                          std::size_t a_node, std::size_t b_node) {
    const std::size_t n = xi.values.size();
    if (f.size() != n)
        throw std::invalid_argument("stieltjes_integral: integrand size does not match control");
    if (a_node > b_node || b_node >= n)
        throw std::invalid_argument("stieltjes_integral: bad node window");
    double acc = 0.0;
    if (a_node == 0) acc += f[0] * xi.values[0]; // xi(0-) = 0: origin mass
    for (std::size_t i = a_node; i < b_node; ++i)
        acc += f[i] * (xi.values[i + 1] - xi.values[i]);
    return acc;
}

double stieltjes_integral(const std::vector<double>& f, const SingularControl& xi) {
    return stieltjes_integral(f, xi, 0, xi.values.empty() ? 0 : xi.values.size() - 1);
}

double stieltjes_integral(const std::function<double(double)>& f, const SingularControl& xi,
                          const TimeGrid& grid, std::size_t a_node, std::size_t b_node) {
    std::vector<double> fv(grid.n_nodes());
    for (std::size_t i = 0; i < fv.size(); ++i) fv[i] = f(grid.node(i));
    return stieltjes_integral(fv, xi, a_node, b_node);
}

double stieltjes_integral(const std::function<double(double)>& f, const SingularControl& xi,
                          const TimeGrid& grid) {
    return stieltjes_integral(f, xi, grid, 0, grid.n_nodes() - 1);
}

} // namespace sbsde
