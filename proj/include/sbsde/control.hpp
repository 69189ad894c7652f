#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sbsde/grid.hpp"

namespace sbsde {

/* A point mass of the control measure at a grid node. */
struct Atom {
    std::size_t node = 0;
    double size = 0.0;
};

/* Nondecreasing cadlag path xi on the grid, xi(0-) = 0. values[i] is the
   post-jump value at node i, so values[0] equals the mass of an atom at the
   origin (a positive values[0] is an atom by definition: there is no earlier
   interval it could have accrued over). Everything not listed in `atoms` is
   treated as continuous increase across the enclosing interval. */
struct SingularControl {
    std::vector<double> values;
    std::vector<Atom> atoms; // sorted by node, at most one per node

    bool has_atoms() const noexcept { return !atoms.empty(); }
    double total() const { return values.empty() ? 0.0 : values.back(); }
    double atom_at(std::size_t node) const;
    /* values with all atom masses removed; nondecreasing for valid controls */
    std::vector<double> continuous_part() const;
};

SingularControl zero_control(const TimeGrid& grid);
/* xi(t) = rate * t, rate >= 0 */
SingularControl linear_control(const TimeGrid& grid, double rate);
SingularControl control_from_values(std::vector<double> values, std::vector<Atom> atoms = {});

struct ControlValidation {
    bool ok = true;
    std::vector<std::string> violations; // each names the offending node
};

/* Checks: size matches the grid, values finite, nonnegative, nondecreasing;
   atoms sorted, in range, nonnegative, each no larger than the increment into
   its node; values[0] > 0 must be declared as an atom at node 0. */
ControlValidation validate_control(const SingularControl& xi, const TimeGrid& grid);

/* Left-point Stieltjes sum of f against xi over the node window [a, b]:

     sum_{i=a}^{b-1} f(t_i) * (xi(t_{i+1}) - xi(t_i))  (+ f(t_0) * xi(t_0) when a = 0)

   Each increment carries the atom at its right node weighted by f at the
   previous node, i.e. atoms are weighted by the discrete left limit of f
   (predictable-integrand convention). The origin term exists because
   xi(0-) = 0: mass sitting at node 0 belongs to no earlier window. With this
   convention windows are exactly additive and the integral of 1 over [0, T]
   is xi(T) exactly. */
double stieltjes_integral(const std::vector<double>& f, const SingularControl& xi,
                          std::size_t a_node, std::size_t b_node);
double stieltjes_integral(const std::vector<double>& f, const SingularControl& xi);
double stieltjes_integral(const std::function<double(double)>& f, const SingularControl& xi,
                          const TimeGrid& grid, std::size_t a_node, std::size_t b_node);
double stieltjes_integral(const std::function<double(double)>& f, const SingularControl& xi,
                          const TimeGrid& grid);

} // namespace sbsde
