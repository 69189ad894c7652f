#include "sbsde/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace sbsde {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
    : horizon_(horizon), n_steps_(n_steps), dt_(horizon / static_cast<double>(n_steps)) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("TimeGrid: horizon must be a positive finite number");
    if (n_steps == 0) throw std::invalid_argument("TimeGrid: need at least one step");
    nodes_.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        nodes_[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    nodes_[n_steps] = horizon; // t_n = T exactly
}

} // namespace sbsde
