#pragma once

#include <cstddef>
#include <vector>

namespace sbsde {

/* Uniform time grid on [0, T] with n_steps intervals. Node i sits at
   T * i / n_steps; the last node is forced to equal T exactly so terminal
   conditions can be applied without tolerance. */
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps);

    double horizon() const noexcept { return horizon_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
    double dt() const noexcept { return dt_; }
    double node(std::size_t i) const { return nodes_[i]; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }

private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
    std::vector<double> nodes_;
};

} // namespace sbsde
