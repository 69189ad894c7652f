#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "sbsde/grid.hpp"

namespace sbsde {

enum class MarkFamily { normal, exponential, pareto };

/* Finite-activity jump specification: intensity of the driving Poisson clock
   plus the mark distribution. Parameters by family:
     normal      (mean, sd)        sd >= 0
     exponential (mean)            mean > 0
     pareto      (alpha, xmin)     alpha > 2 required: the second moment must
                                   be finite, otherwise the sampler refuses.
   intensity = 0 disables jumps regardless of family. */
struct LevySpec {
    double intensity = 0.0;
    MarkFamily family = MarkFamily::normal;
    double par1 = 0.0;
    double par2 = 1.0;
};

/* Throws UnsupportedInput for invalid parameters or infinite second moment. */
void validate_levy(const LevySpec& spec);
double mark_mean(const LevySpec& spec);
double mark_second_moment(const LevySpec& spec);

struct JumpEvent {
    double time = 0.0;
    double mark = 0.0;
};

/* One draw of all driving noise on a grid. db(p, i) is the Brownian increment
   of path p over [t_i, t_{i+1}]; jumps[p] lists that path's jump times and
   marks sorted by time. Path p's draws depend only on (seed, p), never on the
   total path count or on scheduling, so ensembles are byte-reproducible and
   extending the ensemble leaves existing paths untouched. */
struct NoiseBundle {
    TimeGrid grid;
    std::uint64_t seed = 0;
    LevySpec levy;
    Eigen::MatrixXd db;                        // paths x n_steps
    std::vector<std::vector<JumpEvent>> jumps; // per path

    std::size_t n_paths() const noexcept { return static_cast<std::size_t>(db.rows()); }
    bool has_jumps() const;
};

std::shared_ptr<const NoiseBundle> sample_noise(const TimeGrid& grid, std::size_t n_paths,
                                                std::uint64_t seed, const LevySpec& levy = {});

} // namespace sbsde
