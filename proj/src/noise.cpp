#include "sbsde/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sbsde/errors.hpp"
#include "sbsde/threading.hpp"

namespace sbsde {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/* Per-path generator: the stream depends on (seed, path) only. All sampling
   below is written out explicitly (no std::*_distribution) because those are
   implementation-defined; this keeps ensembles byte-identical across
   standard libraries. */
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path) {
        std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (path + 1));
        const std::uint64_t lo = splitmix64(s);
        const std::uint64_t hi = splitmix64(s);
        eng_.seed(lo ^ (hi << 1));
    }

    double uniform() { // open interval (0, 1)
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double gaussian() { // Box-Muller, cosine branch; fixed 2-draw consumption
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /* Inversion from one uniform; fine for the finite-activity intensities
       this sampler accepts (mean below ~700 keeps the pmf in range). */
    std::size_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::size_t k = 0;
        while (u > cdf && k < 100000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

private:
    std::mt19937_64 eng_;
};

double sample_mark(PathRng& rng, const LevySpec& spec) {
    switch (spec.family) {
        case MarkFamily::normal:
            return spec.par1 + spec.par2 * rng.gaussian();
        case MarkFamily::exponential:
            return -spec.par1 * std::log(rng.uniform());
        case MarkFamily::pareto:
            return spec.par2 * std::pow(rng.uniform(), -1.0 / spec.par1);
    }
    throw UnsupportedInput("sample_mark: unknown mark family");
}

} // namespace

void validate_levy(const LevySpec& spec) {
    if (!(spec.intensity >= 0.0) || !std::isfinite(spec.intensity))
        throw UnsupportedInput("LevySpec: intensity must be nonnegative and finite");
    if (spec.intensity == 0.0) return;
    switch (spec.family) {
        case MarkFamily::normal:
            if (!std::isfinite(spec.par1) || !(spec.par2 >= 0.0) || !std::isfinite(spec.par2))
                throw UnsupportedInput("LevySpec: normal marks need finite mean and sd >= 0");
            return;
        case MarkFamily::exponential:
            if (!(spec.par1 > 0.0) || !std::isfinite(spec.par1))
                throw UnsupportedInput("LevySpec: exponential marks need mean > 0");
            return;
        case MarkFamily::pareto:
            if (!(spec.par2 > 0.0) || !std::isfinite(spec.par2) || !std::isfinite(spec.par1))
                throw UnsupportedInput("LevySpec: pareto marks need xmin > 0 and finite alpha");
            if (!(spec.par1 > 2.0))
                throw UnsupportedInput(
                    "LevySpec: pareto marks with alpha <= 2 have no finite second moment");
            return;
    }
    throw UnsupportedInput("LevySpec: unknown mark family");
}

double mark_mean(const LevySpec& spec) {
    validate_levy(spec);
    switch (spec.family) {
        case MarkFamily::normal: return spec.par1;
        case MarkFamily::exponential: return spec.par1;
        case MarkFamily::pareto: return spec.par1 * spec.par2 / (spec.par1 - 1.0);
    }
    return 0.0;
}

double mark_second_moment(const LevySpec& spec) {
    validate_levy(spec);
    switch (spec.family) {
        case MarkFamily::normal: return spec.par1 * spec.par1 + spec.par2 * spec.par2;
        case MarkFamily::exponential: return 2.0 * spec.par1 * spec.par1;
        case MarkFamily::pareto:
            return spec.par1 * spec.par2 * spec.par2 / (spec.par1 - 2.0);
    }
    return 0.0;
}

bool NoiseBundle::has_jumps() const {
    for (const auto& path : jumps)
        if (!path.empty()) return true;
    return false;
}

std::shared_ptr<const NoiseBundle> sample_noise(const TimeGrid& grid, std::size_t n_paths,
                                                std::uint64_t seed, const LevySpec& levy) {
    validate_levy(levy);
    if (n_paths == 0) throw std::invalid_argument("sample_noise: need at least one path");
    const double jump_mean = levy.intensity * grid.horizon();
    if (jump_mean > 700.0)
        throw UnsupportedInput("sample_noise: intensity * horizon too large for exact inversion");

    auto bundle = std::make_shared<NoiseBundle>(NoiseBundle{grid, seed, levy, {}, {}});
    bundle->db.resize(static_cast<Eigen::Index>(n_paths),
                      static_cast<Eigen::Index>(grid.n_steps()));
    bundle->jumps.resize(n_paths);

    const double sqrt_dt = std::sqrt(grid.dt());
    const bool with_jumps = levy.intensity > 0.0;
    parallel_for_blocks(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            PathRng rng(seed, p);
            // Fixed draw order per path: Brownian increments first, then jumps.
            for (std::size_t i = 0; i < grid.n_steps(); ++i)
                bundle->db(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) =
                    sqrt_dt * rng.gaussian();
            if (with_jumps) {
                const std::size_t count = rng.poisson(jump_mean);
                auto& events = bundle->jumps[p];
                events.resize(count);
                for (std::size_t j = 0; j < count; ++j)
                    events[j].time = grid.horizon() * rng.uniform();
                for (std::size_t j = 0; j < count; ++j)
                    events[j].mark = sample_mark(rng, levy);
                std::sort(events.begin(), events.end(),
                          [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
            }
        }
    });
    return bundle;
}

} // namespace sbsde
