#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "sbsde/errors.hpp"
#include "sbsde/noise.hpp"
#include "sbsde/skorohod.hpp"

using namespace sbsde;

TEST_CASE("reflection leaves nonnegative paths alone") {
    TimeGrid grid(1.0, 8);
    std::vector<double> free(grid.n_nodes());
    for (std::size_t i = 0; i < free.size(); ++i) free[i] = grid.node(i);
    const ReflectionOutput out = skorohod_map(free, grid);
    for (double v : out.xi.values)
        CHECK(v == 0.0);
    CHECK_FALSE(out.xi.has_atoms());
    CHECK(out.reflected == free);
    CHECK(out.sup_violation == 0.0);
    CHECK(out.boundary_integral == 0.0);
}

TEST_CASE("reflection pins a falling path to the boundary") {
    TimeGrid grid(1.0, 8);
    std::vector<double> free(grid.n_nodes());
    for (std::size_t i = 0; i < free.size(); ++i) free[i] = -grid.node(i);
    const ReflectionOutput out = skorohod_map(free, grid);
    for (std::size_t i = 0; i < free.size(); ++i) {
        CHECK(out.xi.values[i] == grid.node(i));
        CHECK(out.reflected[i] == 0.0);
    }
    CHECK_FALSE(out.xi.has_atoms()); // the push starts at zero, no initial mass
    CHECK(out.boundary_integral == 0.0);
}

TEST_CASE("an initial deficit becomes a declared origin atom") {
    TimeGrid grid(1.0, 4);
    std::vector<double> free = {-0.5, -0.6, -0.3, -0.7, -0.2};
    const ReflectionOutput out = skorohod_map(free, grid);
    REQUIRE(out.xi.has_atoms());
    CHECK(out.xi.atom_at(0) == 0.5);
    CHECK(out.reflected[0] == 0.0);
    CHECK_NOTHROW(validate_control(out.xi, grid));
    CHECK(out.xi.values.back() == 0.7);
}

TEST_CASE("running-max construction agrees with the quadratic oracle") {
    TimeGrid grid(2.0, 64);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> step(-0.02, 0.25);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> free(grid.n_nodes());
        std::uniform_real_distribution<double> start(-0.5, 0.5);
        free[0] = start(rng);
        for (std::size_t i = 1; i < free.size(); ++i) free[i] = free[i - 1] + step(rng);

        const ReflectionOutput out = skorohod_map(free, grid);

        // direct definition, one scan per node
        bool all_equal = true;
        for (std::size_t i = 0; i < free.size(); ++i) {
            double push = 0.0;
            for (std::size_t j = 0; j <= i; ++j) push = std::max(push, -free[j]);
            if (out.xi.values[i] != push) all_equal = false;
            if (out.reflected[i] != free[i] + push) all_equal = false;
            if (out.reflected[i] < 0.0) all_equal = false;
        }
        CHECK(all_equal);

        // minimality: every level the push reaches is attained by some deficit
        for (std::size_t i = 0; i < free.size(); ++i) {
            const double level = out.xi.values[i];
            if (level == 0.0) continue;
            bool attained = false;
            for (std::size_t j = 0; j <= i; ++j)
                if (level == -free[j]) attained = true;
            CHECK(attained);
        }
    }
}

TEST_CASE("complementarity diagnostics classify the three regimes") {
    TimeGrid grid(1.0, 8);

    SUBCASE("strictly negative barrier, idle control") {
        std::vector<double> barrier(grid.n_nodes(), -1.0);
        const ComplementarityDiagnostics d =
            complementarity_report(barrier, zero_control(grid), 1e-3);
        CHECK(d.max_excess == 0.0);
        CHECK(d.off_boundary_mass == 0.0);
    }

    SUBCASE("boundary barrier, active control") {
        std::vector<double> barrier(grid.n_nodes(), 0.0);
        const ComplementarityDiagnostics d =
            complementarity_report(barrier, linear_control(grid, 0.8), 1e-3);
        CHECK(d.max_excess == 0.0);
        CHECK(d.off_boundary_mass == 0.0);
    }

    SUBCASE("control charging the continuation region is flagged") {
        std::vector<double> barrier(grid.n_nodes(), 0.0);
        std::vector<double> values(grid.n_nodes(), 0.0);
        for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
            const double t = grid.node(i);
            barrier[i] = t <= 0.5 ? -1.0 : 0.0;
            values[i] = std::min(t, 0.5); // all mass arrives while S = -1
        }
        const ComplementarityDiagnostics d =
            complementarity_report(barrier, control_from_values(values), 1e-3);
        CHECK(d.max_excess == 0.0);
        CHECK(d.off_boundary_mass == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("positive barrier values surface as excess") {
        std::vector<double> barrier(grid.n_nodes(), -0.2);
        barrier[3] = 0.3;
        const ComplementarityDiagnostics d =
            complementarity_report(barrier, zero_control(grid), 1e-3);
        CHECK(d.max_excess == doctest::Approx(0.3).epsilon(1e-12));
    }
}

TEST_CASE("zero consumption weight makes idling optimal immediately") {
    const ConsumptionModel model = make_consumption_model(2.0, 0.05, 0.2, 0.0);
    TimeGrid grid(1.0, 16);
    const auto noise = sample_noise(grid, 200, 7);
    const ReflectionSolveResult res = solve_reflection_fixed_point(model, grid, noise);
    CHECK(res.trace.converged);
    CHECK(res.trace.sweeps.size() == 1);
    for (double v : res.xi.values)
        CHECK(v == 0.0);
}

TEST_CASE("consumption fixed point settles and passes its own diagnostics") {
    const ConsumptionModel model = make_consumption_model(2.0, 0.05, 0.2, 0.4);
    TimeGrid grid(1.0, 64);
    const auto noise = sample_noise(grid, 1000, 11);
    const ReflectionSolveResult res = solve_reflection_fixed_point(model, grid, noise);
    REQUIRE(res.trace.converged);
    CHECK(res.trace.c0 > 0.0);
    CHECK_NOTHROW(validate_control(res.xi, grid));
    // the optimum consumes a definite fraction early; total mass is O(0.3)
    CHECK(res.xi.values.back() > 0.1);
    CHECK(res.xi.values.back() < 0.5);
    CHECK(res.vi.consistent);
    CHECK(res.trace.sweeps.back().update_norm < 1e-4);
    // surfaces all live on the same grid
    CHECK(res.Y.cols() == static_cast<Eigen::Index>(grid.n_nodes()));
    CHECK(res.p.cols() == res.Y.cols());
    CHECK(res.lambda.cols() == res.Y.cols());
}

TEST_CASE("reflection solver validates its inputs") {
    const ConsumptionModel model = make_consumption_model(2.0, 0.05, 0.2, 0.4);
    TimeGrid grid(1.0, 8);
    const auto noise = sample_noise(grid, 64, 7);

    ReflectionSettings bad_rho;
    bad_rho.rho = 0.0;
    CHECK_THROWS_AS(solve_reflection_fixed_point(model, grid, noise, bad_rho),
                    std::invalid_argument);

    ReflectionSettings no_sweeps;
    no_sweeps.max_sweeps = 0;
    CHECK_THROWS_AS(solve_reflection_fixed_point(model, grid, noise, no_sweeps),
                    std::invalid_argument);

    ReflectionSettings short_warm;
    short_warm.initial_xi = std::vector<double>(3, 0.0);
    CHECK_THROWS_AS(solve_reflection_fixed_point(model, grid, noise, short_warm),
                    std::invalid_argument);

    CHECK_THROWS_AS(solve_reflection_fixed_point(model, grid, nullptr),
                    std::invalid_argument);

    CHECK_THROWS_AS(make_consumption_model(-1.0, 0.05, 0.2, 0.4),
                    std::invalid_argument);
}
