#include "doctest.h"

#include <cmath>

#include "sbsde/errors.hpp"
#include "sbsde/forward.hpp"
#include "sbsde/stats.hpp"

using namespace sbsde;

TEST_CASE("deterministic drain: constant outflow empties exactly") {
    TimeGrid grid(1.0, 8); // dyadic increments keep the sums exact
    const auto noise = sample_noise(grid, 3, 1);
    ForwardCoefficients coeff;
    coeff.theta = [](double, double) { return -1.0; };
    const PathBundle pb = simulate_forward(coeff, 5.0, linear_control(grid, 1.0), noise);
    for (Eigen::Index p = 0; p < pb.X.rows(); ++p) {
        CHECK(pb.X(p, 0) == 5.0);
        CHECK(pb.X(p, pb.X.cols() - 1) == 4.0);
    }
}

TEST_CASE("all-zero coefficients leave the state constant") {
    TimeGrid grid(1.0, 4);
    const auto noise = sample_noise(grid, 5, 2);
    const PathBundle pb = simulate_forward({}, 1.5, zero_control(grid), noise);
    CHECK((pb.X.array() == 1.5).all());
}

TEST_CASE("unit theta adds the control to the state exactly") {
    TimeGrid grid(1.0, 8);
    const auto noise = sample_noise(grid, 2, 3);
    ForwardCoefficients coeff;
    coeff.theta = [](double, double) { return 1.0; };
    SingularControl xi = control_from_values({0.0, 0.125, 0.125, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0});
    const PathBundle pb = simulate_forward(coeff, 2.0, xi, noise);
    for (std::size_t i = 0; i <= 8; ++i) CHECK(pb.X(0, Eigen::Index(i)) == 2.0 + xi.values[i]);
}

TEST_CASE("proportional drain compounds multiplicatively") {
    TimeGrid grid(1.0, 16);
    const auto noise = sample_noise(grid, 1, 4);
    ForwardCoefficients coeff;
    coeff.theta = [](double, double x) { return -x; };
    const PathBundle pb = simulate_forward(coeff, 1.0, linear_control(grid, 1.0), noise);
    const double expected = std::pow(1.0 - 1.0 / 16.0, 16.0);
    CHECK(pb.X(0, 16) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("geometric scheme hits the closed-form log-space value") {
    TimeGrid grid(1.0, 8);
    const auto noise = sample_noise(grid, 4, 9);
    const double b0 = 0.05, s0 = 0.2, x0 = 2.0;
    const PathBundle pb = simulate_geometric_consumption(b0, s0, x0, zero_control(grid), noise);
    for (Eigen::Index p = 0; p < 4; ++p) {
        double log_acc = 0.0;
        for (std::size_t i = 0; i <= 8; ++i) {
            CHECK(pb.X(p, Eigen::Index(i)) ==
                  doctest::Approx(x0 * std::exp(log_acc)).epsilon(1e-14));
            if (i < 8) log_acc += (b0 - 0.5 * s0 * s0) * grid.dt() + s0 * noise->db(p, Eigen::Index(i));
        }
    }
}

TEST_CASE("geometric mean growth matches the drift") {
    TimeGrid grid(1.0, 32);
    const auto noise = sample_noise(grid, 20000, 10);
    const PathBundle pb = simulate_geometric_consumption(0.05, 0.2, 2.0, zero_control(grid), noise);
    const MeanSe terminal = mean_and_se(pb.X.col(32));
    const double expected = 2.0 * std::exp(0.05);
    CHECK(std::fabs(terminal.mean - expected) < 3.0 * terminal.se);
}

TEST_CASE("origin atoms: geometric applies at node 0, euler from node 1") {
    TimeGrid grid(1.0, 4);
    const auto noise = sample_noise(grid, 2, 5);
    SingularControl xi = control_from_values({0.3, 0.3, 0.3, 0.3, 0.3}, {{0, 0.3}});

    const PathBundle geo = simulate_geometric_consumption(0.0, 0.0, 1.0, xi, noise);
    CHECK(geo.X(0, 0) == doctest::Approx(0.7)); // atom multiplies into X(t_0)
    CHECK(geo.X(0, 4) == doctest::Approx(0.7));

    ForwardCoefficients coeff;
    coeff.theta = [](double, double x) { return -x; };
    const PathBundle eul = simulate_forward(coeff, 1.0, xi, noise);
    CHECK(eul.X(0, 0) == 1.0); // X(t_0) = x0 by convention; the atom shows at node 1
    CHECK(eul.X(0, 1) == doctest::Approx(0.7));
}

TEST_CASE("geometric refuses a consumption atom that empties the state") {
    TimeGrid grid(1.0, 4);
    const auto noise = sample_noise(grid, 2, 6);
    SingularControl xi = control_from_values({1.0, 1.0, 1.0, 1.0, 1.0}, {{0, 1.0}});
    CHECK_THROWS_AS(simulate_geometric_consumption(0.0, 0.0, 1.0, xi, noise), UnsupportedInput);
}

TEST_CASE("compensated jumps keep the mean flat") {
    TimeGrid grid(1.0, 16);
    LevySpec levy;
    levy.intensity = 2.0;
    levy.family = MarkFamily::exponential;
    levy.par1 = 0.25;
    const auto noise = sample_noise(grid, 20000, 12, levy);
    ForwardCoefficients coeff;
    coeff.beta = [](double, double, double mark) { return mark; };
    coeff.jump_compensator = [&](double, double) { return levy.intensity * mark_mean(levy); };
    const PathBundle pb = simulate_forward(coeff, 1.0, zero_control(grid), noise);
    const MeanSe terminal = mean_and_se(pb.X.col(16));
    CHECK(std::fabs(terminal.mean - 1.0) < 3.0 * terminal.se);
}

TEST_CASE("jump coefficient without a compensator is refused") {
    TimeGrid grid(1.0, 4);
    LevySpec levy;
    levy.intensity = 1.0;
    levy.family = MarkFamily::normal;
    levy.par1 = 0.0;
    levy.par2 = 0.1;
    const auto noise = sample_noise(grid, 4, 13, levy);
    ForwardCoefficients coeff;
    coeff.beta = [](double, double, double mark) { return mark; };
    CHECK_THROWS(simulate_forward(coeff, 1.0, zero_control(grid), noise));
}

TEST_CASE("grid mismatch between control and noise is refused") {
    TimeGrid grid(1.0, 8);
    TimeGrid other(1.0, 4);
    const auto noise = sample_noise(grid, 2, 14);
    CHECK_THROWS(simulate_forward({}, 1.0, zero_control(other), noise));
}
