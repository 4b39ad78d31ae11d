#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "dmpkit/trajectory.hpp"

using dmpkit::Trajectory;

TEST_SUITE("trajectory") {

TEST_CASE("validate rejects malformed trajectories") {
    Trajectory t;
    t.samples = Eigen::MatrixXd::Zero(5, 2);
    t.dt = 0.01;
    CHECK_NOTHROW(dmpkit::validate(t));

    Trajectory bad_dt = t;
    bad_dt.dt = 0.0;
    CHECK_THROWS_AS(dmpkit::validate(bad_dt), std::invalid_argument);
    bad_dt.dt = -1.0;
    CHECK_THROWS_AS(dmpkit::validate(bad_dt), std::invalid_argument);

    Trajectory short_traj = t;
    short_traj.samples = Eigen::MatrixXd::Zero(1, 2);
    CHECK_THROWS_AS(dmpkit::validate(short_traj), std::invalid_argument);

    Trajectory no_channels = t;
    no_channels.samples = Eigen::MatrixXd::Zero(5, 0);
    CHECK_THROWS_AS(dmpkit::validate(no_channels), std::invalid_argument);

    Trajectory non_finite = t;
    non_finite.samples(2, 1) = std::nan("");
    CHECK_THROWS_AS(dmpkit::validate(non_finite), std::invalid_argument);
}

TEST_CASE("finite differences are exact on linear signals everywhere") {
    const double dt = 0.004;
    Eigen::MatrixXd y(6, 2);
    for (int k = 0; k < 6; ++k) {
        y(k, 0) = 1.5 + 2.0 * k * dt;   // slope 2
        y(k, 1) = -0.25 - 7.0 * k * dt; // slope -7
    }
    Eigen::MatrixXd dy = dmpkit::finite_difference(y, dt);
    for (int k = 0; k < 6; ++k) {
        CHECK(dy(k, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(dy(k, 1) == doctest::Approx(-7.0).epsilon(1e-12));
    }
}

TEST_CASE("finite differences are exact for quadratics, ends included") {
    // y = t^2: the central interior stencil and the second-order one-sided
    // end stencils all reproduce the derivative 2t exactly on quadratics.
    const double dt = 0.1;
    const int n = 5;
    Eigen::MatrixXd y(n, 1);
    for (int k = 0; k < n; ++k) y(k, 0) = (k * dt) * (k * dt);
    Eigen::MatrixXd dy = dmpkit::finite_difference(y, dt);
    for (int k = 0; k < n; ++k)
        CHECK(dy(k, 0) == doctest::Approx(2.0 * k * dt).epsilon(1e-12));
}

TEST_CASE("minimum-jerk profile hits its endpoints at rest") {
    Eigen::VectorXd start(2), goal(2);
    start << 0.0, 1.0;
    goal << 1.0, -0.5;
    Trajectory demo = dmpkit::min_jerk(start, goal, 2.0, 0.004);
    REQUIRE(demo.rows() == 501);
    CHECK(demo.dt == 0.004);
    CHECK((demo.samples.row(0).transpose() - start).norm() == doctest::Approx(0.0));
    CHECK((demo.samples.row(500).transpose() - goal).norm() == doctest::Approx(0.0));

    // Rest-to-rest: end derivatives vanish to discretization accuracy.
    Eigen::MatrixXd vel = dmpkit::finite_difference(demo.samples, demo.dt);
    CHECK(vel.row(0).norm() < 1e-4);
    CHECK(vel.row(500).norm() < 1e-4);

    // Midpoint of the polynomial: y(1/2) = y0 + (g-y0)*(10/8 - 15/16 + 6/32).
    const double mid_scale = 10.0 / 8.0 - 15.0 / 16.0 + 6.0 / 32.0;
    CHECK(demo.samples(250, 0) == doctest::Approx(mid_scale).epsilon(1e-12));
    CHECK(demo.samples(250, 1) == doctest::Approx(1.0 + (-1.5) * mid_scale).epsilon(1e-12));
}

}  // TEST_SUITE
