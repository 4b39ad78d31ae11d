#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"

#include "dmpkit/correction.hpp"
#include "dmpkit/dmp.hpp"
#include "dmpkit/trajectory.hpp"

using dmpkit::CorrectionInput;
using dmpkit::MergeResult;
using dmpkit::Trajectory;

namespace {

Trajectory from_column(const Eigen::VectorXd& v, double dt = 0.004) {
    Trajectory t;
    t.samples = v;
    t.dt = dt;
    return t;
}

// Interior second-difference seminorm ||D2 y||^2, all channels.
double curvature_energy(const Eigen::MatrixXd& y) {
    double acc = 0.0;
    for (Eigen::Index k = 1; k + 1 < y.rows(); ++k)
        acc += (y.row(k + 1) - 2.0 * y.row(k) + y.row(k - 1)).squaredNorm();
    return acc;
}

double objective(const Eigen::MatrixXd& y, const Eigen::MatrixXd& p, double lambda) {
    return (y - p).squaredNorm() + lambda * curvature_energy(y);
}

// Independent iterative minimizer: the two terminal constraints pin the last
// two samples, so minimize over the remaining coordinates by plain gradient
// descent with a safe step size, run to a tight gradient norm.
Eigen::MatrixXd descend(const Eigen::MatrixXd& p, double lambda,
                        const Eigen::VectorXd& last, const Eigen::VectorXd& second_last) {
    const Eigen::Index m = p.rows();
    Eigen::MatrixXd y = p;
    y.row(m - 1) = last.transpose();
    y.row(m - 2) = second_last.transpose();
    const double step = 1.0 / (2.0 + 32.0 * lambda);
    for (int it = 0; it < 2000000; ++it) {
        Eigen::MatrixXd grad = 2.0 * (y - p);
        for (Eigen::Index k = 1; k + 1 < m; ++k) {
            const Eigen::RowVectorXd d2 = y.row(k + 1) - 2.0 * y.row(k) + y.row(k - 1);
            grad.row(k - 1) += 2.0 * lambda * d2;
            grad.row(k) += -4.0 * lambda * d2;
            grad.row(k + 1) += 2.0 * lambda * d2;
        }
        grad.row(m - 1).setZero();
        grad.row(m - 2).setZero();
        if (grad.cwiseAbs().maxCoeff() < 1e-10) break;
        y -= step * grad;
    }
    return y;
}

}  // namespace

TEST_SUITE("correction") {

TEST_CASE("find_split picks the closest sample, by brute force") {
    Eigen::VectorXd line(11);
    for (int k = 0; k <= 10; ++k) line(k) = k;
    Trajectory deficient = from_column(line);
    Eigen::VectorXd target(1);
    target << 6.2;

    Eigen::Index best = 0;
    double best_dist = std::abs(line(0) - target(0));
    for (int k = 1; k <= 10; ++k) {
        const double d = std::abs(line(k) - target(0));
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    CHECK(best == 6);
    CHECK(dmpkit::find_split(deficient, target) == best);
}

TEST_CASE("find_split: corrective starting at the first sample returns index 0") {
    Eigen::VectorXd line(5);
    line << 1.0, 2.0, 3.0, 4.0, 5.0;
    Eigen::VectorXd target(1);
    target << 1.0;
    CHECK(dmpkit::find_split(from_column(line), target) == 0);
}

TEST_CASE("find_split breaks ties toward the smaller index") {
    Eigen::VectorXd line(3);
    line << 0.0, 1.0, 2.0;
    Eigen::VectorXd target(1);
    target << 0.5;  // equidistant from samples 0 and 1
    CHECK(dmpkit::find_split(from_column(line), target) == 0);
}

TEST_CASE("smooth_prefix leaves a feasible affine prefix untouched") {
    // Straight line continuing into a corrective segment on the same line:
    // zero curvature, zero misfit, constraints already satisfied.
    const int m = 12;
    Eigen::VectorXd p(m), c(3);
    for (int k = 0; k < m; ++k) p(k) = 0.5 + 0.1 * k;
    c << p(m - 1), p(m - 1) + 0.1, p(m - 1) + 0.2;
    Trajectory out = dmpkit::smooth_prefix(from_column(p), from_column(c), 1.0);
    REQUIRE(out.rows() == m);
    CHECK((out.samples.col(0) - p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("smooth_prefix with zero lambda only moves the pinned samples") {
    const int m = 9;
    Eigen::VectorXd p(m);
    p << 0.0, 0.3, 0.1, 0.7, 0.2, 0.9, 0.4, 0.6, 0.5;
    Eigen::VectorXd c(2);
    c << 2.0, 2.5;
    Trajectory out = dmpkit::smooth_prefix(from_column(p), from_column(c), 0.0);
    for (int k = 0; k < m - 2; ++k) CHECK(out.samples(k, 0) == doctest::Approx(p(k)).epsilon(1e-14));
    CHECK(out.samples(m - 1, 0) == doctest::Approx(2.0).epsilon(1e-12));
    // slope constraint: y[m-1] - y[m-2] = c1 - c0 = 0.5
    CHECK(out.samples(m - 2, 0) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("smooth_prefix matches an independent iterative minimizer") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int m : {5, 12, 20, 25}) {
        for (double lambda : {0.1, 1.0, 10.0}) {
            Eigen::MatrixXd p(m, 2);
            for (int k = 0; k < m; ++k) {
                p(k, 0) = u(rng);
                p(k, 1) = u(rng) * 2.0;
            }
            Eigen::MatrixXd c(2, 2);
            c << u(rng), u(rng), u(rng), u(rng);
            Trajectory prefix;
            prefix.samples = p;
            prefix.dt = 0.004;
            Trajectory corrective;
            corrective.samples = c;
            corrective.dt = 0.004;

            Trajectory got = dmpkit::smooth_prefix(prefix, corrective, lambda);

            // Both terminal constraints to 1e-10.
            CHECK((got.samples.row(m - 1).transpose() - c.row(0).transpose()).norm() < 1e-10);
            Eigen::RowVectorXd slope = got.samples.row(m - 1) - got.samples.row(m - 2);
            CHECK((slope - (c.row(1) - c.row(0))).norm() < 1e-10);

            const Eigen::VectorXd last = c.row(0).transpose();
            const Eigen::VectorXd second_last =
                (2.0 * c.row(0) - c.row(1)).transpose();
            Eigen::MatrixXd oracle = descend(p, lambda, last, second_last);
            const double f_got = objective(got.samples, p, lambda);
            const double f_oracle = objective(oracle, p, lambda);
            CHECK(std::abs(f_got - f_oracle) < 1e-8);
            CHECK(f_got <= f_oracle + 1e-8);  // the exact solve can't be worse
            CHECK((got.samples - oracle).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("smoothing energy never increases with lambda") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd p(15);
    for (int k = 0; k < 15; ++k) p(k) = u(rng);
    Eigen::VectorXd c(2);
    c << 0.4, 0.1;
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0}) {
        Trajectory out = dmpkit::smooth_prefix(from_column(p), from_column(c), lambda);
        const double energy = curvature_energy(out.samples);
        CHECK(energy <= prev + 1e-12);
        prev = energy;
    }
}

TEST_CASE("vanishing lambda recovers the prefix away from the pinned end") {
    Eigen::VectorXd p(10);
    p << 0.0, 0.1, 0.25, 0.3, 0.55, 0.6, 0.75, 0.8, 0.9, 1.0;
    Eigen::VectorXd c(2);
    c << 1.4, 1.6;
    Trajectory out = dmpkit::smooth_prefix(from_column(p), from_column(c), 1e-8);
    for (int k = 0; k < 8; ++k)
        CHECK(std::abs(out.samples(k, 0) - p(k)) < 1e-5);
}

TEST_CASE("smooth_prefix rejects prefixes shorter than three samples") {
    Eigen::VectorXd p(2), c(2);
    p << 0.0, 1.0;
    c << 1.0, 1.1;
    CHECK_THROWS_AS(dmpkit::smooth_prefix(from_column(p), from_column(c), 1.0),
                    std::invalid_argument);
}

TEST_CASE("merge keeps the corrective tail byte-identical and drops the duplicate") {
    Trajectory deficient = dmpkit::min_jerk(Eigen::VectorXd::Zero(2),
                                            Eigen::VectorXd::Ones(2), 1.0, 0.004);
    // Corrective starts near the demonstration's 60% point and lands elsewhere.
    Eigen::VectorXd cr_start = deficient.samples.row(150).transpose();
    cr_start(0) += 0.002;
    Eigen::VectorXd cr_goal(2);
    cr_goal << 0.8, 1.1;
    Trajectory corrective = dmpkit::min_jerk(cr_start, cr_goal, 0.5, 0.004);

    CorrectionInput input{deficient, corrective, 1.0};
    MergeResult res = dmpkit::merge(input);

    const Eigen::Index s = res.split_index;
    CHECK(s == 150);
    REQUIRE(res.modified_prefix.rows() == s + 1);
    REQUIRE(res.merged.rows() == s + corrective.rows());

    // Junction position and slope constraints hold exactly.
    CHECK((res.modified_prefix.samples.row(s) - corrective.samples.row(0)).norm() < 1e-10);
    Eigen::RowVectorXd got_step =
        res.modified_prefix.samples.row(s) - res.modified_prefix.samples.row(s - 1);
    Eigen::RowVectorXd want_step = corrective.samples.row(1) - corrective.samples.row(0);
    CHECK((got_step - want_step).norm() < 1e-10);

    // The retained corrective tail is not modified at all.
    for (Eigen::Index k = 1; k < corrective.rows(); ++k)
        for (Eigen::Index ch = 0; ch < 2; ++ch)
            CHECK(res.merged.samples(s + k, ch) == corrective.samples(k, ch));
}

TEST_CASE("merge with a corrective that starts at the first sample") {
    Eigen::VectorXd line(6);
    line << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
    Trajectory deficient = from_column(line);
    Eigen::VectorXd alt(4);
    alt << 0.0, -0.2, -0.4, -0.6;
    Trajectory corrective = from_column(alt);
    MergeResult res = dmpkit::merge({deficient, corrective, 1.0});
    CHECK(res.split_index == 0);
    REQUIRE(res.merged.rows() == 4);
    CHECK((res.merged.samples - corrective.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a correction that corrects nothing leaves the trajectory intact") {
    Trajectory demo = dmpkit::min_jerk(Eigen::VectorXd::Zero(1),
                                       Eigen::VectorXd::Ones(1), 1.0, 0.004);
    const Eigen::Index m = 120;
    Trajectory corrective;
    corrective.dt = demo.dt;
    corrective.samples = demo.samples.bottomRows(demo.rows() - m);

    auto [res, refit] = dmpkit::merge_and_refit({demo, corrective, 1.0});
    CHECK(res.split_index == m);
    REQUIRE(res.merged.rows() == demo.rows());
    CHECK((res.merged.samples - demo.samples).cwiseAbs().maxCoeff() < 1e-2);

    Trajectory replay = dmpkit::rollout(refit, refit.tau, demo.dt);
    const double range = 1.0;
    double err = 0.0;
    for (Eigen::Index k = 0; k < std::min(replay.rows(), demo.rows()); ++k)
        err = std::max(err, std::abs(replay.samples(k, 0) - demo.samples(k, 0)));
    CHECK(err < 0.05 * range);
}

TEST_CASE("overshoot plus corrective hook merges continuously and refits to the new goal") {
    // Deficient pass overshoots to 1.2; the operator hooks from mid-flight
    // back into the intended goal at 1.0.
    Trajectory deficient = dmpkit::min_jerk(Eigen::VectorXd::Zero(1),
                                            Eigen::VectorXd::Constant(1, 1.2), 1.0, 0.004);
    Eigen::VectorXd cr_start(1);
    cr_start << deficient.samples(170, 0) + 0.004;
    Trajectory corrective =
        dmpkit::min_jerk(cr_start, Eigen::VectorXd::Ones(1), 0.6, 0.004);

    auto [res, refit] = dmpkit::merge_and_refit({deficient, corrective, 1.0});

    auto max_jump = [](const Eigen::MatrixXd& y) {
        double j = 0.0;
        for (Eigen::Index k = 1; k < y.rows(); ++k)
            j = std::max(j, (y.row(k) - y.row(k - 1)).norm());
        return j;
    };
    const double budget =
        1.5 * std::max(max_jump(deficient.samples), max_jump(corrective.samples));
    CHECK(max_jump(res.merged.samples) <= budget);

    CHECK(refit.goal(0) == doctest::Approx(1.0).epsilon(1e-12));
    Trajectory replay = dmpkit::rollout(refit, 1.5 * refit.tau, 0.004);
    CHECK(std::abs(replay.samples(replay.rows() - 1, 0) - 1.0) < 1e-2 + 1e-3);
}

}  // TEST_SUITE
