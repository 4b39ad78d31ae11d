#include <cmath>
#include <limits>

#include "doctest.h"

#include "dmpkit/dmp.hpp"
#include "dmpkit/simulate.hpp"
#include "dmpkit/trajectory.hpp"

using dmpkit::Dmp;
using dmpkit::Gains;
using dmpkit::NoiseConfig;
using dmpkit::Perturbation;
using dmpkit::PerturbationKind;
using dmpkit::ScenarioConfig;
using dmpkit::ScenarioResult;
using dmpkit::Trajectory;

namespace {

// Half-metre reach over four seconds; the stock scenario everywhere below.
constexpr double kTravel = 0.5;

Dmp scenario_dmp(double tau = 4.0) {
    Trajectory demo = dmpkit::min_jerk(
        Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, kTravel), tau, 0.004);
    return dmpkit::fit(demo);
}

ScenarioConfig ideal_config() {
    ScenarioConfig config;
    config.noise.pos_meas_std = 0.0;
    config.noise.vel_proc_std = 0.0;
    config.noise.kinematic_bias_std = 0.0;
    config.delay = 0.0;
    return config;
}

// Ideal sensing to go with the ideal plant: the velocity filter becomes a
// pass-through, so no lag-induced tracking offset or coupling slowdown.
Gains ideal(Gains g) {
    g.velocity_filter_cutoff = std::numeric_limits<double>::infinity();
    return g;
}

double max_norm_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k)
        worst = std::max(worst, (a.row(k) - b.row(k)).norm());
    return worst;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("noise generators reproduce their configured strengths") {
    NoiseConfig config;
    config.seed = 99;
    dmpkit::NoiseProcesses noise(config, 1, 0.004);
    double meas_sq = 0.0, proc_sq = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        noise.bias_step();
        meas_sq += noise.measurement_noise().squaredNorm();
        proc_sq += noise.process_noise().squaredNorm();
    }
    CHECK(meas_sq / n == doctest::Approx(1e-6).epsilon(0.05));
    CHECK(proc_sq / n == doctest::Approx(1e-6).epsilon(0.05));
}

TEST_CASE("kinematic bias starts in, and keeps, its stationary distribution") {
    NoiseConfig config;
    double first_sq = 0.0, later_sq = 0.0;
    const int instances = 4000;
    for (int i = 0; i < instances; ++i) {
        config.seed = 1000 + i;
        dmpkit::NoiseProcesses noise(config, 1, 0.004);
        first_sq += noise.bias_step().squaredNorm();
        for (int k = 0; k < 49; ++k) noise.bias_step();
        later_sq += noise.bias_step().squaredNorm();
    }
    CHECK(first_sq / instances == doctest::Approx(1e-6).epsilon(0.15));
    CHECK(later_sq / instances == doctest::Approx(1e-6).epsilon(0.15));
}

TEST_CASE("kinematic bias moves slowly relative to measurement noise") {
    NoiseConfig config;
    config.seed = 5;
    dmpkit::NoiseProcesses noise(config, 1, 0.004);
    double prev = noise.bias_step()(0);
    double step_sq = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        const double cur = noise.bias_step()(0);
        step_sq += (cur - prev) * (cur - prev);
        prev = cur;
    }
    // Per-step increment variance of the exact discretization is
    // 2*(1-exp(-rate*dt))*std^2 — about 0.08% of the stationary variance.
    const double expected = 2.0 * (1.0 - std::exp(-0.1 * 0.004)) * 1e-6;
    CHECK(step_sq / n == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("identical seeds give bit-identical runs, different seeds differ") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config;
    config.noise.seed = 7;
    config.duration = 2.0;
    config.perturbation.kind = PerturbationKind::Stop;
    config.perturbation.t_start = 0.5;
    config.perturbation.t_end = 1.0;

    ScenarioResult a = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);
    ScenarioResult b = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);
    CHECK((a.log.y_a - b.log.y_a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.log.y_c - b.log.y_c).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.log.acc - b.log.acc).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.log.e - b.log.e).cwiseAbs().maxCoeff() == 0.0);

    config.noise.seed = 8;
    ScenarioResult c = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);
    CHECK((a.log.y_a - c.log.y_a).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("the controller reads measurements exactly delay/dt steps late") {
    // A Move perturbation grabs the plant at t_start. The commanded
    // acceleration can only react once the first post-grab measurement falls
    // out of the delay line, i.e. delay/dt + 1 steps later.
    Dmp dmp = scenario_dmp();
    ScenarioConfig config;
    config.noise.seed = 3;
    config.duration = 2.0;
    config.delay = 0.012;  // 3 samples at 250 Hz
    ScenarioConfig moved = config;
    moved.perturbation.kind = PerturbationKind::Move;
    moved.perturbation.t_start = 1.0;
    moved.perturbation.t_end = 1.5;

    ScenarioResult base = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);
    ScenarioResult pushed = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), moved);

    const int n_start = 250;  // t_start / dt
    const int d = 3;
    for (int k = 0; k <= n_start + d; ++k)
        CHECK(pushed.log.acc(k, 0) == base.log.acc(k, 0));
    bool reacted = false;
    for (int k = n_start + d + 1; k <= n_start + d + 2; ++k)
        reacted = reacted || (pushed.log.acc(k, 0) != base.log.acc(k, 0));
    CHECK(reacted);
}

TEST_CASE("proposed controller rides out a stop: quick recovery, mild commands") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config;  // noise and 12 ms delay on by default
    config.noise.seed = 42;
    config.perturbation.kind = PerturbationKind::Stop;
    ScenarioResult res = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);

    CHECK_FALSE(res.diverged);
    CHECK(std::isfinite(res.metrics.recovery_time));
    CHECK(res.metrics.recovery_time < 1.5);
    CHECK(res.metrics.max_abs_acceleration < 5.0);
    CHECK(res.metrics.final_goal_error < 0.01 * kTravel);

    // The plant really was frozen during the stop.
    for (Eigen::Index k = 0; k < res.log.t.size(); ++k) {
        const double t = res.log.t(k);
        if (t >= 2.0 && t < 3.0 - 1e-9)
            CHECK(res.log.y_a(k, 0) == res.log.y_a(static_cast<Eigen::Index>(500), 0));
    }
}

TEST_CASE("proposed controller rides out a move perturbation") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config;
    config.noise.seed = 42;
    config.perturbation.kind = PerturbationKind::Move;
    ScenarioResult res = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);

    CHECK_FALSE(res.diverged);
    CHECK(std::isfinite(res.metrics.recovery_time));
    // The half-sine hand-back releases the plant with residual velocity, so
    // settling takes longer than after a stop; regression bound.
    CHECK(res.metrics.recovery_time < 2.0);
    CHECK(res.metrics.max_abs_acceleration < 5.0);
    CHECK(res.metrics.final_goal_error < 0.01 * kTravel);

    // The half-sine detour is visible in channel 0 and returns to its start.
    const Eigen::Index n_start = 500, n_end = 750;
    double peak = 0.0;
    for (Eigen::Index k = n_start; k < n_end; ++k)
        peak = std::max(peak, res.log.y_a(k, 0) - res.log.y_a(n_start, 0));
    CHECK(peak > 0.9 * config.perturbation.move_amplitude);
    CHECK(std::abs(res.log.y_a(n_end, 0) - res.log.y_a(n_start, 0)) < 2e-3);
}

TEST_CASE("legacy gains under noise and 12 ms delay diverge") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config;
    config.noise.seed = 42;
    ScenarioResult res = dmpkit::run_scenario(dmp, dmpkit::legacy_gains(), config);
    CHECK(max_norm_gap(res.log.y_a, res.log.y_c) > 10.0 * kTravel);
    CHECK(res.diverged);
}

TEST_CASE("legacy gains on an ideal plant produce prohibitive accelerations at a stop") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config = ideal_config();
    config.perturbation.kind = PerturbationKind::Stop;
    ScenarioResult res =
        dmpkit::run_scenario(dmp, ideal(dmpkit::legacy_gains()), config);
    CHECK(res.metrics.max_abs_acceleration > 50.0);
}

TEST_CASE("ideal plant: proposed tracking is tight, dropping feedforward is not") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config = ideal_config();
    ScenarioResult res =
        dmpkit::run_scenario(dmp, ideal(dmpkit::proposed_gains()), config);
    CHECK(max_norm_gap(res.log.y_a, res.log.y_u) < 0.01 * kTravel);

    Gains feedback_only = ideal(dmpkit::proposed_gains());
    feedback_only.feedforward = false;
    ScenarioResult lag = dmpkit::run_scenario(dmp, feedback_only, config);
    CHECK(max_norm_gap(lag.log.y_a, lag.log.y_u) > 0.01 * kTravel);
}

TEST_CASE("slowdown ratio is one without perturbation, grows with a stop") {
    Dmp dmp = scenario_dmp(1.0);
    ScenarioConfig config = ideal_config();
    config.duration = 6.0;
    ScenarioResult res =
        dmpkit::run_scenario(dmp, ideal(dmpkit::proposed_gains()), config);
    CHECK(res.metrics.slowdown_ratio > 0.99);
    CHECK(res.metrics.slowdown_ratio < 1.01);

    Dmp slow = scenario_dmp(4.0);
    ScenarioConfig stopped = ideal_config();
    stopped.duration = 25.0;
    stopped.perturbation.kind = PerturbationKind::Stop;
    stopped.perturbation.t_start = 2.0;
    stopped.perturbation.t_end = 3.0;
    ScenarioResult held =
        dmpkit::run_scenario(slow, ideal(dmpkit::proposed_gains()), stopped);

    // Nominal time for the phase to decay to 0.01 under Euler at 250 Hz.
    double x = 1.0;
    int n = 0;
    while (x > 0.01) {
        x += 0.004 * (-1.0 * x / 4.0);
        ++n;
    }
    const double nominal = n * 0.004;
    CHECK(std::isfinite(held.metrics.slowdown_ratio));
    CHECK(held.metrics.slowdown_ratio >= 1.0 + 0.8 * (1.0 / nominal));
}

TEST_CASE("slowdown ratio is NaN when the horizon ends before the phase does") {
    Dmp dmp = scenario_dmp(4.0);  // needs ~18.4 s of phase time
    ScenarioConfig config = ideal_config();
    config.duration = 5.0;
    ScenarioResult res =
        dmpkit::run_scenario(dmp, ideal(dmpkit::proposed_gains()), config);
    CHECK(std::isnan(res.metrics.slowdown_ratio));
}

TEST_CASE("metrics can be recomputed from the stored result") {
    Dmp dmp = scenario_dmp();
    ScenarioConfig config;
    config.noise.seed = 12;
    config.perturbation.kind = PerturbationKind::Stop;
    ScenarioResult res = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);
    dmpkit::Metrics again = dmpkit::compute_metrics(res, dmp.goal);
    CHECK(again.max_abs_acceleration == res.metrics.max_abs_acceleration);
    CHECK(again.final_goal_error == res.metrics.final_goal_error);
    // NaN-tolerant equality: both may legitimately be NaN.
    const bool recovery_same =
        (std::isnan(again.recovery_time) && std::isnan(res.metrics.recovery_time)) ||
        again.recovery_time == res.metrics.recovery_time;
    CHECK(recovery_same);
    const bool slowdown_same =
        (std::isnan(again.slowdown_ratio) && std::isnan(res.metrics.slowdown_ratio)) ||
        again.slowdown_ratio == res.metrics.slowdown_ratio;
    CHECK(slowdown_same);
}

TEST_CASE("final goal error of a converged run is small against the travel") {
    Dmp dmp = scenario_dmp(1.0);
    ScenarioConfig config;
    config.noise.seed = 4;
    config.duration = 12.0;
    ScenarioResult res = dmpkit::run_scenario(dmp, dmpkit::proposed_gains(), config);
    CHECK(res.metrics.final_goal_error < 1e-2 * (dmp.goal - dmp.start).norm());
}

TEST_CASE("perturbation kinds parse from their scenario names") {
    CHECK(dmpkit::perturbation_kind_from_string("stop") == PerturbationKind::Stop);
    CHECK(dmpkit::perturbation_kind_from_string("move") == PerturbationKind::Move);
    CHECK(dmpkit::perturbation_kind_from_string("none") == PerturbationKind::None);
    CHECK_THROWS(dmpkit::perturbation_kind_from_string("wiggle"));
    CHECK(dmpkit::to_string(PerturbationKind::Move) == "move");
}

}  // TEST_SUITE
