#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "dmpkit/coupling.hpp"
#include "dmpkit/dmp.hpp"
#include "dmpkit/trajectory.hpp"

namespace dmpkit {

struct NoiseConfig {
    double pos_meas_std = 1e-3;        // additive on measured position
    double vel_proc_std = 1e-3;        // additive on actual velocity, per step
    double kinematic_bias_std = 1e-3;  // stationary std of the slowly varying bias
    double kinematic_bias_rate = 0.1;  // 1/s, inverse correlation time of the bias
    std::uint64_t seed = 0;
};

// Measurement noise, process noise and a first-order Gauss-Markov kinematic
// bias, all from one seeded generator. Draw order per step is fixed: bias,
// then measurement, then process.
class NoiseProcesses {
public:
    NoiseProcesses(const NoiseConfig& config, Eigen::Index channels, double dt);

    const Eigen::VectorXd& bias_step();  // advance and return the bias
    Eigen::VectorXd measurement_noise();
    Eigen::VectorXd process_noise();

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> unit_;
    Eigen::VectorXd bias_;
    double bias_decay_ = 0.0;
    double bias_drive_std_ = 0.0;
    double pos_meas_std_ = 0.0;
    double vel_proc_std_ = 0.0;
};

enum class PerturbationKind { None, Stop, Move };

// Stop freezes the plant where it is during [t_start, t_end); Move drags
// channel 0 along a half-sine detour of the given amplitude and back.
struct Perturbation {
    PerturbationKind kind = PerturbationKind::None;
    double t_start = 2.0;
    double t_end = 3.0;
    double move_amplitude = 0.05;
};

PerturbationKind perturbation_kind_from_string(const std::string& name);
std::string to_string(PerturbationKind kind);

// Per-step record of one simulated execution.
struct ScenarioLog {
    Eigen::VectorXd t;
    Eigen::MatrixXd y_u;    // uncoupled reference (plain rollout)
    Eigen::MatrixXd y_c;    // coupled reference
    Eigen::MatrixXd y_a;    // actual plant position
    Eigen::MatrixXd acc;    // commanded acceleration
    Eigen::VectorXd tau_a;  // adaptive time constant
    Eigen::MatrixXd e;      // filtered tracking error
    Eigen::VectorXd x;      // phase
};

struct Metrics {
    double max_abs_acceleration = 0.0;
    double final_goal_error = 0.0;
    // First time after the perturbation ends at which ||y_a - y_c|| stays
    // below 5 mm for 0.2 s, minus the perturbation end time; NaN if never.
    double recovery_time = 0.0;
    // Time for the phase to decay to 0.01, relative to the same for the
    // uncoupled system; NaN when the run ends before x gets there.
    double slowdown_ratio = 0.0;
};

struct ScenarioConfig {
    NoiseConfig noise;
    Perturbation perturbation;
    double delay = 0.012;  // measurement transport delay, seconds
    double dt = 0.004;
    double duration = 10.0;
};

struct ScenarioResult {
    ScenarioLog log;
    Metrics metrics;
    bool diverged = false;   // tracking error blew past any plausible bound
    bool saturated = false;  // the a_max clamp engaged at least once
    // Echo of what produced the log, so metrics can be recomputed.
    ScenarioConfig config;
    double tau = 0.0;
    double alpha_x = 0.0;
};

// Closed loop of the coupled controller and a double-integrator plant with
// measurement-side transport delay, noise and an optional perturbation. The
// controller at step n reads the measurement produced at step
// n - round(delay/dt), exactly. Deterministic for a fixed seed.
ScenarioResult run_scenario(const Dmp& dmp, const Gains& gains,
                            const ScenarioConfig& config);

// Summary numbers from a finished run; `goal` is the executed primitive's
// goal. run_scenario already fills result.metrics with this.
Metrics compute_metrics(const ScenarioResult& result, const Eigen::VectorXd& goal);

}  // namespace dmpkit
