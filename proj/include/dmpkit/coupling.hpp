#pragma once

#include <complex>
#include <utility>

#include <Eigen/Dense>

#include "dmpkit/dmp.hpp"

namespace dmpkit {

// Controller parameters for temporally coupled execution. `feedforward`
// selects whether the commanded acceleration includes the reference
// acceleration or is pure PD on the tracking error.
struct Gains {
    double k_p = 25.0;     // 1/s^2
    double k_v = 10.0;     // 1/s
    double k_c = 1000.0;   // 1/length^2, temporal coupling gain
    double alpha_e = 50.0; // 1/s, error low-pass rate
    double k_t = 0.0;      // legacy coupling-term gain (0: term absent)
    bool feedforward = true;
    double a_max = 10.0;                   // per-channel |y_r_ddot| clamp
    double velocity_filter_cutoff = 20.0;  // rad/s, low-pass on measured velocity
};

// Low PD gains made viable by the feedforward path; wide stability margins.
Gains proposed_gains();
// Stiff PD tracking without feedforward; margins collapse under delay.
Gains legacy_gains();

// Execution-time state: the primitive's phase/transformation state, the
// low-pass tracking error driving the temporal coupling, and the adaptive
// time constant that the latest step ran at.
struct CoupledState {
    double x = 1.0;
    Eigen::VectorXd y_c;  // coupled reference position
    Eigen::VectorXd z;    // scaled reference velocity, z = tau_a * y_c_dot
    Eigen::VectorXd e;    // filtered actual-minus-reference error
    double tau_a = 0.0;   // >= tau always
};

struct ControlOutput {
    Eigen::VectorXd y_r_ddot;  // commanded acceleration (after clamping)
    Eigen::VectorXd y_c_dot;
    Eigen::VectorXd y_c_ddot;
    bool saturated = false;
};

// tau * (1 + k_c * ||e||^2); inflates while the plant lags the reference.
double adaptive_tau(double tau, double k_c, const Eigen::VectorXd& e);

CoupledState initial_coupled_state(const Dmp& dmp);

// One explicit-Euler controller step given the current measured position and
// (filtered) velocity estimate. The error filter updates first so the step's
// adaptive time constant reflects the freshest measurement.
std::pair<CoupledState, ControlOutput> coupled_step(const Dmp& dmp,
                                                    const CoupledState& state,
                                                    const Eigen::VectorXd& y_actual,
                                                    const Eigen::VectorXd& y_actual_dot,
                                                    const Gains& gains, double dt);

// First-order low-pass update toward `raw` with the given cutoff (rad/s):
// out = prev + (1 - exp(-cutoff*dt)) * (raw - prev).
Eigen::VectorXd velocity_filter(const Eigen::VectorXd& previous,
                                const Eigen::VectorXd& raw, double cutoff,
                                double dt);

// Roots of s^2 + k_v s + k_p: the error dynamics of the feedforward-equipped
// tracking loop on an ideal double-integrator plant.
std::pair<std::complex<double>, std::complex<double>> closed_loop_poles(const Gains& gains);

// Largest pure transport delay (seconds) the PD loop L(s) = (k_v s + k_p)/s^2
// tolerates before instability: phase margin over gain-crossover frequency.
double delay_margin(const Gains& gains);

}  // namespace dmpkit
