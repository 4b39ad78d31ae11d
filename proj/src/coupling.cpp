#include "dmpkit/coupling.hpp"

#include <cmath>
#include <stdexcept>

namespace dmpkit {

Gains proposed_gains() { return Gains{}; }

Gains legacy_gains() {
    Gains g;
    g.k_p = 1000.0;
    g.k_v = 125.0;
    g.feedforward = false;
    g.a_max = std::numeric_limits<double>::infinity();
    return g;
}

double adaptive_tau(double tau, double k_c, const Eigen::VectorXd& e) {
    return tau * (1.0 + k_c * e.squaredNorm());
}

CoupledState initial_coupled_state(const Dmp& dmp) {
    CoupledState state;
    state.x = 1.0;
    state.y_c = dmp.start;
    state.z = Eigen::VectorXd::Zero(dmp.channels());
    state.e = Eigen::VectorXd::Zero(dmp.channels());
    state.tau_a = dmp.tau;
    return state;
}

std::pair<CoupledState, ControlOutput> coupled_step(
    const Dmp& dmp, const CoupledState& state, const Eigen::VectorXd& y_actual,
    const Eigen::VectorXd& y_actual_dot, const Gains& gains, double dt) {
    const Eigen::Index ch = dmp.channels();
    if (state.y_c.size() != ch || state.z.size() != ch || state.e.size() != ch ||
        y_actual.size() != ch || y_actual_dot.size() != ch)
        throw std::invalid_argument("coupled_step: channel count mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("coupled_step: dt must be positive");

    CoupledState next;
    ControlOutput out;

    // Freshest measurement first: the filtered error this step runs on.
    const Eigen::VectorXd err = y_actual - state.y_c;
    next.e = state.e + dt * (gains.alpha_e * (err - state.e));
    const double tau_a = adaptive_tau(dmp.tau, gains.k_c, next.e);
    next.tau_a = tau_a;

    const Eigen::VectorXd f = forcing(dmp, state.x);
    const Eigen::VectorXd z_dot =
        (dmp.alpha_z * (dmp.beta_z * (dmp.goal - state.y_c) - state.z) + f +
         gains.k_t * next.e) /
        tau_a;
    out.y_c_dot = state.z / tau_a;

    // d(tau_a)/dt through the error filter; the chain rule term below keeps
    // y_c_ddot the true derivative of z / tau_a.
    const Eigen::VectorXd e_dot = gains.alpha_e * (err - next.e);
    const double tau_a_dot = 2.0 * dmp.tau * gains.k_c * next.e.dot(e_dot);
    out.y_c_ddot = (z_dot * tau_a - state.z * tau_a_dot) / (tau_a * tau_a);

    Eigen::VectorXd command = gains.k_p * (state.y_c - y_actual) +
                              gains.k_v * (out.y_c_dot - y_actual_dot);
    if (gains.feedforward) command += out.y_c_ddot;

    out.saturated = false;
    out.y_r_ddot = command;
    for (Eigen::Index i = 0; i < ch; ++i) {
        if (std::abs(out.y_r_ddot(i)) > gains.a_max) {
            out.y_r_ddot(i) = out.y_r_ddot(i) > 0.0 ? gains.a_max : -gains.a_max;
            out.saturated = true;
        }
    }

    next.z = state.z + dt * z_dot;
    next.y_c = state.y_c + dt * (state.z / tau_a);
    next.x = state.x + dt * (-dmp.alpha_x * state.x / tau_a);
    return {std::move(next), std::move(out)};
}

Eigen::VectorXd velocity_filter(const Eigen::VectorXd& previous,
                                const Eigen::VectorXd& raw, double cutoff,
                                double dt) {
    if (previous.size() != raw.size())
        throw std::invalid_argument("velocity_filter: size mismatch");
    const double alpha = 1.0 - std::exp(-cutoff * dt);
    return previous + alpha * (raw - previous);
}

std::pair<std::complex<double>, std::complex<double>> closed_loop_poles(
    const Gains& gains) {
    const double disc = gains.k_v * gains.k_v - 4.0 * gains.k_p;
    if (disc >= 0.0) {
        const double root = std::sqrt(disc);
        return {std::complex<double>((-gains.k_v - root) / 2.0, 0.0),
                std::complex<double>((-gains.k_v + root) / 2.0, 0.0)};
    }
    const double imag = std::sqrt(-disc) / 2.0;
    return {std::complex<double>(-gains.k_v / 2.0, imag),
            std::complex<double>(-gains.k_v / 2.0, -imag)};
}

double delay_margin(const Gains& gains) {
    if (!(gains.k_p > 0.0) || !(gains.k_v > 0.0))
        throw std::invalid_argument("delay_margin: gains must be positive");
    // |L(jw)| = 1 at w_c^2 = (k_v^2 + sqrt(k_v^4 + 4 k_p^2)) / 2; the phase
    // margin there is atan(k_v w_c / k_p).
    const double kv2 = gains.k_v * gains.k_v;
    const double wc = std::sqrt(
        (kv2 + std::sqrt(kv2 * kv2 + 4.0 * gains.k_p * gains.k_p)) / 2.0);
    return std::atan(gains.k_v * wc / gains.k_p) / wc;
}

}  // namespace dmpkit
