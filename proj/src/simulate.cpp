#include "dmpkit/simulate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dmpkit {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRecoveryBand = 0.005;   // m
constexpr double kRecoveryHold = 0.2;     // s
constexpr double kPhaseArrival = 0.01;
}  // namespace

NoiseProcesses::NoiseProcesses(const NoiseConfig& config, Eigen::Index channels,
                               double dt)
    : rng_(config.seed), unit_(0.0, 1.0) {
    if (channels < 1) throw std::invalid_argument("noise: need at least one channel");
    if (!(dt > 0.0)) throw std::invalid_argument("noise: dt must be positive");
    if (config.pos_meas_std < 0.0 || config.vel_proc_std < 0.0 ||
        config.kinematic_bias_std < 0.0 || config.kinematic_bias_rate < 0.0)
        throw std::invalid_argument("noise: standard deviations must be >= 0");

    // Exact discretization of db = -rate*b dt + sqrt(2*rate)*std dW keeps the
    // bias stationary at every step, including the first.
    bias_decay_ = std::exp(-config.kinematic_bias_rate * dt);
    bias_drive_std_ =
        config.kinematic_bias_std * std::sqrt(1.0 - bias_decay_ * bias_decay_);
    pos_meas_std_ = config.pos_meas_std;
    vel_proc_std_ = config.vel_proc_std;

    bias_.resize(channels);
    for (Eigen::Index i = 0; i < channels; ++i)
        bias_(i) = config.kinematic_bias_std * unit_(rng_);
}

const Eigen::VectorXd& NoiseProcesses::bias_step() {
    for (Eigen::Index i = 0; i < bias_.size(); ++i)
        bias_(i) = bias_decay_ * bias_(i) + bias_drive_std_ * unit_(rng_);
    return bias_;
}

Eigen::VectorXd NoiseProcesses::measurement_noise() {
    Eigen::VectorXd w(bias_.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = pos_meas_std_ * unit_(rng_);
    return w;
}

Eigen::VectorXd NoiseProcesses::process_noise() {
    Eigen::VectorXd w(bias_.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = vel_proc_std_ * unit_(rng_);
    return w;
}

PerturbationKind perturbation_kind_from_string(const std::string& name) {
    if (name == "none") return PerturbationKind::None;
    if (name == "stop") return PerturbationKind::Stop;
    if (name == "move") return PerturbationKind::Move;
    throw std::invalid_argument("unknown perturbation kind: " + name);
}

std::string to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::None: return "none";
        case PerturbationKind::Stop: return "stop";
        case PerturbationKind::Move: return "move";
    }
    throw std::logic_error("unreachable perturbation kind");
}

ScenarioResult run_scenario(const Dmp& dmp, const Gains& gains,
                            const ScenarioConfig& config) {
    if (!(config.dt > 0.0)) throw std::invalid_argument("scenario: dt must be positive");
    if (!(config.duration >= 0.0) || !std::isfinite(config.duration))
        throw std::invalid_argument("scenario: bad duration");
    if (config.delay < 0.0) throw std::invalid_argument("scenario: negative delay");
    const Perturbation& pert = config.perturbation;
    if (pert.kind != PerturbationKind::None && !(pert.t_end > pert.t_start))
        throw std::invalid_argument("scenario: perturbation must end after it starts");

    const Eigen::Index ch = dmp.channels();
    const double dt = config.dt;
    const auto n_steps = static_cast<Eigen::Index>(std::llround(config.duration / dt));
    const Eigen::Index rows = n_steps + 1;
    const auto delay_steps = static_cast<Eigen::Index>(std::llround(config.delay / dt));

    ScenarioResult result;
    result.config = config;
    result.tau = dmp.tau;
    result.alpha_x = dmp.alpha_x;

    ScenarioLog& log = result.log;
    log.t.resize(rows);
    log.y_u = rollout(dmp, config.duration, dt).samples;
    log.y_c.resize(rows, ch);
    log.y_a.resize(rows, ch);
    log.acc.resize(rows, ch);
    log.tau_a.resize(rows);
    log.e.resize(rows, ch);
    log.x.resize(rows);

    NoiseProcesses noise(config.noise, ch, dt);
    CoupledState st = initial_coupled_state(dmp);
    Eigen::VectorXd y_a = dmp.start;
    Eigen::VectorXd v_a = Eigen::VectorXd::Zero(ch);
    Eigen::VectorXd v_hat = Eigen::VectorXd::Zero(ch);
    std::vector<Eigen::VectorXd> measurements;
    measurements.reserve(static_cast<std::size_t>(rows));

    const double blow_up = 1e6 * (1.0 + (dmp.goal - dmp.start).norm());
    bool grabbed = false;
    Eigen::VectorXd hold;

    for (Eigen::Index k = 0; k < rows; ++k) {
        const double t = static_cast<double>(k) * dt;

        // Fixed draw order keeps runs comparable across scenario variants.
        const Eigen::VectorXd bias = noise.bias_step();
        const Eigen::VectorXd w_meas = noise.measurement_noise();
        const Eigen::VectorXd w_proc = noise.process_noise();

        measurements.push_back(y_a + bias + w_meas);
        const Eigen::VectorXd& seen =
            measurements[static_cast<std::size_t>(std::max<Eigen::Index>(0, k - delay_steps))];
        const Eigen::VectorXd& seen_prev =
            measurements[static_cast<std::size_t>(std::max<Eigen::Index>(0, k - 1 - delay_steps))];
        const Eigen::VectorXd raw_vel = (seen - seen_prev) / dt;
        v_hat = velocity_filter(v_hat, raw_vel, gains.velocity_filter_cutoff, dt);

        auto [next, out] = coupled_step(dmp, st, seen, v_hat, gains, dt);

        log.t(k) = t;
        log.y_c.row(k) = st.y_c;
        log.y_a.row(k) = y_a;
        log.acc.row(k) = out.y_r_ddot;
        log.tau_a(k) = next.tau_a;
        log.e.row(k) = next.e;
        log.x(k) = st.x;
        result.saturated = result.saturated || out.saturated;

        if ((y_a - st.y_c).norm() > blow_up) {
            const Eigen::Index kept = k + 1;
            log.t.conservativeResize(kept);
            log.y_u.conservativeResize(kept, ch);
            log.y_c.conservativeResize(kept, ch);
            log.y_a.conservativeResize(kept, ch);
            log.acc.conservativeResize(kept, ch);
            log.tau_a.conservativeResize(kept);
            log.e.conservativeResize(kept, ch);
            log.x.conservativeResize(kept);
            result.diverged = true;
            break;
        }
        if (k == n_steps) break;

        const bool active =
            pert.kind != PerturbationKind::None && t >= pert.t_start && t < pert.t_end;
        if (active) {
            if (!grabbed) {
                grabbed = true;
                hold = y_a;
            }
            if (pert.kind == PerturbationKind::Stop) {
                y_a = hold;
                v_a.setZero();
            } else {
                // Half-sine detour on channel 0: out to the full amplitude
                // mid-window and back to the hold point.
                const double width = pert.t_end - pert.t_start;
                const double phase =
                    M_PI * (static_cast<double>(k + 1) * dt - pert.t_start) / width;
                y_a = hold;
                y_a(0) += pert.move_amplitude * std::sin(phase);
                v_a.setZero();
                v_a(0) = pert.move_amplitude * (M_PI / width) * std::cos(phase);
            }
        } else {
            y_a += dt * v_a;
            v_a += dt * out.y_r_ddot + w_proc;
        }
        st = next;
    }

    result.metrics = compute_metrics(result, dmp.goal);
    return result;
}

Metrics compute_metrics(const ScenarioResult& result, const Eigen::VectorXd& goal) {
    const ScenarioLog& log = result.log;
    const Eigen::Index n = log.t.size();
    if (n == 0) throw std::invalid_argument("metrics: empty log");
    if (log.y_a.cols() != goal.size())
        throw std::invalid_argument("metrics: goal dimension mismatch");

    Metrics m;
    m.max_abs_acceleration = log.acc.cwiseAbs().maxCoeff();
    m.final_goal_error = (log.y_a.row(n - 1).transpose() - goal).norm();

    const Perturbation& pert = result.config.perturbation;
    m.recovery_time = kNaN;
    if (pert.kind != PerturbationKind::None) {
        const auto window = static_cast<Eigen::Index>(
            std::llround(kRecoveryHold / result.config.dt)) + 1;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (log.t(k) < pert.t_end) continue;
            if (k + window > n) break;
            bool settled = true;
            for (Eigen::Index j = k; j < k + window && settled; ++j)
                settled = (log.y_a.row(j) - log.y_c.row(j)).norm() < kRecoveryBand;
            if (settled) {
                m.recovery_time = log.t(k) - pert.t_end;
                break;
            }
        }
    }

    m.slowdown_ratio = kNaN;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (log.x(k) <= kPhaseArrival) {
            double x = 1.0;
            long nominal = 0;
            while (x > kPhaseArrival && nominal < 100000000L) {
                x += result.config.dt * (-result.alpha_x * x / result.tau);
                ++nominal;
            }
            m.slowdown_ratio =
                log.t(k) / (static_cast<double>(nominal) * result.config.dt);
            break;
        }
    }
    return m;
}

}  // namespace dmpkit
