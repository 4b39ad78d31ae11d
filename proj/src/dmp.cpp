#include "dmpkit/dmp.hpp"

#include <cmath>
#include <stdexcept>

namespace dmpkit {

namespace {

constexpr double kActivationFloor = 1e-12;

// A channel whose demonstration never leaves its start cannot anchor the
// forcing scale s = x * (g - y0); it gets zero weights instead.
bool degenerate_travel(double travel, double scale) {
    return std::abs(travel) < 1e-9 * (1.0 + std::abs(scale));
}

}  // namespace

void validate(const Dmp& dmp) {
    const Eigen::Index nb = dmp.n_basis();
    const Eigen::Index ch = dmp.channels();
    if (nb < 1) throw std::invalid_argument("dmp: need at least one basis");
    if (ch < 1) throw std::invalid_argument("dmp: need at least one channel");
    if (dmp.widths.size() != nb)
        throw std::invalid_argument("dmp: widths size must match centers");
    if (dmp.weights.rows() != nb || dmp.weights.cols() != ch)
        throw std::invalid_argument("dmp: weights must be n_basis x n_channels");
    if (dmp.start.size() != ch)
        throw std::invalid_argument("dmp: start size must match goal");
    if (!(dmp.tau > 0.0)) throw std::invalid_argument("dmp: tau must be positive");
    if (!(dmp.alpha_z > 0.0) || !(dmp.alpha_x > 0.0))
        throw std::invalid_argument("dmp: gains must be positive");
    if (dmp.beta_z != dmp.alpha_z / 4.0)
        throw std::invalid_argument("dmp: beta_z must equal alpha_z/4");
    for (Eigen::Index i = 0; i < nb; ++i) {
        if (!(dmp.centers(i) > 0.0) || dmp.centers(i) > 1.0)
            throw std::invalid_argument("dmp: centers must lie in (0, 1]");
        if (!(dmp.widths(i) > 0.0))
            throw std::invalid_argument("dmp: widths must be positive");
        if (i + 1 < nb && !(dmp.centers(i) > dmp.centers(i + 1)))
            throw std::invalid_argument("dmp: centers must strictly decrease");
    }
    if (!dmp.weights.allFinite() || !dmp.goal.allFinite() || !dmp.start.allFinite())
        throw std::invalid_argument("dmp: values must be finite");
}

void basis_layout(Eigen::Index n_basis, double alpha_x,
                  Eigen::VectorXd& centers, Eigen::VectorXd& widths) {
    if (n_basis < 1)
        throw std::invalid_argument("basis_layout: need at least one basis");
    if (!(alpha_x > 0.0))
        throw std::invalid_argument("basis_layout: alpha_x must be positive");
    centers.resize(n_basis);
    widths.resize(n_basis);
    if (n_basis == 1) {
        centers(0) = 1.0;
        widths(0) = 0.75 * (1.0 - std::exp(-alpha_x));
        return;
    }
    for (Eigen::Index i = 0; i < n_basis; ++i)
        centers(i) = std::exp(-alpha_x * static_cast<double>(i) /
                              static_cast<double>(n_basis - 1));
    for (Eigen::Index i = 0; i + 1 < n_basis; ++i)
        widths(i) = 0.75 * (centers(i) - centers(i + 1));
    widths(n_basis - 1) = widths(n_basis - 2);
}

Eigen::VectorXd basis_activations(const Dmp& dmp, double x) {
    if (!(x > 0.0))
        throw std::domain_error("basis_activations: phase must be positive");
    Eigen::VectorXd act(dmp.n_basis());
    for (Eigen::Index i = 0; i < dmp.n_basis(); ++i) {
        const double d = x - dmp.centers(i);
        act(i) = std::exp(-d * d / (2.0 * dmp.widths(i) * dmp.widths(i)));
    }
    return act;
}

Eigen::VectorXd forcing(const Dmp& dmp, double x, bool* underflow) {
    const Eigen::VectorXd psi = basis_activations(dmp, x);
    const double total = psi.sum();
    if (underflow) *underflow = total < kActivationFloor;
    if (total < kActivationFloor) return Eigen::VectorXd::Zero(dmp.channels());
    const Eigen::VectorXd mix = dmp.weights.transpose() * psi / total;
    return (mix * x).cwiseProduct(dmp.goal - dmp.start);
}

Eigen::MatrixXd forcing_target(const Trajectory& demo, double tau,
                               double alpha_z, double beta_z,
                               const Eigen::VectorXd& goal) {
    validate(demo);
    if (goal.size() != demo.channels())
        throw std::invalid_argument("forcing_target: goal size mismatch");
    if (!(tau > 0.0))
        throw std::invalid_argument("forcing_target: tau must be positive");
    const Eigen::MatrixXd vel = finite_difference(demo.samples, demo.dt);
    const Eigen::MatrixXd acc = finite_difference(vel, demo.dt);
    Eigen::MatrixXd target(demo.rows(), demo.channels());
    for (Eigen::Index k = 0; k < demo.rows(); ++k)
        target.row(k) =
            tau * tau * acc.row(k) -
            alpha_z * (beta_z * (goal.transpose() - demo.samples.row(k)) -
                       tau * vel.row(k));
    return target;
}

Dmp fit(const Trajectory& demo, double tau, Eigen::Index n_basis,
        double alpha_z, double alpha_x,
        std::vector<int>* degenerate_channels) {
    validate(demo);
    if (n_basis < 2)
        throw std::invalid_argument("fit: need at least two basis functions");
    if (!(alpha_z > 0.0) || !(alpha_x > 0.0))
        throw std::invalid_argument("fit: gains must be positive");

    Dmp dmp;
    dmp.alpha_z = alpha_z;
    dmp.beta_z = alpha_z / 4.0;
    dmp.alpha_x = alpha_x;
    basis_layout(n_basis, alpha_x, dmp.centers, dmp.widths);
    dmp.start = demo.samples.row(0).transpose();
    dmp.goal = demo.samples.row(demo.rows() - 1).transpose();

    // The regression runs in the demonstration's own clock: the phase decays
    // over its duration, and the target uses the same time constant, so the
    // learned weights are independent of the execution tau requested.
    const double T = demo.duration();
    dmp.tau = tau > 0.0 ? tau : T;
    const double factor = 1.0 - alpha_x * demo.dt / T;
    if (!(factor > 0.0))
        throw std::invalid_argument("fit: dt too coarse for the phase dynamics");

    const Eigen::Index n = demo.rows();
    Eigen::VectorXd phase(n);
    phase(0) = 1.0;
    for (Eigen::Index k = 1; k < n; ++k) phase(k) = phase(k - 1) * factor;

    Eigen::MatrixXd psi(n, n_basis);
    for (Eigen::Index k = 0; k < n; ++k)
        psi.row(k) = basis_activations(dmp, phase(k)).transpose();

    const Eigen::MatrixXd target =
        forcing_target(demo, T, alpha_z, dmp.beta_z, dmp.goal);

    dmp.weights = Eigen::MatrixXd::Zero(n_basis, demo.channels());
    const double span = demo.samples.cwiseAbs().maxCoeff();
    for (Eigen::Index ch = 0; ch < demo.channels(); ++ch) {
        const double travel = dmp.goal(ch) - dmp.start(ch);
        if (degenerate_travel(travel, span)) {
            if (degenerate_channels)
                degenerate_channels->push_back(static_cast<int>(ch));
            continue;
        }
        const Eigen::VectorXd s = phase * travel;
        for (Eigen::Index i = 0; i < n_basis; ++i) {
            double num = 0.0, den = 0.0;
            for (Eigen::Index k = 0; k < n; ++k) {
                num += psi(k, i) * s(k) * target(k, ch);
                den += psi(k, i) * s(k) * s(k);
            }
            if (den > 1e-280) dmp.weights(i, ch) = num / den;
        }
    }
    validate(dmp);
    return dmp;
}

DmpState initial_state(const Dmp& dmp) {
    DmpState state;
    state.x = 1.0;
    state.y = dmp.start;
    state.z = Eigen::VectorXd::Zero(dmp.channels());
    return state;
}

DmpState step(const Dmp& dmp, const DmpState& state, double dt) {
    const Eigen::VectorXd f = forcing(dmp, state.x);
    DmpState next;
    next.z = state.z +
             dt * ((dmp.alpha_z * (dmp.beta_z * (dmp.goal - state.y) - state.z) +
                    f) /
                   dmp.tau);
    next.y = state.y + dt * (state.z / dmp.tau);
    next.x = state.x + dt * (-dmp.alpha_x * state.x / dmp.tau);
    return next;
}

Trajectory rollout(const Dmp& dmp, double duration, double dt) {
    validate(dmp);
    if (duration < 0.0 || !(dt > 0.0))
        throw std::invalid_argument("rollout: bad duration or dt");
    if (!(1.0 - dmp.alpha_x * dt / dmp.tau > 0.0))
        throw std::invalid_argument("rollout: dt too coarse for the phase dynamics");

    const Eigen::Index steps =
        static_cast<Eigen::Index>(std::llround(duration / dt));
    Trajectory out;
    out.dt = dt;
    out.samples.resize(steps + 1, dmp.channels());
    DmpState state = initial_state(dmp);
    out.samples.row(0) = state.y.transpose();
    for (Eigen::Index k = 1; k <= steps; ++k) {
        state = step(dmp, state, dt);
        out.samples.row(k) = state.y.transpose();
    }
    return out;
}

}  // namespace dmpkit
