#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dmpkit/trajectory.hpp"

namespace dmpkit {

// Point-to-point movement primitive: a critically damped second-order
// attractor toward `goal`, shaped by a learned forcing term driven by a phase
// variable x that decays from 1 toward 0. One weight vector per channel.
struct Dmp {
    Eigen::MatrixXd weights;  // n_basis x n_channels
    Eigen::VectorXd centers;  // n_basis, in (0, 1], strictly decreasing
    Eigen::VectorXd widths;   // n_basis, > 0
    Eigen::VectorXd goal;     // n_channels
    Eigen::VectorXd start;    // n_channels
    double tau = 1.0;
    double alpha_z = 25.0;
    double beta_z = 6.25;  // = alpha_z / 4: critical damping
    double alpha_x = 1.0;

    Eigen::Index n_basis() const { return centers.size(); }
    Eigen::Index channels() const { return goal.size(); }
};

struct DmpState {
    double x = 1.0;
    Eigen::VectorXd y;  // position
    Eigen::VectorXd z;  // scaled velocity, z = tau * y_dot
};

// Throws std::invalid_argument on inconsistent dimensions, non-positive
// tau/alpha/widths, centers out of order, or beta_z != alpha_z/4.
void validate(const Dmp& dmp);

// Basis centers equally spaced in phase-time (exponentially spaced in x),
// widths 0.75x the gap to the next center, last width copied.
void basis_layout(Eigen::Index n_basis, double alpha_x,
                  Eigen::VectorXd& centers, Eigen::VectorXd& widths);

// Unnormalized Gaussian activations of every basis function at phase x > 0.
Eigen::VectorXd basis_activations(const Dmp& dmp, double x);

// Normalized weighted sum of basis activations, scaled by x*(goal - start),
// one value per channel. Once the total activation underflows (x far below
// the basis support) the forcing is zero by definition; *underflow reports it.
Eigen::VectorXd forcing(const Dmp& dmp, double x, bool* underflow = nullptr);

// Forcing values the attractor would need to reproduce the demonstration
// exactly; one row per demonstration sample. Derivatives of the demonstration
// come from finite differences.
Eigen::MatrixXd forcing_target(const Trajectory& demo, double tau,
                               double alpha_z, double beta_z,
                               const Eigen::VectorXd& goal);

// Locally weighted regression of basis weights onto the demonstration.
// tau <= 0 means "use the demonstration duration". Channels whose goal and
// first sample coincide get zero weights; their indices are appended to
// *degenerate_channels when given.
Dmp fit(const Trajectory& demo, double tau = 0.0, Eigen::Index n_basis = 30,
        double alpha_z = 25.0, double alpha_x = 1.0,
        std::vector<int>* degenerate_channels = nullptr);

DmpState initial_state(const Dmp& dmp);

// One explicit-Euler step of the phase and transformation systems.
DmpState step(const Dmp& dmp, const DmpState& state, double dt);

// Integrate round(duration/dt) steps from the initial state; row k of the
// result is the position after k steps, so duration 0 yields the single
// sample y0. Positions converge to the goal for duration >= 1.5 tau.
Trajectory rollout(const Dmp& dmp, double duration, double dt = 0.004);

}  // namespace dmpkit
