#pragma once

#include <Eigen/Dense>

namespace dmpkit {

// Uniformly sampled multi-channel signal. Row k holds all channels at time
// k*dt; time starts at zero.
struct Trajectory {
    Eigen::MatrixXd samples;  // n_samples x n_channels
    double dt = 0.0;

    Eigen::Index rows() const { return samples.rows(); }
    Eigen::Index channels() const { return samples.cols(); }
    double duration() const { return dt * static_cast<double>(samples.rows() - 1); }
};

// Throws std::invalid_argument unless dt > 0, rows >= min_rows, channels >= 1
// and all values are finite.
void validate(const Trajectory& traj, Eigen::Index min_rows = 2);

// Column-wise first derivative on a uniform grid: central differences at
// interior samples, one-sided differences at both ends. Input must have at
// least two rows.
Eigen::MatrixXd finite_difference(const Eigen::MatrixXd& values, double dt);

// Minimum-jerk point-to-point profile sampled at dt; rest-to-rest, so first
// and last rows equal start and goal with zero end velocities.
Trajectory min_jerk(const Eigen::VectorXd& start, const Eigen::VectorXd& goal,
                    double duration, double dt);

}  // namespace dmpkit
