#include "dmpkit/trajectory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmpkit {

void validate(const Trajectory& traj, Eigen::Index min_rows) {
    if (!(traj.dt > 0.0))
        throw std::invalid_argument("trajectory: dt must be positive");
    if (traj.samples.rows() < min_rows)
        throw std::invalid_argument("trajectory: need at least " +
                                    std::to_string(min_rows) + " samples");
    if (traj.samples.cols() < 1)
        throw std::invalid_argument("trajectory: need at least one channel");
    if (!traj.samples.allFinite())
        throw std::invalid_argument("trajectory: samples must be finite");
}

Eigen::MatrixXd finite_difference(const Eigen::MatrixXd& values, double dt) {
    const Eigen::Index n = values.rows();
    if (n < 2)
        throw std::invalid_argument("finite_difference: need at least two rows");
    if (!(dt > 0.0))
        throw std::invalid_argument("finite_difference: dt must be positive");

    Eigen::MatrixXd out(n, values.cols());
    if (n == 2) {
        out.row(0) = (values.row(1) - values.row(0)) / dt;
        out.row(1) = out.row(0);
        return out;
    }
    // Second-order one-sided stencils at the ends; first-order ones bias a
    // repeated application (acceleration from position) to half scale there.
    out.row(0) =
        (-3.0 * values.row(0) + 4.0 * values.row(1) - values.row(2)) / (2.0 * dt);
    for (Eigen::Index k = 1; k + 1 < n; ++k)
        out.row(k) = (values.row(k + 1) - values.row(k - 1)) / (2.0 * dt);
    out.row(n - 1) = (3.0 * values.row(n - 1) - 4.0 * values.row(n - 2) +
                      values.row(n - 3)) /
                     (2.0 * dt);
    return out;
}

Trajectory min_jerk(const Eigen::VectorXd& start, const Eigen::VectorXd& goal,
                    double duration, double dt) {
    if (start.size() != goal.size())
        throw std::invalid_argument("min_jerk: start and goal sizes differ");
    if (start.size() == 0)
        throw std::invalid_argument("min_jerk: need at least one channel");
    if (!(duration > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("min_jerk: duration and dt must be positive");

    const Eigen::Index n = static_cast<Eigen::Index>(std::llround(duration / dt)) + 1;
    Trajectory traj;
    traj.dt = dt;
    traj.samples.resize(n, start.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        const double u = std::min(1.0, static_cast<double>(k) * dt / duration);
        const double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
        traj.samples.row(k) = (start + s * (goal - start)).transpose();
    }
    return traj;
}

}  // namespace dmpkit
