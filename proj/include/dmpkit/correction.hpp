#pragma once

#include <utility>

#include <Eigen/Dense>

#include "dmpkit/dmp.hpp"
#include "dmpkit/trajectory.hpp"

namespace dmpkit {

// A deficient trajectory plus the corrective segment recorded from the point
// where the operator took over. lambda weighs smoothness of the repaired
// prefix against staying close to the original.
struct CorrectionInput {
    Trajectory deficient;
    Trajectory corrective;  // first sample is where the correction starts
    double lambda = 1.0;
};

struct MergeResult {
    Trajectory merged;           // modified prefix followed by the corrective tail
    Eigen::Index split_index;    // sample of `deficient` closest to the corrective start
    Trajectory modified_prefix;  // the smoothed prefix alone (split_index + 1 rows)
};

// Index of the deficient sample closest (Euclidean over all channels) to the
// first corrective sample; smallest index wins ties.
Eigen::Index find_split(const Trajectory& deficient,
                        const Eigen::VectorXd& corrective_first);

// Per channel, solves
//   minimize ||y - p||^2 + lambda ||D2 y||^2
//   subject to y[M-1] = c[0],  y[M-1] - y[M-2] = c[1] - c[0]
// where p is the retained prefix (M = p.rows() >= 3 samples), c the corrective
// trajectory and D2 the (M-2) x M interior second-difference operator. The
// constraints hold to machine precision; unique for lambda >= 0.
Trajectory smooth_prefix(const Trajectory& prefix, const Trajectory& corrective,
                         double lambda);

MergeResult merge(const CorrectionInput& input);

// merge + fit of the merged trajectory in one call. tau <= 0 means "use the
// merged duration".
std::pair<MergeResult, Dmp> merge_and_refit(const CorrectionInput& input,
                                            double tau = 0.0,
                                            Eigen::Index n_basis = 30,
                                            double alpha_z = 25.0,
                                            double alpha_x = 1.0);

}  // namespace dmpkit
