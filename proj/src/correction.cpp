#include "dmpkit/correction.hpp"

#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

namespace dmpkit {

Eigen::Index find_split(const Trajectory& deficient,
                        const Eigen::VectorXd& corrective_first) {
    validate(deficient);
    if (corrective_first.size() != deficient.channels())
        throw std::invalid_argument("find_split: channel count mismatch");
    Eigen::Index best = 0;
    double best_sq = (deficient.samples.row(0).transpose() - corrective_first)
                         .squaredNorm();
    for (Eigen::Index k = 1; k < deficient.rows(); ++k) {
        const double sq =
            (deficient.samples.row(k).transpose() - corrective_first).squaredNorm();
        if (sq < best_sq) {
            best_sq = sq;
            best = k;
        }
    }
    return best;
}

namespace {

// The terminal constraints fix the last two samples outright:
//   y[M-1] = c[0],   y[M-2] = 2 c[0] - c[1].
// What remains is an unconstrained ridge problem over u = y[0..M-3]:
//   (I + lambda * G_uu) u = p_head - lambda * G_uv * v
// with G = D2^T D2 split around the fixed tail v. G is pentadiagonal, so a
// sparse Cholesky factorization solves all channels at once.
Eigen::MatrixXd solve_prefix(const Eigen::MatrixXd& p, double lambda,
                             const Eigen::RowVectorXd& last,
                             const Eigen::RowVectorXd& second_last) {
    const Eigen::Index m = p.rows();
    const Eigen::Index free = m - 2;

    Eigen::MatrixXd y(m, p.cols());
    y.row(m - 1) = last;
    y.row(m - 2) = second_last;
    if (free == 0) return y;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(free) * 6 + static_cast<size_t>(free));
    Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(free, 2);
    for (Eigen::Index i = 0; i < free; ++i)
        triplets.emplace_back(i, i, 1.0);

    const double stencil[3] = {1.0, -2.0, 1.0};
    for (Eigen::Index r = 0; r + 2 < m; ++r) {
        for (int a = 0; a < 3; ++a) {
            const Eigen::Index ia = r + a;
            for (int b = 0; b < 3; ++b) {
                const Eigen::Index ib = r + b;
                const double coeff = lambda * stencil[a] * stencil[b];
                if (ia < free && ib < free)
                    triplets.emplace_back(ia, ib, coeff);
                else if (ia < free)
                    coupling(ia, ib - free) += coeff;
            }
        }
    }

    Eigen::SparseMatrix<double> system(free, free);
    system.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::MatrixXd fixed(2, p.cols());
    fixed.row(0) = second_last;
    fixed.row(1) = last;
    const Eigen::MatrixXd rhs = p.topRows(free) - coupling * fixed;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("smooth_prefix: factorization failed");
    y.topRows(free) = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("smooth_prefix: solve failed");
    return y;
}

}  // namespace

Trajectory smooth_prefix(const Trajectory& prefix, const Trajectory& corrective,
                         double lambda) {
    validate(prefix, 3);
    validate(corrective, 2);
    if (prefix.channels() != corrective.channels())
        throw std::invalid_argument("smooth_prefix: channel count mismatch");
    if (lambda < 0.0)
        throw std::invalid_argument("smooth_prefix: lambda must be non-negative");

    const Eigen::RowVectorXd c0 = corrective.samples.row(0);
    const Eigen::RowVectorXd c1 = corrective.samples.row(1);
    Trajectory out;
    out.dt = prefix.dt;
    out.samples = solve_prefix(prefix.samples, lambda, c0, 2.0 * c0 - c1);
    return out;
}

MergeResult merge(const CorrectionInput& input) {
    validate(input.deficient);
    validate(input.corrective, 2);
    if (input.deficient.channels() != input.corrective.channels())
        throw std::invalid_argument("merge: channel count mismatch");
    if (input.deficient.dt != input.corrective.dt)
        throw std::invalid_argument("merge: sample periods differ");
    if (input.lambda < 0.0)
        throw std::invalid_argument("merge: lambda must be non-negative");

    MergeResult res;
    res.split_index =
        find_split(input.deficient, input.corrective.samples.row(0).transpose());
    const Eigen::Index s = res.split_index;
    const Eigen::Index m = s + 1;

    const Eigen::RowVectorXd c0 = input.corrective.samples.row(0);
    const Eigen::RowVectorXd c1 = input.corrective.samples.row(1);

    res.modified_prefix.dt = input.deficient.dt;
    if (m >= 3) {
        Trajectory prefix;
        prefix.dt = input.deficient.dt;
        prefix.samples = input.deficient.samples.topRows(m);
        res.modified_prefix = smooth_prefix(prefix, input.corrective, input.lambda);
    } else if (m == 2) {
        res.modified_prefix.samples.resize(2, input.deficient.channels());
        res.modified_prefix.samples.row(0) = 2.0 * c0 - c1;
        res.modified_prefix.samples.row(1) = c0;
    } else {
        res.modified_prefix.samples = c0;
    }

    // The junction sample appears in both pieces; keep one copy, and keep the
    // corrective tail exactly as recorded.
    const Eigen::Index tail = input.corrective.rows() - 1;
    res.merged.dt = input.deficient.dt;
    res.merged.samples.resize(s + input.corrective.rows(),
                              input.deficient.channels());
    res.merged.samples.topRows(m) = res.modified_prefix.samples;
    res.merged.samples.bottomRows(tail) = input.corrective.samples.bottomRows(tail);
    return res;
}

std::pair<MergeResult, Dmp> merge_and_refit(const CorrectionInput& input,
                                            double tau, Eigen::Index n_basis,
                                            double alpha_z, double alpha_x) {
    MergeResult res = merge(input);
    Dmp dmp = fit(res.merged, tau, n_basis, alpha_z, alpha_x);
    return {std::move(res), std::move(dmp)};
}

}  // namespace dmpkit
