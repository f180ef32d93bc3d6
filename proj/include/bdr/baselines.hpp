#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace bdr {

/// First and second joint moments of (X, Y), either estimated from samples
/// (unbiased, divisor n-1) or supplied exactly.
struct SampleMoments {
    Eigen::VectorXd mean_x;
    Eigen::VectorXd mean_y;
    Eigen::MatrixXd cov_x;
    Eigen::MatrixXd cov_y;
    Eigen::MatrixXd cov_xy;  // d x m
    std::int64_t n = 0;
    bool exact = false;
};

/// Sample moments from row-per-sample matrices; accumulation uses the same
/// deterministic tree reduction as the diagnostics estimator.
SampleMoments moments(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys);

/// Pass-through of exactly known moments.
SampleMoments exact_moments(Eigen::VectorXd mean_x, Eigen::VectorXd mean_y,
                            Eigen::MatrixXd cov_x, Eigen::MatrixXd cov_y,
                            Eigen::MatrixXd cov_xy);

enum class Marginal { X, Y };

/// Marginal covariance eigenbasis with variance scores.
struct PcaResult {
    Eigen::MatrixXd basis;
    Eigen::VectorXd scores;
};

PcaResult pca(const SampleMoments& mom, Marginal which);

/// Canonical correlation analysis via the two generalized eigenproblems on the
/// cross-covariance. u and v satisfy u^T Cov(X) u = I and v^T Cov(Y) v = I;
/// rho holds the generalized-eigenproblem eigenvalues, i.e. the squared
/// canonical correlations, clipped into [0, 1] and sorted descending.
struct CcaResult {
    Eigen::MatrixXd u;  // d x r
    Eigen::MatrixXd v;  // m x r
    Eigen::VectorXd rho;
};

/// ridge < 0 selects the default 1e-10 * trace/dim regularization added to
/// each covariance before inversion (sample covariances are often numerically
/// rank-deficient); pass 0 for none.
CcaResult cca(const SampleMoments& mom, Eigen::Index r, double ridge = -1.0);

}  // namespace bdr
