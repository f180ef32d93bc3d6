#pragma once

#include "bdr/model.hpp"
#include "bdr/reduction.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>

namespace bdr {

/// How the inner conditional-prior completions of the reduced-likelihood
/// estimator are drawn: fresh per evaluation (pseudo-marginal; the chain then
/// targets the exact reduced posterior), fixed once per chain, or replaced by
/// the conditional-prior mean.
enum class InnerMode { fresh, fixed, mean };

/// The approximate posterior built from a reduction: reduced likelihood over
/// (x_r, y_s) completed by the conditional prior over the discarded
/// directions. The model must be expressed in the coordinates of the
/// reduction's bases (use the whitened model with whitened bases).
struct ReducedPosterior {
    std::shared_ptr<const BayesModel> model;
    Reduction reduction;
    ReducedDims dims;
    std::int64_t inner_ell = 1;
    InnerMode inner_mode = InnerMode::fresh;
};

/// Closed-form log pi(Y_s = y_s | X = x) for a Gaussian error model: Gaussian
/// with unit covariance around v_s^T Gamma_obs^{-1/2} G(x). x is in the
/// model's own coordinates; v_s comes from the (whitened) reduction.
double marginal_likelihood_gaussian(const GaussianErrorModel& model, const Reduction& reduction,
                                    Eigen::Index s, const Eigen::VectorXd& y_s,
                                    const Eigen::VectorXd& x);

/// Monte Carlo log-estimate of the reduced likelihood pi(y_s | x_r): a
/// log-mean-exp over inner_ell conditional-prior completions. With r = dim_x
/// the completion is empty and the marginal likelihood is returned exactly.
double reduced_likelihood(const ReducedPosterior& post, const Eigen::VectorXd& y_s,
                          const Eigen::VectorXd& x_r, std::uint64_t seed);

/// Draws x_perp ~ pi(X_perp | X_r = x_r) for a Gaussian prior split along the
/// orthonormal basis u = [U_r, U_perp].
Eigen::VectorXd conditional_prior_gaussian(const Eigen::VectorXd& prior_mean,
                                           const Eigen::MatrixXd& prior_cov,
                                           const Eigen::MatrixXd& u_basis, Eigen::Index r,
                                           const Eigen::VectorXd& x_r, std::uint64_t seed);

struct McmcConfig {
    std::int64_t n_samples = 10000;       // kept (post burn-in) states
    double burn_in_fraction = 0.2;        // of the total chain length
    double target_acceptance = 0.234;
    double initial_step = -1.0;           // < 0: 2.38 / sqrt(max(r, 1))
    bool adapt = true;
};

struct McmcResult {
    Eigen::MatrixXd samples;        // kept x draws, original coordinates, one per row
    Eigen::MatrixXd reduced_chain;  // kept x_r states
    double acceptance = 0.0;        // post burn-in acceptance rate
    double step_size = 0.0;         // final (frozen) proposal scale
    Eigen::VectorXd iact;           // per reduced coordinate
    double ess = 0.0;               // n_kept / max(iact)
    bool diverged = false;          // acceptance collapsed below 1 percent
};

/// Samples the approximate posterior given data y (original coordinates):
/// projects the data, runs an adaptive Gaussian random-walk Metropolis chain
/// on x_r against reduced_likelihood plus the standard-normal reduced prior,
/// completes each kept state with a conditional-prior draw, and assembles the
/// full-space samples.
McmcResult sample_approx_posterior(const ReducedPosterior& post, const Eigen::VectorXd& y,
                                   std::int64_t n_samples, const McmcConfig& cfg,
                                   std::uint64_t seed);

/// Integrated autocorrelation time per column via the initial-positive-
/// sequence truncation of the autocorrelation function. Chains shorter than
/// 100 states are rejected; a constant column is degenerate and reports n.
Eigen::VectorXd iact(const Eigen::MatrixXd& chain);

}  // namespace bdr
