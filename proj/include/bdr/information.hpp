#pragma once

#include "bdr/model.hpp"
#include "bdr/reduction.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace bdr {

/// Monte Carlo conditional-mutual-information estimate with its outer-loop
/// standard error.
struct CmiEstimate {
    enum class Kind { param_cmi, data_cmi };
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_outer = 0;
    std::int64_t n_inner = 0;
    Kind estimator = Kind::param_cmi;
};

/// log(mean(exp(logs))) evaluated stably. Terms are summed in a canonical
/// (sorted) order, so the result is invariant under permutations of logs.
double log_mean_exp(std::vector<double> logs);

/// Expected KL divergence of the reduced posterior for a linear-Gaussian
/// model in whitened coordinates: 0.5 * sum_{i > min(r, s)} log(1 + sigma_i^2),
/// where sigma are the singular values of the whitened forward model.
double gaussian_expected_kl(const Eigen::VectorXd& sigma, Eigen::Index r, Eigen::Index s);

/// Ratio of the analytic expected KL to lsi_const^2 times the bound's trace
/// term. Degenerate (zero tails) when nothing is truncated.
struct GapRatio {
    double value = 0.0;
    bool degenerate = false;
};

GapRatio gap_ratio(const Eigen::VectorXd& sigma, Eigen::Index r, Eigen::Index s,
                   double lsi_const);

/// Estimates I(X_perp; Y | X_r) by the likelihood-ratio estimator: the outer
/// loop averages log pi(Y|X) - log pihat(Y|X_r) over n joint samples, the
/// inner marginal uses ell conditional-prior completions. The reduction's
/// bases must be orthonormal in the model's coordinates (pass the whitened
/// model with a whitened reduction). At r = dim_x every summand cancels
/// identically and the estimate is exactly zero.
CmiEstimate cmi_param(const BayesModel& model, const Reduction& reduction, Eigen::Index r,
                      std::int64_t n, std::int64_t ell, std::uint64_t seed);

/// Estimates I(Y_perp; X | Y_s) using the closed-form projected likelihood and
/// marginal likelihoods estimated from ell prior samples shared between the
/// full and projected terms. Exactly zero at s = dim_y.
CmiEstimate cmi_data(const BayesModel& model, const Reduction& reduction, Eigen::Index s,
                     std::int64_t n, std::int64_t ell, std::uint64_t seed);

/// Runs both estimators at dims (r, s) and evaluates the gradient-trace bound
/// lsi_const^2 * B(r, s) next to them.
struct CmiBoundCheck {
    CmiEstimate param;
    CmiEstimate data;
    double cmi = 0.0;        // param.value + data.value
    double std_error = 0.0;  // pooled
    double bound = 0.0;
};

CmiBoundCheck cmi_bound_check(const BayesModel& model, const Reduction& reduction,
                              const ReducedDims& dims, double lsi_const, std::int64_t n,
                              std::int64_t ell, std::uint64_t seed);

}  // namespace bdr
