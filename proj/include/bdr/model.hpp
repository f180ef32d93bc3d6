#pragma once

#include "bdr/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace bdr {

/// What a model implementation provides. Operations guard on these flags and
/// raise UnsupportedCapability instead of running with missing pieces.
enum class Capability : unsigned {
    none = 0,
    prior_sample = 1u << 0,
    likelihood_logpdf = 1u << 1,
    mixed_grad = 1u << 2,
    forward_jacobian = 1u << 3,
    conditional_prior = 1u << 4,
};

constexpr Capability operator|(Capability a, Capability b) {
    return static_cast<Capability>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}

constexpr bool has_capability(Capability set, Capability flag) {
    return (static_cast<unsigned>(set) & static_cast<unsigned>(flag)) != 0;
}

/// Symmetric square roots and inverse square roots of the prior and noise
/// covariances, with their post-jitter condition numbers.
struct WhiteningPair {
    Eigen::MatrixXd pr_sqrt;
    Eigen::MatrixXd pr_inv_sqrt;
    Eigen::MatrixXd obs_sqrt;
    Eigen::MatrixXd obs_inv_sqrt;
    std::array<double, 2> condition_numbers{0.0, 0.0};  // {prior, noise}
};

/// Symmetric (spectral) square root of one SPD matrix.
struct SqrtFactors {
    Eigen::MatrixXd sqrt;
    Eigen::MatrixXd inv_sqrt;
    double condition_number = 0.0;
    double log_det = 0.0;  // log det of the (jittered) matrix itself
};

/// Spectral square root with eigenvalue clamping. Eigenvalues below `jitter`
/// are raised to `jitter` before inversion; pass jitter < 0 for the default
/// 1e-12 * lambda_max. Throws NotSymmetricError / IndefiniteError.
SqrtFactors symmetric_sqrt(const Eigen::MatrixXd& cov, double jitter = -1.0);

/// Builds the pair of factors used to whiten parameters and data.
WhiteningPair whitening_from_covs(const Eigen::MatrixXd& pr_cov,
                                  const Eigen::MatrixXd& obs_cov, double jitter = -1.0);

/// Abstract Bayesian model: prior sampling, data sampling, likelihood
/// evaluation and the mixed parameter-data gradient of the log-likelihood.
/// Implementations are immutable after construction and safe to evaluate
/// concurrently; all randomness flows through caller-supplied streams.
class BayesModel {
public:
    virtual ~BayesModel() = default;

    virtual Eigen::Index dim_x() const = 0;
    virtual Eigen::Index dim_y() const = 0;
    virtual Capability capabilities() const = 0;

    virtual Eigen::VectorXd prior_sample(RandomStream& rng) const;
    virtual double prior_logpdf(const Eigen::VectorXd& x) const;

    /// Draws y ~ pi(Y | X = x).
    virtual Eigen::VectorXd sample_data(const Eigen::VectorXd& x, RandomStream& rng) const;

    /// Normalized log pi(y | x).
    virtual double log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

    /// The m x d matrix with entry (i, j) = d^2/dx_j dy_i log pi(y|x).
    virtual Eigen::MatrixXd mixed_grad(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y) const;

    /// Parameter columns of the mixed gradient to keep when assembling
    /// diagnostics. Models expose a subset here for goal-oriented runs;
    /// the default keeps every column.
    virtual std::vector<Eigen::Index> grad_param_mask() const;

    /// Samples x_perp ~ pi(X_perp | X_r = x_r) for the orthonormal column
    /// split U = [U_r, U_perp] of the parameter space.
    virtual Eigen::VectorXd conditional_prior_sample(const Eigen::MatrixXd& u_basis,
                                                     Eigen::Index r,
                                                     const Eigen::VectorXd& x_r,
                                                     RandomStream& rng) const;

    /// Mean of pi(X_perp | X_r = x_r) for the same split.
    virtual Eigen::VectorXd conditional_prior_mean(const Eigen::MatrixXd& u_basis,
                                                   Eigen::Index r,
                                                   const Eigen::VectorXd& x_r) const;

    /// log pi(Y_s = y_s | X = x) where Y_s = v_s^T (whitened data); available
    /// in closed form for Gaussian error models only.
    virtual double projected_log_likelihood(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& y_s,
                                            const Eigen::MatrixXd& v_s) const;
    virtual bool has_projected_likelihood() const { return false; }
};

/// Validated mixed-gradient access: checks the capability and the returned
/// shape before handing the matrix back.
Eigen::MatrixXd mixed_grad(const BayesModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y);

/// Conditional sampler for a Gaussian X ~ N(mean, cov) split along an
/// orthonormal basis U = [U_r, U_perp]: X_perp | X_r = x_r is Gaussian with
/// Schur-complement covariance. Factors are computed once at construction.
class GaussianConditional {
public:
    GaussianConditional(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                        const Eigen::MatrixXd& u_basis, Eigen::Index r);

    Eigen::VectorXd mean_given(const Eigen::VectorXd& x_r) const;
    Eigen::VectorXd sample(const Eigen::VectorXd& x_r, RandomStream& rng) const;
    const Eigen::MatrixXd& conditional_cov() const { return cond_cov_; }

private:
    Eigen::Index r_;
    Eigen::VectorXd mean_r_, mean_perp_;
    Eigen::MatrixXd gain_;      // Sigma_perp,r Sigma_rr^{-1}
    Eigen::MatrixXd cond_cov_;  // Schur complement
    Eigen::MatrixXd cond_sqrt_;
};

/// Gaussian error model y = G(x) + eps with eps ~ N(0, noise_cov) and a
/// Gaussian prior N(prior_mean, prior_cov). Subclasses supply the forward map
/// and its Jacobian; everything else (densities, sampling, mixed gradients,
/// conditional priors) is derived here.
class GaussianErrorModel : public BayesModel {
public:
    GaussianErrorModel(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov,
                       Eigen::MatrixXd noise_cov, double jitter = -1.0);

    virtual Eigen::VectorXd forward(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd forward_jacobian(const Eigen::VectorXd& x) const = 0;

    Eigen::Index dim_x() const override { return prior_mean_.size(); }
    Eigen::Index dim_y() const override { return noise_cov_.rows(); }
    Capability capabilities() const override;

    Eigen::VectorXd prior_sample(RandomStream& rng) const override;
    double prior_logpdf(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd sample_data(const Eigen::VectorXd& x, RandomStream& rng) const override;
    double log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
    Eigen::MatrixXd mixed_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
    Eigen::VectorXd conditional_prior_sample(const Eigen::MatrixXd& u_basis, Eigen::Index r,
                                             const Eigen::VectorXd& x_r,
                                             RandomStream& rng) const override;
    Eigen::VectorXd conditional_prior_mean(const Eigen::MatrixXd& u_basis, Eigen::Index r,
                                           const Eigen::VectorXd& x_r) const override;
    double projected_log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y_s,
                                    const Eigen::MatrixXd& v_s) const override;
    bool has_projected_likelihood() const override { return true; }

    const Eigen::VectorXd& prior_mean() const { return prior_mean_; }
    const Eigen::MatrixXd& prior_cov() const { return prior_cov_; }
    const Eigen::MatrixXd& noise_cov() const { return noise_cov_; }
    const WhiteningPair& whitening() const { return whitening_; }
    /// Gamma_obs^{-1}, cached.
    const Eigen::MatrixXd& noise_precision() const { return noise_precision_; }
    bool standard_normal_prior() const { return standard_normal_prior_; }

private:
    Eigen::VectorXd prior_mean_;
    Eigen::MatrixXd prior_cov_;
    Eigen::MatrixXd noise_cov_;
    WhiteningPair whitening_;
    Eigen::MatrixXd noise_precision_;
    double prior_log_det_ = 0.0;
    double noise_log_det_ = 0.0;
    bool standard_normal_prior_ = false;
};

/// Gaussian error model defined by plain callables; handy for small problems
/// and fixtures.
class CallbackGaussianModel final : public GaussianErrorModel {
public:
    using ForwardFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
    using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

    CallbackGaussianModel(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov,
                          Eigen::MatrixXd noise_cov, ForwardFn forward, JacobianFn jacobian);

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const override { return forward_(x); }
    Eigen::MatrixXd forward_jacobian(const Eigen::VectorXd& x) const override {
        return jacobian_(x);
    }

private:
    ForwardFn forward_;
    JacobianFn jacobian_;
};

/// The same inverse problem expressed in whitened coordinates
/// xbar = pr_inv_sqrt (x - prior_mean), ybar = obs_inv_sqrt y: standard normal
/// prior, identity noise, forward map obs_inv_sqrt G(prior_mean + pr_sqrt xbar).
class WhitenedGaussianModel final : public GaussianErrorModel {
public:
    explicit WhitenedGaussianModel(std::shared_ptr<const GaussianErrorModel> base);

    Eigen::VectorXd forward(const Eigen::VectorXd& x_white) const override;
    Eigen::MatrixXd forward_jacobian(const Eigen::VectorXd& x_white) const override;
    std::vector<Eigen::Index> grad_param_mask() const override;

    const GaussianErrorModel& base() const { return *base_; }
    const WhiteningPair& base_whitening() const { return base_->whitening(); }

    Eigen::VectorXd to_whitened_x(const Eigen::VectorXd& x) const;
    Eigen::VectorXd from_whitened_x(const Eigen::VectorXd& x_white) const;
    Eigen::VectorXd to_whitened_y(const Eigen::VectorXd& y) const;
    Eigen::VectorXd from_whitened_y(const Eigen::VectorXd& y_white) const;

private:
    std::shared_ptr<const GaussianErrorModel> base_;
};

/// Wraps a Gaussian error model in whitened coordinates.
std::shared_ptr<const WhitenedGaussianModel> whitened_model(
    std::shared_ptr<const GaussianErrorModel> model);

}  // namespace bdr
