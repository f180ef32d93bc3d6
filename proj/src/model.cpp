#include "bdr/model.hpp"

#include "bdr/errors.hpp"
#include "bdr/spectral.hpp"

#include <cmath>
#include <utility>

namespace bdr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

SqrtFactors symmetric_sqrt(const Eigen::MatrixXd& cov, double jitter) {
    detail::require_symmetric(cov, "symmetric_sqrt");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver((cov + cov.transpose()) / 2.0);
    if (solver.info() != Eigen::Success)
        throw NoConvergenceError("symmetric_sqrt: eigensolver did not converge");
    Eigen::VectorXd values = solver.eigenvalues();
    const double vmax = values.maxCoeff();
    if (values.minCoeff() < -1e-10 * std::max(vmax, 1e-300))
        throw IndefiniteError("symmetric_sqrt: matrix has negative eigenvalues");
    if (jitter < 0.0) jitter = 1e-12 * std::max(vmax, 0.0);
    values = values.cwiseMax(jitter);
    if (values.minCoeff() <= 0.0)
        throw IndefiniteError("symmetric_sqrt: zero eigenvalue with zero jitter");

    const Eigen::MatrixXd& v = solver.eigenvectors();
    SqrtFactors out;
    out.sqrt = v * values.cwiseSqrt().asDiagonal() * v.transpose();
    out.inv_sqrt = v * values.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
    out.condition_number = values.maxCoeff() / values.minCoeff();
    out.log_det = values.array().log().sum();
    return out;
}

WhiteningPair whitening_from_covs(const Eigen::MatrixXd& pr_cov,
                                  const Eigen::MatrixXd& obs_cov, double jitter) {
    const SqrtFactors pr = symmetric_sqrt(pr_cov, jitter);
    const SqrtFactors obs = symmetric_sqrt(obs_cov, jitter);
    WhiteningPair pair;
    pair.pr_sqrt = pr.sqrt;
    pair.pr_inv_sqrt = pr.inv_sqrt;
    pair.obs_sqrt = obs.sqrt;
    pair.obs_inv_sqrt = obs.inv_sqrt;
    pair.condition_numbers = {pr.condition_number, obs.condition_number};
    return pair;
}

// ---------------------------------------------------------------------------
// BayesModel defaults: every optional entry point reports itself missing.

Eigen::VectorXd BayesModel::prior_sample(RandomStream&) const {
    throw UnsupportedCapability("model does not provide prior sampling");
}

double BayesModel::prior_logpdf(const Eigen::VectorXd&) const {
    throw UnsupportedCapability("model does not provide a prior density");
}

Eigen::VectorXd BayesModel::sample_data(const Eigen::VectorXd&, RandomStream&) const {
    throw UnsupportedCapability("model does not provide data sampling");
}

double BayesModel::log_likelihood(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
    throw UnsupportedCapability("model does not provide likelihood evaluations");
}

Eigen::MatrixXd BayesModel::mixed_grad(const Eigen::VectorXd&, const Eigen::VectorXd&) const {
    throw UnsupportedCapability("model does not provide mixed gradients");
}

std::vector<Eigen::Index> BayesModel::grad_param_mask() const {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(dim_x()));
    for (Eigen::Index i = 0; i < dim_x(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
}

Eigen::VectorXd BayesModel::conditional_prior_sample(const Eigen::MatrixXd&, Eigen::Index,
                                                     const Eigen::VectorXd&, RandomStream&) const {
    throw UnsupportedCapability("model does not provide conditional prior sampling");
}

Eigen::VectorXd BayesModel::conditional_prior_mean(const Eigen::MatrixXd&, Eigen::Index,
                                                   const Eigen::VectorXd&) const {
    throw UnsupportedCapability("model does not provide conditional prior moments");
}

double BayesModel::projected_log_likelihood(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                            const Eigen::MatrixXd&) const {
    throw UnsupportedCapability("model does not provide a closed-form projected likelihood");
}

Eigen::MatrixXd mixed_grad(const BayesModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) {
    if (!has_capability(model.capabilities(), Capability::mixed_grad))
        throw UnsupportedCapability("mixed_grad: model lacks the mixed_grad capability");
    if (x.size() != model.dim_x() || y.size() != model.dim_y())
        throw DimensionError("mixed_grad: point shapes do not match the model");
    Eigen::MatrixXd m = model.mixed_grad(x, y);
    if (m.rows() != model.dim_y() || m.cols() != model.dim_x())
        throw DimensionError("mixed_grad: model returned a wrongly shaped matrix");
    return m;
}

// ---------------------------------------------------------------------------
// GaussianConditional

GaussianConditional::GaussianConditional(const Eigen::VectorXd& mean,
                                         const Eigen::MatrixXd& cov,
                                         const Eigen::MatrixXd& u_basis, Eigen::Index r)
    : r_(r) {
    const Eigen::Index d = mean.size();
    if (u_basis.rows() != d || u_basis.cols() != d)
        throw DimensionError("GaussianConditional: basis must be d x d");
    if (r < 0 || r > d) throw DimensionError("GaussianConditional: r out of [0, d]");
    const Eigen::MatrixXd u_r = u_basis.leftCols(r);
    const Eigen::MatrixXd u_perp = u_basis.rightCols(d - r);

    mean_r_ = u_r.transpose() * mean;
    mean_perp_ = u_perp.transpose() * mean;
    const Eigen::MatrixXd sig_rr = u_r.transpose() * cov * u_r;
    const Eigen::MatrixXd sig_pr = u_perp.transpose() * cov * u_r;
    const Eigen::MatrixXd sig_pp = u_perp.transpose() * cov * u_perp;

    if (r == 0) {
        gain_ = Eigen::MatrixXd::Zero(d - r, r);
        cond_cov_ = sig_pp;
    } else {
        gain_ = sig_pr * sig_rr.llt().solve(Eigen::MatrixXd::Identity(r, r));
        cond_cov_ = sig_pp - gain_ * sig_pr.transpose();
    }
    cond_cov_ = (cond_cov_ + cond_cov_.transpose()) / 2.0;
    cond_sqrt_ = symmetric_sqrt(cond_cov_).sqrt;
}

Eigen::VectorXd GaussianConditional::mean_given(const Eigen::VectorXd& x_r) const {
    if (x_r.size() != r_) throw DimensionError("GaussianConditional: x_r has wrong size");
    return mean_perp_ + gain_ * (x_r - mean_r_);
}

Eigen::VectorXd GaussianConditional::sample(const Eigen::VectorXd& x_r, RandomStream& rng) const {
    return mean_given(x_r) + cond_sqrt_ * rng.normal_vector(cond_sqrt_.rows());
}

// ---------------------------------------------------------------------------
// GaussianErrorModel

GaussianErrorModel::GaussianErrorModel(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov,
                                       Eigen::MatrixXd noise_cov, double jitter)
    : prior_mean_(std::move(prior_mean)),
      prior_cov_(std::move(prior_cov)),
      noise_cov_(std::move(noise_cov)) {
    if (prior_cov_.rows() != prior_mean_.size() || prior_cov_.rows() != prior_cov_.cols())
        throw DimensionError("GaussianErrorModel: prior covariance shape mismatch");
    if (noise_cov_.rows() != noise_cov_.cols())
        throw DimensionError("GaussianErrorModel: noise covariance must be square");
    const SqrtFactors pr = symmetric_sqrt(prior_cov_, jitter);
    const SqrtFactors obs = symmetric_sqrt(noise_cov_, jitter);
    whitening_.pr_sqrt = pr.sqrt;
    whitening_.pr_inv_sqrt = pr.inv_sqrt;
    whitening_.obs_sqrt = obs.sqrt;
    whitening_.obs_inv_sqrt = obs.inv_sqrt;
    whitening_.condition_numbers = {pr.condition_number, obs.condition_number};
    noise_precision_ = obs.inv_sqrt * obs.inv_sqrt;
    prior_log_det_ = pr.log_det;
    noise_log_det_ = obs.log_det;
    standard_normal_prior_ =
        prior_mean_.isZero(0.0) &&
        prior_cov_.isIdentity(1e-14);
}

Capability GaussianErrorModel::capabilities() const {
    return Capability::prior_sample | Capability::likelihood_logpdf | Capability::mixed_grad |
           Capability::forward_jacobian | Capability::conditional_prior;
}

Eigen::VectorXd GaussianErrorModel::prior_sample(RandomStream& rng) const {
    return prior_mean_ + whitening_.pr_sqrt * rng.normal_vector(dim_x());
}

double GaussianErrorModel::prior_logpdf(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = whitening_.pr_inv_sqrt * (x - prior_mean_);
    return -0.5 * (dim_x() * kLog2Pi + prior_log_det_ + z.squaredNorm());
}

Eigen::VectorXd GaussianErrorModel::sample_data(const Eigen::VectorXd& x, RandomStream& rng) const {
    return forward(x) + whitening_.obs_sqrt * rng.normal_vector(dim_y());
}

double GaussianErrorModel::log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd z = whitening_.obs_inv_sqrt * (y - forward(x));
    return -0.5 * (dim_y() * kLog2Pi + noise_log_det_ + z.squaredNorm());
}

Eigen::MatrixXd GaussianErrorModel::mixed_grad(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd&) const {
    return noise_precision_ * forward_jacobian(x);
}

Eigen::VectorXd GaussianErrorModel::conditional_prior_sample(const Eigen::MatrixXd& u_basis,
                                                             Eigen::Index r,
                                                             const Eigen::VectorXd& x_r,
                                                             RandomStream& rng) const {
    if (standard_normal_prior_) {
        // Orthogonal split of N(0, I): the complement block is standard normal
        // and independent of x_r.
        return rng.normal_vector(dim_x() - r);
    }
    return GaussianConditional(prior_mean_, prior_cov_, u_basis, r).sample(x_r, rng);
}

Eigen::VectorXd GaussianErrorModel::conditional_prior_mean(const Eigen::MatrixXd& u_basis,
                                                           Eigen::Index r,
                                                           const Eigen::VectorXd& x_r) const {
    if (standard_normal_prior_) return Eigen::VectorXd::Zero(dim_x() - r);
    return GaussianConditional(prior_mean_, prior_cov_, u_basis, r).mean_given(x_r);
}

double GaussianErrorModel::projected_log_likelihood(const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& y_s,
                                                    const Eigen::MatrixXd& v_s) const {
    if (v_s.rows() != dim_y() || v_s.cols() != y_s.size())
        throw DimensionError("projected_log_likelihood: basis/data shape mismatch");
    const Eigen::VectorXd mean = v_s.transpose() * (whitening_.obs_inv_sqrt * forward(x));
    return -0.5 * (y_s.size() * kLog2Pi + (y_s - mean).squaredNorm());
}

CallbackGaussianModel::CallbackGaussianModel(Eigen::VectorXd prior_mean,
                                             Eigen::MatrixXd prior_cov,
                                             Eigen::MatrixXd noise_cov, ForwardFn forward,
                                             JacobianFn jacobian)
    : GaussianErrorModel(std::move(prior_mean), std::move(prior_cov), std::move(noise_cov)),
      forward_(std::move(forward)),
      jacobian_(std::move(jacobian)) {}

// ---------------------------------------------------------------------------
// WhitenedGaussianModel

WhitenedGaussianModel::WhitenedGaussianModel(std::shared_ptr<const GaussianErrorModel> base)
    : GaussianErrorModel(Eigen::VectorXd::Zero(base->dim_x()),
                         Eigen::MatrixXd::Identity(base->dim_x(), base->dim_x()),
                         Eigen::MatrixXd::Identity(base->dim_y(), base->dim_y())),
      base_(std::move(base)) {}

Eigen::VectorXd WhitenedGaussianModel::forward(const Eigen::VectorXd& x_white) const {
    return base_->whitening().obs_inv_sqrt * base_->forward(from_whitened_x(x_white));
}

Eigen::MatrixXd WhitenedGaussianModel::forward_jacobian(const Eigen::VectorXd& x_white) const {
    return base_->whitening().obs_inv_sqrt *
           base_->forward_jacobian(from_whitened_x(x_white)) * base_->whitening().pr_sqrt;
}

std::vector<Eigen::Index> WhitenedGaussianModel::grad_param_mask() const {
    return base_->grad_param_mask();
}

Eigen::VectorXd WhitenedGaussianModel::to_whitened_x(const Eigen::VectorXd& x) const {
    return base_->whitening().pr_inv_sqrt * (x - base_->prior_mean());
}

Eigen::VectorXd WhitenedGaussianModel::from_whitened_x(const Eigen::VectorXd& x_white) const {
    return base_->prior_mean() + base_->whitening().pr_sqrt * x_white;
}

Eigen::VectorXd WhitenedGaussianModel::to_whitened_y(const Eigen::VectorXd& y) const {
    return base_->whitening().obs_inv_sqrt * y;
}

Eigen::VectorXd WhitenedGaussianModel::from_whitened_y(const Eigen::VectorXd& y_white) const {
    return base_->whitening().obs_sqrt * y_white;
}

std::shared_ptr<const WhitenedGaussianModel> whitened_model(
    std::shared_ptr<const GaussianErrorModel> model) {
    if (!has_capability(model->capabilities(), Capability::forward_jacobian))
        throw UnsupportedCapability("whitened_model: base model lacks forward Jacobians");
    return std::make_shared<const WhitenedGaussianModel>(std::move(model));
}

}  // namespace bdr
