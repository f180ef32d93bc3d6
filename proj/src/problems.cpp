#include "bdr/problems.hpp"

#include "bdr/errors.hpp"
#include "bdr/matrix_io.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace bdr {

namespace {

// log of the continuous-Bernoulli normalizer C(p) = 2 artanh(1 - 2p) / (1 - 2p),
// series-expanded near p = 1/2.
double log_cb_normalizer(double p) {
    const double t = 2.0 * p - 1.0;
    if (std::abs(t) < 1e-6) return std::log(2.0 + (2.0 / 3.0) * t * t);
    return std::log(std::log(p / (1.0 - p)) / t);
}

// Inverse CDF of the continuous Bernoulli on [0, 1] with parameter p.
double cb_inverse_cdf(double p, double u) {
    const double t = 2.0 * p - 1.0;
    if (std::abs(t) < 1e-8) return u;
    return std::log1p(u * t / (1.0 - p)) / std::log(p / (1.0 - p));
}
}  // namespace

Eigen::MatrixXd random_unitary(Eigen::Index n, std::uint64_t seed) {
    RandomStream rng(seed);
    const Eigen::MatrixXd a = rng.normal_matrix(n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

Eigen::MatrixXd power_spectrum_covariance(Eigen::Index n, const PowerSpectrum& spectrum,
                                          std::uint64_t seed) {
    const Eigen::MatrixXd w = random_unitary(n, seed);
    Eigen::VectorXd diag(n);
    for (Eigen::Index i = 0; i < n; ++i)
        diag[i] = spectrum.lambda0 / std::pow(static_cast<double>(i + 1), spectrum.theta) +
                  spectrum.tau;
    Eigen::MatrixXd cov = w * diag.asDiagonal() * w.transpose();
    return (cov + cov.transpose()) / 2.0;
}

// ---------------------------------------------------------------------------
// LinearGaussianProblem

LinearGaussianProblem::LinearGaussianProblem(Eigen::MatrixXd g, Eigen::VectorXd prior_mean,
                                             Eigen::MatrixXd prior_cov, Eigen::MatrixXd noise_cov)
    : GaussianErrorModel(std::move(prior_mean), std::move(prior_cov), std::move(noise_cov)),
      g_(std::move(g)) {
    if (g_.cols() != dim_x() || g_.rows() != dim_y())
        throw DimensionError("LinearGaussianProblem: G shape does not match prior/noise");
}

std::shared_ptr<const LinearGaussianProblem> LinearGaussianProblem::benchmark(
    Eigen::Index d, Eigen::Index m, std::uint64_t seed_w, const PowerSpectrum& prior_spectrum,
    const PowerSpectrum& noise_spectrum) {
    if (d != m)
        throw DimensionError("LinearGaussianProblem::benchmark: identity forward needs d == m");
    RandomStream derive(seed_w);
    const std::uint64_t seed_prior = derive.next_u64();
    const std::uint64_t seed_noise = derive.next_u64();
    return std::make_shared<const LinearGaussianProblem>(
        Eigen::MatrixXd::Identity(m, d), Eigen::VectorXd::Zero(d),
        power_spectrum_covariance(d, prior_spectrum, seed_prior),
        power_spectrum_covariance(m, noise_spectrum, seed_noise));
}

SampleMoments LinearGaussianProblem::exact_joint_moments() const {
    return exact_moments(prior_mean(), g_ * prior_mean(), prior_cov(),
                         g_ * prior_cov() * g_.transpose() + noise_cov(),
                         prior_cov() * g_.transpose());
}

LinearGaussianProblem::Posterior LinearGaussianProblem::exact_posterior(
    const Eigen::VectorXd& y) const {
    const Eigen::Index d = dim_x();
    const Eigen::MatrixXd prior_precision =
        whitening().pr_inv_sqrt * whitening().pr_inv_sqrt;
    const Eigen::MatrixXd gt_noise_inv = g_.transpose() * noise_precision();
    const Eigen::MatrixXd post_precision = prior_precision + gt_noise_inv * g_;
    Posterior post;
    post.cov = post_precision.llt().solve(Eigen::MatrixXd::Identity(d, d));
    post.cov = (post.cov + post.cov.transpose()) / 2.0;
    post.mean = post.cov * (gt_noise_inv * y + prior_precision * prior_mean());
    return post;
}

// ---------------------------------------------------------------------------
// ImageProblem

ImageProblem::ImageProblem(Config cfg) : cfg_(cfg) {
    if (cfg_.grid < 2) throw DimensionError("ImageProblem: grid must be at least 2");
    if (!(cfg_.sigma_blob > 0.0)) throw DomainError("ImageProblem: sigma_blob must be > 0");
    if (!cfg_.param_mask[0] && !cfg_.param_mask[1] && !cfg_.param_mask[2])
        throw DomainError("ImageProblem: param_mask must keep at least one parameter");
    grid_coords_.resize(cfg_.grid);
    for (Eigen::Index i = 0; i < cfg_.grid; ++i)
        grid_coords_[i] = -16.0 + 32.0 * static_cast<double>(i) / static_cast<double>(cfg_.grid - 1);
}

Capability ImageProblem::capabilities() const {
    return Capability::prior_sample | Capability::likelihood_logpdf | Capability::mixed_grad;
}

void ImageProblem::check_support(const Eigen::VectorXd& x) const {
    if (x.size() != 3) throw DimensionError("ImageProblem: parameter must be (x1, x2, gamma)");
    if (x[0] < -16.0 || x[0] > 16.0 || x[1] < -16.0 || x[1] > 16.0 || x[2] < 0.25 || x[2] > 5.0)
        throw DomainError("ImageProblem: parameter outside the uniform prior box");
}

Eigen::VectorXd ImageProblem::prior_sample(RandomStream& rng) const {
    Eigen::VectorXd x(3);
    x[0] = -16.0 + 32.0 * rng.uniform();
    x[1] = -16.0 + 32.0 * rng.uniform();
    x[2] = 0.25 + 4.75 * rng.uniform();
    return x;
}

double ImageProblem::prior_logpdf(const Eigen::VectorXd& x) const {
    check_support(x);
    return -std::log(32.0 * 32.0 * 4.75);
}

ImageProblem::Probabilities ImageProblem::image_probabilities(const Eigen::VectorXd& x) const {
    check_support(x);
    const double sigma_sq = cfg_.sigma_blob * cfg_.sigma_blob;
    const double gamma = x[2];
    Probabilities out;
    out.p.resize(cfg_.grid, cfg_.grid);
    for (auto& dp : out.dp) dp.resize(cfg_.grid, cfg_.grid);

    for (Eigen::Index i = 0; i < cfg_.grid; ++i) {
        const double a = grid_coords_[i] - x[0];
        for (Eigen::Index j = 0; j < cfg_.grid; ++j) {
            const double b = grid_coords_[j] - x[1];
            const double z = (a * a + b * b) / sigma_sq;
            const double zg = std::pow(z, gamma);
            const double core = 0.8 * std::exp(-0.5 * zg);
            out.p(i, j) = 0.9 - core;
            // d/dx of -core is core * gamma * z^{gamma-1} * dz/dx / 2 with
            // dz/dx1 = -2a/sigma^2; z = 0 only on a measure-zero set.
            const double zg1 = z > 0.0 ? std::pow(z, gamma - 1.0) : 0.0;
            out.dp[0](i, j) = -core * gamma * zg1 * a / sigma_sq;
            out.dp[1](i, j) = -core * gamma * zg1 * b / sigma_sq;
            out.dp[2](i, j) = z > 0.0 ? 0.5 * core * zg * std::log(z) : 0.0;
        }
    }
    return out;
}

Eigen::VectorXd ImageProblem::sample_data(const Eigen::VectorXd& x, RandomStream& rng) const {
    const Probabilities prob = image_probabilities(x);
    Eigen::VectorXd y(dim_y());
    for (Eigen::Index i = 0; i < cfg_.grid; ++i)
        for (Eigen::Index j = 0; j < cfg_.grid; ++j)
            y[flat_index(i, j)] = cb_inverse_cdf(prob.p(i, j), rng.uniform());
    return y;
}

double ImageProblem::log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    if (y.size() != dim_y()) throw DimensionError("ImageProblem: data size mismatch");
    const Probabilities prob = image_probabilities(x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < cfg_.grid; ++i)
        for (Eigen::Index j = 0; j < cfg_.grid; ++j) {
            const double yij = y[flat_index(i, j)];
            if (yij <= 0.0 || yij >= 1.0)
                throw DomainError("ImageProblem: pixel intensity outside (0, 1)");
            const double p = prob.p(i, j);
            total += yij * std::log(p) + (1.0 - yij) * std::log1p(-p) + log_cb_normalizer(p);
        }
    return total;
}

Eigen::MatrixXd ImageProblem::mixed_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    if (y.size() != dim_y()) throw DimensionError("ImageProblem: data size mismatch");
    const Probabilities prob = image_probabilities(x);
    Eigen::MatrixXd m(dim_y(), 3);
    for (Eigen::Index i = 0; i < cfg_.grid; ++i)
        for (Eigen::Index j = 0; j < cfg_.grid; ++j) {
            const double p = prob.p(i, j);
            const double scale = 1.0 / (p * (1.0 - p));
            const Eigen::Index k = flat_index(i, j);
            m(k, 0) = prob.dp[0](i, j) * scale;
            m(k, 1) = prob.dp[1](i, j) * scale;
            m(k, 2) = prob.dp[2](i, j) * scale;
        }
    return m;
}

std::vector<Eigen::Index> ImageProblem::grad_param_mask() const {
    std::vector<Eigen::Index> mask;
    for (Eigen::Index c = 0; c < 3; ++c)
        if (cfg_.param_mask[static_cast<std::size_t>(c)]) mask.push_back(c);
    return mask;
}

// ---------------------------------------------------------------------------
// ConditionedDiffusionProblem

namespace {

Eigen::MatrixXd diffusion_prior_cov(const ConditionedDiffusionProblem::Config& cfg) {
    if (cfg.increments)
        return cfg.dt * Eigen::MatrixXd::Identity(cfg.d, cfg.d);
    Eigen::MatrixXd cov(cfg.d, cfg.d);
    for (Eigen::Index i = 0; i < cfg.d; ++i)
        for (Eigen::Index j = 0; j < cfg.d; ++j)
            cov(i, j) = cfg.dt * static_cast<double>(std::min(i, j) + 1);
    return cov;
}

}  // namespace

ConditionedDiffusionProblem::ConditionedDiffusionProblem(Config cfg)
    : GaussianErrorModel(Eigen::VectorXd::Zero(cfg.d), diffusion_prior_cov(cfg),
                         cfg.sigma_noise * cfg.sigma_noise *
                             Eigen::MatrixXd::Identity(cfg.m, cfg.m)),
      cfg_(cfg) {
    if (cfg_.d < 1 || cfg_.m < 1 || cfg_.m > cfg_.d || cfg_.d % cfg_.m != 0)
        throw DimensionError(
            "ConditionedDiffusionProblem: need 1 <= m <= d with m dividing d for equispaced "
            "observations");
    if (!(cfg_.dt > 0.0)) throw DomainError("ConditionedDiffusionProblem: dt must be > 0");
    observed_nodes_.resize(cfg_.m);
    const Eigen::Index stride = cfg_.d / cfg_.m;
    for (Eigen::Index k = 0; k < cfg_.m; ++k) observed_nodes_[k] = (k + 1) * stride - 1;
}

double ConditionedDiffusionProblem::drift(double u, double beta) {
    return beta * u * (1.0 - u * u) / (1.0 + u * u);
}

double ConditionedDiffusionProblem::drift_derivative(double u, double beta) {
    const double u2 = u * u;
    const double denom = 1.0 + u2;
    return beta * (1.0 - 4.0 * u2 - u2 * u2) / (denom * denom);
}

ConditionedDiffusionProblem::ForwardResult ConditionedDiffusionProblem::solve(
    const Eigen::VectorXd& x, bool with_jacobian) const {
    if (x.size() != cfg_.d) throw DimensionError("ConditionedDiffusionProblem: path size mismatch");
    ForwardResult out;
    out.path.resize(cfg_.d);
    Eigen::MatrixXd sensitivity;  // du_k / dx_j for the current node
    if (with_jacobian) {
        sensitivity = Eigen::MatrixXd::Zero(cfg_.d, cfg_.d);
        out.jacobian.resize(cfg_.m, cfg_.d);
    }

    double u = 0.0;
    Eigen::RowVectorXd row;
    if (with_jacobian) row = Eigen::RowVectorXd::Zero(cfg_.d);
    for (Eigen::Index k = 0; k < cfg_.d; ++k) {
        const double increment =
            cfg_.increments ? x[k] : (k == 0 ? x[0] : x[k] - x[k - 1]);
        const double factor = 1.0 + drift_derivative(u, cfg_.beta) * cfg_.dt;
        u = u + drift(u, cfg_.beta) * cfg_.dt + increment;
        out.path[k] = u;
        if (with_jacobian) {
            row *= factor;
            row[k] += 1.0;
            if (!cfg_.increments && k > 0) row[k - 1] -= 1.0;
            sensitivity.row(k) = row;
        }
    }
    if (with_jacobian)
        for (Eigen::Index k = 0; k < cfg_.m; ++k)
            out.jacobian.row(k) = sensitivity.row(observed_nodes_[k]);
    return out;
}

Eigen::VectorXd ConditionedDiffusionProblem::forward(const Eigen::VectorXd& x) const {
    const ForwardResult result = solve(x, false);
    Eigen::VectorXd obs(cfg_.m);
    for (Eigen::Index k = 0; k < cfg_.m; ++k) obs[k] = result.path[observed_nodes_[k]];
    return obs;
}

Eigen::MatrixXd ConditionedDiffusionProblem::forward_jacobian(const Eigen::VectorXd& x) const {
    return solve(x, true).jacobian;
}

// ---------------------------------------------------------------------------
// Config wiring

std::shared_ptr<const BayesModel> build_problem(const ValidatedConfig& cfg) {
    const std::string& name = cfg.get("problem.name");
    if (name == "image") {
        ImageProblem::Config icfg;
        icfg.grid = cfg.get_int("problem.image.grid");
        icfg.sigma_blob = cfg.get_real("problem.image.sigma_blob");
        const std::string mask = cfg.get("problem.image.param_mask");
        icfg.param_mask = {mask.find("x1") != std::string::npos,
                           mask.find("x2") != std::string::npos,
                           mask.find("gamma") != std::string::npos};
        return std::make_shared<const ImageProblem>(icfg);
    }
    return build_gaussian_problem(cfg);
}

std::shared_ptr<const GaussianErrorModel> build_gaussian_problem(const ValidatedConfig& cfg) {
    const std::string& name = cfg.get("problem.name");
    if (name == "linear_gaussian") {
        const std::string& g_file = cfg.get("problem.linear_gaussian.g_file");
        const std::string& prior_file = cfg.get("problem.linear_gaussian.prior_cov_file");
        const std::string& noise_file = cfg.get("problem.linear_gaussian.noise_cov_file");
        if (!g_file.empty() || !prior_file.empty() || !noise_file.empty()) {
            // Matrices from files (CSV or BDR1); anything omitted falls back
            // to an identity of the matching size.
            Eigen::MatrixXd g, prior_cov, noise_cov;
            if (!g_file.empty()) g = load_matrix(g_file);
            if (!prior_file.empty()) prior_cov = load_matrix(prior_file);
            if (!noise_file.empty()) noise_cov = load_matrix(noise_file);
            const Eigen::Index d = prior_cov.size() ? prior_cov.rows()
                                   : g.size()       ? g.cols()
                                                    : noise_cov.rows();
            const Eigen::Index m = noise_cov.size() ? noise_cov.rows()
                                   : g.size()       ? g.rows()
                                                    : d;
            if (!g.size()) g = Eigen::MatrixXd::Identity(m, d);
            if (!prior_cov.size()) prior_cov = Eigen::MatrixXd::Identity(d, d);
            if (!noise_cov.size()) noise_cov = Eigen::MatrixXd::Identity(m, m);
            return std::make_shared<const LinearGaussianProblem>(
                std::move(g), Eigen::VectorXd::Zero(d), std::move(prior_cov),
                std::move(noise_cov));
        }
        PowerSpectrum prior{cfg.get_real("problem.linear_gaussian.prior_lambda0"),
                            cfg.get_real("problem.linear_gaussian.prior_theta"),
                            cfg.get_real("problem.linear_gaussian.prior_tau")};
        PowerSpectrum noise{cfg.get_real("problem.linear_gaussian.noise_lambda0"),
                            cfg.get_real("problem.linear_gaussian.noise_theta"),
                            cfg.get_real("problem.linear_gaussian.noise_tau")};
        return LinearGaussianProblem::benchmark(
            cfg.get_int("problem.linear_gaussian.d"), cfg.get_int("problem.linear_gaussian.m"),
            static_cast<std::uint64_t>(cfg.get_int("problem.linear_gaussian.seed_w")), prior,
            noise);
    }
    if (name == "diffusion") {
        ConditionedDiffusionProblem::Config dcfg;
        dcfg.beta = cfg.get_real("problem.diffusion.beta");
        dcfg.dt = cfg.get_real("problem.diffusion.dt");
        dcfg.d = cfg.get_int("problem.diffusion.d");
        dcfg.m = cfg.get_int("problem.diffusion.m");
        dcfg.sigma_noise = cfg.get_real("problem.diffusion.sigma_noise");
        dcfg.increments = cfg.get("problem.diffusion.parameterization") == "increment";
        return std::make_shared<const ConditionedDiffusionProblem>(dcfg);
    }
    throw ConfigError("problem '" + name + "' is not a Gaussian error model");
}

}  // namespace bdr
