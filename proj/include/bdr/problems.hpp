#pragma once

#include "bdr/baselines.hpp"
#include "bdr/config.hpp"
#include "bdr/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>

namespace bdr {

/// Power-law-plus-floor eigenvalue profile lambda0 / i^theta + tau rotated by
/// a seeded random unitary basis.
struct PowerSpectrum {
    double lambda0 = 1.0;
    double theta = 2.0;
    double tau = 1e-6;
};

/// Random unitary matrix: QR factorization of a seeded standard-normal matrix
/// with the R diagonal signs folded into Q, making the draw reproducible.
Eigen::MatrixXd random_unitary(Eigen::Index n, std::uint64_t seed);

/// Covariance with the given spectrum in a seeded random eigenbasis.
Eigen::MatrixXd power_spectrum_covariance(Eigen::Index n, const PowerSpectrum& spectrum,
                                          std::uint64_t seed);

/// Linear forward model with Gaussian prior and noise; exposes exact joint
/// moments and the conjugate posterior for oracle checks.
class LinearGaussianProblem final : public GaussianErrorModel {
public:
    LinearGaussianProblem(Eigen::MatrixXd g, Eigen::VectorXd prior_mean,
                          Eigen::MatrixXd prior_cov, Eigen::MatrixXd noise_cov);

    /// The benchmark instance: identity forward model, prior and noise
    /// covariances with power-law spectra in independent random bases derived
    /// from seed_w.
    static std::shared_ptr<const LinearGaussianProblem> benchmark(
        Eigen::Index d = 50, Eigen::Index m = 50, std::uint64_t seed_w = 1,
        const PowerSpectrum& prior_spectrum = {1.0, 2.0, 1e-6},
        const PowerSpectrum& noise_spectrum = {500.0, 1.0, 1e-6});

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const override { return g_ * x; }
    Eigen::MatrixXd forward_jacobian(const Eigen::VectorXd&) const override { return g_; }

    const Eigen::MatrixXd& g() const { return g_; }

    /// Exact joint moments of (X, Y).
    SampleMoments exact_joint_moments() const;

    struct Posterior {
        Eigen::VectorXd mean;
        Eigen::MatrixXd cov;
    };
    /// Conjugate Gaussian posterior for a data realization.
    Posterior exact_posterior(const Eigen::VectorXd& y) const;

private:
    Eigen::MatrixXd g_;
};

/// Blob-localization imaging model: three parameters (positions and contrast)
/// under a uniform prior; each pixel is continuous-Bernoulli with success
/// probability p_ij(x) in (0.1, 0.9). grad_param_mask restricts diagnostics to
/// a parameter subset for goal-oriented runs.
class ImageProblem final : public BayesModel {
public:
    struct Config {
        Eigen::Index grid = 32;
        double sigma_blob = 3.0;
        std::array<bool, 3> param_mask = {true, true, true};  // {x1, x2, gamma}
    };

    explicit ImageProblem(Config cfg);

    Eigen::Index dim_x() const override { return 3; }
    Eigen::Index dim_y() const override { return cfg_.grid * cfg_.grid; }
    Capability capabilities() const override;

    Eigen::VectorXd prior_sample(RandomStream& rng) const override;
    double prior_logpdf(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd sample_data(const Eigen::VectorXd& x, RandomStream& rng) const override;
    double log_likelihood(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
    Eigen::MatrixXd mixed_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const override;
    std::vector<Eigen::Index> grad_param_mask() const override;

    /// Pixel success probabilities and their gradient w.r.t. (x1, x2, gamma).
    struct Probabilities {
        Eigen::MatrixXd p;                   // grid x grid
        std::array<Eigen::MatrixXd, 3> dp;   // same layout per parameter
    };
    Probabilities image_probabilities(const Eigen::VectorXd& x) const;

    const Config& config() const { return cfg_; }
    /// Pixel (i, j) -> flat row-major index i * grid + j.
    Eigen::Index flat_index(Eigen::Index i, Eigen::Index j) const { return i * cfg_.grid + j; }

private:
    void check_support(const Eigen::VectorXd& x) const;

    Config cfg_;
    Eigen::VectorXd grid_coords_;  // shared discretization of [-16, 16]
};

/// Brownian-path-driven particle in a smoothed double-well drift, observed
/// with iid Gaussian noise at equispaced times. The parameter is the path at
/// the time-grid nodes (prior covariance min(t_i, t_j)); a linear increment
/// reparameterization (prior dt * I) is available behind a flag.
class ConditionedDiffusionProblem final : public GaussianErrorModel {
public:
    struct Config {
        double beta = 1.0;
        double dt = 1e-2;
        Eigen::Index d = 100;
        Eigen::Index m = 100;
        double sigma_noise = 0.1;
        bool increments = false;
    };

    explicit ConditionedDiffusionProblem(Config cfg);

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd forward_jacobian(const Eigen::VectorXd& x) const override;

    /// Full trajectory at every grid node plus the observation-row Jacobian.
    struct ForwardResult {
        Eigen::VectorXd path;        // u at nodes 1..d
        Eigen::MatrixXd jacobian;    // m x d observation sensitivity
    };
    ForwardResult solve(const Eigen::VectorXd& x, bool with_jacobian) const;

    static double drift(double u, double beta);
    static double drift_derivative(double u, double beta);

    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    Eigen::VectorXi observed_nodes_;  // node indices (1-based times, 0-based storage)
};

/// Builds the configured problem. Gaussian-error problems can additionally be
/// retrieved through build_gaussian_problem for whitening-based pipelines.
std::shared_ptr<const BayesModel> build_problem(const ValidatedConfig& cfg);
std::shared_ptr<const GaussianErrorModel> build_gaussian_problem(const ValidatedConfig& cfg);

}  // namespace bdr
