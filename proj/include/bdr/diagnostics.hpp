#pragma once

#include "bdr/model.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace bdr {

/// The pair of diagnostic matrices: h_x accumulates M^T M and h_y accumulates
/// M M^T over joint samples, where M is the mixed gradient of the
/// log-likelihood. Both are symmetric PSD and share the same trace.
struct DiagnosticPair {
    Eigen::MatrixXd h_x;
    Eigen::MatrixXd h_y;
    std::int64_t n_samples = 0;
    bool whitened = false;
    std::uint64_t seed = 0;
};

/// Streaming accumulator for the diagnostic matrices; per-sample gradients are
/// folded in immediately and never stored. Accumulators over disjoint index
/// blocks can be merged, which keeps parallel reductions bit-stable.
class DiagnosticAccumulator {
public:
    DiagnosticAccumulator(Eigen::Index dx, Eigen::Index dy);

    void add(const Eigen::MatrixXd& mixed_gradient);
    void merge(const DiagnosticAccumulator& other);
    DiagnosticPair finalize(bool whitened, std::uint64_t seed) const;

    std::int64_t count() const { return count_; }

private:
    Eigen::MatrixXd sum_x_;
    Eigen::MatrixXd sum_y_;
    std::int64_t count_ = 0;
};

/// Monte Carlo estimate of the diagnostic pair from n joint prior-predictive
/// samples. Sample i uses the RNG substream (seed, i), so the result does not
/// depend on the thread count. Models restricting their gradient columns
/// (goal-oriented runs) yield an h_x over the restricted columns only.
DiagnosticPair estimate_diagnostics(const BayesModel& model, std::int64_t n, std::uint64_t seed);

/// Accumulation over the half-open sample index range [begin, end) with the
/// same substream convention; blocks over disjoint ranges merge consistently.
DiagnosticAccumulator accumulate_diagnostics(const BayesModel& model, std::int64_t begin,
                                             std::int64_t end, std::uint64_t seed);

/// Closed-form diagnostics for a linear forward model under whitening. The
/// whitened forward factor pr_sqrt * G^T * obs_inv_sqrt has SVD with singular
/// values sigma_i, and the whitened diagnostic matrices have eigenvalues
/// sigma_i^2 on both sides.
struct LinearGaussianDiagnostics {
    DiagnosticPair pair;
    Eigen::VectorXd singular_values;
};

LinearGaussianDiagnostics diagnostics_linear_gaussian(const Eigen::MatrixXd& g,
                                                      const WhiteningPair& whitening);

/// Upper bound on the subspace log-Sobolev constant of the whitened joint
/// Gaussian model in terms of the largest singular value of the whitened
/// forward map: (2 + s^2 + s*sqrt(s^2 + 4)) / 2.
double lsi_bound_linear_gaussian(double sigma_max);

}  // namespace bdr
