#include "bdr/diagnostics.hpp"

#include "bdr/errors.hpp"
#include "bdr/parallel.hpp"
#include "bdr/spectral.hpp"

#include <cmath>
#include <string>

namespace bdr {

DiagnosticAccumulator::DiagnosticAccumulator(Eigen::Index dx, Eigen::Index dy)
    : sum_x_(Eigen::MatrixXd::Zero(dx, dx)), sum_y_(Eigen::MatrixXd::Zero(dy, dy)) {}

void DiagnosticAccumulator::add(const Eigen::MatrixXd& m) {
    if (m.cols() != sum_x_.rows() || m.rows() != sum_y_.rows())
        throw DimensionError("DiagnosticAccumulator: gradient shape mismatch");
    sum_x_.noalias() += m.transpose() * m;
    sum_y_.noalias() += m * m.transpose();
    ++count_;
}

void DiagnosticAccumulator::merge(const DiagnosticAccumulator& other) {
    sum_x_ += other.sum_x_;
    sum_y_ += other.sum_y_;
    count_ += other.count_;
}

DiagnosticPair DiagnosticAccumulator::finalize(bool whitened, std::uint64_t seed) const {
    if (count_ == 0) throw Error("DiagnosticAccumulator: no samples accumulated");
    DiagnosticPair pair;
    const double inv_n = 1.0 / static_cast<double>(count_);
    pair.h_x = inv_n * (sum_x_ + sum_x_.transpose()) / 2.0;
    pair.h_y = inv_n * (sum_y_ + sum_y_.transpose()) / 2.0;
    pair.n_samples = count_;
    pair.whitened = whitened;
    pair.seed = seed;
    return pair;
}

namespace {

DiagnosticAccumulator one_sample(const BayesModel& model,
                                 const std::vector<Eigen::Index>& mask, std::int64_t i,
                                 std::uint64_t seed) {
    DiagnosticAccumulator acc(static_cast<Eigen::Index>(mask.size()), model.dim_y());
    RandomStream stream(seed, static_cast<std::uint64_t>(i));
    try {
        const Eigen::VectorXd x = model.prior_sample(stream);
        const Eigen::VectorXd y = model.sample_data(x, stream);
        const Eigen::MatrixXd m = mixed_grad(model, x, y);
        if (mask.size() == static_cast<std::size_t>(model.dim_x())) {
            acc.add(m);
        } else {
            Eigen::MatrixXd masked(m.rows(), static_cast<Eigen::Index>(mask.size()));
            for (std::size_t j = 0; j < mask.size(); ++j) masked.col(static_cast<Eigen::Index>(j)) = m.col(mask[j]);
            acc.add(masked);
        }
    } catch (const Error& e) {
        throw Error("sampling failure at sample index " + std::to_string(i) + ": " + e.what());
    }
    return acc;
}

}  // namespace

DiagnosticAccumulator accumulate_diagnostics(const BayesModel& model, std::int64_t begin,
                                             std::int64_t end, std::uint64_t seed) {
    if (begin < 0 || end < begin) throw DimensionError("accumulate_diagnostics: bad index range");
    const auto mask = model.grad_param_mask();
    DiagnosticAccumulator identity(static_cast<Eigen::Index>(mask.size()), model.dim_y());
    if (begin == end) return identity;
    return tree_reduce<DiagnosticAccumulator>(
        static_cast<std::size_t>(end - begin), identity,
        [&](std::size_t k) { return one_sample(model, mask, begin + static_cast<std::int64_t>(k), seed); },
        [](DiagnosticAccumulator a, const DiagnosticAccumulator& b) {
            a.merge(b);
            return a;
        });
}

DiagnosticPair estimate_diagnostics(const BayesModel& model, std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw DimensionError("estimate_diagnostics: n must be >= 1");
    if (!has_capability(model.capabilities(), Capability::prior_sample) ||
        !has_capability(model.capabilities(), Capability::mixed_grad))
        throw UnsupportedCapability(
            "estimate_diagnostics: model must support prior sampling and mixed gradients");
    const bool whitened = dynamic_cast<const WhitenedGaussianModel*>(&model) != nullptr;
    return accumulate_diagnostics(model, 0, n, seed).finalize(whitened, seed);
}

LinearGaussianDiagnostics diagnostics_linear_gaussian(const Eigen::MatrixXd& g,
                                                      const WhiteningPair& whitening) {
    if (whitening.pr_sqrt.rows() != g.cols() || whitening.obs_inv_sqrt.rows() != g.rows())
        throw DimensionError("diagnostics_linear_gaussian: whitening factors do not match G");
    const Eigen::MatrixXd whitened_forward =
        whitening.pr_sqrt * g.transpose() * whitening.obs_inv_sqrt;  // d x m

    LinearGaussianDiagnostics out;
    out.pair.h_x = whitened_forward * whitened_forward.transpose();
    out.pair.h_y = whitened_forward.transpose() * whitened_forward;
    out.pair.h_x = (out.pair.h_x + out.pair.h_x.transpose()) / 2.0;
    out.pair.h_y = (out.pair.h_y + out.pair.h_y.transpose()) / 2.0;
    out.pair.n_samples = 0;
    out.pair.whitened = true;
    out.singular_values = svd_rect(whitened_forward).singular_values;
    return out;
}

double lsi_bound_linear_gaussian(double sigma_max) {
    if (sigma_max < 0.0 || !std::isfinite(sigma_max))
        throw DomainError("lsi_bound_linear_gaussian: sigma_max must be a nonnegative real");
    return 0.5 * (2.0 + sigma_max * sigma_max +
                  sigma_max * std::sqrt(sigma_max * sigma_max + 4.0));
}

}  // namespace bdr
