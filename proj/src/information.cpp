#include "bdr/information.hpp"

#include "bdr/errors.hpp"
#include "bdr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace bdr {

namespace {

constexpr double kUnderflowLog = -745.0;

struct RunningSums {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    void merge(const RunningSums& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
    }
};

CmiEstimate finalize(const RunningSums& sums, std::int64_t ell, CmiEstimate::Kind kind) {
    CmiEstimate est;
    est.n_outer = sums.n;
    est.n_inner = ell;
    est.estimator = kind;
    const double n = static_cast<double>(sums.n);
    est.value = sums.sum / n;
    if (sums.n > 1) {
        const double var = std::max(0.0, (sums.sum_sq - n * est.value * est.value) / (n - 1.0));
        est.std_error = std::sqrt(var / n);
    }
    return est;
}

// One conditional-prior sampler closure; the Schur factors of a non-white
// Gaussian prior are built once instead of per inner draw.
std::function<Eigen::VectorXd(const Eigen::VectorXd&, RandomStream&)> conditional_sampler(
    const BayesModel& model, const Eigen::MatrixXd& u_basis, Eigen::Index r) {
    if (const auto* gauss = dynamic_cast<const GaussianErrorModel*>(&model)) {
        if (gauss->standard_normal_prior()) {
            const Eigen::Index free_dims = model.dim_x() - r;
            return [free_dims](const Eigen::VectorXd&, RandomStream& rng) {
                return rng.normal_vector(free_dims);
            };
        }
        auto cond = std::make_shared<GaussianConditional>(gauss->prior_mean(), gauss->prior_cov(),
                                                          u_basis, r);
        return [cond](const Eigen::VectorXd& x_r, RandomStream& rng) {
            return cond->sample(x_r, rng);
        };
    }
    if (!has_capability(model.capabilities(), Capability::conditional_prior))
        throw UnsupportedCapability("cmi_param: model lacks conditional prior sampling");
    return [&model, &u_basis, r](const Eigen::VectorXd& x_r, RandomStream& rng) {
        return model.conditional_prior_sample(u_basis, r, x_r, rng);
    };
}

}  // namespace

double log_mean_exp(std::vector<double> logs) {
    if (logs.empty()) throw DimensionError("log_mean_exp: empty input");
    std::sort(logs.begin(), logs.end(), std::greater<double>());
    const double top = logs.front();
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - top);
    return top + std::log(acc) - std::log(static_cast<double>(logs.size()));
}

double gaussian_expected_kl(const Eigen::VectorXd& sigma, Eigen::Index r, Eigen::Index s) {
    if (r < 0 || s < 0) throw DimensionError("gaussian_expected_kl: negative dimension");
    double total = 0.0;
    for (Eigen::Index i = sigma.size() - 1; i >= std::min(r, s); --i) {
        if (sigma[i] < 0.0)
            throw DomainError("gaussian_expected_kl: singular values must be nonnegative");
        total += std::log1p(sigma[i] * sigma[i]);
    }
    return 0.5 * total;
}

GapRatio gap_ratio(const Eigen::VectorXd& sigma, Eigen::Index r, Eigen::Index s,
                   double lsi_const) {
    double tail_r = 0.0, tail_s = 0.0;
    for (Eigen::Index i = sigma.size() - 1; i >= r && i >= 0; --i) tail_r += sigma[i] * sigma[i];
    for (Eigen::Index i = sigma.size() - 1; i >= s && i >= 0; --i) tail_s += sigma[i] * sigma[i];
    const double denom = lsi_const * lsi_const * (tail_r + tail_s);
    GapRatio out;
    if (denom == 0.0) {
        out.value = std::numeric_limits<double>::quiet_NaN();
        out.degenerate = true;
        return out;
    }
    out.value = gaussian_expected_kl(sigma, r, s) / denom;
    return out;
}

CmiEstimate cmi_param(const BayesModel& model, const Reduction& reduction, Eigen::Index r,
                      std::int64_t n, std::int64_t ell, std::uint64_t seed) {
    const Eigen::Index d = model.dim_x();
    if (reduction.dim_x() != d) throw DimensionError("cmi_param: reduction does not match model");
    if (r < 0 || r > d) throw DimensionError("cmi_param: r out of range");
    if (n < 1 || ell < 1) throw DimensionError("cmi_param: n and ell must be >= 1");

    if (r == d) {
        // The conditional prior is degenerate: numerator and denominator are
        // the same density, so every summand cancels identically.
        CmiEstimate est;
        est.n_outer = n;
        est.n_inner = ell;
        est.estimator = CmiEstimate::Kind::param_cmi;
        return est;
    }

    const Eigen::MatrixXd u_r = reduction.u_basis.leftCols(r);
    const Eigen::MatrixXd u_perp = reduction.u_basis.rightCols(d - r);
    const auto sample_perp = conditional_sampler(model, reduction.u_basis, r);

    const RunningSums sums = tree_reduce<RunningSums>(
        static_cast<std::size_t>(n), RunningSums{},
        [&](std::size_t i) {
            RandomStream stream(seed, static_cast<std::uint64_t>(i));
            const Eigen::VectorXd x = model.prior_sample(stream);
            const Eigen::VectorXd y = model.sample_data(x, stream);
            const double log_full = model.log_likelihood(x, y);

            const Eigen::VectorXd x_r = u_r.transpose() * x;
            const Eigen::VectorXd base = u_r * x_r;
            std::vector<double> logs(static_cast<std::size_t>(ell));
            for (std::int64_t j = 0; j < ell; ++j) {
                const Eigen::VectorXd completed = base + u_perp * sample_perp(x_r, stream);
                logs[static_cast<std::size_t>(j)] = model.log_likelihood(completed, y);
            }
            if (*std::max_element(logs.begin(), logs.end()) <= kUnderflowLog)
                throw Error("cmi_param: inner likelihoods underflowed at outer sample " +
                            std::to_string(i));
            RunningSums one;
            one.add(log_full - log_mean_exp(std::move(logs)));
            return one;
        },
        [](RunningSums a, const RunningSums& b) {
            a.merge(b);
            return a;
        });

    return finalize(sums, ell, CmiEstimate::Kind::param_cmi);
}

CmiEstimate cmi_data(const BayesModel& model, const Reduction& reduction, Eigen::Index s,
                     std::int64_t n, std::int64_t ell, std::uint64_t seed) {
    const Eigen::Index m = model.dim_y();
    if (reduction.dim_y() != m) throw DimensionError("cmi_data: reduction does not match model");
    if (s < 0 || s > m) throw DimensionError("cmi_data: s out of range");
    if (n < 1 || ell < 1) throw DimensionError("cmi_data: n and ell must be >= 1");

    if (s == m) {
        // Projection onto the full unitary basis: both bracketed likelihood
        // ratios coincide and the summand cancels identically.
        CmiEstimate est;
        est.n_outer = n;
        est.n_inner = ell;
        est.estimator = CmiEstimate::Kind::data_cmi;
        return est;
    }

    if (!model.has_projected_likelihood())
        throw UnsupportedCapability("cmi_data: model lacks a closed-form projected likelihood");
    const Eigen::MatrixXd v_s = reduction.v_basis.leftCols(s);

    const RunningSums sums = tree_reduce<RunningSums>(
        static_cast<std::size_t>(n), RunningSums{},
        [&](std::size_t i) {
            RandomStream stream(seed, static_cast<std::uint64_t>(i));
            const Eigen::VectorXd x = model.prior_sample(stream);
            const Eigen::VectorXd y = model.sample_data(x, stream);
            const Eigen::VectorXd y_s = v_s.transpose() * y;
            const double log_full = model.log_likelihood(x, y);
            const double log_projected = model.projected_log_likelihood(x, y_s, v_s);

            // Marginal likelihoods share one set of prior draws: the common
            // random numbers cancel most of the inner-loop noise in the
            // difference below.
            std::vector<double> logs_full(static_cast<std::size_t>(ell));
            std::vector<double> logs_projected(static_cast<std::size_t>(ell));
            for (std::int64_t j = 0; j < ell; ++j) {
                const Eigen::VectorXd x_prior = model.prior_sample(stream);
                logs_full[static_cast<std::size_t>(j)] = model.log_likelihood(x_prior, y);
                logs_projected[static_cast<std::size_t>(j)] =
                    model.projected_log_likelihood(x_prior, y_s, v_s);
            }
            if (*std::max_element(logs_full.begin(), logs_full.end()) <= kUnderflowLog)
                throw Error("cmi_data: marginal likelihoods underflowed at outer sample " +
                            std::to_string(i));
            RunningSums one;
            one.add((log_full - log_mean_exp(std::move(logs_full))) -
                    (log_projected - log_mean_exp(std::move(logs_projected))));
            return one;
        },
        [](RunningSums a, const RunningSums& b) {
            a.merge(b);
            return a;
        });

    return finalize(sums, ell, CmiEstimate::Kind::data_cmi);
}

CmiBoundCheck cmi_bound_check(const BayesModel& model, const Reduction& reduction,
                              const ReducedDims& dims, double lsi_const, std::int64_t n,
                              std::int64_t ell, std::uint64_t seed) {
    CmiBoundCheck out;
    out.param = cmi_param(model, reduction, dims.r, n, ell, seed);
    out.data = cmi_data(model, reduction, dims.s, n, ell, seed + 1);
    out.cmi = out.param.value + out.data.value;
    out.std_error = std::sqrt(out.param.std_error * out.param.std_error +
                              out.data.std_error * out.data.std_error);
    out.bound = lsi_const * lsi_const * bound(reduction, dims.r, dims.s);
    return out;
}

}  // namespace bdr
