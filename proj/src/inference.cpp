#include "bdr/inference.hpp"

#include "bdr/errors.hpp"
#include "bdr/information.hpp"
#include "bdr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace bdr {

namespace {

constexpr std::uint64_t kInnerStream = 0x7e57a11;

const GaussianErrorModel* require_gaussian(const BayesModel& model, const char* who) {
    const auto* gauss = dynamic_cast<const GaussianErrorModel*>(&model);
    if (!gauss)
        throw UnsupportedCapability(std::string(who) + ": requires a Gaussian error model");
    return gauss;
}

// Log reduced-likelihood estimate with the inner stream supplied by the
// caller; the public seed-based entry point and the chain both land here.
double reduced_likelihood_stream(const ReducedPosterior& post, const Eigen::VectorXd& y_s,
                                 const Eigen::VectorXd& x_r, RandomStream& inner) {
    const BayesModel& model = *post.model;
    const Eigen::Index d = model.dim_x();
    const Eigen::Index r = x_r.size();
    if (r > d) throw DimensionError("reduced_likelihood: x_r longer than the parameter");
    if (y_s.size() != post.dims.s) throw DimensionError("reduced_likelihood: y_s size != dims.s");
    const Eigen::MatrixXd v_s = post.reduction.v_basis.leftCols(y_s.size());
    const Eigen::MatrixXd u_r = post.reduction.u_basis.leftCols(r);

    if (r == d) {
        // No discarded directions: the reduced likelihood is the marginal
        // likelihood at the (exactly) reassembled point.
        return model.projected_log_likelihood(u_r * x_r, y_s, v_s);
    }

    const Eigen::MatrixXd u_perp = post.reduction.u_basis.rightCols(d - r);
    const Eigen::VectorXd base = u_r * x_r;

    if (post.inner_mode == InnerMode::mean) {
        const Eigen::VectorXd completion =
            model.conditional_prior_mean(post.reduction.u_basis, r, x_r);
        return model.projected_log_likelihood(base + u_perp * completion, y_s, v_s);
    }

    const std::int64_t ell = post.inner_ell;
    if (ell < 1) throw DimensionError("reduced_likelihood: inner_ell must be >= 1");
    std::vector<double> logs(static_cast<std::size_t>(ell));
    for (std::int64_t j = 0; j < ell; ++j) {
        const Eigen::VectorXd completion =
            model.conditional_prior_sample(post.reduction.u_basis, r, x_r, inner);
        logs[static_cast<std::size_t>(j)] =
            model.projected_log_likelihood(base + u_perp * completion, y_s, v_s);
    }
    if (*std::max_element(logs.begin(), logs.end()) <= -745.0)
        throw Error("reduced_likelihood: all inner likelihoods underflowed");
    return log_mean_exp(std::move(logs));
}

}  // namespace

double marginal_likelihood_gaussian(const GaussianErrorModel& model, const Reduction& reduction,
                                    Eigen::Index s, const Eigen::VectorXd& y_s,
                                    const Eigen::VectorXd& x) {
    if (s < 0 || s > reduction.dim_y())
        throw DimensionError("marginal_likelihood_gaussian: s out of range");
    if (y_s.size() != s) throw DimensionError("marginal_likelihood_gaussian: y_s size != s");
    return model.projected_log_likelihood(x, y_s, reduction.v_basis.leftCols(s));
}

double reduced_likelihood(const ReducedPosterior& post, const Eigen::VectorXd& y_s,
                          const Eigen::VectorXd& x_r, std::uint64_t seed) {
    RandomStream inner(seed, kInnerStream);
    return reduced_likelihood_stream(post, y_s, x_r, inner);
}

Eigen::VectorXd conditional_prior_gaussian(const Eigen::VectorXd& prior_mean,
                                           const Eigen::MatrixXd& prior_cov,
                                           const Eigen::MatrixXd& u_basis, Eigen::Index r,
                                           const Eigen::VectorXd& x_r, std::uint64_t seed) {
    RandomStream rng(seed);
    return GaussianConditional(prior_mean, prior_cov, u_basis, r).sample(x_r, rng);
}

McmcResult sample_approx_posterior(const ReducedPosterior& post, const Eigen::VectorXd& y,
                                   std::int64_t n_samples, const McmcConfig& cfg,
                                   std::uint64_t seed) {
    const BayesModel& model = *post.model;
    const Eigen::Index d = model.dim_x();
    const Eigen::Index r = post.dims.r;
    const Eigen::Index s = post.dims.s;
    if (n_samples < 1) throw DimensionError("sample_approx_posterior: n_samples must be >= 1");
    const auto* gauss = require_gaussian(model, "sample_approx_posterior");
    if (!gauss->standard_normal_prior())
        throw UnsupportedCapability(
            "sample_approx_posterior: run the chain on the whitened model (standard normal "
            "reduced prior)");

    // Step 1: project the data. Accept either original-coordinate data (when
    // the model is a whitening wrapper) or already-whitened data.
    Eigen::VectorXd y_white;
    if (const auto* white = dynamic_cast<const WhitenedGaussianModel*>(&model)) {
        if (y.size() != white->base().dim_y())
            throw DimensionError("sample_approx_posterior: data size mismatch");
        y_white = white->to_whitened_y(y);
    } else {
        if (y.size() != model.dim_y())
            throw DimensionError("sample_approx_posterior: data size mismatch");
        y_white = y;
    }
    const Eigen::VectorXd y_s = post.reduction.v_basis.leftCols(s).transpose() * y_white;

    const auto assemble = [&](const Eigen::VectorXd& x_white) -> Eigen::VectorXd {
        if (const auto* white = dynamic_cast<const WhitenedGaussianModel*>(&model))
            return white->from_whitened_x(x_white);
        return x_white;
    };

    McmcResult result;

    const Eigen::MatrixXd u_r = post.reduction.u_basis.leftCols(r);
    const Eigen::MatrixXd u_perp = post.reduction.u_basis.rightCols(d - r);

    if (r == 0) {
        // Nothing to infer: the approximate posterior is the prior.
        result.samples.resize(n_samples, assemble(Eigen::VectorXd::Zero(d)).size());
        parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t k) {
            RandomStream rng(seed, 2 + static_cast<std::uint64_t>(k));
            result.samples.row(static_cast<Eigen::Index>(k)) =
                assemble(u_perp * rng.normal_vector(d)).transpose();
        });
        result.reduced_chain.resize(n_samples, 0);
        result.acceptance = 1.0;
        result.ess = static_cast<double>(n_samples);
        return result;
    }

    const double burn_frac = std::clamp(cfg.burn_in_fraction, 0.0, 0.95);
    const std::int64_t total =
        static_cast<std::int64_t>(std::ceil(static_cast<double>(n_samples) / (1.0 - burn_frac)));
    const std::int64_t burn = total - n_samples;

    // Substream layout: 0 proposals/accepts, 1 fixed-mode inner draws,
    // [16, 16 + total] fresh-mode inner draws (slot 16 is the initial state),
    // [16 + total + 1, ...) conditional completions of the kept states.
    RandomStream chain_rng(seed, 0);
    const std::uint64_t fresh_base = 16;
    const std::uint64_t completion_base = fresh_base + static_cast<std::uint64_t>(total) + 1;
    ReducedPosterior eval = post;  // local copy; the model pointer is shared

    const auto estimate = [&](const Eigen::VectorXd& x_r, std::int64_t iteration) {
        RandomStream inner =
            post.inner_mode == InnerMode::fresh
                ? RandomStream(seed, fresh_base + static_cast<std::uint64_t>(iteration + 1))
                : RandomStream(seed, 1);
        return reduced_likelihood_stream(eval, y_s, x_r, inner);
    };

    Eigen::VectorXd state = Eigen::VectorXd::Zero(r);
    double state_loglike = estimate(state, -1);
    double state_logprior = -0.5 * state.squaredNorm();

    double log_step = std::log(cfg.initial_step > 0.0
                                   ? cfg.initial_step
                                   : 2.38 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(r, 1))));
    result.reduced_chain.resize(n_samples, r);
    std::int64_t accepted_kept = 0;

    // Per-coordinate proposal scales follow the chain's running variances
    // (Welford) during burn-in; together with the scalar step tuned to the
    // target acceptance this equalizes badly conditioned directions. Both
    // adaptations freeze when the burn-in ends.
    Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(r);
    Eigen::VectorXd run_m2 = Eigen::VectorXd::Zero(r);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(r);
    const std::int64_t scale_warmup = std::min<std::int64_t>(burn / 4 + 10, 1000);

    for (std::int64_t t = 0; t < total; ++t) {
        const double step = std::exp(log_step);
        const Eigen::VectorXd proposal =
            state + step * scale.cwiseProduct(chain_rng.normal_vector(r));
        const double prop_loglike = estimate(proposal, t);
        const double prop_logprior = -0.5 * proposal.squaredNorm();
        const double log_ratio = prop_loglike + prop_logprior - state_loglike - state_logprior;
        const double alpha = std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
        if (chain_rng.uniform() < alpha) {
            state = proposal;
            state_loglike = prop_loglike;
            state_logprior = prop_logprior;
            if (t >= burn) ++accepted_kept;
        }
        if (cfg.adapt && t < burn) {
            const double gain = 1.0 / std::pow(static_cast<double>(t + 1), 0.6);
            log_step += gain * (alpha - cfg.target_acceptance);
            const double count = static_cast<double>(t + 1);
            const Eigen::VectorXd delta = state - run_mean;
            run_mean += delta / count;
            run_m2 += delta.cwiseProduct(state - run_mean);
            if (t >= scale_warmup && t % 32 == 0) {
                scale = (run_m2 / count).cwiseMax(1e-12).cwiseSqrt();
                scale *= std::sqrt(static_cast<double>(r)) / scale.norm();
            }
        }
        if (t >= burn) result.reduced_chain.row(t - burn) = state.transpose();
    }

    result.acceptance = static_cast<double>(accepted_kept) / static_cast<double>(n_samples);
    result.step_size = std::exp(log_step);
    result.diverged = result.acceptance < 0.01;

    // Steps 3-4: complete each kept state with a conditional-prior draw and
    // assemble in original coordinates.
    result.samples.resize(n_samples, assemble(Eigen::VectorXd::Zero(d)).size());
    parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t k) {
        RandomStream rng(seed, completion_base + static_cast<std::uint64_t>(k));
        const Eigen::VectorXd x_r = result.reduced_chain.row(static_cast<Eigen::Index>(k)).transpose();
        const Eigen::VectorXd completion =
            model.conditional_prior_sample(post.reduction.u_basis, r, x_r, rng);
        result.samples.row(static_cast<Eigen::Index>(k)) =
            assemble(u_r * x_r + u_perp * completion).transpose();
    });

    if (n_samples >= 100) {
        result.iact = iact(result.reduced_chain);
        result.ess = static_cast<double>(n_samples) / result.iact.maxCoeff();
    }
    return result;
}

Eigen::VectorXd iact(const Eigen::MatrixXd& chain) {
    const Eigen::Index n = chain.rows();
    if (n < 100) throw ChainError("iact: chain too short (need at least 100 states)");
    Eigen::VectorXd out(chain.cols());
    for (Eigen::Index c = 0; c < chain.cols(); ++c) {
        const Eigen::VectorXd centered = chain.col(c).array() - chain.col(c).mean();
        const double c0 = centered.squaredNorm() / static_cast<double>(n);
        if (c0 <= 0.0) {
            out[c] = static_cast<double>(n);  // degenerate (constant) chain
            continue;
        }
        const auto rho = [&](Eigen::Index lag) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i + lag < n; ++i) acc += centered[i] * centered[i + lag];
            return acc / (static_cast<double>(n) * c0);
        };
        // Initial positive sequence: accumulate rho in adjacent pairs while
        // the pair sums stay positive.
        double tau = -1.0;
        for (Eigen::Index k = 0; 2 * k + 1 < n / 2; ++k) {
            const double pair = rho(2 * k) + rho(2 * k + 1);
            if (pair <= 0.0) break;
            tau += 2.0 * pair;
        }
        out[c] = std::max(tau, 1e-3);
    }
    return out;
}

}  // namespace bdr
