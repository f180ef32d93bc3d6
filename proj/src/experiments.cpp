#include "bdr/experiments.hpp"

#include "bdr/baselines.hpp"
#include "bdr/diagnostics.hpp"
#include "bdr/errors.hpp"
#include "bdr/inference.hpp"
#include "bdr/information.hpp"
#include "bdr/manifest.hpp"
#include "bdr/matrix_io.hpp"
#include "bdr/parallel.hpp"
#include "bdr/problems.hpp"
#include "bdr/reduction.hpp"
#include "bdr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bdr {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void write_report(RunManifest& manifest, const std::filesystem::path& dir,
                  const std::string& filename, const Eigen::MatrixXd& data,
                  std::vector<std::string> header, std::vector<std::string> comments = {}) {
    if (header.empty()) {
        for (Eigen::Index j = 0; j < data.cols(); ++j)
            header.push_back("c" + std::to_string(j));
    }
    comments.insert(comments.begin(), "manifest " + manifest.digest());
    const std::filesystem::path path = dir / filename;
    save_csv(path, data, header, comments);
    manifest.record_output(path);
}

// Suffix sums tail[k] = sum of v[k..end]; tail[size] = 0.
Eigen::VectorXd suffix(const Eigen::VectorXd& v) {
    Eigen::VectorXd tail(v.size() + 1);
    tail[v.size()] = 0.0;
    for (Eigen::Index i = v.size() - 1; i >= 0; --i) tail[i] = tail[i + 1] + v[i];
    return tail;
}

// Trailing trace sums Tr(H) - sum_{j<k} q_j^T H q_j for the orthonormalized
// leading columns of a candidate basis; entry k is the bound term left after
// keeping k modes.
Eigen::VectorXd basis_tail_curve(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& h) {
    const Eigen::MatrixXd q = orthonormalize(basis);
    Eigen::VectorXd tails(q.cols() + 1);
    tails[0] = h.trace();
    for (Eigen::Index k = 0; k < q.cols(); ++k)
        tails[k + 1] = tails[k] - (q.col(k).transpose() * h * q.col(k)).value();
    return tails;
}

int run_gap_map(const ValidatedConfig& cfg, const std::filesystem::path& dir,
                std::uint64_t seed) {
    if (cfg.get("problem.name") != "linear_gaussian")
        throw ConfigError("gap_map requires problem.name = linear_gaussian");
    const auto model = build_gaussian_problem(cfg);
    const auto* linear = dynamic_cast<const LinearGaussianProblem*>(model.get());
    if (!linear) throw ConfigError("gap_map: configured problem is not linear-Gaussian");
    const LinearGaussianDiagnostics diag =
        diagnostics_linear_gaussian(linear->g(), linear->whitening());
    const Eigen::VectorXd& sigma = diag.singular_values;
    const Eigen::Index d = linear->dim_x();
    const Eigen::Index m = linear->dim_y();
    const Eigen::Index q = sigma.size();

    Eigen::VectorXd sigma_sq = sigma.array().square();
    const Eigen::VectorXd tail = suffix(sigma_sq);
    Eigen::VectorXd log_terms(q);
    for (Eigen::Index i = 0; i < q; ++i) log_terms[i] = std::log1p(sigma_sq[i]);
    const Eigen::VectorXd kl_tail = 0.5 * suffix(log_terms);

    const Eigen::Index cells = (d + 1) * (m + 1);
    Eigen::MatrixXd kl(cells, 3), bound_grid(cells, 3), ratio(cells, 3);
    Eigen::Index row = 0;
    for (Eigen::Index r = 0; r <= d; ++r) {
        for (Eigen::Index s = 0; s <= m; ++s, ++row) {
            const double kl_value = kl_tail[std::min({r, s, q})];
            const double bound_value = tail[std::min(r, q)] + tail[std::min(s, q)];
            kl.row(row) << static_cast<double>(r), static_cast<double>(s), kl_value;
            bound_grid.row(row) << static_cast<double>(r), static_cast<double>(s), bound_value;
            ratio.row(row) << static_cast<double>(r), static_cast<double>(s),
                bound_value > 0.0 ? kl_value / bound_value : kNan;
        }
    }

    RunManifest manifest("experiment gap_map", cfg.source_text(), seed);
    write_report(manifest, dir, "expected_kl.csv", kl, {"r", "s", "value"});
    write_report(manifest, dir, "bound.csv", bound_grid, {"r", "s", "value"});
    write_report(manifest, dir, "ratio.csv", ratio, {"r", "s", "value"});
    manifest.write(dir);
    return 3;
}

int run_eig_decay(const ValidatedConfig& cfg, const std::filesystem::path& dir,
                  std::uint64_t seed) {
    const auto model = build_problem(cfg);
    const auto* gauss = dynamic_cast<const GaussianErrorModel*>(model.get());
    const std::int64_t n = cfg.get_int("experiment.n") > 0 ? cfg.get_int("experiment.n")
                                                           : cfg.get_int("diagnostics.n");

    std::shared_ptr<const BayesModel> diag_model = model;
    std::shared_ptr<const GaussianErrorModel> shared_gauss;
    if (gauss) {
        shared_gauss = std::dynamic_pointer_cast<const GaussianErrorModel>(model);
        diag_model = whitened_model(shared_gauss);
    }
    const DiagnosticPair diag = estimate_diagnostics(*diag_model, n, seed);
    const Reduction red = reduce_rotation(diag);

    // Joint samples (original coordinates) for the PCA/CCA comparison curves.
    const Eigen::Index d = model->dim_x();
    const Eigen::Index m = model->dim_y();
    Eigen::MatrixXd xs(n, d), ys(n, m);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        RandomStream stream(seed ^ 0x5eedu, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd x = model->prior_sample(stream);
        xs.row(static_cast<Eigen::Index>(i)) = x.transpose();
        ys.row(static_cast<Eigen::Index>(i)) = model->sample_data(x, stream).transpose();
    });
    const SampleMoments mom = moments(xs, ys);
    const PcaResult pca_x = pca(mom, Marginal::X);
    const PcaResult pca_y = pca(mom, Marginal::Y);
    CcaResult cca_result;
    bool have_cca = true;
    try {
        cca_result = cca(mom, std::min(d, m));
    } catch (const Error&) {
        have_cca = false;  // singular sample covariances; curve left empty
    }

    // Every candidate basis is scored against the same diagnostics in the
    // coordinates the bound is built in (whitened for Gaussian error models).
    // A projection along U in original coordinates corresponds to the span of
    // cov_sqrt * U after whitening; the gradient-based basis is already the
    // eigenbasis there, so its curve is the optimal one.
    Eigen::MatrixXd pca_basis_x = pca_x.basis;
    Eigen::MatrixXd pca_basis_y = pca_y.basis;
    Eigen::MatrixXd cca_basis_x = cca_result.u;
    Eigen::MatrixXd cca_basis_y = cca_result.v;
    if (gauss) {
        const WhiteningPair& w = shared_gauss->whitening();
        pca_basis_x = w.pr_sqrt * pca_basis_x;
        pca_basis_y = w.obs_sqrt * pca_basis_y;
        if (have_cca) {
            cca_basis_x = w.pr_sqrt * cca_basis_x;
            cca_basis_y = w.obs_sqrt * cca_basis_y;
        }
    }

    const Eigen::VectorXd cmi_tail_x = suffix(red.x_scores);
    const Eigen::VectorXd cmi_tail_y = suffix(red.y_scores);
    const Eigen::VectorXd pca_tail_x = basis_tail_curve(pca_basis_x, diag.h_x);
    const Eigen::VectorXd pca_tail_y = basis_tail_curve(pca_basis_y, diag.h_y);
    Eigen::VectorXd cca_tail_x, cca_tail_y;
    if (have_cca) {
        cca_tail_x = basis_tail_curve(cca_basis_x, diag.h_x);
        cca_tail_y = basis_tail_curve(cca_basis_y, diag.h_y);
    }

    const Eigen::Index rows = std::max(d, m);
    Eigen::MatrixXd table(rows, 9);
    table.setConstant(kNan);
    for (Eigen::Index i = 0; i < rows; ++i) {
        table(i, 0) = static_cast<double>(i + 1);
        if (i < d) table(i, 1) = red.x_scores[i];
        if (i < m) table(i, 2) = red.y_scores[i];
        if (i + 1 < cmi_tail_x.size()) table(i, 3) = cmi_tail_x[i + 1];
        if (i + 1 < cmi_tail_y.size()) table(i, 4) = cmi_tail_y[i + 1];
        if (i + 1 < pca_tail_x.size()) table(i, 5) = pca_tail_x[i + 1];
        if (i + 1 < pca_tail_y.size()) table(i, 6) = pca_tail_y[i + 1];
        if (have_cca && i + 1 < cca_tail_x.size()) table(i, 7) = cca_tail_x[i + 1];
        if (have_cca && i + 1 < cca_tail_y.size()) table(i, 8) = cca_tail_y[i + 1];
    }

    RunManifest manifest("experiment eig_decay", cfg.source_text(), seed);
    write_report(manifest, dir, "decay.csv", table,
                 {"i", "cmi_x_score", "cmi_y_score", "cmi_x_tail", "cmi_y_tail", "pca_x_tail",
                  "pca_y_tail", "cca_x_tail", "cca_y_tail"});
    manifest.write(dir);
    return 1;
}

std::vector<Eigen::Index> dimension_ladder(Eigen::Index limit) {
    std::vector<Eigen::Index> dims;
    for (Eigen::Index v : {1, 2, 5, 10, 20, 50, 100, 200, 500})
        if (v < limit) dims.push_back(v);
    dims.push_back(limit);
    return dims;
}

int run_cmi_curves(const ValidatedConfig& cfg, const std::filesystem::path& dir,
                   std::uint64_t seed) {
    const auto base = build_gaussian_problem(cfg);
    const auto model = whitened_model(base);
    const DiagnosticPair diag = estimate_diagnostics(*model, cfg.get_int("diagnostics.n"), seed);
    const Reduction red = reduce_rotation(diag, base->whitening());
    const std::int64_t n = cfg.get_int("cmi.n");
    const std::int64_t ell = cfg.get_int("cmi.l");

    const Eigen::VectorXd tail_x = suffix(red.x_scores);
    const Eigen::VectorXd tail_y = suffix(red.y_scores);

    const auto param_dims = dimension_ladder(model->dim_x());
    Eigen::MatrixXd param_table(static_cast<Eigen::Index>(param_dims.size()), 4);
    for (std::size_t k = 0; k < param_dims.size(); ++k) {
        const CmiEstimate est = cmi_param(*model, red, param_dims[k], n, ell, seed + 17);
        param_table.row(static_cast<Eigen::Index>(k)) << static_cast<double>(param_dims[k]),
            est.value, est.std_error, tail_x[param_dims[k]];
    }

    const auto data_dims = dimension_ladder(model->dim_y());
    Eigen::MatrixXd data_table(static_cast<Eigen::Index>(data_dims.size()), 4);
    for (std::size_t k = 0; k < data_dims.size(); ++k) {
        const CmiEstimate est = cmi_data(*model, red, data_dims[k], n, ell, seed + 18);
        data_table.row(static_cast<Eigen::Index>(k)) << static_cast<double>(data_dims[k]),
            est.value, est.std_error, tail_y[data_dims[k]];
    }

    RunManifest manifest("experiment cmi_curves", cfg.source_text(), seed);
    write_report(manifest, dir, "param_cmi.csv", param_table,
                 {"dim", "estimate", "std_error", "bound"});
    write_report(manifest, dir, "data_cmi.csv", data_table,
                 {"dim", "estimate", "std_error", "bound"});
    manifest.write(dir);
    return 2;
}

int run_goal_oriented(const ValidatedConfig& cfg, const std::filesystem::path& dir,
                      std::uint64_t seed) {
    if (cfg.get("problem.name") != "image")
        throw ConfigError("goal_oriented requires problem.name = image");
    const std::int64_t n =
        cfg.get_int("experiment.n") > 0 ? cfg.get_int("experiment.n") : 20000;

    RunManifest manifest("experiment goal_oriented", cfg.source_text(), seed);
    int files = 0;
    const std::array<std::array<bool, 3>, 2> masks = {{{true, false, false}, {false, true, false}}};
    const std::array<const char*, 2> labels = {"x1", "x2"};
    for (std::size_t which = 0; which < 2; ++which) {
        ImageProblem::Config icfg;
        icfg.grid = cfg.get_int("problem.image.grid");
        icfg.sigma_blob = cfg.get_real("problem.image.sigma_blob");
        icfg.param_mask = masks[which];
        const ImageProblem problem(icfg);
        const DiagnosticPair diag = estimate_diagnostics(problem, n, seed);
        const Reduction red = reduce_rotation(diag);
        const Eigen::Index modes = std::min<Eigen::Index>(4, red.dim_y());
        write_report(manifest, dir, std::string("goal_") + labels[which] + "_modes.csv",
                     red.v_basis.leftCols(modes),
                     {"mode1", "mode2", "mode3", "mode4"},
                     {"grid " + std::to_string(icfg.grid)});
        write_report(manifest, dir, std::string("goal_") + labels[which] + "_scores.csv",
                     red.y_scores, {"score"});
        files += 2;
    }
    manifest.write(dir);
    return files;
}

int run_mcmc_study(const ValidatedConfig& cfg, const std::filesystem::path& dir,
                   std::uint64_t seed) {
    if (cfg.get("problem.name") != "diffusion")
        throw ConfigError("mcmc_study requires problem.name = diffusion");
    const auto base = build_gaussian_problem(cfg);
    const auto model = whitened_model(base);
    const std::int64_t n_diag =
        cfg.get_int("experiment.n") > 0 ? cfg.get_int("experiment.n") : 2000;
    const DiagnosticPair diag = estimate_diagnostics(*model, n_diag, seed);
    const Reduction red = reduce_rotation(diag, base->whitening());

    // One fixed data realization shared by every chain.
    RandomStream data_rng(seed, 0xda7a);
    const Eigen::VectorXd x_truth = base->prior_sample(data_rng);
    const Eigen::VectorXd y = base->sample_data(x_truth, data_rng);

    const Eigen::Index d = base->dim_x();
    const Eigen::Index m = base->dim_y();
    std::vector<Eigen::Index> s_values;
    for (double frac : {1.0, 0.6, 0.3, 0.1}) {
        const Eigen::Index s = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(
                                                             std::lround(frac * static_cast<double>(m))));
        if (s_values.empty() || s != s_values.back()) s_values.push_back(s);
    }
    const int n_seeds = static_cast<int>(cfg.get_int("experiment.seeds"));
    const std::int64_t kept = cfg.get_int("mcmc.chain_length");

    McmcConfig mcfg;
    mcfg.burn_in_fraction = cfg.get_real("mcmc.burn_in_fraction");
    mcfg.target_acceptance = cfg.get_real("mcmc.target_acceptance");

    struct Row {
        double s, chain_seed, acceptance, step, iact_mean, iact_max, ess, mean_err, sd_err;
    };
    std::vector<Row> rows;
    for (int j = 0; j < n_seeds; ++j) {
        Eigen::VectorXd ref_mean, ref_sd;
        for (std::size_t si = 0; si < s_values.size(); ++si) {
            const Eigen::Index s = s_values[si];
            ReducedPosterior post{model, red, ReducedDims{d, s, bound(red, d, s), 0.0}, 1,
                                  InnerMode::fresh};
            const std::uint64_t chain_seed = seed + 1000 + static_cast<std::uint64_t>(j);
            const McmcResult result = sample_approx_posterior(post, y, kept, mcfg, chain_seed);
            const Eigen::VectorXd mean = result.samples.colwise().mean();
            Eigen::VectorXd sd(d);
            for (Eigen::Index c = 0; c < d; ++c)
                sd[c] = std::sqrt((result.samples.col(c).array() - mean[c]).square().mean());
            if (si == 0) {  // s = m reference for this seed
                ref_mean = mean;
                ref_sd = sd;
            }
            Row row;
            row.s = static_cast<double>(s);
            row.chain_seed = static_cast<double>(chain_seed);
            row.acceptance = result.acceptance;
            row.step = result.step_size;
            row.iact_mean = result.iact.size() ? result.iact.mean() : kNan;
            row.iact_max = result.iact.size() ? result.iact.maxCoeff() : kNan;
            row.ess = result.ess;
            row.mean_err = (mean - ref_mean).norm() / ref_mean.norm();
            row.sd_err = (sd - ref_sd).norm() / ref_sd.norm();
            rows.push_back(row);
        }
    }

    Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()), 9);
    for (std::size_t i = 0; i < rows.size(); ++i)
        table.row(static_cast<Eigen::Index>(i)) << rows[i].s, rows[i].chain_seed,
            rows[i].acceptance, rows[i].step, rows[i].iact_mean, rows[i].iact_max, rows[i].ess,
            rows[i].mean_err, rows[i].sd_err;

    RunManifest manifest("experiment mcmc_study", cfg.source_text(), seed);
    write_report(manifest, dir, "study.csv", table,
                 {"s", "chain_seed", "acceptance", "step_size", "iact_mean", "iact_max", "ess",
                  "mean_rel_err", "sd_rel_err"});
    manifest.write(dir);
    return 1;
}

}  // namespace

int run_experiment(const std::string& name, const ValidatedConfig& cfg,
                   const std::filesystem::path& out_dir, std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    if (name == "gap_map") return run_gap_map(cfg, out_dir, seed);
    if (name == "eig_decay") return run_eig_decay(cfg, out_dir, seed);
    if (name == "cmi_curves") return run_cmi_curves(cfg, out_dir, seed);
    if (name == "goal_oriented") return run_goal_oriented(cfg, out_dir, seed);
    if (name == "mcmc_study") return run_mcmc_study(cfg, out_dir, seed);
    throw ConfigError("unknown experiment: " + name);
}

}  // namespace bdr
