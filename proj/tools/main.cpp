#include "bdr/baselines.hpp"
#include "bdr/config.hpp"
#include "bdr/diagnostics.hpp"
#include "bdr/errors.hpp"
#include "bdr/experiments.hpp"
#include "bdr/inference.hpp"
#include "bdr/information.hpp"
#include "bdr/manifest.hpp"
#include "bdr/matrix_io.hpp"
#include "bdr/parallel.hpp"
#include "bdr/problems.hpp"
#include "bdr/reduction.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out = "bdr_out";
};

void apply_threads(int threads) {
    if (threads <= 0) {
        if (const char* env = std::getenv("BDR_THREADS")) threads = std::atoi(env);
    }
    bdr::set_num_threads(threads > 0 ? threads : 0);
}

bdr::ValidatedConfig read_config(const std::string& path) {
    bdr::ConfigResult result = bdr::validate_config(path);
    if (!result.ok())
        throw bdr::ConfigError("invalid config " + path + ":\n" + result.error_text());
    return *std::move(result.config);
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw bdr::Error("cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

struct BuiltModel {
    std::shared_ptr<const bdr::BayesModel> base;
    std::shared_ptr<const bdr::GaussianErrorModel> gauss;          // null for non-Gaussian
    std::shared_ptr<const bdr::WhitenedGaussianModel> whitened;    // null unless whitening on
};

BuiltModel build_model(const bdr::ValidatedConfig& cfg) {
    BuiltModel built;
    built.base = bdr::build_problem(cfg);
    built.gauss = std::dynamic_pointer_cast<const bdr::GaussianErrorModel>(built.base);
    const std::string whiten = cfg.get("diagnostics.whiten");
    if (built.gauss && whiten != "off") built.whitened = bdr::whitened_model(built.gauss);
    return built;
}

void save_report_csv(bdr::RunManifest& manifest, const fs::path& path,
                     const Eigen::MatrixXd& data, std::vector<std::string> header) {
    if (header.empty()) {  // plain matrices get generated column names
        for (Eigen::Index j = 0; j < data.cols(); ++j)
            header.push_back("c" + std::to_string(j));
    }
    bdr::save_csv(path, data, header, {"manifest " + manifest.digest()});
    manifest.record_output(path);
}

bdr::Reduction load_reduction(const fs::path& dir, const BuiltModel& built) {
    bdr::Reduction red;
    red.u_basis = bdr::load_matrix(dir / "u_basis.csv");
    red.v_basis = bdr::load_matrix(dir / "v_basis.csv");
    red.x_scores = bdr::load_matrix(dir / "x_scores.csv");
    red.y_scores = bdr::load_matrix(dir / "y_scores.csv");
    std::ifstream meta_in(dir / "reduction.json");
    if (meta_in) {
        json meta;
        meta_in >> meta;
        red.kind = meta.value("kind", "rotation") == "permutation"
                       ? bdr::ReductionKind::permutation
                       : bdr::ReductionKind::rotation;
        if (meta.value("whitened", false)) {
            if (!built.gauss)
                throw bdr::ConfigError("reduction is whitened but the model is not Gaussian");
            red.whitening = built.gauss->whitening();
        }
    }
    return red;
}

int cmd_validate(const std::string& path) {
    bdr::ConfigResult result = bdr::validate_config(path);
    if (!result.ok()) {
        std::cerr << result.error_text();
        return 2;
    }
    std::cout << result.config->render();
    return 0;
}

int cmd_estimate_diagnostics(const GlobalOptions& global, const std::string& model_path,
                             std::int64_t n_override) {
    const auto cfg = read_config(model_path);
    const BuiltModel built = build_model(cfg);
    const std::int64_t n = n_override > 0 ? n_override : cfg.get_int("diagnostics.n");

    const bdr::BayesModel& model = built.whitened ? *built.whitened : *built.base;
    const auto t0 = std::chrono::steady_clock::now();
    const bdr::DiagnosticPair diag = bdr::estimate_diagnostics(model, n, global.seed);
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(global.out);
    bdr::RunManifest manifest("estimate-diagnostics", cfg.source_text(), global.seed);
    save_report_csv(manifest, fs::path(global.out) / "h_x.csv", diag.h_x, {});
    save_report_csv(manifest, fs::path(global.out) / "h_y.csv", diag.h_y, {});
    write_json(fs::path(global.out) / "diagnostics.json",
               json{{"n", diag.n_samples},
                    {"seed", diag.seed},
                    {"whitened", diag.whitened},
                    {"trace", diag.h_x.trace()},
                    {"runtime_s", runtime}});
    manifest.record_output(fs::path(global.out) / "diagnostics.json");
    manifest.write(global.out);
    std::cout << "diagnostics written to " << global.out << " (trace " << diag.h_x.trace()
              << ")\n";
    return 0;
}

int cmd_reduce(const GlobalOptions& global, const std::string& diag_dir, const std::string& kind,
               const std::string& model_path) {
    bdr::DiagnosticPair diag;
    diag.h_x = bdr::load_matrix(fs::path(diag_dir) / "h_x.csv");
    diag.h_y = bdr::load_matrix(fs::path(diag_dir) / "h_y.csv");
    bool whitened = false;
    std::ifstream meta_in(fs::path(diag_dir) / "diagnostics.json");
    if (meta_in) {
        json meta;
        meta_in >> meta;
        whitened = meta.value("whitened", false);
        diag.n_samples = meta.value("n", 0);
        diag.seed = meta.value("seed", 0);
        diag.whitened = whitened;
    }

    std::optional<bdr::WhiteningPair> whitening;
    std::string config_text = "";
    if (!model_path.empty()) {
        const auto cfg = read_config(model_path);
        config_text = cfg.source_text();
        if (whitened) {
            const auto gauss = bdr::build_gaussian_problem(cfg);
            whitening = gauss->whitening();
        }
    }

    const bdr::Reduction red = kind == "permutation"
                                   ? bdr::reduce_permutation(diag, whitening)
                                   : bdr::reduce_rotation(diag, whitening);

    fs::create_directories(global.out);
    bdr::RunManifest manifest("reduce " + kind, config_text, global.seed);
    save_report_csv(manifest, fs::path(global.out) / "u_basis.csv", red.u_basis, {});
    save_report_csv(manifest, fs::path(global.out) / "v_basis.csv", red.v_basis, {});
    save_report_csv(manifest, fs::path(global.out) / "x_scores.csv", red.x_scores, {"score"});
    save_report_csv(manifest, fs::path(global.out) / "y_scores.csv", red.y_scores, {"score"});
    write_json(fs::path(global.out) / "reduction.json",
               json{{"kind", kind}, {"whitened", whitened}});
    manifest.record_output(fs::path(global.out) / "reduction.json");
    manifest.write(global.out);
    std::cout << "reduction written to " << global.out << "\n";
    return 0;
}

int cmd_select_dims(const GlobalOptions& global, const std::string& reduction_dir,
                    const std::string& cost_name, double ax, double ay, double eps) {
    bdr::Reduction red;
    red.x_scores = bdr::load_matrix(fs::path(reduction_dir) / "x_scores.csv");
    red.y_scores = bdr::load_matrix(fs::path(reduction_dir) / "y_scores.csv");
    red.u_basis = Eigen::MatrixXd::Identity(red.x_scores.size(), red.x_scores.size());
    red.v_basis = Eigen::MatrixXd::Identity(red.y_scores.size(), red.y_scores.size());

    const bdr::CostFn cost =
        cost_name == "quadratic" ? bdr::quadratic_cost(ax, ay) : bdr::linear_cost(ax, ay);
    const bdr::ReducedDims dims = bdr::select_dims(red, cost, eps);

    std::cout << json{{"r", dims.r}, {"s", dims.s}, {"bound", dims.bound}, {"cost", dims.cost}}
                     .dump()
              << "\n";

    fs::create_directories(global.out);
    const auto front = bdr::pareto_front(red, cost);
    Eigen::MatrixXd table(static_cast<Eigen::Index>(front.size()), 4);
    for (std::size_t i = 0; i < front.size(); ++i)
        table.row(static_cast<Eigen::Index>(i))
            << static_cast<double>(front[i].r), static_cast<double>(front[i].s), front[i].bound,
            front[i].cost;
    bdr::RunManifest manifest("select-dims", "", global.seed);
    save_report_csv(manifest, fs::path(global.out) / "pareto.csv", table,
                    {"r", "s", "bound", "cost"});
    manifest.write(global.out);
    return 0;
}

int cmd_baseline(const GlobalOptions& global, const std::string& model_path,
                 const std::string& method, std::int64_t n, Eigen::Index r) {
    const auto cfg = read_config(model_path);
    const BuiltModel built = build_model(cfg);
    const bdr::BayesModel& model = *built.base;

    Eigen::MatrixXd xs(n, model.dim_x()), ys(n, model.dim_y());
    bdr::parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        bdr::RandomStream stream(global.seed, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd x = model.prior_sample(stream);
        xs.row(static_cast<Eigen::Index>(i)) = x.transpose();
        ys.row(static_cast<Eigen::Index>(i)) = model.sample_data(x, stream).transpose();
    });
    const bdr::SampleMoments mom = bdr::moments(xs, ys);

    fs::create_directories(global.out);
    bdr::RunManifest manifest("baseline " + method, cfg.source_text(), global.seed);
    if (method == "pca") {
        const bdr::PcaResult px = bdr::pca(mom, bdr::Marginal::X);
        const bdr::PcaResult py = bdr::pca(mom, bdr::Marginal::Y);
        save_report_csv(manifest, fs::path(global.out) / "pca_x_basis.csv",
                        px.basis.leftCols(std::min<Eigen::Index>(r, px.basis.cols())), {});
        save_report_csv(manifest, fs::path(global.out) / "pca_x_scores.csv", px.scores, {"score"});
        save_report_csv(manifest, fs::path(global.out) / "pca_y_basis.csv",
                        py.basis.leftCols(std::min<Eigen::Index>(r, py.basis.cols())), {});
        save_report_csv(manifest, fs::path(global.out) / "pca_y_scores.csv", py.scores, {"score"});
    } else {
        const bdr::CcaResult result = bdr::cca(mom, r);
        save_report_csv(manifest, fs::path(global.out) / "cca_u.csv", result.u, {});
        save_report_csv(manifest, fs::path(global.out) / "cca_v.csv", result.v, {});
        save_report_csv(manifest, fs::path(global.out) / "cca_rho.csv", result.rho, {"rho"});
    }
    manifest.write(global.out);
    std::cout << "baseline " << method << " written to " << global.out << "\n";
    return 0;
}

int cmd_cmi(const GlobalOptions& global, const std::string& model_path,
            const std::string& reduction_dir, const std::string& which,
            const std::vector<Eigen::Index>& dims, std::int64_t n, std::int64_t ell) {
    const auto cfg = read_config(model_path);
    const BuiltModel built = build_model(cfg);
    if (!built.whitened)
        throw bdr::ConfigError("cmi: a whitened Gaussian model is required (diagnostics.whiten)");
    const bdr::Reduction red = load_reduction(reduction_dir, built);
    const std::int64_t n_eff = n > 0 ? n : cfg.get_int("cmi.n");
    const std::int64_t ell_eff = ell > 0 ? ell : cfg.get_int("cmi.l");

    Eigen::MatrixXd table(static_cast<Eigen::Index>(dims.size()), 4);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        bdr::CmiEstimate est;
        double bound_term = 0.0;
        if (which == "param") {
            est = bdr::cmi_param(*built.whitened, red, dims[k], n_eff, ell_eff, global.seed);
            bound_term = bdr::bound(red, dims[k], red.dim_y());
        } else {
            est = bdr::cmi_data(*built.whitened, red, dims[k], n_eff, ell_eff, global.seed);
            bound_term = bdr::bound(red, red.dim_x(), dims[k]);
        }
        table.row(static_cast<Eigen::Index>(k))
            << static_cast<double>(dims[k]), est.value, est.std_error, bound_term;
    }

    fs::create_directories(global.out);
    bdr::RunManifest manifest("cmi " + which, cfg.source_text(), global.seed);
    save_report_csv(manifest, fs::path(global.out) / "cmi.csv", table,
                    {"dim", "estimate", "std_error", "bound"});
    manifest.write(global.out);
    std::cout << "cmi " << which << " written to " << global.out << "\n";
    return 0;
}

int cmd_sample(const GlobalOptions& global, const std::string& model_path,
               const std::string& reduction_dir, Eigen::Index r, Eigen::Index s,
               const std::string& y_path, std::int64_t n) {
    const auto cfg = read_config(model_path);
    const BuiltModel built = build_model(cfg);
    if (!built.whitened)
        throw bdr::ConfigError("sample: a whitened Gaussian model is required");
    const bdr::Reduction red = load_reduction(reduction_dir, built);

    Eigen::MatrixXd y_raw = bdr::load_matrix(y_path);
    Eigen::VectorXd y = y_raw.cols() == 1 ? Eigen::VectorXd(y_raw.col(0))
                                          : Eigen::VectorXd(y_raw.row(0).transpose());

    bdr::ReducedPosterior post{built.whitened, red,
                               bdr::ReducedDims{r, s, bdr::bound(red, r, s), 0.0}, 1,
                               bdr::InnerMode::fresh};
    bdr::McmcConfig mcfg;
    mcfg.burn_in_fraction = cfg.get_real("mcmc.burn_in_fraction");
    mcfg.target_acceptance = cfg.get_real("mcmc.target_acceptance");
    const std::int64_t kept = n > 0 ? n : cfg.get_int("mcmc.chain_length");

    const bdr::McmcResult result = bdr::sample_approx_posterior(post, y, kept, mcfg, global.seed);
    if (result.diverged)
        std::cerr << "warning: chain acceptance collapsed below 1%; samples are unreliable\n";

    fs::create_directories(global.out);
    bdr::RunManifest manifest("sample", cfg.source_text(), global.seed);
    save_report_csv(manifest, fs::path(global.out) / "samples.csv", result.samples, {});
    json diag{{"acceptance", result.acceptance},
              {"ess", result.ess},
              {"step_size", result.step_size},
              {"diverged", result.diverged}};
    diag["iact"] = json::array();
    for (Eigen::Index i = 0; i < result.iact.size(); ++i) diag["iact"].push_back(result.iact[i]);
    write_json(fs::path(global.out) / "diagnostics.json", diag);
    manifest.record_output(fs::path(global.out) / "diagnostics.json");
    manifest.write(global.out);
    std::cout << "samples written to " << global.out << " (acceptance " << result.acceptance
              << ")\n";
    return 0;
}

int cmd_experiment(const GlobalOptions& global, const std::string& name,
                   const std::string& model_path) {
    const auto cfg = read_config(model_path);
    try {
        bdr::run_experiment(name, cfg, global.out, global.seed);
    } catch (const bdr::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        // Flag partial outputs: list whatever the failed stage left behind in
        // a manifest alongside the error. A failure before any data file was
        // written leaves the directory clean (plain numerical-failure exit).
        std::error_code ec;
        bdr::RunManifest manifest("experiment " + name + " (failed)", cfg.source_text(),
                                  global.seed);
        int data_files = 0;
        if (fs::exists(global.out, ec)) {
            for (const auto& entry : fs::directory_iterator(global.out, ec))
                if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
                    manifest.record_output(entry.path());
                    ++data_files;
                }
        }
        if (data_files > 0) {
            manifest.write(global.out);
            write_json(fs::path(global.out) / "error.json",
                       json{{"error", e.what()}, {"partial", true}});
        }
        throw;
    }
    std::cout << "experiment " << name << " written to " << global.out << "\n";
    return 0;
}

bool out_dir_has_files(const std::string& out) {
    std::error_code ec;
    if (!fs::exists(out, ec)) return false;
    for (const auto& entry : fs::directory_iterator(out, ec)) {
        (void)entry;
        return true;
    }
    return false;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient-based joint dimension reduction for Bayesian inverse problems"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "global RNG seed")->capture_default_str();
    app.add_option("--threads", global.threads,
                   "worker threads (0 = BDR_THREADS env or all cores)");
    app.add_option("--out", global.out, "output directory")->capture_default_str();

    std::string model_path, diag_dir, reduction_dir, kind = "rotation", method = "pca";
    std::string which = "param", experiment_name, y_path, validate_path, cost_name = "linear";
    std::int64_t n = 0, ell = 0;
    Eigen::Index r = 0, s = 0;
    double ax = 1.0, ay = 1.0, eps = 1.0;
    std::vector<Eigen::Index> dims;

    auto* sub_diag = app.add_subcommand("estimate-diagnostics",
                                        "Monte Carlo estimate of the diagnostic matrices");
    sub_diag->add_option("--model", model_path, "problem config")->required();
    sub_diag->add_option("--n", n, "sample count (default from config)");

    auto* sub_reduce = app.add_subcommand("reduce", "build rotation/permutation reductions");
    sub_reduce->add_option("--diag", diag_dir, "diagnostics directory")->required();
    sub_reduce->add_option("--kind", kind, "rotation|permutation")
        ->check(CLI::IsMember({"rotation", "permutation"}));
    sub_reduce->add_option("--model", model_path, "problem config (to attach whitening)");

    auto* sub_select = app.add_subcommand("select-dims", "choose (r, s) under a bound budget");
    sub_select->add_option("--reduction", reduction_dir, "reduction directory")->required();
    sub_select->add_option("--cost", cost_name, "linear|quadratic")
        ->check(CLI::IsMember({"linear", "quadratic"}));
    sub_select->add_option("--ax", ax, "parameter cost weight");
    sub_select->add_option("--ay", ay, "data cost weight");
    sub_select->add_option("--eps", eps, "bound budget eps'")->required();

    auto* sub_baseline = app.add_subcommand("baseline", "PCA or CCA baselines from samples");
    sub_baseline->add_option("--model", model_path, "problem config")->required();
    sub_baseline->add_option("--method", method, "pca|cca")
        ->check(CLI::IsMember({"pca", "cca"}));
    sub_baseline->add_option("--n", n, "sample count")->required();
    sub_baseline->add_option("--r", r, "number of modes to keep")->required();

    auto* sub_cmi = app.add_subcommand("cmi", "conditional mutual information estimates");
    sub_cmi->add_option("--model", model_path, "problem config")->required();
    sub_cmi->add_option("--reduction", reduction_dir, "reduction directory")->required();
    sub_cmi->add_option("--which", which, "param|data")
        ->check(CLI::IsMember({"param", "data"}));
    sub_cmi->add_option("--dims", dims, "reduced dimensions to evaluate")->required();
    sub_cmi->add_option("--n", n, "outer sample count");
    sub_cmi->add_option("--l", ell, "inner sample count");

    auto* sub_sample = app.add_subcommand("sample", "sample the approximate posterior");
    sub_sample->add_option("--model", model_path, "problem config")->required();
    sub_sample->add_option("--reduction", reduction_dir, "reduction directory")->required();
    sub_sample->add_option("--r", r, "kept parameter dimensions")->required();
    sub_sample->add_option("--s", s, "kept data dimensions")->required();
    sub_sample->add_option("--y", y_path, "observed data CSV")->required();
    sub_sample->add_option("--n", n, "kept chain states");

    auto* sub_exp = app.add_subcommand("experiment", "run a packaged experiment");
    sub_exp->add_option("--name", experiment_name,
                        "gap_map|eig_decay|cmi_curves|goal_oriented|mcmc_study")
        ->required()
        ->check(CLI::IsMember({"gap_map", "eig_decay", "cmi_curves", "goal_oriented",
                               "mcmc_study"}));
    sub_exp->add_option("--model", model_path, "problem config")->required();

    auto* sub_validate = app.add_subcommand("validate", "validate and echo a config");
    sub_validate->add_option("config", validate_path, "config file")->required();

    // The customary flag placement puts global options after the subcommand
    // name; let them fall through to the top-level parser.
    for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    apply_threads(global.threads);

    try {
        if (sub_validate->parsed()) return cmd_validate(validate_path);
        if (sub_diag->parsed()) return cmd_estimate_diagnostics(global, model_path, n);
        if (sub_reduce->parsed()) return cmd_reduce(global, diag_dir, kind, model_path);
        if (sub_select->parsed())
            return cmd_select_dims(global, reduction_dir, cost_name, ax, ay, eps);
        if (sub_baseline->parsed()) return cmd_baseline(global, model_path, method, n, r);
        if (sub_cmi->parsed())
            return cmd_cmi(global, model_path, reduction_dir, which, dims, n, ell);
        if (sub_sample->parsed())
            return cmd_sample(global, model_path, reduction_dir, r, s, y_path, n);
        if (sub_exp->parsed()) return cmd_experiment(global, experiment_name, model_path);
    } catch (const bdr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return out_dir_has_files(global.out) ? 4 : 3;
    }
    return 0;
}
