#include "bdr/baselines.hpp"

#include "bdr/errors.hpp"
#include "bdr/parallel.hpp"
#include "bdr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace bdr {

namespace {

struct MomentSums {
    Eigen::VectorXd sx, sy;
    Eigen::MatrixXd sxx, syy, sxy;
    std::int64_t n = 0;

    MomentSums(Eigen::Index d, Eigen::Index m)
        : sx(Eigen::VectorXd::Zero(d)),
          sy(Eigen::VectorXd::Zero(m)),
          sxx(Eigen::MatrixXd::Zero(d, d)),
          syy(Eigen::MatrixXd::Zero(m, m)),
          sxy(Eigen::MatrixXd::Zero(d, m)) {}

    void add(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        sx += x;
        sy += y;
        sxx.noalias() += x * x.transpose();
        syy.noalias() += y * y.transpose();
        sxy.noalias() += x * y.transpose();
        ++n;
    }

    void merge(const MomentSums& o) {
        sx += o.sx;
        sy += o.sy;
        sxx += o.sxx;
        syy += o.syy;
        sxy += o.sxy;
        n += o.n;
    }
};

double default_ridge(const Eigen::MatrixXd& cov) {
    return 1e-10 * cov.trace() / static_cast<double>(cov.rows());
}

}  // namespace

SampleMoments moments(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys) {
    if (xs.rows() != ys.rows()) throw DimensionError("moments: sample counts differ");
    if (xs.rows() < 2) throw DimensionError("moments: need at least two samples");
    const Eigen::Index d = xs.cols();
    const Eigen::Index m = ys.cols();

    const MomentSums sums = tree_reduce<MomentSums>(
        static_cast<std::size_t>(xs.rows()), MomentSums(d, m),
        [&](std::size_t i) {
            MomentSums one(d, m);
            one.add(xs.row(static_cast<Eigen::Index>(i)).transpose(),
                    ys.row(static_cast<Eigen::Index>(i)).transpose());
            return one;
        },
        [](MomentSums a, const MomentSums& b) {
            a.merge(b);
            return a;
        });

    const double n = static_cast<double>(sums.n);
    SampleMoments mom;
    mom.mean_x = sums.sx / n;
    mom.mean_y = sums.sy / n;
    mom.cov_x = (sums.sxx - n * mom.mean_x * mom.mean_x.transpose()) / (n - 1.0);
    mom.cov_y = (sums.syy - n * mom.mean_y * mom.mean_y.transpose()) / (n - 1.0);
    mom.cov_xy = (sums.sxy - n * mom.mean_x * mom.mean_y.transpose()) / (n - 1.0);
    mom.cov_x = (mom.cov_x + mom.cov_x.transpose()) / 2.0;
    mom.cov_y = (mom.cov_y + mom.cov_y.transpose()) / 2.0;
    mom.n = sums.n;
    mom.exact = false;
    return mom;
}

SampleMoments exact_moments(Eigen::VectorXd mean_x, Eigen::VectorXd mean_y,
                            Eigen::MatrixXd cov_x, Eigen::MatrixXd cov_y,
                            Eigen::MatrixXd cov_xy) {
    if (cov_xy.rows() != cov_x.rows() || cov_xy.cols() != cov_y.rows())
        throw DimensionError("exact_moments: cross-covariance shape mismatch");
    SampleMoments mom;
    mom.mean_x = std::move(mean_x);
    mom.mean_y = std::move(mean_y);
    mom.cov_x = std::move(cov_x);
    mom.cov_y = std::move(cov_y);
    mom.cov_xy = std::move(cov_xy);
    mom.n = 0;
    mom.exact = true;
    return mom;
}

PcaResult pca(const SampleMoments& mom, Marginal which) {
    const EigenSystem sys = sym_eig(which == Marginal::X ? mom.cov_x : mom.cov_y);
    return PcaResult{sys.vectors, sys.values};
}

CcaResult cca(const SampleMoments& mom, Eigen::Index r, double ridge) {
    const Eigen::Index d = mom.cov_x.rows();
    const Eigen::Index m = mom.cov_y.rows();
    if (r < 0 || r > std::min(d, m)) throw DimensionError("cca: r must lie in [0, min(d, m)]");

    const double ridge_x = ridge < 0.0 ? default_ridge(mom.cov_x) : ridge;
    const double ridge_y = ridge < 0.0 ? default_ridge(mom.cov_y) : ridge;
    const Eigen::MatrixXd cxx = mom.cov_x + ridge_x * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd cyy = mom.cov_y + ridge_y * Eigen::MatrixXd::Identity(m, m);

    for (const auto* c : {&cxx, &cyy}) {
        const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(*c).eigenvalues();
        if (eig.minCoeff() <= 0.0 || eig.maxCoeff() / eig.minCoeff() > 1e14)
            throw IndefiniteError("cca: covariance is numerically singular even after ridge");
    }

    const Eigen::MatrixXd cyy_inv_cyx = cyy.llt().solve(mom.cov_xy.transpose());
    const Eigen::MatrixXd cxx_inv_cxy = cxx.llt().solve(mom.cov_xy);
    const EigenSystem sys_u = gen_eig(mom.cov_xy * cyy_inv_cyx, cxx);
    const EigenSystem sys_v = gen_eig(mom.cov_xy.transpose() * cxx_inv_cxy, cyy);

    CcaResult out;
    out.u = sys_u.vectors.leftCols(r);
    out.v = sys_v.vectors.leftCols(r);
    out.rho.resize(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const double value = sys_u.values[i];
        if (value < -1e-10)
            throw IndefiniteError("cca: generalized eigenvalue below the noise floor");
        out.rho[i] = std::clamp(value, 0.0, 1.0);
        // Orient each data-side vector so the canonical pair correlates
        // positively.
        if ((out.u.col(i).transpose() * mom.cov_xy * out.v.col(i)).value() < 0.0)
            out.v.col(i) = -out.v.col(i);
    }
    return out;
}

}  // namespace bdr
