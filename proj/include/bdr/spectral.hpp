#pragma once

#include "bdr/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace bdr {

/// Full symmetric eigendecomposition with a deterministic gauge.
///
/// values are sorted descending; vectors has orthonormal columns aligned with
/// values; residual_norm bounds max_i ||H v_i - values_i v_i||. Each column is
/// signed so that its entry of largest magnitude is nonnegative, which makes
/// outputs reproducible byte-for-byte.
struct EigenSystem {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    double residual_norm = 0.0;
};

/// Thin SVD with descending singular values and the same sign gauge as
/// sym_eig applied to the columns of u (v flipped to preserve the product).
struct SvdResult {
    Eigen::MatrixXd u;
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd v;
};

namespace detail {

/// Flips each column so its largest-magnitude entry is nonnegative.
/// Ties resolve to the lowest row index. Returns the per-column signs applied.
inline Eigen::VectorXd fix_column_signs(Eigen::MatrixXd& m) {
    Eigen::VectorXd signs = Eigen::VectorXd::Ones(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index at = 0;
        m.col(j).cwiseAbs().maxCoeff(&at);
        if (m(at, j) < 0.0) {
            m.col(j) = -m.col(j);
            signs[j] = -1.0;
        }
    }
    return signs;
}

inline void require_symmetric(const Eigen::MatrixXd& h, const char* what) {
    if (h.rows() != h.cols())
        throw DimensionError(std::string(what) + ": matrix is not square");
    const double scale = h.cwiseAbs().maxCoeff();
    const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * std::max(scale, 1e-300))
        throw NotSymmetricError(std::string(what) + ": matrix is not symmetric");
}

}  // namespace detail

/// Eigendecomposition of a symmetric matrix, descending order.
template <typename Derived>
EigenSystem sym_eig(const Eigen::MatrixBase<Derived>& h_expr) {
    const Eigen::MatrixXd h = h_expr;
    detail::require_symmetric(h, "sym_eig");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver((h + h.transpose()) / 2.0);
    if (solver.info() != Eigen::Success)
        throw NoConvergenceError("sym_eig: eigensolver did not converge");

    const Eigen::Index p = h.rows();
    EigenSystem sys;
    sys.values = solver.eigenvalues().reverse();
    sys.vectors = solver.eigenvectors().rowwise().reverse();
    detail::fix_column_signs(sys.vectors);

    double residual = 0.0;
    const Eigen::MatrixXd hv = h * sys.vectors;
    for (Eigen::Index i = 0; i < p; ++i)
        residual = std::max(residual, (hv.col(i) - sys.values[i] * sys.vectors.col(i)).norm());
    sys.residual_norm = residual;
    return sys;
}

/// Basis of the trailing (least informative) eigenvectors t+1..p together with
/// the tail eigenvalue sum it realizes. The tail sum is the minimum of
/// Tr(W^T H W) over orthonormal W with p-t columns.
inline std::pair<Eigen::MatrixXd, double> trailing_subspace(const EigenSystem& sys,
                                                            Eigen::Index t) {
    const Eigen::Index p = sys.values.size();
    if (t < 0 || t > p) throw DimensionError("trailing_subspace: t out of [0, p]");
    Eigen::MatrixXd basis = sys.vectors.rightCols(p - t);
    double tail = 0.0;
    for (Eigen::Index i = p - 1; i >= t; --i) tail += sys.values[i];
    return {std::move(basis), tail};
}

/// Generalized symmetric eigenproblem A w = lambda B w with SPD B, solved by
/// whitening with the symmetric square root of B. Vectors are B-orthonormal;
/// eigenvalues coincide with sym_eig(B^{-1/2} A B^{-1/2}).
template <typename DerivedA, typename DerivedB>
EigenSystem gen_eig(const Eigen::MatrixBase<DerivedA>& a_expr,
                    const Eigen::MatrixBase<DerivedB>& b_expr) {
    const Eigen::MatrixXd a = a_expr;
    const Eigen::MatrixXd b = b_expr;
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("gen_eig: shape mismatch between A and B");
    detail::require_symmetric(a, "gen_eig(A)");
    detail::require_symmetric(b, "gen_eig(B)");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bsolver((b + b.transpose()) / 2.0);
    if (bsolver.info() != Eigen::Success)
        throw NoConvergenceError("gen_eig: eigensolver failed on B");
    const Eigen::VectorXd bvals = bsolver.eigenvalues();
    const double bmax = bvals.maxCoeff();
    if (bvals.minCoeff() <= 1e-14 * std::max(bmax, 1e-300))
        throw IndefiniteError("gen_eig: B is not positive definite");
    const Eigen::MatrixXd b_inv_sqrt =
        bsolver.eigenvectors() * bvals.cwiseSqrt().cwiseInverse().asDiagonal() *
        bsolver.eigenvectors().transpose();

    EigenSystem sys = sym_eig(b_inv_sqrt * a * b_inv_sqrt);
    sys.vectors = b_inv_sqrt * sys.vectors;
    detail::fix_column_signs(sys.vectors);
    return sys;
}

/// Thin SVD of a rectangular matrix.
template <typename Derived>
SvdResult svd_rect(const Eigen::MatrixBase<Derived>& a_expr) {
    const Eigen::MatrixXd a = a_expr;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out;
    out.u = svd.matrixU();
    out.singular_values = svd.singularValues();
    out.v = svd.matrixV();
    const Eigen::VectorXd signs = detail::fix_column_signs(out.u);
    for (Eigen::Index j = 0; j < out.v.cols(); ++j) out.v.col(j) *= signs[j];
    return out;
}

/// Principal angles (radians, ascending in [0, pi/2]) between the column
/// spans of two matrices with orthonormal columns; min(rank) angles are
/// returned. Small angles come from the sine-based residual B - A(A^T B),
/// which stays accurate where arccos of a near-1 cosine cannot.
template <typename DerivedA, typename DerivedB>
Eigen::VectorXd principal_angles(const Eigen::MatrixBase<DerivedA>& a_expr,
                                 const Eigen::MatrixBase<DerivedB>& b_expr) {
    const Eigen::MatrixXd a = a_expr;
    const Eigen::MatrixXd b = b_expr;
    if (a.rows() != b.rows())
        throw DimensionError("principal_angles: ambient dimensions differ");
    const Eigen::MatrixXd cross = a.transpose() * b;
    Eigen::JacobiSVD<Eigen::MatrixXd> cos_svd(cross);
    const Eigen::VectorXd cosines = cos_svd.singularValues();  // descending
    Eigen::JacobiSVD<Eigen::MatrixXd> sin_svd(b - a * cross);
    const Eigen::VectorXd sines_desc = sin_svd.singularValues();

    const Eigen::Index k = cosines.size();
    Eigen::VectorXd angles(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double c = std::clamp(cosines[i], 0.0, 1.0);
        // Ascending sines pair with descending cosines.
        const Eigen::Index si = sines_desc.size() - 1 - i;
        const double s = si >= 0 ? std::clamp(sines_desc[si], 0.0, 1.0) : 0.0;
        angles[i] = c * c >= 0.5 ? std::asin(s) : std::acos(c);
    }
    return angles;
}

/// Householder-orthonormalized copy of the columns of m (rank assumed full).
inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    return q;
}

}  // namespace bdr
