#pragma once

#include "bdr/diagnostics.hpp"
#include "bdr/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace bdr {

enum class ReductionKind { rotation, permutation };

/// Ordered decomposition of the parameter and data spaces. Basis columns are
/// sorted by informativeness; scores hold the matching eigenvalues (rotation)
/// or sorted diagonal entries (permutation). When the diagnostics were built
/// in whitened coordinates the whitening pair used is carried along so
/// original-coordinate maps can be formed on demand.
struct Reduction {
    ReductionKind kind = ReductionKind::rotation;
    Eigen::MatrixXd u_basis;   // d x d unitary (or permutation)
    Eigen::MatrixXd v_basis;   // m x m unitary (or permutation)
    Eigen::VectorXd x_scores;  // descending, nonnegative
    Eigen::VectorXd y_scores;
    std::optional<WhiteningPair> whitening;

    Eigen::Index dim_x() const { return u_basis.rows(); }
    Eigen::Index dim_y() const { return v_basis.rows(); }

    /// First r columns of the parameter projection in original coordinates:
    /// pr_inv_sqrt * u_basis when whitened, plain u_basis otherwise. The
    /// whitened variant satisfies U_r^T Gamma_pr U_r = I_r.
    Eigen::MatrixXd param_map(Eigen::Index r) const;
    Eigen::MatrixXd data_map(Eigen::Index s) const;
};

/// Chosen reduced dimensions with the bound value and the cost that chose them.
struct ReducedDims {
    Eigen::Index r = 0;
    Eigen::Index s = 0;
    double bound = 0.0;
    double cost = 0.0;
};

/// Eigenvector bases of the diagnostic matrices; the induced truncation bound
/// is the minimum over all unitary bases.
Reduction reduce_rotation(const DiagnosticPair& diag,
                          std::optional<WhiteningPair> whitening = std::nullopt);

/// Permutation bases sorting the diagnostic diagonals in decreasing order
/// (stable tie-break by original index); a coordinate selection.
Reduction reduce_permutation(const DiagnosticPair& diag,
                             std::optional<WhiteningPair> whitening = std::nullopt);

/// Truncation bound B(r, s): sum of the trailing x_scores beyond r plus the
/// trailing y_scores beyond s. Zero at (dim_x, dim_y), nonincreasing in both.
double bound(const Reduction& red, Eigen::Index r, Eigen::Index s);

using CostFn = std::function<double(Eigen::Index r, Eigen::Index s)>;

CostFn linear_cost(double alpha_x, double alpha_y);
CostFn quadratic_cost(double alpha_x, double alpha_y);

/// Minimizes cost over the (d+1) x (m+1) grid subject to B(r, s) <= eps_prime.
/// The cost must be nondecreasing in each argument. Ties break toward smaller
/// r + s, then smaller r. eps_prime must be positive; feasibility is
/// guaranteed because B(d, m) = 0.
ReducedDims select_dims(const Reduction& red, const CostFn& cost, double eps_prime);

/// Enumeration-free variant splitting the tolerance between the two tails:
/// picks the smallest r with tail_x(r) <= alpha_x/(alpha_x+alpha_y) * eps and
/// the smallest s with tail_y(s) <= alpha_y/(alpha_x+alpha_y) * eps. The
/// constraints are on the trailing score sums, matching the bound B(r, s)
/// that the selection is meant to control.
ReducedDims select_dims_split(const Reduction& red, double alpha_x, double alpha_y, double eps);

/// All cost/bound-optimal (r, s) pairs: no other pair has both a smaller
/// bound and a smaller cost. Sorted by cost ascending.
std::vector<ReducedDims> pareto_front(const Reduction& red, const CostFn& cost);

}  // namespace bdr
