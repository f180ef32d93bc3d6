#include "bdr/reduction.hpp"

#include "bdr/errors.hpp"
#include "bdr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace bdr {

namespace {

// Backward-accumulated suffix sums: tail[k] = sum of scores[k..p-1], tail[p] = 0.
Eigen::VectorXd suffix_sums(const Eigen::VectorXd& scores) {
    Eigen::VectorXd tail(scores.size() + 1);
    tail[scores.size()] = 0.0;
    for (Eigen::Index i = scores.size() - 1; i >= 0; --i) tail[i] = tail[i + 1] + scores[i];
    return tail;
}

Eigen::VectorXd clamp_nonnegative(Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::max(v[i], 0.0);
    return v;
}

void check_pair(const DiagnosticPair& diag) {
    if (diag.h_x.rows() != diag.h_x.cols() || diag.h_y.rows() != diag.h_y.cols())
        throw DimensionError("reduction: diagnostic matrices must be square");
}

// Permutation sorting values descending; equal values keep original order.
std::vector<Eigen::Index> descending_order(const Eigen::VectorXd& values) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
    return order;
}

}  // namespace

Eigen::MatrixXd Reduction::param_map(Eigen::Index r) const {
    if (r < 0 || r > dim_x()) throw DimensionError("param_map: r out of range");
    if (whitening) return whitening->pr_inv_sqrt * u_basis.leftCols(r);
    return u_basis.leftCols(r);
}

Eigen::MatrixXd Reduction::data_map(Eigen::Index s) const {
    if (s < 0 || s > dim_y()) throw DimensionError("data_map: s out of range");
    if (whitening) return whitening->obs_inv_sqrt * v_basis.leftCols(s);
    return v_basis.leftCols(s);
}

Reduction reduce_rotation(const DiagnosticPair& diag, std::optional<WhiteningPair> whitening) {
    check_pair(diag);
    const EigenSystem sys_x = sym_eig(diag.h_x);
    const EigenSystem sys_y = sym_eig(diag.h_y);
    Reduction red;
    red.kind = ReductionKind::rotation;
    red.u_basis = sys_x.vectors;
    red.v_basis = sys_y.vectors;
    red.x_scores = clamp_nonnegative(sys_x.values);
    red.y_scores = clamp_nonnegative(sys_y.values);
    red.whitening = std::move(whitening);
    return red;
}

Reduction reduce_permutation(const DiagnosticPair& diag, std::optional<WhiteningPair> whitening) {
    check_pair(diag);
    const auto order_x = descending_order(diag.h_x.diagonal());
    const auto order_y = descending_order(diag.h_y.diagonal());

    Reduction red;
    red.kind = ReductionKind::permutation;
    red.u_basis = Eigen::MatrixXd::Zero(diag.h_x.rows(), diag.h_x.rows());
    red.v_basis = Eigen::MatrixXd::Zero(diag.h_y.rows(), diag.h_y.rows());
    red.x_scores.resize(diag.h_x.rows());
    red.y_scores.resize(diag.h_y.rows());
    for (Eigen::Index j = 0; j < red.u_basis.cols(); ++j) {
        red.u_basis(order_x[static_cast<std::size_t>(j)], j) = 1.0;
        red.x_scores[j] = diag.h_x.diagonal()[order_x[static_cast<std::size_t>(j)]];
    }
    for (Eigen::Index j = 0; j < red.v_basis.cols(); ++j) {
        red.v_basis(order_y[static_cast<std::size_t>(j)], j) = 1.0;
        red.y_scores[j] = diag.h_y.diagonal()[order_y[static_cast<std::size_t>(j)]];
    }
    red.x_scores = clamp_nonnegative(red.x_scores);
    red.y_scores = clamp_nonnegative(red.y_scores);
    red.whitening = std::move(whitening);
    return red;
}

double bound(const Reduction& red, Eigen::Index r, Eigen::Index s) {
    if (r < 0 || r > red.dim_x() || s < 0 || s > red.dim_y())
        throw DimensionError("bound: reduced dimensions out of range");
    double tail = 0.0;
    for (Eigen::Index i = red.x_scores.size() - 1; i >= r; --i) tail += red.x_scores[i];
    for (Eigen::Index i = red.y_scores.size() - 1; i >= s; --i) tail += red.y_scores[i];
    return tail;
}

CostFn linear_cost(double alpha_x, double alpha_y) {
    return [alpha_x, alpha_y](Eigen::Index r, Eigen::Index s) {
        return alpha_x * static_cast<double>(r) + alpha_y * static_cast<double>(s);
    };
}

CostFn quadratic_cost(double alpha_x, double alpha_y) {
    return [alpha_x, alpha_y](Eigen::Index r, Eigen::Index s) {
        return alpha_x * static_cast<double>(r) * static_cast<double>(r) +
               alpha_y * static_cast<double>(s) * static_cast<double>(s);
    };
}

ReducedDims select_dims(const Reduction& red, const CostFn& cost, double eps_prime) {
    if (!(eps_prime > 0.0)) throw DomainError("select_dims requires eps' > 0");
    const Eigen::VectorXd tail_x = suffix_sums(red.x_scores);
    const Eigen::VectorXd tail_y = suffix_sums(red.y_scores);
    const Eigen::Index d = red.dim_x();
    const Eigen::Index m = red.dim_y();

    // For a cost nondecreasing in each argument, only the smallest feasible s
    // per row r can be optimal; the bound's monotonicity makes it well defined.
    bool have = false;
    ReducedDims best;
    for (Eigen::Index r = 0; r <= d; ++r) {
        const double budget = eps_prime - tail_x[r];
        if (budget < 0.0) continue;
        Eigen::Index lo = 0, hi = m;
        while (lo < hi) {  // smallest s with tail_y[s] <= budget
            const Eigen::Index mid = (lo + hi) / 2;
            if (tail_y[mid] <= budget)
                hi = mid;
            else
                lo = mid + 1;
        }
        const Eigen::Index s = lo;
        ReducedDims cand{r, s, tail_x[r] + tail_y[s], cost(r, s)};
        const bool better =
            !have || cand.cost < best.cost ||
            (cand.cost == best.cost &&
             (cand.r + cand.s < best.r + best.s ||
              (cand.r + cand.s == best.r + best.s && cand.r < best.r)));
        if (better) {
            best = cand;
            have = true;
        }
    }
    if (!have) throw Error("select_dims: no feasible pair (unreachable: B(d, m) = 0)");
    return best;
}

ReducedDims select_dims_split(const Reduction& red, double alpha_x, double alpha_y, double eps) {
    if (alpha_x < 0.0 || alpha_y < 0.0 || (alpha_x == 0.0 && alpha_y == 0.0))
        throw DomainError("select_dims_split: weights must be nonnegative and not both zero");
    if (!(eps > 0.0)) throw DomainError("select_dims_split requires eps > 0");
    const Eigen::VectorXd tail_x = suffix_sums(red.x_scores);
    const Eigen::VectorXd tail_y = suffix_sums(red.y_scores);
    const double share_x = alpha_x / (alpha_x + alpha_y) * eps;
    const double share_y = alpha_y / (alpha_x + alpha_y) * eps;

    Eigen::Index r = red.dim_x();
    for (Eigen::Index k = 0; k <= red.dim_x(); ++k) {
        if (tail_x[k] <= share_x) {
            r = k;
            break;
        }
    }
    Eigen::Index s = red.dim_y();
    for (Eigen::Index k = 0; k <= red.dim_y(); ++k) {
        if (tail_y[k] <= share_y) {
            s = k;
            break;
        }
    }
    return ReducedDims{r, s, tail_x[r] + tail_y[s],
                       alpha_x * static_cast<double>(r) + alpha_y * static_cast<double>(s)};
}

std::vector<ReducedDims> pareto_front(const Reduction& red, const CostFn& cost) {
    const Eigen::VectorXd tail_x = suffix_sums(red.x_scores);
    const Eigen::VectorXd tail_y = suffix_sums(red.y_scores);
    std::vector<ReducedDims> cells;
    cells.reserve(static_cast<std::size_t>((red.dim_x() + 1) * (red.dim_y() + 1)));
    for (Eigen::Index r = 0; r <= red.dim_x(); ++r)
        for (Eigen::Index s = 0; s <= red.dim_y(); ++s)
            cells.push_back(ReducedDims{r, s, tail_x[r] + tail_y[s], cost(r, s)});
    std::sort(cells.begin(), cells.end(), [](const ReducedDims& a, const ReducedDims& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        if (a.bound != b.bound) return a.bound < b.bound;
        if (a.r + a.s != b.r + b.s) return a.r + a.s < b.r + b.s;
        return a.r < b.r;
    });
    std::vector<ReducedDims> front;
    double best_bound = std::numeric_limits<double>::infinity();
    for (const auto& c : cells) {
        if (c.bound < best_bound) {
            front.push_back(c);
            best_bound = c.bound;
        }
    }
    return front;
}

}  // namespace bdr
