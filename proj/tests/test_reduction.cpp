#include "bdr/reduction.hpp"

#include "bdr/errors.hpp"
#include "bdr/problems.hpp"
#include "bdr/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bdr::DiagnosticPair random_pair(Eigen::Index d, Eigen::Index m, std::uint64_t seed) {
    bdr::RandomStream rng(seed);
    const MatrixXd a = rng.normal_matrix(d, d);
    const MatrixXd b = rng.normal_matrix(m, m);
    bdr::DiagnosticPair diag;
    diag.h_x = a * a.transpose();
    diag.h_y = b * b.transpose();
    diag.n_samples = 1;
    return diag;
}

bdr::Reduction from_scores(VectorXd x_scores, VectorXd y_scores) {
    bdr::Reduction red;
    red.u_basis = MatrixXd::Identity(x_scores.size(), x_scores.size());
    red.v_basis = MatrixXd::Identity(y_scores.size(), y_scores.size());
    red.x_scores = std::move(x_scores);
    red.y_scores = std::move(y_scores);
    return red;
}

}  // namespace

TEST_SUITE("reduction") {

TEST_CASE("rotation of diagonal diagnostics is a signed identity") {
    bdr::DiagnosticPair diag;
    diag.h_x = VectorXd{{4.0, 1.0}}.asDiagonal();
    diag.h_y = VectorXd{{9.0}}.asDiagonal();
    const bdr::Reduction red = bdr::reduce_rotation(diag);
    CHECK(red.x_scores[0] == doctest::Approx(4.0));
    CHECK(red.x_scores[1] == doctest::Approx(1.0));
    CHECK(red.y_scores[0] == doctest::Approx(9.0));
    CHECK((red.u_basis - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("rotation bases diagonalize and scores are the eigenvalues") {
    const bdr::DiagnosticPair diag = random_pair(8, 6, 3);
    const bdr::Reduction red = bdr::reduce_rotation(diag);
    const MatrixXd transformed = red.u_basis.transpose() * diag.h_x * red.u_basis;
    double offdiag = 0.0;
    for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 8; ++j)
            if (i != j) offdiag = std::max(offdiag, std::abs(transformed(i, j)));
    CHECK(offdiag <= 1e-8 * diag.h_x.trace());
    for (Eigen::Index i = 0; i + 1 < 8; ++i) CHECK(red.x_scores[i] >= red.x_scores[i + 1]);
    CHECK((red.u_basis.transpose() * red.u_basis - MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <=
          1e-10);
}

TEST_CASE("permutation sorts diagonals with stable ties") {
    bdr::DiagnosticPair diag;
    diag.h_x = VectorXd{{1.0, 5.0, 3.0}}.asDiagonal();
    diag.h_y = VectorXd{{2.0, 2.0, 2.0}}.asDiagonal();
    const bdr::Reduction red = bdr::reduce_permutation(diag);
    CHECK(red.x_scores[0] == doctest::Approx(5.0));
    CHECK(red.x_scores[1] == doctest::Approx(3.0));
    CHECK(red.x_scores[2] == doctest::Approx(1.0));
    // Order (2, 3, 1) in 1-indexed terms: column j is e_{sigma(j)}.
    CHECK(red.u_basis(1, 0) == 1.0);
    CHECK(red.u_basis(2, 1) == 1.0);
    CHECK(red.u_basis(0, 2) == 1.0);
    // All-equal diagonal keeps the identity permutation.
    CHECK((red.v_basis - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rotation bound dominates permutation bound everywhere") {
    const bdr::DiagnosticPair diag = random_pair(8, 6, 17);
    const bdr::Reduction rot = bdr::reduce_rotation(diag);
    const bdr::Reduction perm = bdr::reduce_permutation(diag);
    for (Eigen::Index r = 0; r <= 8; ++r)
        for (Eigen::Index s = 0; s <= 6; ++s)
            CHECK(bdr::bound(rot, r, s) <= bdr::bound(perm, r, s) + 1e-10);
}

TEST_CASE("bound tail arithmetic") {
    const bdr::Reduction red = from_scores(VectorXd{{4.0, 1.0}}, VectorXd{{9.0, 2.0}});
    CHECK(bdr::bound(red, 2, 2) == 0.0);
    CHECK(bdr::bound(red, 1, 1) == doctest::Approx(3.0));
    CHECK(bdr::bound(red, 0, 0) == doctest::Approx(16.0));
    CHECK_THROWS_AS(bdr::bound(red, 3, 0), bdr::DimensionError);

    SUBCASE("monotone nonincreasing in each argument") {
        const bdr::Reduction rnd = bdr::reduce_rotation(random_pair(5, 7, 23));
        for (Eigen::Index r = 0; r + 1 <= 5; ++r)
            CHECK(bdr::bound(rnd, r + 1, 3) <= bdr::bound(rnd, r, 3) + 1e-14);
        for (Eigen::Index s = 0; s + 1 <= 7; ++s)
            CHECK(bdr::bound(rnd, 2, s + 1) <= bdr::bound(rnd, 2, s) + 1e-14);
        CHECK(bdr::bound(rnd, 5, 7) == 0.0);
    }
}

TEST_CASE("select_dims worked example") {
    const bdr::Reduction red =
        from_scores(VectorXd{{4.0, 1.0, 0.1}}, VectorXd{{3.0, 0.5, 0.2, 0.01}});
    const bdr::ReducedDims dims = bdr::select_dims(red, bdr::linear_cost(1.0, 1.0), 1.0);
    CHECK(dims.r == 2);
    CHECK(dims.s == 1);
    CHECK(dims.bound == doctest::Approx(0.81));
    CHECK(dims.cost == doctest::Approx(3.0));
}

TEST_CASE("select_dims edge budgets") {
    const bdr::Reduction red = from_scores(VectorXd{{4.0, 1.0, 0.1}}, VectorXd{{3.0, 0.5}});
    SUBCASE("budget above the full trace keeps nothing") {
        const bdr::ReducedDims dims = bdr::select_dims(red, bdr::linear_cost(1.0, 1.0), 100.0);
        CHECK(dims.r == 0);
        CHECK(dims.s == 0);
    }
    SUBCASE("vanishing budget with positive scores keeps everything") {
        const bdr::ReducedDims dims = bdr::select_dims(red, bdr::linear_cost(1.0, 1.0), 1e-12);
        CHECK(dims.r == 3);
        CHECK(dims.s == 2);
    }
    SUBCASE("zero budget is rejected") {
        CHECK_THROWS_AS(bdr::select_dims(red, bdr::linear_cost(1.0, 1.0), 0.0), bdr::DomainError);
    }
}

TEST_CASE("select_dims agrees with exhaustive enumeration on random scores") {
    bdr::RandomStream rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform() * 58);
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.uniform() * 58);
        VectorXd xs(d), ys(m);
        for (Eigen::Index i = 0; i < d; ++i) xs[i] = std::exp(2.0 * rng.normal());
        for (Eigen::Index i = 0; i < m; ++i) ys[i] = std::exp(2.0 * rng.normal());
        std::sort(xs.data(), xs.data() + d, std::greater<double>());
        std::sort(ys.data(), ys.data() + m, std::greater<double>());
        const bdr::Reduction red = from_scores(xs, ys);
        const double eps = (xs.sum() + ys.sum()) * std::pow(10.0, -3.0 * rng.uniform());
        for (const auto& cost : {bdr::linear_cost(1.0, 2.0), bdr::quadratic_cost(1.0, 0.5)}) {
            const bdr::ReducedDims got = bdr::select_dims(red, cost, eps);
            const bdr::ReducedDims want = bdr_test::brute_force_select(xs, ys, cost, eps);
            CHECK(got.r == want.r);
            CHECK(got.s == want.s);
            CHECK(got.bound == doctest::Approx(want.bound).epsilon(1e-12));
        }
    }
}

TEST_CASE("split selection takes the smallest tails within each share") {
    const bdr::Reduction red =
        from_scores(VectorXd{{4.0, 1.0, 0.1}}, VectorXd{{4.0, 1.0, 0.1}});
    SUBCASE("worked example") {
        const bdr::ReducedDims dims = bdr::select_dims_split(red, 1.0, 1.0, 2.4);
        CHECK(dims.r == 1);  // tail(1) = 1.1 <= 1.2
        CHECK(dims.s == 1);
    }
    SUBCASE("balanced weights with equal scores give r = s") {
        for (double eps : {0.5, 1.3, 2.9, 8.0}) {
            const bdr::ReducedDims dims = bdr::select_dims_split(red, 1.0, 1.0, eps);
            CHECK(dims.r == dims.s);
        }
    }
    SUBCASE("zero parameter budget needs the full rank") {
        const bdr::Reduction zero_tail =
            from_scores(VectorXd{{2.0, 1.0, 0.0, 0.0}}, VectorXd{{1.0}});
        const bdr::ReducedDims dims = bdr::select_dims_split(zero_tail, 0.0, 1.0, 1.0);
        CHECK(dims.r == 2);  // rank of the score vector
    }
    SUBCASE("invalid weights are rejected") {
        CHECK_THROWS_AS(bdr::select_dims_split(red, 0.0, 0.0, 1.0), bdr::DomainError);
        CHECK_THROWS_AS(bdr::select_dims_split(red, -1.0, 1.0, 1.0), bdr::DomainError);
    }
}

TEST_CASE("whitened reductions satisfy the prior-orthonormality identity") {
    const auto problem = bdr::LinearGaussianProblem::benchmark(12, 12, 4);
    const bdr::LinearGaussianDiagnostics diag =
        bdr::diagnostics_linear_gaussian(problem->g(), problem->whitening());
    const bdr::Reduction red = bdr::reduce_rotation(diag.pair, problem->whitening());

    // Linear model: both score vectors are the squared singular values of the
    // whitened forward factor.
    for (Eigen::Index i = 0; i < 12; ++i) {
        const double sq = diag.singular_values[i] * diag.singular_values[i];
        CHECK(red.x_scores[i] == doctest::Approx(sq).epsilon(1e-10));
        CHECK(red.y_scores[i] == doctest::Approx(sq).epsilon(1e-10));
    }
    const Eigen::Index r = 5;
    const MatrixXd u_r = red.param_map(r);
    CHECK((u_r.transpose() * problem->prior_cov() * u_r - MatrixXd::Identity(r, r))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    const MatrixXd v_s = red.data_map(4);
    CHECK((v_s.transpose() * problem->noise_cov() * v_s - MatrixXd::Identity(4, 4))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
}

TEST_CASE("pareto front is non-dominated and sorted") {
    const bdr::Reduction red = bdr::reduce_rotation(random_pair(6, 5, 31));
    const auto front = bdr::pareto_front(red, bdr::linear_cost(1.0, 1.0));
    REQUIRE(front.size() >= 2);
    for (std::size_t i = 0; i + 1 < front.size(); ++i) {
        CHECK(front[i].cost <= front[i + 1].cost);
        CHECK(front[i].bound >= front[i + 1].bound);
    }
    CHECK(front.front().cost == 0.0);
    CHECK(front.back().bound == 0.0);
}

}  // TEST_SUITE
