#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tf2/krylov.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

using namespace tf2;

static SparseMatrix banded_random(int n, int bw, unsigned seed, double diag) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<std::vector<int>> rows(n);
    for (int r = 0; r < n; ++r)
        for (int c = std::max(0, r - bw); c <= std::min(n - 1, r + bw); ++c)
            rows[r].push_back(c);
    SparseMatrix A = build_sparse(n, n, rows);
    for (int r = 0; r < n; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s)
            A.vals[s] = U(rng) + (A.cols[s] == r ? diag : 0.0);
    return A;
}

static Eigen::MatrixXd to_dense(const SparseMatrix& A) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(A.n_rows, A.n_cols);
    for (int r = 0; r < A.n_rows; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s)
            D(r, A.cols[s]) = A.vals[s];
    return D;
}

TEST_CASE("fgmres solves a nonsymmetric system to the requested residual") {
    for (auto pc : {Precond::Jacobi, Precond::BlockILU0}) {
        auto A = banded_random(120, 4, 101, 6.0);
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        std::vector<double> b(120);
        for (double& v : b) v = U(rng);
        KrylovConfig cfg;
        cfg.rel_tol = 1e-11;
        cfg.abs_tol = 0.0;
        cfg.restart = 25; // force at least one restart
        cfg.preconditioner = pc;
        auto r = fgmres(A, b, cfg);
        REQUIRE(r.converged);
        CHECK(r.iters > 0);
        Eigen::MatrixXd D = to_dense(A);
        Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(r.x.data(), 120);
        Eigen::VectorXd bb = Eigen::Map<Eigen::VectorXd>(b.data(), 120);
        double res = (bb - D * x).norm();
        CHECK(res <= 1.1e-11 * bb.norm());
        // matches the dense solution
        Eigen::VectorXd xd = D.fullPivLu().solve(bb);
        CHECK((x - xd).norm() / xd.norm() < 1e-9);
    }
}

TEST_CASE("fgmres reports the iterate when it stops at the iteration cap") {
    auto A = banded_random(100, 3, 7, 0.02); // nearly singular rows, hard target
    std::vector<double> b(100, 1.0);
    KrylovConfig cfg;
    cfg.rel_tol = 1e-16;
    cfg.abs_tol = 0.0;
    cfg.max_iters = 4;
    cfg.restart = 2;
    auto r = fgmres(A, b, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.iters == 4);
    CHECK(std::isfinite(r.residual));
}

TEST_CASE("ilu0 on a triangular matrix is exact") {
    // lower triangular pattern: ILU(0) reproduces the matrix, apply = solve
    int n = 30;
    std::vector<std::vector<int>> rows(n);
    for (int r = 0; r < n; ++r)
        for (int c = std::max(0, r - 2); c <= r; ++c) rows[r].push_back(c);
    SparseMatrix A = build_sparse(n, n, rows);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(0.5, 2.0);
    for (int r = 0; r < n; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s)
            A.vals[s] = (A.cols[s] == r) ? U(rng) : 0.3 * U(rng);
    Ilu0 ilu;
    ilu.factor(A);
    std::vector<double> b(n), z;
    for (double& v : b) v = U(rng);
    ilu.apply(b, z);
    Eigen::MatrixXd D = to_dense(A);
    Eigen::VectorXd x = D.fullPivLu().solve(Eigen::Map<Eigen::VectorXd>(b.data(), n));
    for (int i = 0; i < n; ++i) CHECK(z[i] == doctest::Approx(x[i]).epsilon(1e-11));
}

TEST_CASE("cg solves an spd system and honors the absolute target") {
    int n = 80;
    std::vector<std::vector<int>> rows(n);
    for (int r = 0; r < n; ++r)
        for (int c = std::max(0, r - 1); c <= std::min(n - 1, r + 1); ++c)
            rows[r].push_back(c);
    SparseMatrix A = build_sparse(n, n, rows);
    for (int r = 0; r < n; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s)
            A.vals[s] = (A.cols[s] == r) ? 2.5 : -1.0; // spd tridiagonal
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> b(n);
    for (double& v : b) v = U(rng);
    auto r1 = cg_solve(A, b, 1e-12, 2000);
    REQUIRE(r1.converged);
    Eigen::MatrixXd D = to_dense(A);
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(r1.x.data(), n);
    Eigen::VectorXd bb = Eigen::Map<Eigen::VectorXd>(b.data(), n);
    CHECK((bb - D * x).norm() <= 2e-12 * bb.norm());
    // absolute target alone stops the iteration early for a tiny rhs
    for (double& v : b) v *= 1e-9;
    auto r2 = cg_solve(A, b, 1e-30, 2000, 1e-12);
    CHECK(r2.converged);
    CHECK(r2.residual <= 1e-12);
}

TEST_CASE("small dense solves and condition estimates") {
    double J[9] = {4, 1, 0, 1, 3, 1, 0, 1, 2};
    double rhs[3] = {1, 2, 3};
    double Jc[9];
    std::copy(J, J + 9, Jc);
    REQUIRE(dense_solve_small(3, Jc, rhs));
    Eigen::Matrix3d M;
    M << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    Eigen::Vector3d b(1, 2, 3), x = M.fullPivLu().solve(b);
    for (int i = 0; i < 3; ++i) CHECK(rhs[i] == doctest::Approx(x[i]).epsilon(1e-13));

    // 1-norm condition of the same matrix vs an explicit inverse
    double cond = dense_cond_small(3, J);
    Eigen::Matrix3d Mi = M.inverse();
    double n1 = 0, ni = 0;
    for (int c = 0; c < 3; ++c) {
        double s1 = 0, s2 = 0;
        for (int r = 0; r < 3; ++r) {
            s1 += std::abs(M(r, c));
            s2 += std::abs(Mi(r, c));
        }
        n1 = std::max(n1, s1);
        ni = std::max(ni, s2);
    }
    CHECK(cond == doctest::Approx(n1 * ni).epsilon(1e-12));

    double S[4] = {1, 2, 2, 4}; // singular 2x2
    double r2[2] = {1, 1};
    CHECK_FALSE(dense_solve_small(2, S, r2));
    double S2[4] = {1, 2, 2, 4};
    CHECK(dense_cond_small(2, S2) > 1e300);
}

TEST_CASE("pressure nullspace projection removes the weighted mean") {
    std::vector<double> p = {3.0, -1.0, 2.0, 5.0};
    std::vector<double> w = {1.0, 2.0, 1.0, 4.0};
    project_pressure_nullspace(p, w);
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i) s += w[i] * p[i];
    CHECK(std::abs(s) < 1e-13);
    // differences are preserved
    CHECK(p[3] - p[0] == doctest::Approx(2.0));
}
