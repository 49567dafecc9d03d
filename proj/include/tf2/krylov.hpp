#pragma once

#include "tf2/sparse.hpp"

#include <vector>

namespace tf2 {

enum class Precond { Jacobi, BlockILU0 };

struct KrylovConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-14;
    int restart = 60;
    int max_iters = 2000;
    Precond preconditioner = Precond::BlockILU0;
};

struct KrylovResult {
    std::vector<double> x;
    int iters = 0;
    double residual = 0.0;   // true residual norm of the returned iterate
    bool converged = false;
};

// ILU(0): incomplete LU on the sparsity pattern of A. Rows must contain their
// diagonal slot; zero pivots encountered during elimination are replaced by a
// small value relative to the row scale so the sweep can continue.
struct Ilu0 {
    SparseMatrix lu;          // combined L (strict lower, unit diag) and U
    std::vector<int> diag;    // slot of the diagonal in each row
    void factor(const SparseMatrix& A);
    void apply(const std::vector<double>& r, std::vector<double>& z) const;
};

struct JacobiPrecond {
    std::vector<double> inv_diag;
    void factor(const SparseMatrix& A);
    void apply(const std::vector<double>& r, std::vector<double>& z) const;
};

// Right-preconditioned restarted flexible GMRES. The convergence test is on
// the true residual ||b - A x||.
KrylovResult fgmres(const SparseMatrix& A, const std::vector<double>& b,
                    const KrylovConfig& cfg);

// Conjugate gradients with diagonal preconditioning, for the small SPD
// systems (alpha projection, divergence cleanup). Stops at
// max(rel_tol * |b|, abs_tol); an absolute goal matters on singular systems
// where a purely relative target can sit below the attainable floor.
KrylovResult cg_solve(const SparseMatrix& A, const std::vector<double>& b,
                      double rel_tol, int max_iters, double abs_tol = 0.0);

// Gaussian elimination with partial pivoting for the m x m (m <= 3)
// constraint systems; returns false on a zero pivot.
bool dense_solve_small(int m, double* J, double* rhs);

// 1-norm condition estimate via the exact inverse (m <= 3); infinite result
// is reported as a large number (> 1e300) rather than inf.
double dense_cond_small(int m, const double* J);

// subtract the weighted mean so that sum_b w_b p_b = 0 (w_b = integrals of the
// pressure basis; sum w_b = domain area)
void project_pressure_nullspace(std::vector<double>& p,
                                const std::vector<double>& weights);

} // namespace tf2
