#include "tf2/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tf2 {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

} // namespace

void Ilu0::factor(const SparseMatrix& A) {
    lu = A;
    int n = A.n_rows;
    diag.assign(n, -1);
    for (int r = 0; r < n; ++r) {
        diag[r] = lu.find_slot(r, r);
        if (diag[r] < 0)
            throw std::runtime_error("Ilu0: missing diagonal slot in row " + std::to_string(r));
    }
    // IKJ sweep restricted to the pattern
    for (int i = 0; i < n; ++i) {
        double scale = 0.0;
        for (int s = lu.row_ptr[i]; s < lu.row_ptr[i + 1]; ++s)
            scale = std::max(scale, std::abs(lu.vals[s]));
        if (scale == 0.0) scale = 1.0;
        for (int s = lu.row_ptr[i]; s < lu.row_ptr[i + 1]; ++s) {
            int k = lu.cols[s];
            if (k >= i) break;
            double piv = lu.vals[diag[k]];
            if (std::abs(piv) < 1e-14 * scale)
                piv = (piv < 0 ? -1.0 : 1.0) * 1e-14 * scale;
            double lik = lu.vals[s] / piv;
            lu.vals[s] = lik;
            // subtract lik * row k from row i, pattern positions only
            int sk = diag[k] + 1;
            int si = s + 1;
            int endk = lu.row_ptr[k + 1];
            int endi = lu.row_ptr[i + 1];
            while (sk < endk && si < endi) {
                int ck = lu.cols[sk];
                int ci = lu.cols[si];
                if (ck == ci) {
                    lu.vals[si] -= lik * lu.vals[sk];
                    ++sk; ++si;
                } else if (ck < ci) {
                    ++sk;
                } else {
                    ++si;
                }
            }
        }
        double& d = lu.vals[diag[i]];
        if (std::abs(d) < 1e-14 * scale)
            d = (d < 0 ? -1.0 : 1.0) * 1e-14 * scale;
    }
}

void Ilu0::apply(const std::vector<double>& r, std::vector<double>& z) const {
    int n = lu.n_rows;
    z = r;
    // forward solve with unit lower part
    for (int i = 0; i < n; ++i) {
        double s = z[i];
        for (int k = lu.row_ptr[i]; k < lu.row_ptr[i + 1] && lu.cols[k] < i; ++k)
            s -= lu.vals[k] * z[lu.cols[k]];
        z[i] = s;
    }
    // backward solve with U
    for (int i = n - 1; i >= 0; --i) {
        double s = z[i];
        for (int k = diag[i] + 1; k < lu.row_ptr[i + 1]; ++k)
            s -= lu.vals[k] * z[lu.cols[k]];
        z[i] = s / lu.vals[diag[i]];
    }
}

void JacobiPrecond::factor(const SparseMatrix& A) {
    inv_diag.assign(A.n_rows, 1.0);
    for (int r = 0; r < A.n_rows; ++r) {
        double d = std::abs(A.get(r, r));
        inv_diag[r] = d > 0.0 ? 1.0 / d : 1.0;
    }
}

void JacobiPrecond::apply(const std::vector<double>& r, std::vector<double>& z) const {
    z.resize(r.size());
    for (size_t i = 0; i < r.size(); ++i) z[i] = r[i] * inv_diag[i];
}

KrylovResult fgmres(const SparseMatrix& A, const std::vector<double>& b,
                    const KrylovConfig& cfg) {
    const int n = A.n_rows;
    if ((int)b.size() != n) throw std::runtime_error("fgmres: dimension mismatch");
    const int m = cfg.restart;

    Ilu0 ilu;
    JacobiPrecond jac;
    if (cfg.preconditioner == Precond::BlockILU0) ilu.factor(A);
    else jac.factor(A);
    auto precond = [&](const std::vector<double>& r, std::vector<double>& z) {
        if (cfg.preconditioner == Precond::BlockILU0) ilu.apply(r, z);
        else jac.apply(r, z);
    };

    KrylovResult out;
    out.x.assign(n, 0.0);
    double bnorm = norm2(b);
    double tol = std::max(cfg.rel_tol * bnorm, cfg.abs_tol);
    if (bnorm == 0.0) { out.converged = true; return out; }

    std::vector<std::vector<double>> V(m + 1), Z(m);
    std::vector<double> H((m + 1) * m, 0.0);
    std::vector<double> cs(m), sn(m), g(m + 1);
    std::vector<double> r(n), w(n);

    int total_iters = 0;
    while (total_iters < cfg.max_iters) {
        // r = b - A x
        spmv(A, out.x, r);
        for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
        double beta = norm2(r);
        out.residual = beta;
        if (beta <= tol) {
            out.converged = true;
            out.iters = total_iters;
            return out;
        }

        V[0] = r;
        for (int i = 0; i < n; ++i) V[0][i] /= beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        int j = 0;
        for (; j < m && total_iters < cfg.max_iters; ++j, ++total_iters) {
            precond(V[j], Z[j]);
            spmv(A, Z[j], w);
            // modified Gram-Schmidt
            for (int i = 0; i <= j; ++i) {
                double hij = dot(w, V[i]);
                H[i * m + j] = hij;
                for (int k = 0; k < n; ++k) w[k] -= hij * V[i][k];
            }
            double hnext = norm2(w);
            H[(j + 1) * m + j] = hnext;
            if (hnext > 0.0) {
                V[j + 1].resize(n);
                for (int k = 0; k < n; ++k) V[j + 1][k] = w[k] / hnext;
            } else {
                V[j + 1].assign(n, 0.0);
            }
            // apply accumulated Givens rotations to the new column
            for (int i = 0; i < j; ++i) {
                double t = cs[i] * H[i * m + j] + sn[i] * H[(i + 1) * m + j];
                H[(i + 1) * m + j] = -sn[i] * H[i * m + j] + cs[i] * H[(i + 1) * m + j];
                H[i * m + j] = t;
            }
            double denom = std::hypot(H[j * m + j], H[(j + 1) * m + j]);
            if (denom == 0.0) { cs[j] = 1.0; sn[j] = 0.0; }
            else { cs[j] = H[j * m + j] / denom; sn[j] = H[(j + 1) * m + j] / denom; }
            H[j * m + j] = cs[j] * H[j * m + j] + sn[j] * H[(j + 1) * m + j];
            H[(j + 1) * m + j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            if (std::abs(g[j + 1]) <= tol) { ++j; ++total_iters; break; }
        }

        // back substitution for y, then x += Z y
        int k = j;
        std::vector<double> y(k, 0.0);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int l = i + 1; l < k; ++l) s -= H[i * m + l] * y[l];
            y[i] = s / H[i * m + i];
        }
        for (int i = 0; i < k; ++i)
            for (int l = 0; l < n; ++l) out.x[l] += y[i] * Z[i][l];
    }

    spmv(A, out.x, r);
    for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
    out.residual = norm2(r);
    out.iters = total_iters;
    out.converged = out.residual <= tol;
    return out;
}

KrylovResult cg_solve(const SparseMatrix& A, const std::vector<double>& b,
                      double rel_tol, int max_iters, double abs_tol) {
    const int n = A.n_rows;
    JacobiPrecond jac;
    jac.factor(A);

    KrylovResult out;
    out.x.assign(n, 0.0);
    std::vector<double> r = b, z(n), p(n), Ap(n);
    double bnorm = norm2(b);
    if (bnorm == 0.0) { out.converged = true; return out; }
    double tol = std::max(rel_tol * bnorm, abs_tol);

    jac.apply(r, z);
    p = z;
    double rz = dot(r, z);
    for (int it = 0; it < max_iters; ++it) {
        spmv(A, p, Ap);
        double pAp = dot(p, Ap);
        if (pAp == 0.0) break;
        double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) out.x[i] += alpha * p[i];
        for (int i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        out.iters = it + 1;
        double rn = norm2(r);
        out.residual = rn;
        if (rn <= tol) { out.converged = true; return out; }
        jac.apply(r, z);
        double rz_new = dot(r, z);
        double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return out;
}

bool dense_solve_small(int m, double* J, double* rhs) {
    int perm[3] = {0, 1, 2};
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(J[perm[r] * m + col]) > std::abs(J[perm[piv] * m + col])) piv = r;
        std::swap(perm[col], perm[piv]);
        double d = J[perm[col] * m + col];
        if (d == 0.0) return false;
        for (int r = col + 1; r < m; ++r) {
            double f = J[perm[r] * m + col] / d;
            J[perm[r] * m + col] = f;
            for (int c = col + 1; c < m; ++c)
                J[perm[r] * m + c] -= f * J[perm[col] * m + c];
            rhs[perm[r]] -= f * rhs[perm[col]];
        }
    }
    double x[3];
    for (int r = m - 1; r >= 0; --r) {
        double s = rhs[perm[r]];
        for (int c = r + 1; c < m; ++c) s -= J[perm[r] * m + c] * x[c];
        x[r] = s / J[perm[r] * m + r];
    }
    for (int r = 0; r < m; ++r) rhs[r] = x[r];
    return true;
}

double dense_cond_small(int m, const double* J) {
    // ||J||_1 * ||J^{-1}||_1 with the inverse built column by column
    double normA = 0.0;
    for (int c = 0; c < m; ++c) {
        double s = 0.0;
        for (int r = 0; r < m; ++r) s += std::abs(J[r * m + c]);
        normA = std::max(normA, s);
    }
    double normInv = 0.0;
    for (int c = 0; c < m; ++c) {
        double Jc[9];
        double e[3] = {0, 0, 0};
        for (int k = 0; k < m * m; ++k) Jc[k] = J[k];
        e[c] = 1.0;
        if (!dense_solve_small(m, Jc, e)) return 1e301;
        double s = 0.0;
        for (int r = 0; r < m; ++r) s += std::abs(e[r]);
        normInv = std::max(normInv, s);
    }
    double cond = normA * normInv;
    if (!std::isfinite(cond)) return 1e301;
    return cond;
}

void project_pressure_nullspace(std::vector<double>& p,
                                const std::vector<double>& weights) {
    if (p.size() != weights.size())
        throw std::runtime_error("project_pressure_nullspace: size mismatch");
    double wp = 0.0, wsum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        wp += weights[i] * p[i];
        wsum += weights[i];
    }
    double c = wp / wsum;
    for (double& v : p) v -= c;
}

} // namespace tf2
