#include "tf2/levelset.hpp"

#include "tf2/krylov.hpp"
#include "tf2/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tf2 {

double smoothed_heaviside(double phi_alpha) {
    if (phi_alpha <= -1.0) return 0.0;
    if (phi_alpha >= 1.0) return 1.0;
    return 0.5 * (1.0 + std::sin(0.5 * M_PI * phi_alpha));
}

double smoothed_dirac(double phi_alpha) {
    if (phi_alpha < -1.0 || phi_alpha > 1.0) return 0.0;
    return 0.25 * M_PI * std::cos(0.5 * M_PI * phi_alpha);
}

PointProps eval_props(double phi, double alpha, const FluidParams& p) {
    if (!(alpha > 0.0))
        throw std::runtime_error("eval_props: alpha must be positive");
    double pa = phi / alpha;
    double H = smoothed_heaviside(pa);
    double D = smoothed_dirac(pa) / alpha;
    PointProps out;
    // rho0 + drho*H keeps the mono-fluid case exact when rho0 == rho1
    out.rho = p.rho0 + (p.rho1 - p.rho0) * H;
    out.mu = p.mu0 + (p.mu1 - p.mu0) * H;
    out.drho_dphi = (p.rho1 - p.rho0) * D;
    out.dmu_dphi = (p.mu1 - p.mu0) * D;
    return out;
}

double rho_difference(double phi_k, double alpha_k, double phi_n, double alpha_n,
                      double dphi, double dalpha, const FluidParams& p) {
    const double pak = phi_k / alpha_k;
    const double pan = phi_n / alpha_n;
    if (pak >= 1.0 && pan >= 1.0) return 0.0;
    if (pak <= -1.0 && pan <= -1.0) return 0.0;
    // pak - pan without cancellation: (phi_k alpha_n - phi_n alpha_k)/(alpha_k alpha_n)
    double dpa = (dphi * alpha_n - phi_n * dalpha) / (alpha_k * alpha_n);
    double a = pak, b = pan;
    // clamped ends contribute nothing to H; shift the difference accordingly
    if (a > 1.0) { dpa -= a - 1.0; a = 1.0; }
    if (a < -1.0) { dpa -= a + 1.0; a = -1.0; }
    if (b > 1.0) { dpa += b - 1.0; b = 1.0; }
    if (b < -1.0) { dpa += b + 1.0; b = -1.0; }
    // H(a) - H(b) = cos(pi (a+b)/4) sin(pi (a-b)/4)
    const double hd = std::cos(0.25 * M_PI * (a + b)) * std::sin(0.25 * M_PI * dpa);
    return (p.rho1 - p.rho0) * hd;
}

double supg_tau(double ux, double uy, double gxx, double gyy, double dt) {
    return 1.0 / std::sqrt(4.0 / (dt * dt) + ux * gxx * ux + uy * gyy * uy);
}

void metric_tensor(double hx, double hy, double* gxx, double* gyy) {
    *gxx = (2.0 / hx) * (2.0 / hx);
    *gyy = (2.0 / hy) * (2.0 / hy);
}

AlphaProjector::AlphaProjector(const MixedSpaces& spaces, double eps_smooth, int quad_order)
    : sp_(&spaces), eps_(eps_smooth), quad_order_(quad_order) {
    if (eps_ < 0.0)
        throw std::runtime_error("AlphaProjector: eps_smooth must be >= 0");
    const MixedSpaces& sp = *sp_;
    const SplineSpace& S = sp.levelset;
    const int n = S.dof_count();

    // pattern: bilinear space couples (i,j) to the 3x3 index neighborhood
    std::vector<std::vector<int>> rows(n);
    for (int j = 0; j < S.nby; ++j)
        for (int i = 0; i < S.nbx; ++i) {
            auto& row = rows[S.index(i, j)];
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    int ii = i + di, jj = j + dj;
                    if (ii < 0 || ii >= S.nbx || jj < 0 || jj >= S.nby) continue;
                    row.push_back(S.index(ii, jj));
                }
            std::sort(row.begin(), row.end());
        }
    mat_ = build_sparse(n, n, rows);

    QuadratureRule q = gauss_rule(quad_order_);
    const double sx = 0.5 * sp.hx, sy = 0.5 * sp.hy;  // d(x)/d(xi)
    double bx[2], dbx[2], by[2], dby[2];
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex)
            for (int k = 0; k < q.npoints(); ++k) {
                double x = sp.elem_x0(ex) + sx * (q.px(k) + 1.0);
                double y = sp.elem_y0(ey) + sy * (q.py(k) + 1.0);
                double w = q.pw(k) * sx * sy;
                int fx = S.kvx.eval_basis(x, bx, dbx);
                int fy = S.kvy.eval_basis(y, by, dby);
                double N[4], Nx[4], Ny[4];
                int gid[4];
                for (int jj = 0; jj < 2; ++jj)
                    for (int ii = 0; ii < 2; ++ii) {
                        int a = ii + 2 * jj;
                        gid[a] = S.index(fx + ii, fy + jj);
                        N[a] = bx[ii] * by[jj];
                        Nx[a] = dbx[ii] * by[jj];
                        Ny[a] = bx[ii] * dby[jj];
                    }
                for (int a = 0; a < 4; ++a)
                    for (int c = 0; c < 4; ++c) {
                        double m = N[a] * N[c] +
                                   eps_ * (sx * Nx[a] * sx * Nx[c] +
                                           sy * Ny[a] * sy * Ny[c]);
                        mat_.vals[mat_.find_slot(gid[a], gid[c])] += w * m;
                    }
            }
}

std::vector<double> AlphaProjector::solve(const std::vector<double>& phi) const {
    const MixedSpaces& sp = *sp_;
    const SplineSpace& S = sp.levelset;
    const int n = S.dof_count();
    if ((int)phi.size() != n)
        throw std::runtime_error("AlphaProjector: phi size mismatch");

    std::vector<double> b(n, 0.0);
    QuadratureRule q = gauss_rule(quad_order_);
    const double sx = 0.5 * sp.hx, sy = 0.5 * sp.hy;
    double bx[2], dbx[2], by[2], dby[2];
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex)
            for (int k = 0; k < q.npoints(); ++k) {
                double x = sp.elem_x0(ex) + sx * (q.px(k) + 1.0);
                double y = sp.elem_y0(ey) + sy * (q.py(k) + 1.0);
                double w = q.pw(k) * sx * sy;
                int fx = S.kvx.eval_basis(x, bx, dbx);
                int fy = S.kvy.eval_basis(y, by, dby);
                double gphix = 0, gphiy = 0;
                for (int jj = 0; jj < 2; ++jj)
                    for (int ii = 0; ii < 2; ++ii) {
                        int g = S.index(fx + ii, fy + jj);
                        gphix += phi[g] * dbx[ii] * by[jj];
                        gphiy += phi[g] * bx[ii] * dby[jj];
                    }
                // parametric gradient magnitude of phi
                double gnorm = std::hypot(sx * gphix, sy * gphiy);
                for (int jj = 0; jj < 2; ++jj)
                    for (int ii = 0; ii < 2; ++ii)
                        b[S.index(fx + ii, fy + jj)] += w * (bx[ii] * by[jj]) * gnorm;
            }

    double bnorm = 0.0;
    for (double v : b) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    KrylovResult r = cg_solve(mat_, b, 1e-13, 40 * n + 200);
    if (!r.converged && r.residual > 1e-6 * bnorm)
        throw std::runtime_error("alpha projection: CG did not converge");
    return r.x;
}

std::vector<double> solve_alpha_projection(const MixedSpaces& sp,
                                           const std::vector<double>& phi,
                                           double eps_smooth,
                                           int quad_order) {
    return AlphaProjector(sp, eps_smooth, quad_order).solve(phi);
}

} // namespace tf2
