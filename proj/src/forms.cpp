#include "tf2/forms.hpp"

#include <cmath>

namespace tf2 {

void point_residual(FormKind kind, const PointContext& q, double dt, const FluidParams& par,
                    int n_slots, double* rloc) {
    const double w = q.w;
    const double idt = 1.0 / dt;
    const double Sxx = q.guxm[0], Syy = q.guym[1];
    const double Sxy = 0.5 * (q.guxm[1] + q.guym[0]);
    const double conv_x = q.uxm * q.guxm[0] + q.uym * q.guxm[1];
    const double conv_y = q.uxm * q.guym[0] + q.uym * q.guym[1];
    const double rhon = q.pr_n.rho, rhok = q.pr_k.rho;

    for (int a = 0; a < 6; ++a) {
        const double N = q.vxN[a], Nx = q.vxNx[a], Ny = q.vxNy[a];
        double r;
        if (kind == FormKind::Convective)
            r = N * q.rhom * (q.ux_k - q.ux_n) * idt + N * q.rhom * conv_x;
        else
            r = N * (rhok * q.ux_k - rhon * q.ux_n) * idt
              - (Nx * (q.rhom * q.uxm * q.uxm) + Ny * (q.rhom * q.uxm * q.uym));
        r += -Nx * q.press + 2.0 * q.mum * (Nx * Sxx + Ny * Sxy) - N * q.rhom * par.gx;
        rloc[a] += w * r;
    }
    for (int a = 0; a < 6; ++a) {
        const double N = q.vyN[a], Nx = q.vyNx[a], Ny = q.vyNy[a];
        double r;
        if (kind == FormKind::Convective)
            r = N * q.rhom * (q.uy_k - q.uy_n) * idt + N * q.rhom * conv_y;
        else
            r = N * (rhok * q.uy_k - rhon * q.uy_n) * idt
              - (Nx * (q.rhom * q.uym * q.uxm) + Ny * (q.rhom * q.uym * q.uym));
        r += -Ny * q.press + 2.0 * q.mum * (Nx * Sxy + Ny * Syy) - N * q.rhom * par.gy;
        rloc[6 + a] += w * r;
    }

    const double divm = q.guxm[0] + q.guym[1];
    for (int b = 0; b < 4; ++b) rloc[12 + b] += w * q.pN[b] * divm;

    const double strong = (q.phi_k - q.phi_n) * idt + q.uxm * q.gphim[0] + q.uym * q.gphim[1];
    for (int c = 0; c < 4; ++c) {
        const double sw = q.pN[c] + q.tau * (q.uxm * q.pNx[c] + q.uym * q.pNy[c]);
        rloc[16 + c] += w * sw * strong;
        // the perturbation equations advect with the frozen stabilization velocity,
        // which keeps their rows fully decoupled from the velocity unknowns
        const double swf = q.pN[c] + q.tau * (q.tux * q.pNx[c] + q.tuy * q.pNy[c]);
        for (int s = 0; s < n_slots; ++s) {
            const double lin =
                q.pert[s] * idt + 0.5 * (q.tux * q.gpert[s][0] + q.tuy * q.gpert[s][1]);
            rloc[20 + 4 * s + c] += w * swf * lin;
        }
    }
}

void point_jacobian(FormKind kind, const PointContext& q, double dt, const FluidParams& par,
                    int n_slots, int nloc, double* jloc) {
    const double w = q.w;
    const double idt = 1.0 / dt;
    const double Sxx = q.guxm[0], Syy = q.guym[1];
    const double Sxy = 0.5 * (q.guxm[1] + q.guym[0]);
    const double conv_x = q.uxm * q.guxm[0] + q.uym * q.guxm[1];
    const double conv_y = q.uxm * q.guym[0] + q.uym * q.guym[1];
    const double rhok = q.pr_k.rho;
    const double drho = q.pr_k.drho_dphi, dmu = q.pr_k.dmu_dphi;
    const bool conv = kind == FormKind::Convective;
    auto J = [&](int r, int c) -> double& { return jloc[(size_t)r * nloc + c]; };

    // momentum rows
    for (int a = 0; a < 6; ++a) {
        const double Na = q.vxN[a], Nax = q.vxNx[a], Nay = q.vxNy[a];
        const double Ma = q.vyN[a], Max = q.vyNx[a], May = q.vyNy[a];
        for (int b = 0; b < 6; ++b) {
            const double Nb = q.vxN[b], Nbx = q.vxNx[b], Nby = q.vxNy[b];
            const double Mb = q.vyN[b], Mbx = q.vyNx[b], Mby = q.vyNy[b];
            double xx, xy, yx, yy;
            if (conv) {
                xx = Na * q.rhom * Nb * idt
                   + Na * q.rhom * (0.5 * Nb * q.guxm[0] + q.uxm * 0.5 * Nbx + q.uym * 0.5 * Nby);
                xy = Na * q.rhom * 0.5 * Mb * q.guxm[1];
                yx = Ma * q.rhom * 0.5 * Nb * q.guym[0];
                yy = Ma * q.rhom * Mb * idt
                   + Ma * q.rhom * (0.5 * Mb * q.guym[1] + q.uxm * 0.5 * Mbx + q.uym * 0.5 * Mby);
            } else {
                xx = Na * rhok * Nb * idt
                   - (Nax * q.rhom * q.uxm * Nb + Nay * q.rhom * 0.5 * Nb * q.uym);
                xy = -Nay * q.rhom * q.uxm * 0.5 * Mb;
                yx = -Max * q.rhom * q.uym * 0.5 * Nb;
                yy = Ma * rhok * Mb * idt
                   - (Max * q.rhom * 0.5 * Mb * q.uxm + May * q.rhom * q.uym * Mb);
            }
            xx += q.mum * (Nax * Nbx + 0.5 * Nay * Nby);
            xy += 0.5 * q.mum * Nay * Mbx;
            yx += 0.5 * q.mum * Max * Nby;
            yy += q.mum * (0.5 * Max * Mbx + May * Mby);
            J(a, b) += w * xx;
            J(a, 6 + b) += w * xy;
            J(6 + a, b) += w * yx;
            J(6 + a, 6 + b) += w * yy;
        }
        for (int b = 0; b < 4; ++b) {
            // pressure gradient and its transpose are kept in an exact -2:1 ratio,
            // so both entries are formed from the same product
            const double tx = w * q.vxNx[a] * q.pN[b];
            const double ty = w * q.vyNy[a] * q.pN[b];
            J(a, 12 + b) -= tx;
            J(6 + a, 12 + b) -= ty;
            J(12 + b, a) += 0.5 * tx;
            J(12 + b, 6 + a) += 0.5 * ty;
        }
        for (int d = 0; d < 4; ++d) {
            const double Nd = q.pN[d];
            const double drm = 0.5 * drho * Nd; // variation of the midpoint density
            const double dmm = 0.5 * dmu * Nd;
            double vx, vy;
            if (conv) {
                vx = Na * drm * (q.ux_k - q.ux_n) * idt + Na * drm * conv_x;
                vy = Ma * drm * (q.uy_k - q.uy_n) * idt + Ma * drm * conv_y;
            } else {
                vx = Na * drho * Nd * q.ux_k * idt
                   - (Nax * drm * q.uxm * q.uxm + Nay * drm * q.uxm * q.uym);
                vy = Ma * drho * Nd * q.uy_k * idt
                   - (Max * drm * q.uym * q.uxm + May * drm * q.uym * q.uym);
            }
            vx += 2.0 * dmm * (Nax * Sxx + Nay * Sxy) - Na * drm * par.gx;
            vy += 2.0 * dmm * (Max * Sxy + May * Syy) - Ma * drm * par.gy;
            J(a, 16 + d) += w * vx;
            J(6 + a, 16 + d) += w * vy;
        }
    }

    // level set rows
    const double strong = (q.phi_k - q.phi_n) * idt + q.uxm * q.gphim[0] + q.uym * q.gphim[1];
    for (int c = 0; c < 4; ++c) {
        const double sw = q.pN[c] + q.tau * (q.uxm * q.pNx[c] + q.uym * q.pNy[c]);
        for (int b = 0; b < 6; ++b) {
            const double Nb = q.vxN[b], Mb = q.vyN[b];
            J(16 + c, b) +=
                w * (q.tau * 0.5 * Nb * q.pNx[c] * strong + sw * 0.5 * Nb * q.gphim[0]);
            J(16 + c, 6 + b) +=
                w * (q.tau * 0.5 * Mb * q.pNy[c] * strong + sw * 0.5 * Mb * q.gphim[1]);
        }
        const double swf = q.pN[c] + q.tau * (q.tux * q.pNx[c] + q.tuy * q.pNy[c]);
        for (int d = 0; d < 4; ++d) {
            const double C = w * sw * (q.pN[d] * idt + 0.5 * (q.uxm * q.pNx[d] + q.uym * q.pNy[d]));
            J(16 + c, 16 + d) += C;
            const double Cf =
                w * swf * (q.pN[d] * idt + 0.5 * (q.tux * q.pNx[d] + q.tuy * q.pNy[d]));
            for (int s = 0; s < n_slots; ++s) J(20 + 4 * s + c, 20 + 4 * s + d) += Cf;
        }
    }
}

namespace {

template <class F>
void for_each_point(const MixedSpaces& sp, const SystemLayout& L, const QuadCache& qc,
                    const State& old_state, const State& iter, const FrozenAux& aux,
                    double dt, const FluidParams& par, F&& f) {
    const int nq2 = qc.rule.npoints();
    ElementContext ctx;
    PointContext q;
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex) {
            const int e = ex + sp.nx * ey;
            load_element(ctx, sp, L, ex, ey, old_state, iter, aux);
            for (int k = 0; k < nq2; ++k) {
                if (!eval_point(q, ctx, qc, sp, k, dt, par))
                    throw AssemblyError("functional: non-finite value", e, k, q.x, q.y);
                f(e, q);
            }
        }
}

} // namespace

std::array<double, 3> assemble_h(const MixedSpaces& sp, const SystemLayout& layout,
                                 const QuadCache& qc, const State& old_state, const State& iter,
                                 const FrozenAux& aux, double dt, const FluidParams& par) {
    const int nel = sp.nx * sp.ny;
    std::vector<double> p1(nel, 0.0), p2(nel, 0.0), p3(nel, 0.0);
    const double idt = 1.0 / dt;
    for_each_point(sp, layout, qc, old_state, iter, aux, dt, par, [&](int e, const PointContext& q) {
        const double drho_t = q.rho_diff * idt;
        const double udot = q.ux_n * q.ux_k + q.uy_n * q.uy_k;
        const double conv_x = q.uxm * q.guxm[0] + q.uym * q.guxm[1];
        const double conv_y = q.uxm * q.guym[0] + q.uym * q.guym[1];
        const double xg = q.x * par.gx + q.y * par.gy;
        p1[e] += q.w * q.rho_diff;
        p2[e] += q.w * (drho_t * 0.5 * udot - q.rhom * (q.uxm * conv_x + q.uym * conv_y));
        p3[e] += q.w * (drho_t * xg - q.rhom * (q.uxm * par.gx + q.uym * par.gy));
    });
    return {neumaier_sum(p1), neumaier_sum(p2), neumaier_sum(p3)};
}

std::array<std::vector<double>, 3> assemble_dh(const MixedSpaces& sp, const SystemLayout& layout,
                                               const QuadCache& qc, const State& old_state,
                                               const State& iter, const FrozenAux& aux,
                                               double dt, const FluidParams& par) {
    std::array<std::vector<double>, 3> dh;
    const auto act = active_constraints(layout.kind);
    for (int c = 0; c < 3; ++c)
        if (act[c]) dh[c].assign(sp.dim_p(), 0.0);
    const double idt = 1.0 / dt;
    const int nps = sp.press.nbx;
    for_each_point(sp, layout, qc, old_state, iter, aux, dt, par, [&](int e, const PointContext& q) {
        const int ex = e % sp.nx, ey = e / sp.nx;
        const double drho = q.pr_k.drho_dphi;
        const double udot = q.ux_n * q.ux_k + q.uy_n * q.uy_k;
        const double conv_x = q.uxm * q.guxm[0] + q.uym * q.guxm[1];
        const double conv_y = q.uxm * q.guym[0] + q.uym * q.guym[1];
        const double xg = q.x * par.gx + q.y * par.gy;
        const double umg = q.uxm * par.gx + q.uym * par.gy;
        const double f1 = drho;
        const double f2 = drho * (idt * udot - (q.uxm * conv_x + q.uym * conv_y));
        const double f3 = drho * (idt * xg - 0.5 * umg);
        for (int ay = 0; ay < 2; ++ay)
            for (int ax = 0; ax < 2; ++ax) {
                const int a = ax + 2 * ay;
                const int g = (ex + ax) + (ey + ay) * nps;
                if (act[0]) dh[0][g] += q.w * f1 * q.pN[a];
                if (act[1]) dh[1][g] += q.w * f2 * q.pN[a];
                if (act[2]) dh[2][g] += q.w * f3 * q.pN[a];
            }
    });
    return dh;
}

LambdaSystem assemble_lambda_system(const MixedSpaces& sp, const SystemLayout& layout,
                                    const QuadCache& qc, const State& old_state,
                                    const State& iter, const FrozenAux& aux,
                                    const std::array<double, 3>& lambda, double dt,
                                    const FluidParams& par) {
    State tmp = iter;
    tmp.lambda = lambda;
    const int nel = sp.nx * sp.ny;
    std::vector<std::vector<double>> ph(3, std::vector<double>(nel, 0.0));
    std::vector<std::vector<double>> pj(9, std::vector<double>(nel, 0.0));
    const double idt = 1.0 / dt;
    for_each_point(sp, layout, qc, old_state, tmp, aux, dt, par, [&](int e, const PointContext& q) {
        const double drho_t = q.rho_diff * idt;
        const double drho = q.pr_k.drho_dphi;
        const double udot = q.ux_n * q.ux_k + q.uy_n * q.uy_k;
        const double conv_x = q.uxm * q.guxm[0] + q.uym * q.guxm[1];
        const double conv_y = q.uxm * q.guym[0] + q.uym * q.guym[1];
        const double xg = q.x * par.gx + q.y * par.gy;
        const double umg = q.uxm * par.gx + q.uym * par.gy;
        ph[0][e] += q.w * q.rho_diff;
        ph[1][e] += q.w * (drho_t * 0.5 * udot - q.rhom * (q.uxm * conv_x + q.uym * conv_y));
        ph[2][e] += q.w * (drho_t * xg - q.rhom * umg);
        // exact derivatives of h with respect to each multiplier
        const double g1 = drho;
        const double g2 = drho * 0.5 * (idt * udot - (q.uxm * conv_x + q.uym * conv_y));
        const double g3 = drho * (idt * xg - 0.5 * umg);
        for (int s = 0; s < layout.n_slots; ++s) {
            const int i = layout.slot_constraint[s];
            pj[0 * 3 + i][e] += q.w * g1 * q.pert[s];
            pj[1 * 3 + i][e] += q.w * g2 * q.pert[s];
            pj[2 * 3 + i][e] += q.w * g3 * q.pert[s];
        }
    });
    LambdaSystem out;
    for (int j = 0; j < 3; ++j) out.h[j] = neumaier_sum(ph[j]);
    for (int j = 0; j < 9; ++j) out.jac[j] = neumaier_sum(pj[j]);
    return out;
}

} // namespace tf2
