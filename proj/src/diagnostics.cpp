#include "tf2/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace tf2 {

namespace {

// run one state pair through the shared element/point evaluation
template <class F>
void scan_points(const MixedSpaces& sp, const QuadCache& qc, const State& old_state,
                 const State& new_state, double dt, const FluidParams& par, F&& f) {
    const SystemLayout L = make_layout(sp, FormKind::Conservative); // no perturbations
    FrozenAux aux;
    aux.alpha_new = new_state.alpha;
    aux.tau_u.resize(sp.dim_u());
    for (int i = 0; i < sp.dim_u(); ++i)
        aux.tau_u[i] = 0.5 * (old_state.u[i] + new_state.u[i]);
    const int nq2 = qc.rule.npoints();
    ElementContext ctx;
    PointContext q;
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex) {
            const int e = ex + sp.nx * ey;
            load_element(ctx, sp, L, ex, ey, old_state, new_state, aux);
            for (int k = 0; k < nq2; ++k) {
                if (!eval_point(q, ctx, qc, sp, k, dt, par))
                    throw AssemblyError("diagnostics: non-finite value", e, k, q.x, q.y);
                f(e, q);
            }
        }
}

} // namespace

EnergyReport compute_energies(const MixedSpaces& sp, const QuadCache& qc, const State& state,
                              const FluidParams& par) {
    const int nel = sp.nx * sp.ny;
    std::vector<double> pk(nel, 0.0), pp(nel, 0.0), pm(nel, 0.0);
    scan_points(sp, qc, state, state, 1.0, par, [&](int e, const PointContext& q) {
        const double rho = q.pr_k.rho;
        pk[e] += q.w * 0.5 * rho * (q.ux_k * q.ux_k + q.uy_k * q.uy_k);
        pp[e] += q.w * (-rho) * (q.x * par.gx + q.y * par.gy);
        pm[e] += q.w * rho;
    });
    EnergyReport out;
    out.kin = neumaier_sum(pk);
    out.pot = neumaier_sum(pp);
    out.mass = neumaier_sum(pm);
    return out;
}

double compute_dissipation(const MixedSpaces& sp, const QuadCache& qc, const State& old_state,
                           const State& new_state, const FluidParams& par) {
    const int nel = sp.nx * sp.ny;
    std::vector<double> pd(nel, 0.0);
    scan_points(sp, qc, old_state, new_state, 1.0, par, [&](int e, const PointContext& q) {
        const double Sxx = q.guxm[0], Syy = q.guym[1];
        const double Sxy = 0.5 * (q.guxm[1] + q.guym[0]);
        pd[e] += q.w * 2.0 * q.mum * (Sxx * Sxx + 2.0 * Sxy * Sxy + Syy * Syy);
    });
    return neumaier_sum(pd);
}

RatePair actual_rates(const EnergyReport& before, const EnergyReport& after, double dt) {
    RatePair r;
    r.kin = (after.kin - before.kin) / dt;
    r.pot = (after.pot - before.pot) / dt;
    return r;
}

RatePair weak_rates(const MixedSpaces& sp, const QuadCache& qc, const State& old_state,
                    const State& new_state, double dt, const FluidParams& par) {
    const int nel = sp.nx * sp.ny;
    std::vector<double> pk(nel, 0.0), pp(nel, 0.0);
    const double idt = 1.0 / dt;
    scan_points(sp, qc, old_state, new_state, dt, par, [&](int e, const PointContext& q) {
        const double conv_x = q.uxm * q.guxm[0] + q.uym * q.guxm[1];
        const double conv_y = q.uxm * q.guym[0] + q.uym * q.guym[1];
        const double inertial =
            (q.uxm * (q.pr_k.rho * q.ux_k - q.pr_n.rho * q.ux_n)
             + q.uym * (q.pr_k.rho * q.uy_k - q.pr_n.rho * q.uy_n)) * idt;
        pk[e] += q.w * (inertial - q.rhom * (q.uxm * conv_x + q.uym * conv_y));
        pp[e] += q.w * (-q.rhom) * (q.uxm * par.gx + q.uym * par.gy);
    });
    RatePair r;
    r.kin = neumaier_sum(pk);
    r.pot = neumaier_sum(pp);
    return r;
}

DivNorms divergence_norms(const MixedSpaces& sp, const QuadCache& qc,
                          const std::vector<double>& u) {
    const int nel = sp.nx * sp.ny;
    const int nq = qc.rule.order;
    std::vector<double> p1(nel, 0.0), p2(nel, 0.0);
    double dinf = 0.0;
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex) {
            const int e = ex + sp.nx * ey;
            double cvx[6], cvy[6];
            for (int ay = 0; ay < 2; ++ay)
                for (int ax = 0; ax < 3; ++ax)
                    cvx[ax + 3 * ay] = u[(ex + ax) + (ey + ay) * sp.vx.nbx];
            for (int ay = 0; ay < 3; ++ay)
                for (int ax = 0; ax < 2; ++ax)
                    cvy[ax + 2 * ay] = u[sp.dim_vx() + (ex + ax) + (ey + ay) * sp.vy.nbx];
            for (int qy = 0; qy < nq; ++qy)
                for (int qx = 0; qx < nq; ++qx) {
                    double d = 0.0;
                    for (int ay = 0; ay < 2; ++ay)
                        for (int ax = 0; ax < 3; ++ax)
                            d += cvx[ax + 3 * ay] * qc.s2x.d(ex, qx, ax) * qc.s1y.v(ey, qy, ay);
                    for (int ay = 0; ay < 3; ++ay)
                        for (int ax = 0; ax < 2; ++ax)
                            d += cvy[ax + 2 * ay] * qc.s1x.v(ex, qx, ax) * qc.s2y.d(ey, qy, ay);
                    const double w = qc.rule.wi[qx] * qc.rule.wi[qy] * qc.jac;
                    p1[e] += w * std::abs(d);
                    p2[e] += w * d * d;
                    dinf = std::max(dinf, std::abs(d));
                }
        }
    DivNorms out;
    out.l1 = neumaier_sum(p1);
    out.l2 = std::sqrt(neumaier_sum(p2));
    out.linf = dinf;
    return out;
}

} // namespace tf2
