#include "tf2/assembly.hpp"
#include "tf2/forms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tf2 {

State make_state(const MixedSpaces& sp) {
    State s;
    s.u.assign(sp.dim_u(), 0.0);
    s.p.assign(sp.dim_p(), 0.0);
    s.phi.assign(sp.dim_p(), 0.0);
    s.alpha.assign(sp.dim_p(), 0.0);
    for (auto& v : s.phi_pert) v.assign(sp.dim_p(), 0.0);
    return s;
}

SystemLayout make_layout(const MixedSpaces& sp, FormKind kind) {
    SystemLayout L;
    L.kind = kind;
    L.dim_vx = sp.dim_vx();
    L.dim_vy = sp.dim_vy();
    L.dim_p = sp.dim_p();
    L.off_p = L.dim_vx + L.dim_vy;
    L.off_phi = L.off_p + L.dim_p;
    const auto act = active_constraints(kind);
    std::vector<std::pair<std::string, int>> blocks = {
        {"u_x", L.dim_vx}, {"u_y", L.dim_vy}, {"p", L.dim_p}, {"phi", L.dim_p}};
    const char* names[3] = {"phi1", "phi2", "phi3"};
    int off = L.off_phi + L.dim_p;
    for (int c = 0; c < 3; ++c) {
        if (!act[c]) continue;
        L.off_pert[c] = off;
        L.slot_constraint[L.n_slots++] = c;
        blocks.push_back({names[c], L.dim_p});
        off += L.dim_p;
    }
    L.total = off;
    L.blocks = make_block_map(blocks);
    return L;
}

BasisTable1D tabulate_basis(const KnotVector& kv, const QuadratureRule& rule) {
    BasisTable1D t;
    t.n_elems = kv.n_elems;
    t.n_q = rule.order;
    t.n_fun = kv.degree + 1;
    t.val.assign((size_t)t.n_elems * t.n_q * t.n_fun, 0.0);
    t.der.assign((size_t)t.n_elems * t.n_q * t.n_fun, 0.0);
    t.pts.assign((size_t)t.n_elems * t.n_q, 0.0);
    double v[8], d[8];
    for (int e = 0; e < t.n_elems; ++e) {
        const double xa = kv.knots[kv.elem_span(e)];
        const double xb = kv.knots[kv.elem_span(e) + 1];
        for (int q = 0; q < t.n_q; ++q) {
            const double x = xa + 0.5 * (rule.xi[q] + 1.0) * (xb - xa);
            t.pts[e * t.n_q + q] = x;
            const int first = kv.eval_basis(x, v, d);
            if (first != kv.elem_first_basis(e))
                throw std::runtime_error("tabulate_basis: span mismatch");
            for (int f = 0; f < t.n_fun; ++f) {
                t.val[(e * t.n_q + q) * t.n_fun + f] = v[f];
                t.der[(e * t.n_q + q) * t.n_fun + f] = d[f];
            }
        }
    }
    return t;
}

QuadCache make_quad_cache(const MixedSpaces& sp, int order) {
    QuadCache qc;
    qc.rule = gauss_rule(order);
    qc.s2x = tabulate_basis(sp.vx.kvx, qc.rule);
    qc.s1x = tabulate_basis(sp.press.kvx, qc.rule);
    qc.s2y = tabulate_basis(sp.vy.kvy, qc.rule);
    qc.s1y = tabulate_basis(sp.press.kvy, qc.rule);
    qc.jac = 0.25 * sp.hx * sp.hy;
    qc.hx = sp.hx;
    qc.hy = sp.hy;
    metric_tensor(sp.hx, sp.hy, &qc.gxx, &qc.gyy);
    return qc;
}

AssemblyError::AssemblyError(const std::string& msg, int e, int q, double px, double py)
    : std::runtime_error(msg + " (element " + std::to_string(e) + ", point " + std::to_string(q)
                         + ", x=" + std::to_string(px) + ", y=" + std::to_string(py) + ")"),
      element(e), point(q), x(px), y(py) {}

void load_element(ElementContext& ctx, const MixedSpaces& sp, const SystemLayout& L,
                  int ex, int ey, const State& old_state, const State& iter,
                  const FrozenAux& aux) {
    ctx.ex = ex;
    ctx.ey = ey;
    ctx.x0e = sp.elem_x0(ex);
    ctx.y0e = sp.elem_y0(ey);
    ctx.n_slots = L.n_slots;
    const int nvx = sp.vx.nbx;
    for (int ay = 0; ay < 2; ++ay)
        for (int ax = 0; ax < 3; ++ax) {
            const int a = ax + 3 * ay;
            const int g = (ex + ax) + (ey + ay) * nvx;
            ctx.cvx_n[a] = old_state.u[g];
            ctx.cvx_k[a] = iter.u[g];
            ctx.ctvx[a] = aux.tau_u[g];
        }
    const int nvy = sp.vy.nbx, ovy = L.dim_vx;
    for (int ay = 0; ay < 3; ++ay)
        for (int ax = 0; ax < 2; ++ax) {
            const int a = ax + 2 * ay;
            const int g = ovy + (ex + ax) + (ey + ay) * nvy;
            ctx.cvy_n[a] = old_state.u[g];
            ctx.cvy_k[a] = iter.u[g];
            ctx.ctvy[a] = aux.tau_u[g];
        }
    const int nps = sp.press.nbx;
    for (int ay = 0; ay < 2; ++ay)
        for (int ax = 0; ax < 2; ++ax) {
            const int a = ax + 2 * ay;
            const int g = (ex + ax) + (ey + ay) * nps;
            ctx.cp[a] = iter.p[g];
            ctx.cphi_n[a] = old_state.phi[g];
            ctx.cphi0[a] = iter.phi[g];
            ctx.can[a] = old_state.alpha[g];
            ctx.cak[a] = aux.alpha_new[g];
            for (int s = 0; s < L.n_slots; ++s)
                ctx.cpert[s][a] = iter.phi_pert[L.slot_constraint[s]][g];
        }
    for (int s = 0; s < L.n_slots; ++s) ctx.lambda[s] = iter.lambda[L.slot_constraint[s]];
    // coefficient-level differences keep the constraint functionals accurate when the
    // step barely moves the interface (the 1/dt scaling amplifies any cancellation)
    for (int a = 0; a < 4; ++a) {
        double d = ctx.cphi0[a] - ctx.cphi_n[a];
        for (int s = 0; s < L.n_slots; ++s) d += ctx.lambda[s] * ctx.cpert[s][a];
        ctx.cdphi[a] = d;
        ctx.cdal[a] = ctx.cak[a] - ctx.can[a];
    }
}

bool eval_point(PointContext& o, const ElementContext& c, const QuadCache& qc,
                const MixedSpaces& sp, int k, double dt, const FluidParams& par) {
    (void)sp;
    const int nq = qc.rule.order;
    const int qx = k % nq, qy = k / nq;
    const int ex = c.ex, ey = c.ey;
    o.x = qc.s2x.pt(ex, qx);
    o.y = qc.s2y.pt(ey, qy);
    o.w = qc.rule.wi[qx] * qc.rule.wi[qy] * qc.jac;
    for (int ay = 0; ay < 2; ++ay) {
        const double by = qc.s1y.v(ey, qy, ay), dy = qc.s1y.d(ey, qy, ay);
        for (int ax = 0; ax < 3; ++ax) {
            const double bx = qc.s2x.v(ex, qx, ax), dx = qc.s2x.d(ex, qx, ax);
            const int a = ax + 3 * ay;
            o.vxN[a] = bx * by;
            o.vxNx[a] = dx * by;
            o.vxNy[a] = bx * dy;
        }
    }
    for (int ay = 0; ay < 3; ++ay) {
        const double by = qc.s2y.v(ey, qy, ay), dy = qc.s2y.d(ey, qy, ay);
        for (int ax = 0; ax < 2; ++ax) {
            const double bx = qc.s1x.v(ex, qx, ax), dx = qc.s1x.d(ex, qx, ax);
            const int a = ax + 2 * ay;
            o.vyN[a] = bx * by;
            o.vyNx[a] = dx * by;
            o.vyNy[a] = bx * dy;
        }
    }
    for (int ay = 0; ay < 2; ++ay) {
        const double by = qc.s1y.v(ey, qy, ay), dy = qc.s1y.d(ey, qy, ay);
        for (int ax = 0; ax < 2; ++ax) {
            const double bx = qc.s1x.v(ex, qx, ax), dx = qc.s1x.d(ex, qx, ax);
            const int a = ax + 2 * ay;
            o.pN[a] = bx * by;
            o.pNx[a] = dx * by;
            o.pNy[a] = bx * dy;
        }
    }

    o.ux_n = o.uy_n = o.ux_k = o.uy_k = 0.0;
    o.gux_n[0] = o.gux_n[1] = o.guy_n[0] = o.guy_n[1] = 0.0;
    o.gux_k[0] = o.gux_k[1] = o.guy_k[0] = o.guy_k[1] = 0.0;
    double tux = 0.0, tuy = 0.0;
    for (int a = 0; a < 6; ++a) {
        o.ux_n += c.cvx_n[a] * o.vxN[a];
        o.ux_k += c.cvx_k[a] * o.vxN[a];
        o.gux_n[0] += c.cvx_n[a] * o.vxNx[a];
        o.gux_n[1] += c.cvx_n[a] * o.vxNy[a];
        o.gux_k[0] += c.cvx_k[a] * o.vxNx[a];
        o.gux_k[1] += c.cvx_k[a] * o.vxNy[a];
        tux += c.ctvx[a] * o.vxN[a];
        o.uy_n += c.cvy_n[a] * o.vyN[a];
        o.uy_k += c.cvy_k[a] * o.vyN[a];
        o.guy_n[0] += c.cvy_n[a] * o.vyNx[a];
        o.guy_n[1] += c.cvy_n[a] * o.vyNy[a];
        o.guy_k[0] += c.cvy_k[a] * o.vyNx[a];
        o.guy_k[1] += c.cvy_k[a] * o.vyNy[a];
        tuy += c.ctvy[a] * o.vyN[a];
    }
    o.press = 0.0;
    o.phi_n = 0.0;
    o.gphi_n[0] = o.gphi_n[1] = 0.0;
    double phi0 = 0.0, gphi0x = 0.0, gphi0y = 0.0;
    o.alpha_n = o.alpha_k = 0.0;
    for (int s = 0; s < c.n_slots; ++s) {
        o.pert[s] = 0.0;
        o.gpert[s][0] = o.gpert[s][1] = 0.0;
    }
    double dphi = 0.0, dal = 0.0;
    for (int a = 0; a < 4; ++a) {
        o.press += c.cp[a] * o.pN[a];
        o.phi_n += c.cphi_n[a] * o.pN[a];
        o.gphi_n[0] += c.cphi_n[a] * o.pNx[a];
        o.gphi_n[1] += c.cphi_n[a] * o.pNy[a];
        phi0 += c.cphi0[a] * o.pN[a];
        gphi0x += c.cphi0[a] * o.pNx[a];
        gphi0y += c.cphi0[a] * o.pNy[a];
        o.alpha_n += c.can[a] * o.pN[a];
        o.alpha_k += c.cak[a] * o.pN[a];
        dphi += c.cdphi[a] * o.pN[a];
        dal += c.cdal[a] * o.pN[a];
        for (int s = 0; s < c.n_slots; ++s) {
            o.pert[s] += c.cpert[s][a] * o.pN[a];
            o.gpert[s][0] += c.cpert[s][a] * o.pNx[a];
            o.gpert[s][1] += c.cpert[s][a] * o.pNy[a];
        }
    }
    o.phi_k = phi0;
    o.gphi_k[0] = gphi0x;
    o.gphi_k[1] = gphi0y;
    o.phi_c = phi0;
    for (int s = 0; s < c.n_slots; ++s)
        o.phi_c += c.lambda[s] * o.pert[s];

    const double an = std::max(o.alpha_n, kAlphaFloor);
    const double ak = std::max(o.alpha_k, kAlphaFloor);
    if (an != o.alpha_n) dal += o.alpha_n - an; // fold the floors into the difference
    if (ak != o.alpha_k) dal += ak - o.alpha_k;
    o.pr_n = eval_props(o.phi_n, an, par);
    o.pr_k = eval_props(o.phi_c, ak, par);
    o.rho_diff = rho_difference(o.phi_c, ak, o.phi_n, an, dphi, dal, par);
    o.tau = supg_tau(tux, tuy, qc.gxx, qc.gyy, dt);
    o.tux = tux;
    o.tuy = tuy;

    o.uxm = 0.5 * (o.ux_n + o.ux_k);
    o.uym = 0.5 * (o.uy_n + o.uy_k);
    o.guxm[0] = 0.5 * (o.gux_n[0] + o.gux_k[0]);
    o.guxm[1] = 0.5 * (o.gux_n[1] + o.gux_k[1]);
    o.guym[0] = 0.5 * (o.guy_n[0] + o.guy_k[0]);
    o.guym[1] = 0.5 * (o.guy_n[1] + o.guy_k[1]);
    o.rhom = 0.5 * (o.pr_n.rho + o.pr_k.rho);
    o.mum = 0.5 * (o.pr_n.mu + o.pr_k.mu);
    o.gphim[0] = 0.5 * (o.gphi_n[0] + o.gphi_k[0]);
    o.gphim[1] = 0.5 * (o.gphi_n[1] + o.gphi_k[1]);

    double chk = o.ux_k + o.uy_k + o.press + o.phi_k + o.phi_c + o.rho_diff
               + o.pr_k.rho + o.pr_k.mu + o.tau
               + o.gux_k[0] + o.gux_k[1] + o.guy_k[0] + o.guy_k[1] + o.gphi_k[0] + o.gphi_k[1]
               + o.ux_n + o.uy_n + o.phi_n;
    for (int s = 0; s < c.n_slots; ++s) chk += o.pert[s];
    return std::isfinite(chk);
}

Assembler::Assembler(const MixedSpaces& spaces, FormKind kind, int quad_order)
    : spaces_(&spaces), layout_(make_layout(spaces, kind)),
      quad_(make_quad_cache(spaces, quad_order)), bnd_(boundary_normal_dofs(spaces)) {
    nloc_ = 20 + 4 * layout_.n_slots;
    build_pattern();
    build_slot_table();
}

namespace {

struct SpaceInfo {
    int off, nbx, nby, degx, degy;
};

void append_cols(std::vector<int>& cols, const SpaceInfo& s, int exa, int exb, int eya, int eyb) {
    for (int j = eya; j <= eyb + s.degy; ++j)
        for (int i = exa; i <= exb + s.degx; ++i)
            cols.push_back(s.off + i + j * s.nbx);
}

} // namespace

void Assembler::build_pattern() {
    const auto& sp = *spaces_;
    const int nx = sp.nx, ny = sp.ny;
    const SpaceInfo vx{0, sp.vx.nbx, sp.vx.nby, 2, 1};
    const SpaceInfo vy{layout_.dim_vx, sp.vy.nbx, sp.vy.nby, 1, 2};
    const SpaceInfo pr{layout_.off_p, sp.press.nbx, sp.press.nby, 1, 1};
    const SpaceInfo ph{layout_.off_phi, sp.press.nbx, sp.press.nby, 1, 1};

    std::vector<std::vector<int>> rows(layout_.total);
    auto elem_range = [nx, ny](int i, int j, int degx, int degy, int& exa, int& exb, int& eya,
                               int& eyb) {
        exa = std::max(0, i - degx);
        exb = std::min(nx - 1, i);
        eya = std::max(0, j - degy);
        eyb = std::min(ny - 1, j);
    };
    int exa, exb, eya, eyb;
    for (int j = 0; j < vx.nby; ++j)
        for (int i = 0; i < vx.nbx; ++i) {
            auto& cl = rows[i + j * vx.nbx];
            elem_range(i, j, 2, 1, exa, exb, eya, eyb);
            append_cols(cl, vx, exa, exb, eya, eyb);
            append_cols(cl, vy, exa, exb, eya, eyb);
            append_cols(cl, pr, exa, exb, eya, eyb);
            append_cols(cl, ph, exa, exb, eya, eyb);
        }
    for (int j = 0; j < vy.nby; ++j)
        for (int i = 0; i < vy.nbx; ++i) {
            auto& cl = rows[vy.off + i + j * vy.nbx];
            elem_range(i, j, 1, 2, exa, exb, eya, eyb);
            append_cols(cl, vx, exa, exb, eya, eyb);
            append_cols(cl, vy, exa, exb, eya, eyb);
            append_cols(cl, pr, exa, exb, eya, eyb);
            append_cols(cl, ph, exa, exb, eya, eyb);
        }
    for (int j = 0; j < pr.nby; ++j)
        for (int i = 0; i < pr.nbx; ++i) {
            const int r = pr.off + i + j * pr.nbx;
            auto& cl = rows[r];
            elem_range(i, j, 1, 1, exa, exb, eya, eyb);
            append_cols(cl, vx, exa, exb, eya, eyb);
            append_cols(cl, vy, exa, exb, eya, eyb);
            cl.push_back(r); // diagonal entry kept for the factorization
        }
    for (int j = 0; j < ph.nby; ++j)
        for (int i = 0; i < ph.nbx; ++i) {
            auto& cl = rows[ph.off + i + j * ph.nbx];
            elem_range(i, j, 1, 1, exa, exb, eya, eyb);
            append_cols(cl, vx, exa, exb, eya, eyb);
            append_cols(cl, vy, exa, exb, eya, eyb);
            append_cols(cl, ph, exa, exb, eya, eyb);
        }
    for (int s = 0; s < layout_.n_slots; ++s) {
        const SpaceInfo pe{layout_.off_pert[layout_.slot_constraint[s]], sp.press.nbx,
                           sp.press.nby, 1, 1};
        for (int j = 0; j < pe.nby; ++j)
            for (int i = 0; i < pe.nbx; ++i) {
                auto& cl = rows[pe.off + i + j * pe.nbx];
                elem_range(i, j, 1, 1, exa, exb, eya, eyb);
                append_cols(cl, pe, exa, exb, eya, eyb);
            }
    }
    jac_ = build_sparse(layout_.total, layout_.total, rows);
    jac_.blocks = layout_.blocks;
}

int Assembler::local_to_global(int ex, int ey, int l, int& blk) const {
    const auto& sp = *spaces_;
    if (l < 6) {
        blk = 0;
        return (ex + l % 3) + (ey + l / 3) * sp.vx.nbx;
    }
    if (l < 12) {
        const int t = l - 6;
        blk = 1;
        return layout_.dim_vx + (ex + t % 2) + (ey + t / 2) * sp.vy.nbx;
    }
    const int nps = sp.press.nbx;
    if (l < 16) {
        const int t = l - 12;
        blk = 2;
        return layout_.off_p + (ex + t % 2) + (ey + t / 2) * nps;
    }
    if (l < 20) {
        const int t = l - 16;
        blk = 3;
        return layout_.off_phi + (ex + t % 2) + (ey + t / 2) * nps;
    }
    const int s = (l - 20) / 4, t = (l - 20) % 4;
    blk = 4 + s;
    return layout_.off_pert[layout_.slot_constraint[s]] + (ex + t % 2) + (ey + t / 2) * nps;
}

namespace {

// which Jacobian blocks the quasi-Newton scheme keeps
bool block_coupled(int rb, int cb, int r, int c) {
    if (rb <= 1) return cb <= 3;                         // momentum rows: u, p, level set
    if (rb == 2) return cb <= 1 || (cb == 2 && r == c);  // continuity rows: u plus diagonal
    if (rb == 3) return cb <= 1 || cb == 3;              // level set rows: u and itself
    return cb == rb;                                     // perturbation rows: own block only
}

} // namespace

void Assembler::build_slot_table() {
    const auto& sp = *spaces_;
    const int nel = sp.nx * sp.ny;
    slot_table_.assign((size_t)nel * nloc_ * nloc_, -1);
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex) {
            const int e = ex + sp.nx * ey;
            int* st = &slot_table_[(size_t)e * nloc_ * nloc_];
            for (int lr = 0; lr < nloc_; ++lr) {
                int rb, cb;
                const int r = local_to_global(ex, ey, lr, rb);
                for (int lc = 0; lc < nloc_; ++lc) {
                    const int c = local_to_global(ex, ey, lc, cb);
                    if (!block_coupled(rb, cb, r, c)) continue;
                    const int s = jac_.find_slot(r, c);
                    if (s < 0) throw std::runtime_error("assembly: missing pattern slot");
                    st[lr * nloc_ + lc] = s;
                }
            }
        }
}

void Assembler::residual(const State& old_state, const State& iter, const FrozenAux& aux,
                         double dt, const FluidParams& par, bool apply_bc, bool parallel,
                         std::vector<double>& out) {
    const auto& sp = *spaces_;
    const int nel = sp.nx * sp.ny;
    const int nq2 = quad_.rule.npoints();
    const FormKind kind = layout_.kind;
    out.assign(layout_.total, 0.0);

    int err_elem = -1, err_pt = -1;
    double err_x = 0.0, err_y = 0.0;
    auto do_elem = [&](int e, double* rl) -> bool {
        ElementContext ctx;
        PointContext q;
        load_element(ctx, sp, layout_, e % sp.nx, e / sp.nx, old_state, iter, aux);
        for (int k = 0; k < nq2; ++k) {
            if (!eval_point(q, ctx, quad_, sp, k, dt, par)) {
#pragma omp critical
                {
                    if (err_elem < 0 || e < err_elem) {
                        err_elem = e;
                        err_pt = k;
                        err_x = q.x;
                        err_y = q.y;
                    }
                }
                return false;
            }
            point_residual(kind, q, dt, par, layout_.n_slots, rl);
        }
        return true;
    };

    if (parallel) {
        elem_vec_.assign((size_t)nel * nloc_, 0.0);
#pragma omp parallel for schedule(static)
        for (int e = 0; e < nel; ++e) do_elem(e, &elem_vec_[(size_t)e * nloc_]);
        if (err_elem >= 0)
            throw AssemblyError("residual: non-finite value", err_elem, err_pt, err_x, err_y);
        gather_vector(out);
    } else {
        std::vector<double> rl(nloc_);
        for (int e = 0; e < nel; ++e) {
            std::fill(rl.begin(), rl.end(), 0.0);
            if (!do_elem(e, rl.data()))
                throw AssemblyError("residual: non-finite value", err_elem, err_pt, err_x, err_y);
            int blk;
            for (int l = 0; l < nloc_; ++l)
                out[local_to_global(e % sp.nx, e / sp.nx, l, blk)] += rl[l];
        }
    }

    // assembled variation vectors enter the perturbation equations as plain loads
    for (int s = 0; s < layout_.n_slots; ++s) {
        const int cidx = layout_.slot_constraint[s];
        const auto& dh = aux.dh[cidx];
        if ((int)dh.size() != layout_.dim_p) continue;
        const int op = layout_.off_pert[cidx];
        for (int i = 0; i < layout_.dim_p; ++i)
            out[op + i] -= dh[i];
    }

    if (apply_bc)
        for (int r : bnd_.combined) out[r] = iter.u[r];
}

void Assembler::jacobian(const State& old_state, const State& iter, const FrozenAux& aux,
                         double dt, const FluidParams& par, bool apply_bc, bool parallel) {
    const auto& sp = *spaces_;
    const int nel = sp.nx * sp.ny;
    const int nq2 = quad_.rule.npoints();
    const FormKind kind = layout_.kind;
    jac_.zero_values();

    int err_elem = -1, err_pt = -1;
    double err_x = 0.0, err_y = 0.0;
    auto do_elem = [&](int e, double* jl) -> bool {
        ElementContext ctx;
        PointContext q;
        load_element(ctx, sp, layout_, e % sp.nx, e / sp.nx, old_state, iter, aux);
        for (int k = 0; k < nq2; ++k) {
            if (!eval_point(q, ctx, quad_, sp, k, dt, par)) {
#pragma omp critical
                {
                    if (err_elem < 0 || e < err_elem) {
                        err_elem = e;
                        err_pt = k;
                        err_x = q.x;
                        err_y = q.y;
                    }
                }
                return false;
            }
            point_jacobian(kind, q, dt, par, layout_.n_slots, nloc_, jl);
        }
        return true;
    };

    if (parallel) {
        elem_mat_.assign((size_t)nel * nloc_ * nloc_, 0.0);
#pragma omp parallel for schedule(static)
        for (int e = 0; e < nel; ++e) do_elem(e, &elem_mat_[(size_t)e * nloc_ * nloc_]);
        if (err_elem >= 0)
            throw AssemblyError("jacobian: non-finite value", err_elem, err_pt, err_x, err_y);
        gather_matrix();
    } else {
        std::vector<double> jl((size_t)nloc_ * nloc_);
        for (int e = 0; e < nel; ++e) {
            std::fill(jl.begin(), jl.end(), 0.0);
            if (!do_elem(e, jl.data()))
                throw AssemblyError("jacobian: non-finite value", err_elem, err_pt, err_x, err_y);
            int rb, cb;
            for (int lr = 0; lr < nloc_; ++lr) {
                const int r = local_to_global(e % sp.nx, e / sp.nx, lr, rb);
                for (int lc = 0; lc < nloc_; ++lc) {
                    const double v = jl[(size_t)lr * nloc_ + lc];
                    const int c = local_to_global(e % sp.nx, e / sp.nx, lc, cb);
                    const int slot = jac_.find_slot(r, c);
                    if (slot < 0) {
                        if (v != 0.0)
                            throw std::runtime_error("jacobian: kernel wrote outside pattern");
                        continue;
                    }
                    jac_.vals[slot] += v;
                }
            }
        }
    }

    if (apply_bc)
        for (int r : bnd_.combined) jac_.set_unit_row(r);
}

namespace {

struct GatherSpec {
    int off, nbx, nby, degx, degy, lbase, lstride;
};

} // namespace

void Assembler::gather_vector(std::vector<double>& out) const {
    const auto& sp = *spaces_;
    const int nx = sp.nx, ny = sp.ny;
    std::vector<GatherSpec> specs = {
        {0, sp.vx.nbx, sp.vx.nby, 2, 1, 0, 3},
        {layout_.dim_vx, sp.vy.nbx, sp.vy.nby, 1, 2, 6, 2},
        {layout_.off_p, sp.press.nbx, sp.press.nby, 1, 1, 12, 2},
        {layout_.off_phi, sp.press.nbx, sp.press.nby, 1, 1, 16, 2},
    };
    for (int s = 0; s < layout_.n_slots; ++s)
        specs.push_back({layout_.off_pert[layout_.slot_constraint[s]], sp.press.nbx,
                         sp.press.nby, 1, 1, 20 + 4 * s, 2});
    for (const auto& g : specs) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < g.nby; ++j) {
            for (int i = 0; i < g.nbx; ++i) {
                double v = 0.0;
                const int eya = std::max(0, j - g.degy), eyb = std::min(ny - 1, j);
                const int exa = std::max(0, i - g.degx), exb = std::min(nx - 1, i);
                for (int ey = eya; ey <= eyb; ++ey)
                    for (int ex = exa; ex <= exb; ++ex) {
                        const int e = ex + nx * ey;
                        const int lr = g.lbase + (i - ex) + g.lstride * (j - ey);
                        v += elem_vec_[(size_t)e * nloc_ + lr];
                    }
                out[g.off + i + j * g.nbx] = v;
            }
        }
    }
}

void Assembler::gather_matrix() {
    const auto& sp = *spaces_;
    const int nx = sp.nx, ny = sp.ny;
    std::vector<GatherSpec> specs = {
        {0, sp.vx.nbx, sp.vx.nby, 2, 1, 0, 3},
        {layout_.dim_vx, sp.vy.nbx, sp.vy.nby, 1, 2, 6, 2},
        {layout_.off_p, sp.press.nbx, sp.press.nby, 1, 1, 12, 2},
        {layout_.off_phi, sp.press.nbx, sp.press.nby, 1, 1, 16, 2},
    };
    for (int s = 0; s < layout_.n_slots; ++s)
        specs.push_back({layout_.off_pert[layout_.slot_constraint[s]], sp.press.nbx,
                         sp.press.nby, 1, 1, 20 + 4 * s, 2});
    for (const auto& g : specs) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < g.nby; ++j) {
            for (int i = 0; i < g.nbx; ++i) {
                const int eya = std::max(0, j - g.degy), eyb = std::min(ny - 1, j);
                const int exa = std::max(0, i - g.degx), exb = std::min(nx - 1, i);
                for (int ey = eya; ey <= eyb; ++ey)
                    for (int ex = exa; ex <= exb; ++ex) {
                        const int e = ex + nx * ey;
                        const int lr = g.lbase + (i - ex) + g.lstride * (j - ey);
                        const double* jm = &elem_mat_[((size_t)e * nloc_ + lr) * nloc_];
                        const int* st = &slot_table_[((size_t)e * nloc_ + lr) * nloc_];
                        for (int lc = 0; lc < nloc_; ++lc) {
                            const int slot = st[lc];
                            if (slot >= 0) jac_.vals[slot] += jm[lc];
                        }
                    }
            }
        }
    }
}

FrozenAux make_frozen_aux(const MixedSpaces& sp, FormKind kind, const State& old_state,
                          const State& iter, double dt, const FluidParams& par, int quad_order) {
    FrozenAux aux;
    aux.alpha_new = solve_alpha_projection(sp, iter.phi, par.eps_smooth, quad_order);
    aux.tau_u.resize(sp.dim_u());
    for (int i = 0; i < sp.dim_u(); ++i) aux.tau_u[i] = 0.5 * (old_state.u[i] + iter.u[i]);
    const SystemLayout L = make_layout(sp, kind);
    if (L.n_slots > 0) {
        const QuadCache qc = make_quad_cache(sp, quad_order);
        FrozenAux tmp;
        tmp.alpha_new = aux.alpha_new;
        tmp.tau_u = aux.tau_u;
        aux.dh = assemble_dh(sp, L, qc, old_state, iter, tmp, dt, par);
    }
    return aux;
}

std::vector<double> assemble_residual(const MixedSpaces& spaces, FormKind kind,
                                      const State& old_state, const State& iter,
                                      double dt, const FluidParams& par, int quad_order,
                                      bool apply_bc) {
    Assembler asmbl(spaces, kind, quad_order);
    const FrozenAux aux = make_frozen_aux(spaces, kind, old_state, iter, dt, par, quad_order);
    std::vector<double> out;
    asmbl.residual(old_state, iter, aux, dt, par, apply_bc, false, out);
    return out;
}

} // namespace tf2
