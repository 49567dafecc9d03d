#include "tf2/stepper.hpp"
#include "tf2/forms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tf2 {

Stepper::Stepper(const MixedSpaces& spaces, FormKind kind, const FluidParams& par,
                 const StepControl& ctl)
    : par_(par), ctl_(ctl), asmb_(spaces, kind, ctl.quad_order),
      alpha_(asmb_.spaces(), par.eps_smooth, ctl.quad_order) {
    const auto& sp = asmb_.spaces();
    const auto wx = integration_weights_1d(sp.press.kvx);
    const auto wy = integration_weights_1d(sp.press.kvy);
    pweights_.resize(sp.dim_p());
    for (int j = 0; j < sp.press.nby; ++j)
        for (int i = 0; i < sp.press.nbx; ++i) pweights_[sp.press.index(i, j)] = wx[i] * wy[j];
    build_divergence_map();
}

void Stepper::build_divergence_map() {
    const auto& sp = asmb_.spaces();
    const int np = sp.dim_p();
    const auto& bnd = asmb_.boundary();

    // four entries per pressure dof: the 1d difference maps in each direction
    std::vector<std::vector<int>> rows(np);
    const int dvx = sp.dim_vx();
    for (int j = 0; j < sp.press.nby; ++j)
        for (int i = 0; i < sp.press.nbx; ++i) {
            auto& r = rows[sp.press.index(i, j)];
            r.push_back(sp.vx.index(i, j));
            r.push_back(sp.vx.index(i + 1, j));
            r.push_back(dvx + sp.vy.index(i, j));
            r.push_back(dvx + sp.vy.index(i, j + 1));
            std::sort(r.begin(), r.end());
        }
    bdiv_ = build_sparse(np, sp.dim_u(), rows);
    const auto& tx = sp.vx.kvx.knots;
    const auto& ty = sp.vy.kvy.knots;
    for (int j = 0; j < sp.press.nby; ++j)
        for (int i = 0; i < sp.press.nbx; ++i) {
            const int r = sp.press.index(i, j);
            const double ax = 2.0 / (tx[i + 3] - tx[i + 1]);
            const double ay = 2.0 / (ty[j + 3] - ty[j + 1]);
            bdiv_.vals[bdiv_.find_slot(r, sp.vx.index(i, j))] -= ax;
            bdiv_.vals[bdiv_.find_slot(r, sp.vx.index(i + 1, j))] += ax;
            bdiv_.vals[bdiv_.find_slot(r, dvx + sp.vy.index(i, j))] -= ay;
            bdiv_.vals[bdiv_.find_slot(r, dvx + sp.vy.index(i, j + 1))] += ay;
        }
    // wall-normal velocity dofs stay fixed, so mask their columns
    std::vector<char> masked(sp.dim_u(), 0);
    for (int c : bnd.combined) masked[c] = 1;
    for (int r = 0; r < np; ++r)
        for (int s = bdiv_.row_ptr[r]; s < bdiv_.row_ptr[r + 1]; ++s)
            if (masked[bdiv_.cols[s]]) bdiv_.vals[s] = 0.0;

    // normal matrix, rows couple across one shared velocity dof (5-point)
    std::vector<std::vector<int>> nrows(np);
    for (int j = 0; j < sp.press.nby; ++j)
        for (int i = 0; i < sp.press.nbx; ++i) {
            auto& r = nrows[sp.press.index(i, j)];
            const int di[5] = {0, -1, 1, 0, 0};
            const int dj[5] = {0, 0, 0, -1, 1};
            for (int k = 0; k < 5; ++k) {
                const int ii = i + di[k], jj = j + dj[k];
                if (ii < 0 || ii >= sp.press.nbx || jj < 0 || jj >= sp.press.nby) continue;
                r.push_back(sp.press.index(ii, jj));
            }
            std::sort(r.begin(), r.end());
        }
    ndiv_ = build_sparse(np, np, nrows);
    for (int r = 0; r < np; ++r) {
        for (int s = ndiv_.row_ptr[r]; s < ndiv_.row_ptr[r + 1]; ++s) {
            const int c = ndiv_.cols[s];
            double dot = 0.0;
            for (int sr = bdiv_.row_ptr[r]; sr < bdiv_.row_ptr[r + 1]; ++sr)
                for (int sc = bdiv_.row_ptr[c]; sc < bdiv_.row_ptr[c + 1]; ++sc)
                    if (bdiv_.cols[sr] == bdiv_.cols[sc])
                        dot += bdiv_.vals[sr] * bdiv_.vals[sc];
            ndiv_.vals[s] = dot;
        }
    }
}

void Stepper::divergence_cleanup(const State& old_state, State& iter, StepStats& stats) const {
    const auto& sp = asmb_.spaces();
    const int np = sp.dim_p();
    std::vector<double> umid(sp.dim_u());
    auto coeff_max = [&]() {
        for (int i = 0; i < sp.dim_u(); ++i) umid[i] = 0.5 * (old_state.u[i] + iter.u[i]);
        std::vector<double> d = divergence_coefficients(sp, umid);
        double dmax = 0.0;
        for (double v : d) dmax = std::max(dmax, std::abs(v));
        return std::pair(dmax, std::move(d));
    };
    auto [dmax, d] = coeff_max();
    for (int round = 0; round < 3 && dmax > ctl_.div_target; ++round) {
        for (double& v : d) v = -v;
        // the corrected divergence equals the residual of this normal system,
        // so an absolute residual goal below div_target is exactly the target;
        // a purely relative goal can sit below the attainable floor when the
        // start value is already small, and the over-iterated solution then
        // drifts along the near-nullspace and injects noise
        KrylovResult z = cg_solve(ndiv_, d, 1e-13, 5 * np + 200, 0.3 * ctl_.div_target);
        std::vector<double> saved = iter.u;
        for (int r = 0; r < np; ++r)
            for (int s = bdiv_.row_ptr[r]; s < bdiv_.row_ptr[r + 1]; ++s)
                iter.u[bdiv_.cols[s]] += 2.0 * bdiv_.vals[s] * z.x[r];
        ++stats.cleanup_rounds;
        auto [dnew, d2] = coeff_max();
        if (dnew >= dmax) { // correction made it worse, keep the original field
            iter.u = std::move(saved);
            break;
        }
        dmax = dnew;
        d = std::move(d2);
    }
}

StepStatus Stepper::step(const State& old_state, double dt, State& out, StepStats& stats) {
    const auto& sp = asmb_.spaces();
    const auto& L = asmb_.layout();
    const auto& bnd = asmb_.boundary();
    stats = StepStats{};

    State iter = old_state;
    iter.lambda = {0.0, 0.0, 0.0};
    for (auto& v : iter.phi_pert) std::fill(v.begin(), v.end(), 0.0);

    FrozenAux aux;
    std::vector<double> R;
    bool converged = false;

    try {
        for (int it = 0; it < ctl_.max_global_iters; ++it) {
            // refresh the iteration-frozen data from the current iterate
            aux.alpha_new = alpha_.solve(iter.phi);
            aux.tau_u.resize(sp.dim_u());
            for (int i = 0; i < sp.dim_u(); ++i)
                aux.tau_u[i] = 0.5 * (old_state.u[i] + iter.u[i]);
            if (L.n_slots > 0)
                aux.dh = assemble_dh(sp, L, asmb_.quad(), old_state, iter, aux, dt, par_);

            asmb_.residual(old_state, iter, aux, dt, par_, true, ctl_.parallel, R);
            double rn = 0.0;
            for (double v : R) rn += v * v;
            rn = std::sqrt(rn);
            stats.residual = rn;
            if (it == 0) stats.residual0 = rn;
            stats.nonlinear_iters = it;
            if (ctl_.verbose >= 2)
                std::fprintf(stderr, "    it %d |R| %.3e\n", it, rn);
            if (rn <= ctl_.eps1 * stats.residual0 || rn <= ctl_.eps1_abs || rn == 0.0) {
                converged = true;
                break;
            }

            asmb_.jacobian(old_state, iter, aux, dt, par_, true, ctl_.parallel);
            for (double& v : R) v = -v;
            KrylovResult lin = fgmres(asmb_.matrix(), R, ctl_.krylov);
            stats.krylov_iters += lin.iters;
            if (!lin.converged) return StepStatus::LinearFailure;

            for (int i = 0; i < sp.dim_u(); ++i) iter.u[i] += lin.x[i];
            for (int i = 0; i < L.dim_p; ++i) {
                iter.p[i] += lin.x[L.off_p + i];
                iter.phi[i] += lin.x[L.off_phi + i];
            }
            for (int s = 0; s < L.n_slots; ++s) {
                const int c = L.slot_constraint[s];
                for (int i = 0; i < L.dim_p; ++i)
                    iter.phi_pert[c][i] += lin.x[L.off_pert[c] + i];
            }
            for (int r : bnd.combined) iter.u[r] = 0.0; // keep the walls exact

            LambdaResult lam = solve_lambda(sp, L, asmb_.quad(), old_state, iter, aux, dt,
                                            par_, ctl_.lambda);
            stats.lambda_iters += lam.iters;
            if (!lam.converged) return StepStatus::ConstraintFailure;
            iter.lambda = lam.lambda;
            stats.h = lam.h;
            stats.dropped = lam.dropped;
        }
    } catch (const AssemblyError&) {
        return StepStatus::EvalFailure;
    }
    if (!converged) return StepStatus::NonlinearFailure;

    if (ctl_.clean_divergence) {
        divergence_cleanup(old_state, iter, stats);
        for (int r : bnd.combined) iter.u[r] = 0.0;
    }

    // final multiplier solve against the corrected velocity, then compose
    LambdaResult lam = solve_lambda(sp, L, asmb_.quad(), old_state, iter, aux, dt, par_,
                                    ctl_.lambda);
    stats.lambda_iters += lam.iters;
    if (!lam.converged) return StepStatus::ConstraintFailure;
    stats.h = lam.h;
    stats.lambda = lam.lambda;
    stats.dropped = lam.dropped;

    out = iter;
    out.lambda = lam.lambda;
    for (int s = 0; s < L.n_slots; ++s) {
        const int c = L.slot_constraint[s];
        for (int i = 0; i < L.dim_p; ++i) {
            out.phi[i] += lam.lambda[c] * iter.phi_pert[c][i];
            out.phi_pert[c][i] = 0.0;
        }
    }
    out.alpha = aux.alpha_new; // the field the accepted densities were built with
    project_pressure_nullspace(out.p, pweights_);
    out.time = old_state.time + dt;
    return StepStatus::Ok;
}

StepStatus Stepper::advance(const State& old_state, double dt, double dt_min, State& out,
                            StepStats& stats, double& dt_used) {
    double dt_try = dt;
    StepStatus st = StepStatus::NonlinearFailure;
    for (int attempt = 0; attempt <= ctl_.max_retries; ++attempt) {
        if (dt_try < dt_min) break;
        st = step(old_state, dt_try, out, stats);
        if (st == StepStatus::Ok) {
            dt_used = dt_try;
            return st;
        }
        dt_try *= 0.5;
    }
    dt_used = 0.0;
    return st;
}

double Stepper::compute_cfl(const std::vector<double>& u, double dt) const {
    const auto& sp = asmb_.spaces();
    const auto& qc = asmb_.quad();
    const int nq = qc.rule.order;
    double cmax = 0.0;
    for (int ey = 0; ey < sp.ny; ++ey)
        for (int ex = 0; ex < sp.nx; ++ex) {
            double cvx[6], cvy[6];
            for (int ay = 0; ay < 2; ++ay)
                for (int ax = 0; ax < 3; ++ax)
                    cvx[ax + 3 * ay] = u[(ex + ax) + (ey + ay) * sp.vx.nbx];
            for (int ay = 0; ay < 3; ++ay)
                for (int ax = 0; ax < 2; ++ax)
                    cvy[ax + 2 * ay] = u[sp.dim_vx() + (ex + ax) + (ey + ay) * sp.vy.nbx];
            for (int qy = 0; qy < nq; ++qy)
                for (int qx = 0; qx < nq; ++qx) {
                    double ux = 0.0, uy = 0.0;
                    for (int ay = 0; ay < 2; ++ay)
                        for (int ax = 0; ax < 3; ++ax)
                            ux += cvx[ax + 3 * ay] * qc.s2x.v(ex, qx, ax) * qc.s1y.v(ey, qy, ay);
                    for (int ay = 0; ay < 3; ++ay)
                        for (int ax = 0; ax < 2; ++ax)
                            uy += cvy[ax + 2 * ay] * qc.s1x.v(ex, qx, ax) * qc.s2y.v(ey, qy, ay);
                    cmax = std::max(cmax, std::sqrt(ux * ux * qc.gxx + uy * uy * qc.gyy));
                }
        }
    return dt * cmax;
}

double Stepper::controller_dt(double dt, double cfl_now, double cfl_target, double kp,
                              double dt_min, double dt_max, double growth) {
    if (cfl_target <= 0.0) return std::clamp(dt, dt_min, dt_max);
    if (cfl_now <= 0.0) return dt_max;
    double next = dt * std::pow(cfl_target / cfl_now, kp);
    // ramp gently out of near-rest states; the constraints need the previous
    // velocity as a lever, so consecutive steps must stay comparable in size
    if (growth > 0.0) next = std::min(next, growth * dt);
    return std::clamp(next, dt_min, dt_max);
}

std::vector<double> dambreak_levelset(const MixedSpaces& sp, double cw, double ch) {
    std::vector<double> phi(sp.dim_p());
    for (int j = 0; j < sp.press.nby; ++j)
        for (int i = 0; i < sp.press.nbx; ++i) {
            const double x = sp.x0 + i * sp.hx;
            const double y = sp.y0 + j * sp.hy;
            double d;
            const double dx = cw - x, dy = ch - y; // positive inside the column
            if (dx >= 0.0 && dy >= 0.0) d = std::min(dx, dy);
            else if (dx < 0.0 && dy < 0.0) d = -std::hypot(dx, dy);
            else d = std::min(dx, dy);
            phi[sp.press.index(i, j)] = d;
        }
    return phi;
}

} // namespace tf2
