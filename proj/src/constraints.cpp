#include "tf2/constraints.hpp"
#include "tf2/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tf2 {

LambdaResult solve_lambda(const MixedSpaces& sp, const SystemLayout& layout, const QuadCache& qc,
                          const State& old_state, const State& iter, const FrozenAux& aux,
                          double dt, const FluidParams& par, const LambdaConfig& cfg) {
    LambdaResult res;
    res.lambda = iter.lambda;

    std::vector<int> act;
    for (int s = 0; s < layout.n_slots; ++s) act.push_back(layout.slot_constraint[s]);

    if (act.empty()) {
        const auto h = assemble_h(sp, layout, qc, old_state, iter, aux, dt, par);
        res.h = h;
        res.converged = true;
        return res;
    }

    // field-perturbation scale of each slot in band units: max over dofs of |pert|/alpha
    double pscale[3] = {0.0, 0.0, 0.0};
    for (int s = 0; s < layout.n_slots; ++s) {
        const int c = layout.slot_constraint[s];
        const auto& pc = iter.phi_pert[c];
        const int n = (int)pc.size();
        double m = 0.0;
        for (int d = 0; d < n; ++d) {
            const double a = std::max(d < (int)aux.alpha_new.size() ? aux.alpha_new[d] : 0.0,
                                      kAlphaFloor);
            m = std::max(m, std::abs(pc[d]) / a);
        }
        pscale[c] = m;
    }

    for (int it = 0; it < cfg.max_iters; ++it) {
        res.iters = it;
        const LambdaSystem sys = assemble_lambda_system(sp, layout, qc, old_state, iter, aux,
                                                        res.lambda, dt, par);
        res.h = sys.h;
        double h2 = 0.0;
        for (int c : act) h2 += sys.h[c] * sys.h[c];
        if (std::sqrt(h2) <= cfg.eps2) {
            res.converged = true;
            return res;
        }
        if (act.empty()) return res; // everything dropped but h still out of tolerance

        // update only the constraints that are actually violated; a satisfied one keeps
        // its multiplier frozen so a near-degenerate direction cannot blow the step up
        std::vector<int> upd;
        for (int c : act) {
            if (std::abs(sys.h[c]) > 0.3 * cfg.eps2) upd.push_back(c);
        }
        if (upd.empty()) { // all below threshold yet the norm check missed: accept
            res.converged = true;
            return res;
        }

        const int m = (int)upd.size();
        std::vector<double> J(m * m), rhs(m);
        for (int j = 0; j < m; ++j) {
            rhs[j] = -sys.h[upd[j]];
            for (int i = 0; i < m; ++i) J[j * m + i] = sys.jac[upd[j] * 3 + upd[i]];
        }
        // rows carry different physical scales (mass rate vs power), so equilibrate
        // before conditioning or an enforceable constraint looks singular near rest
        int dead = -1;
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s = std::max(s, std::abs(J[j * m + i]));
            if (s == 0.0) {
                dead = j;
                break;
            }
            for (int i = 0; i < m; ++i) J[j * m + i] /= s;
            rhs[j] /= s;
        }
        if (dead >= 0) {
            const int c = upd[dead];
            res.dropped[c] = true;
            act.erase(std::find(act.begin(), act.end(), c));
            continue;
        }
        const double cond = dense_cond_small(m, J.data());
        if (cond > cfg.cond_limit) {
            // drop the most degenerate constraint and keep going
            int worst = 0;
            double dmin = std::abs(J[0]);
            for (int j = 1; j < m; ++j) {
                const double d = std::abs(J[j * m + j]);
                if (d < dmin) {
                    dmin = d;
                    worst = j;
                }
            }
            const int c = upd[worst];
            res.dropped[c] = true;
            act.erase(std::find(act.begin(), act.end(), c));
            continue;
        }
        if (!dense_solve_small(m, J.data(), rhs.data())) {
            const int c = upd[0];
            res.dropped[c] = true;
            act.erase(std::find(act.begin(), act.end(), c));
            continue;
        }
        // trust region: the composed correction must stay a fraction of the band width
        double damp = 1.0;
        for (int j = 0; j < m; ++j) {
            const double move = std::abs(rhs[j]) * pscale[upd[j]];
            if (move > cfg.trust) damp = std::min(damp, cfg.trust / move);
        }
        for (int j = 0; j < m; ++j) res.lambda[upd[j]] += damp * rhs[j];
    }
    res.iters = cfg.max_iters;
    return res;
}

} // namespace tf2
