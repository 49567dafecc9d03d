// timing harness for the serial vs threaded assembly paths and spmv
#include "tf2/assembly.hpp"
#include "tf2/stepper.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

using namespace tf2;

namespace {

double seconds() {
    using clk = std::chrono::steady_clock;
    return std::chrono::duration<double>(clk::now().time_since_epoch()).count();
}

template <class F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = seconds();
        f();
        best = std::min(best, seconds() - t0);
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    int nx = 80, ny = 40, reps = 5;
    if (argc > 1) nx = std::atoi(argv[1]);
    if (argc > 2) ny = std::atoi(argv[2]);
    if (argc > 3) reps = std::atoi(argv[3]);

    const MixedSpaces sp = build_mixed_spaces(nx, ny, 0.0, 0.0, 0.584, 0.3504);
    FluidParams par;
    par.rho0 = 1.0;
    par.rho1 = 1000.0;
    par.mu0 = par.mu1 = 2.0;
    par.gy = -9.81;
    par.eps_smooth = 1.0;

    State sn = make_state(sp);
    sn.phi = dambreak_levelset(sp, 0.146, 0.292);
    sn.alpha = solve_alpha_projection(sp, sn.phi, par.eps_smooth);

    State sk = sn;
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    for (auto& v : sk.u) v = dist(rng);
    for (auto& v : sk.phi) v += 0.01 * dist(rng);
    for (auto& pert : sk.phi_pert)
        for (auto& v : pert) v = 0.01 * dist(rng);
    sk.lambda = {0.3, -0.2, 0.1};
    sk.alpha = solve_alpha_projection(sp, sk.phi, par.eps_smooth);

    const double dt = 1e-3;
    Assembler asmb(sp, FormKind::EnergyCorrected, 3);
    const FrozenAux aux = make_frozen_aux(sp, FormKind::EnergyCorrected, sn, sk, dt, par, 3);

    std::printf("mesh %dx%d, system size %d, best of %d\n", nx, ny, asmb.layout().total, reps);

    std::vector<double> r_ser, r_par;
    const double t_rs = best_of(reps, [&] { asmb.residual(sn, sk, aux, dt, par, true, false, r_ser); });
    const double t_rp = best_of(reps, [&] { asmb.residual(sn, sk, aux, dt, par, true, true, r_par); });
    bool same = r_ser == r_par;
    std::printf("residual  serial %8.3f ms  threaded %8.3f ms  speedup %5.2fx  bitwise %s\n",
                1e3 * t_rs, 1e3 * t_rp, t_rs / t_rp, same ? "yes" : "NO");

    const double t_js = best_of(reps, [&] { asmb.jacobian(sn, sk, aux, dt, par, true, false); });
    const std::vector<double> j_ser = asmb.matrix().vals;
    const double t_jp = best_of(reps, [&] { asmb.jacobian(sn, sk, aux, dt, par, true, true); });
    same = j_ser == asmb.matrix().vals;
    std::printf("jacobian  serial %8.3f ms  threaded %8.3f ms  speedup %5.2fx  bitwise %s\n",
                1e3 * t_js, 1e3 * t_jp, t_js / t_jp, same ? "yes" : "NO");

    const SparseMatrix& A = asmb.matrix();
    std::vector<double> x(A.n_rows, 1.0), y(A.n_rows);
    const double t_mv = best_of(reps, [&] {
        for (int i = 0; i < 50; ++i) spmv(A, x, y);
    });
    const double gf = 2.0 * 50.0 * A.vals.size() / t_mv * 1e-9;
    std::printf("spmv      %8.3f ms per 50, %.2f GFlop/s, nnz %zu\n", 1e3 * t_mv, gf,
                A.vals.size());
    return 0;
}
