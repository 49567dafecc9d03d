#pragma once

#include "tf2/assembly.hpp"
#include "tf2/constraints.hpp"
#include "tf2/krylov.hpp"
#include "tf2/levelset.hpp"
#include "tf2/state.hpp"

#include <array>
#include <vector>

namespace tf2 {

struct StepControl {
    double eps1 = 1e-3;        // nonlinear tolerance, relative to the first residual norm
    double eps1_abs = 1e-8;    // absolute residual floor that also counts as converged
    int max_global_iters = 30;
    int verbose = 0;           // 1: per-step summary, 2: per-iteration residuals
    int max_retries = 3;       // dt halvings on failure
    int quad_order = 3;
    bool parallel = true;
    bool clean_divergence = true;
    double div_target = 1e-11; // max-norm goal of the minimal-norm divergence correction
    KrylovConfig krylov;
    LambdaConfig lambda;
};

enum class StepStatus { Ok, NonlinearFailure, LinearFailure, ConstraintFailure, EvalFailure };

struct StepStats {
    int nonlinear_iters = 0;
    int krylov_iters = 0;
    int lambda_iters = 0;
    int cleanup_rounds = 0;
    double residual0 = 0.0, residual = 0.0;
    std::array<double, 3> h = {0.0, 0.0, 0.0};
    std::array<double, 3> lambda = {0.0, 0.0, 0.0};
    std::array<bool, 3> dropped = {false, false, false};
};

// midpoint-rule step of the coupled system with the multiplier updates and the
// post-convergence divergence correction
class Stepper {
public:
    Stepper(const MixedSpaces& spaces, FormKind kind, const FluidParams& par,
            const StepControl& ctl);

    StepStatus step(const State& old_state, double dt, State& out, StepStats& stats);

    // retries with halved dt on failure; dt_used reports the accepted size
    StepStatus advance(const State& old_state, double dt, double dt_min, State& out,
                       StepStats& stats, double& dt_used);

    const MixedSpaces& spaces() const { return asmb_.spaces(); }
    Assembler& assembler() { return asmb_; }
    const QuadCache& quad() const { return asmb_.quad(); }
    const FluidParams& params() const { return par_; }
    const StepControl& control() const { return ctl_; }
    const std::vector<double>& pressure_weights() const { return pweights_; }

    // CFL number dt * max_q sqrt(u . G u) over the quadrature points
    double compute_cfl(const std::vector<double>& u, double dt) const;

    static double controller_dt(double dt, double cfl_now, double cfl_target, double kp,
                                double dt_min, double dt_max, double growth = 2.0);

private:
    void build_divergence_map();
    void divergence_cleanup(const State& old_state, State& iter, StepStats& stats) const;

    FluidParams par_;
    StepControl ctl_;
    Assembler asmb_;
    AlphaProjector alpha_;
    SparseMatrix bdiv_;  // divergence map with wall-normal columns zeroed
    SparseMatrix ndiv_;  // bdiv bdiv^T, 5-point structure
    std::vector<double> pweights_;
};

// exact signed distance to the water column [0,cw]x[0,ch], positive inside,
// interpolated at the bilinear nodes
std::vector<double> dambreak_levelset(const MixedSpaces& spaces, double cw, double ch);

} // namespace tf2
