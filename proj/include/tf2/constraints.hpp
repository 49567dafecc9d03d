#pragma once

#include "tf2/forms.hpp"

#include <array>

namespace tf2 {

struct LambdaConfig {
    double eps2 = 1e-12;      // convergence: sqrt(sum of active h^2) below this
    double cond_limit = 1e12; // drop constraints when the Newton matrix passes this
    double trust = 0.5;       // cap on |dlambda|*|pert|/alpha per update (band fractions)
    int max_iters = 50;
};

struct LambdaResult {
    std::array<double, 3> lambda = {0.0, 0.0, 0.0};
    std::array<double, 3> h = {0.0, 0.0, 0.0}; // values at the returned multipliers
    std::array<bool, 3> dropped = {false, false, false};
    int iters = 0;
    bool converged = false;
};

// Newton iteration on the multipliers only; fields and the frozen data stay fixed
LambdaResult solve_lambda(const MixedSpaces& sp, const SystemLayout& layout, const QuadCache& qc,
                          const State& old_state, const State& iter, const FrozenAux& aux,
                          double dt, const FluidParams& par, const LambdaConfig& cfg);

} // namespace tf2
