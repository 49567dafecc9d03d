#pragma once

#include "tf2/assembly.hpp"
#include "tf2/levelset.hpp"
#include "tf2/state.hpp"

#include <array>
#include <vector>

namespace tf2 {

// local residual at one quadrature point, rows: 0..5 vx, 6..11 vy, 12..15 p,
// 16..19 level set, then 4 per active perturbation
void point_residual(FormKind kind, const PointContext& q, double dt, const FluidParams& par,
                    int n_slots, double* rloc);

// local quasi-Newton Jacobian at one quadrature point, row-major nloc x nloc
void point_jacobian(FormKind kind, const PointContext& q, double dt, const FluidParams& par,
                    int n_slots, int nloc, double* jloc);

// global constraint functionals evaluated at the composed iterate
std::array<double, 3> assemble_h(const MixedSpaces& sp, const SystemLayout& layout,
                                 const QuadCache& qc, const State& old_state, const State& iter,
                                 const FrozenAux& aux, double dt, const FluidParams& par);

// constraint variation vectors tested against the scalar basis
std::array<std::vector<double>, 3> assemble_dh(const MixedSpaces& sp, const SystemLayout& layout,
                                               const QuadCache& qc, const State& old_state,
                                               const State& iter, const FrozenAux& aux,
                                               double dt, const FluidParams& par);

// Newton system in the multipliers: values h and exact derivatives dh_j/dlambda_i
struct LambdaSystem {
    std::array<double, 3> h = {0, 0, 0};      // all three functionals, active or not
    std::array<double, 9> jac = {0, 0, 0, 0, 0, 0, 0, 0, 0}; // jac[j*3+i]; columns of inactive multipliers stay zero
};

LambdaSystem assemble_lambda_system(const MixedSpaces& sp, const SystemLayout& layout,
                                    const QuadCache& qc, const State& old_state,
                                    const State& iter, const FrozenAux& aux,
                                    const std::array<double, 3>& lambda, double dt,
                                    const FluidParams& par);

} // namespace tf2
