#pragma once

#include "tf2/assembly.hpp"
#include "tf2/levelset.hpp"
#include "tf2/state.hpp"

#include <vector>

namespace tf2 {

struct EnergyReport {
    double kin = 0.0, pot = 0.0, mass = 0.0;
};

// quadrature of 1/2 rho u.u, -rho x.g and rho over the domain
EnergyReport compute_energies(const MixedSpaces& sp, const QuadCache& qc, const State& state,
                              const FluidParams& par);

// 2 mu^{n+1/2} grad_s(u^{n+1/2}) : grad_s(u^{n+1/2})
double compute_dissipation(const MixedSpaces& sp, const QuadCache& qc, const State& old_state,
                           const State& new_state, const FluidParams& par);

struct RatePair {
    double kin = 0.0, pot = 0.0;
};

// plain energy differences over the step
RatePair actual_rates(const EnergyReport& before, const EnergyReport& after, double dt);

// the rates the discrete momentum equation implies: inertial terms tested
// against the midpoint velocity, and minus the gravity power
RatePair weak_rates(const MixedSpaces& sp, const QuadCache& qc, const State& old_state,
                    const State& new_state, double dt, const FluidParams& par);

struct DivNorms {
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
};

// norms of div(u) sampled at the quadrature points
DivNorms divergence_norms(const MixedSpaces& sp, const QuadCache& qc,
                          const std::vector<double>& u);

} // namespace tf2
