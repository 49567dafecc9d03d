#pragma once

#include "tf2/levelset.hpp"
#include "tf2/sparse.hpp"
#include "tf2/splines.hpp"

#include <array>
#include <vector>

namespace tf2 {

enum class FormKind { Conservative, EnergyCorrected, Convective };

// constraint indices: 0 mass, 1 kinetic energy, 2 potential energy
inline std::array<bool, 3> active_constraints(FormKind k) {
    switch (k) {
    case FormKind::Conservative: return {false, false, false};
    case FormKind::EnergyCorrected: return {true, true, true};
    case FormKind::Convective: return {true, false, false};
    }
    return {false, false, false};
}

struct State {
    std::vector<double> u;     // [vx block | vy block]
    std::vector<double> p;
    std::vector<double> phi;   // phi0 while iterating, composed field once accepted
    std::vector<double> alpha; // redistancing field the properties of phi were built with
    std::array<std::vector<double>, 3> phi_pert;
    std::array<double, 3> lambda = {0.0, 0.0, 0.0};
    double time = 0.0;
};

State make_state(const MixedSpaces& spaces);

// unknown ordering of the coupled system: [u_x | u_y | p | phi | active perturbations]
struct SystemLayout {
    FormKind kind = FormKind::Conservative;
    int dim_vx = 0, dim_vy = 0, dim_p = 0;
    int off_p = 0, off_phi = 0;
    std::array<int, 3> off_pert = {-1, -1, -1};  // by constraint index, -1 if inactive
    int n_slots = 0;                             // number of active perturbations
    std::array<int, 3> slot_constraint = {-1, -1, -1};
    int total = 0;
    BlockMap blocks;
};

SystemLayout make_layout(const MixedSpaces& spaces, FormKind kind);

} // namespace tf2
