#pragma once

#include "tf2/sparse.hpp"
#include "tf2/splines.hpp"

#include <vector>

namespace tf2 {

struct FluidParams {
    double rho0 = 1.0, rho1 = 1.0;   // kg/m^3
    double mu0 = 0.0, mu1 = 0.0;     // kg/(m s)
    double gx = 0.0, gy = 0.0;       // m/s^2
    double eps_smooth = 1.0;         // diffusion weight of the alpha projection
};

// 0 for phi_a <= -1, 1 for phi_a >= +1, sine blend in between (C^1 overall)
double smoothed_heaviside(double phi_alpha);

// derivative of the above: (pi/4) cos(pi phi_alpha / 2) on [-1,1], else 0
double smoothed_dirac(double phi_alpha);

struct PointProps {
    double rho, mu;
    double drho_dphi, dmu_dphi;  // chain rule through phi/alpha, alpha held fixed
};

// alpha must be positive (callers floor it first)
PointProps eval_props(double phi, double alpha, const FluidParams& p);

// rho(phi_k/alpha_k) - rho(phi_n/alpha_n) evaluated so that the result is accurate
// relative to its own (tiny) magnitude: the caller supplies dphi = phi_k - phi_n and
// dalpha = alpha_k - alpha_n formed from coefficient differences, and the Heaviside
// difference is taken with the sine subtraction identity instead of H(a) - H(b).
// Both alphas must be positive (floor them first; fold the floors into dalpha).
double rho_difference(double phi_k, double alpha_k, double phi_n, double alpha_n,
                      double dphi, double dalpha, const FluidParams& p);

// pointwise floor applied wherever alpha is consumed
constexpr double kAlphaFloor = 1e-8;

// tau = (4/dt^2 + u.G.u)^{-1/2} with G from metric_tensor
double supg_tau(double ux, double uy, double gxx, double gyy, double dt);

// parametric metric G = (dxi/dx)^T (dxi/dx) for the [-1,1]^2 reference element:
// diag((2/hx)^2, (2/hy)^2)
void metric_tensor(double hx, double hy, double* gxx, double* gyy);

// Redistancing projection: find alpha in the bilinear space with
//   (eta, alpha) + eps (grad_xi eta, grad_xi alpha) = (eta, |grad_xi phi|)
// where grad_xi = diag(hx/2, hy/2) grad_x. SPD system, solved with CG.
std::vector<double> solve_alpha_projection(const MixedSpaces& spaces,
                                           const std::vector<double>& phi,
                                           double eps_smooth,
                                           int quad_order = 3);

// same projection with the (mesh-constant) matrix assembled once
class AlphaProjector {
public:
    AlphaProjector(const MixedSpaces& spaces, double eps_smooth, int quad_order = 3);
    std::vector<double> solve(const std::vector<double>& phi) const;

private:
    const MixedSpaces* sp_;
    double eps_;
    int quad_order_;
    SparseMatrix mat_;
};

} // namespace tf2
