#pragma once

#include "tf2/levelset.hpp"
#include "tf2/quadrature.hpp"
#include "tf2/sparse.hpp"
#include "tf2/splines.hpp"
#include "tf2/state.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace tf2 {

// 1d basis values/derivatives tabulated per element and quadrature point
struct BasisTable1D {
    int n_elems = 0, n_q = 0, n_fun = 0; // n_fun = degree + 1
    std::vector<double> val, der;        // [(e * n_q + q) * n_fun + f]
    std::vector<double> pts;             // physical coordinate of each point, [e * n_q + q]
    double v(int e, int q, int f) const { return val[(e * n_q + q) * n_fun + f]; }
    double d(int e, int q, int f) const { return der[(e * n_q + q) * n_fun + f]; }
    double pt(int e, int q) const { return pts[e * n_q + q]; }
};

BasisTable1D tabulate_basis(const KnotVector& kv, const QuadratureRule& rule);

struct QuadCache {
    QuadratureRule rule;
    BasisTable1D s2x, s1x, s2y, s1y; // quadratic/linear in each direction
    double jac = 0.0;                // hx * hy / 4, parametric-to-physical weight factor
    double hx = 0.0, hy = 0.0;
    double gxx = 0.0, gyy = 0.0;     // element metric used by the stabilization parameter
};

QuadCache make_quad_cache(const MixedSpaces& spaces, int order);

struct AssemblyError : std::runtime_error {
    int element = -1, point = -1;
    double x = 0.0, y = 0.0;
    AssemblyError(const std::string& msg, int e, int q, double px, double py);
};

// per-nonlinear-iteration frozen data: stabilization velocity, redistancing
// field of the current iterate, and the assembled constraint variation vectors
struct FrozenAux {
    std::vector<double> alpha_new;
    std::vector<double> tau_u; // combined velocity coefficients used for the stabilization parameter
    std::array<std::vector<double>, 3> dh;
};

// local coefficient gathers for one element
struct ElementContext {
    int ex = 0, ey = 0;
    double x0e = 0.0, y0e = 0.0;
    double cvx_n[6], cvx_k[6], cvy_n[6], cvy_k[6];
    double ctvx[6], ctvy[6];
    double cp[4];
    double cphi_n[4], cphi0[4];
    double cpert[3][4]; // by slot
    double can[4], cak[4];
    double cdphi[4], cdal[4]; // composed-minus-old coefficient differences
    double lambda[3];
    int n_slots = 0;
};

// everything evaluated at one quadrature point
struct PointContext {
    double x = 0.0, y = 0.0, w = 0.0;
    double vxN[6], vxNx[6], vxNy[6];
    double vyN[6], vyNx[6], vyNy[6];
    double pN[4], pNx[4], pNy[4];
    double ux_n = 0, uy_n = 0, ux_k = 0, uy_k = 0;
    double gux_n[2], guy_n[2], gux_k[2], guy_k[2];
    double press = 0;
    double phi_n = 0, phi_k = 0; // phi_k is the unperturbed iterate
    double gphi_n[2], gphi_k[2];
    double phi_c = 0; // iterate composed with the multiplier-weighted perturbations
    double pert[3];
    double gpert[3][2];
    double alpha_n = 0, alpha_k = 0;
    double tau = 0;
    double tux = 0, tuy = 0; // frozen stabilization velocity, also advects the perturbations
    PointProps pr_n, pr_k;
    double rho_diff = 0; // pr_k.rho - pr_n.rho without the catastrophic cancellation
    double uxm = 0, uym = 0;
    double guxm[2], guym[2];
    double rhom = 0, mum = 0;
    double gphim[2];
};

void load_element(ElementContext& ctx, const MixedSpaces& sp, const SystemLayout& layout,
                  int ex, int ey, const State& old_state, const State& iter,
                  const FrozenAux& aux);

// returns false if any evaluated quantity is not finite
bool eval_point(PointContext& out, const ElementContext& ctx, const QuadCache& qc,
                const MixedSpaces& sp, int k, double dt, const FluidParams& par);

// cached sparsity, slot tables and element buffers for one mesh + formulation
class Assembler {
public:
    Assembler(const MixedSpaces& spaces, FormKind kind, int quad_order);

    const SystemLayout& layout() const { return layout_; }
    const MixedSpaces& spaces() const { return *spaces_; }
    const QuadCache& quad() const { return quad_; }
    SparseMatrix& matrix() { return jac_; }
    const SparseMatrix& matrix() const { return jac_; }

    // residual of the coupled system at the given iterate; out is resized
    void residual(const State& old_state, const State& iter, const FrozenAux& aux,
                  double dt, const FluidParams& par, bool apply_bc, bool parallel,
                  std::vector<double>& out);

    // fills matrix() with the quasi-Newton Jacobian
    void jacobian(const State& old_state, const State& iter, const FrozenAux& aux,
                  double dt, const FluidParams& par, bool apply_bc, bool parallel);

    const BoundaryNormalDofs& boundary() const { return bnd_; }

private:
    void build_pattern();
    void build_slot_table();
    int local_to_global(int ex, int ey, int l, int& blk) const;
    void gather_vector(std::vector<double>& out) const;
    void gather_matrix();

    const MixedSpaces* spaces_;
    SystemLayout layout_;
    QuadCache quad_;
    SparseMatrix jac_;
    BoundaryNormalDofs bnd_;
    int nloc_ = 0;
    std::vector<int> slot_table_;    // [e * nloc * nloc + lr * nloc + lc], -1 if uncoupled
    std::vector<double> elem_vec_;   // [e * nloc + lr]
    std::vector<double> elem_mat_;   // [e * nloc * nloc + ...]
};

// convenience wrappers that recompute the frozen data from the iterate itself
FrozenAux make_frozen_aux(const MixedSpaces& spaces, FormKind kind, const State& old_state,
                          const State& iter, double dt, const FluidParams& par, int quad_order);

std::vector<double> assemble_residual(const MixedSpaces& spaces, FormKind kind,
                                      const State& old_state, const State& iter,
                                      double dt, const FluidParams& par, int quad_order,
                                      bool apply_bc = true);

// global row index helpers for one scalar (bilinear) space
inline int scalar_index(const MixedSpaces& sp, int i, int j) { return sp.press.index(i, j); }

} // namespace tf2
