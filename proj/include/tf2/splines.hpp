#pragma once

#include <array>
#include <vector>

namespace tf2 {

// Open (clamped) knot vector on one coordinate direction.
struct KnotVector {
    std::vector<double> knots;  // full knot sequence, ends repeated degree+1 times
    int degree = 1;
    int n_elems = 0;            // number of nonempty spans

    int basis_count() const { return (int)knots.size() - degree - 1; }
    double xmin() const { return knots.front(); }
    double xmax() const { return knots.back(); }

    // index s with knots[s] <= x < knots[s+1] (last span closed on the right)
    int find_span(double x) const;

    // element -> knot span start (uniform single-multiplicity layout: degree + e)
    int elem_span(int e) const { return degree + e; }
    int elem_first_basis(int e) const { return e; }

    // values and first derivatives of the degree+1 basis functions active at x.
    // returns the first active global basis index.
    int eval_basis(double x, double* val, double* der) const;
};

// n_elems uniform spans on [interval.first, interval.second]; interior knots
// repeated interior_multiplicity times (continuity C^(degree-multiplicity)).
KnotVector make_open_knot_vector(int n_elems, int degree,
                                 std::pair<double, double> interval,
                                 int interior_multiplicity = 1);

// coefficients of d/dx of a spline given by coeffs on kv, expressed in the
// degree-1 spline space on the same breakpoints
std::vector<double> derivative_coefficients_1d(const KnotVector& kv,
                                               const std::vector<double>& coeffs);

// integral of each basis function: (t_{i+p+1} - t_i) / (p+1)
std::vector<double> integration_weights_1d(const KnotVector& kv);

// Tensor-product scalar space with lexicographic numbering (i + j*nbx).
struct SplineSpace {
    KnotVector kvx, kvy;
    int nbx = 0, nby = 0;  // univariate basis counts

    int dof_count() const { return nbx * nby; }
    int index(int i, int j) const { return i + j * nbx; }

    // evaluate a coefficient field: value and physical gradient at (x, y)
    void eval(const std::vector<double>& coeffs, double x, double y,
              double* value, double* grad) const;
};

SplineSpace make_spline_space(const KnotVector& kvx, const KnotVector& kvy);

// Divergence-conforming pair on a uniform Cartesian mesh:
//   v_x in S2(x) x S1(y), v_y in S1(x) x S2(y), pressure/levelset bilinear.
// div of any discrete velocity then lies exactly in the pressure space.
struct MixedSpaces {
    int nx = 0, ny = 0;
    double x0 = 0, y0 = 0, hx = 0, hy = 0;
    double width = 0, height = 0;

    SplineSpace vx, vy, press, levelset;  // alpha shares the levelset space

    int n_elems() const { return nx * ny; }
    int dim_vx() const { return vx.dof_count(); }
    int dim_vy() const { return vy.dof_count(); }
    int dim_u() const { return dim_vx() + dim_vy(); }
    int dim_p() const { return press.dof_count(); }

    double elem_x0(int ex) const { return x0 + ex * hx; }
    double elem_y0(int ey) const { return y0 + ey * hy; }
};

MixedSpaces build_mixed_spaces(int nx, int ny, double x0, double y0,
                               double width, double height);

// v_x DOFs supported on the left/right walls and v_y DOFs on bottom/top:
// the first and last index layers of the open knot bases. Constraining them
// to zero gives u.n = 0 on the whole boundary. vy indices are local to vy.
struct BoundaryNormalDofs {
    std::vector<int> vx;
    std::vector<int> vy;
    std::vector<int> combined;  // vy offset by dim_vx, sorted
};

BoundaryNormalDofs boundary_normal_dofs(const MixedSpaces& spaces);

// coefficients of div(u) in the pressure space; u is [vx-block | vy-block]
std::vector<double> divergence_coefficients(const MixedSpaces& spaces,
                                            const std::vector<double>& u);

} // namespace tf2
