#include "tf2/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tf2 {

KnotVector make_open_knot_vector(int n_elems, int degree,
                                 std::pair<double, double> interval,
                                 int interior_multiplicity) {
    if (n_elems < 1)
        throw std::runtime_error("make_open_knot_vector: need at least one element");
    if (degree < 1)
        throw std::runtime_error("make_open_knot_vector: degree must be >= 1");
    if (interior_multiplicity < 1 || interior_multiplicity > degree)
        throw std::runtime_error("make_open_knot_vector: interior multiplicity must be in [1, degree]");
    double a = interval.first, b = interval.second;
    if (!(b > a))
        throw std::runtime_error("make_open_knot_vector: degenerate interval");

    KnotVector kv;
    kv.degree = degree;
    kv.n_elems = n_elems;
    double h = (b - a) / n_elems;
    for (int k = 0; k <= degree; ++k) kv.knots.push_back(a);
    for (int e = 1; e < n_elems; ++e)
        for (int m = 0; m < interior_multiplicity; ++m)
            kv.knots.push_back(a + e * h);
    for (int k = 0; k <= degree; ++k) kv.knots.push_back(b);
    return kv;
}

int KnotVector::find_span(double x) const {
    if (x < xmin() || x > xmax())
        throw std::runtime_error("KnotVector::find_span: point outside domain");
    int lo = degree;
    int hi = (int)knots.size() - degree - 2;  // last valid span start
    if (x >= knots[hi]) return hi;
    // binary search for knots[s] <= x < knots[s+1]
    while (lo < hi) {
        int mid = (lo + hi + 1) / 2;
        if (knots[mid] <= x) lo = mid; else hi = mid - 1;
    }
    return lo;
}

int KnotVector::eval_basis(double x, double* val, double* der) const {
    int s = find_span(x);
    int p = degree;
    // Cox-de Boor triangle up to degree p; keep the degree p-1 row for the
    // derivative formula  N'_{i,p} = p/(t_{i+p}-t_i) N_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) N_{i+1,p-1}
    double N[8];     // degree p row, p <= 7
    double Nm[8];    // degree p-1 row
    N[0] = 1.0;
    double left[8], right[8];
    for (int j = 1; j <= p; ++j) {
        for (int r = 0; r < j; ++r) {
            left[r] = x - knots[s + 1 - j + r];
            right[r] = knots[s + 1 + r] - x;
        }
        if (j == p)
            for (int r = 0; r < j; ++r) Nm[r] = N[r];
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            double denom = right[r] + left[r];
            double tmp = denom != 0.0 ? N[r] / denom : 0.0;
            N[r] = saved + right[r] * tmp;
            saved = left[r] * tmp;
        }
        N[j] = saved;
    }

    int first = s - p;
    for (int r = 0; r <= p; ++r) {
        val[r] = N[r];
        int i = first + r;
        double d = 0.0;
        if (r > 0) {
            double den = knots[i + p] - knots[i];
            if (den != 0.0) d += p * Nm[r - 1] / den;
        }
        if (r < p) {
            double den = knots[i + p + 1] - knots[i + 1];
            if (den != 0.0) d -= p * Nm[r] / den;
        }
        der[r] = d;
    }
    return first;
}

std::vector<double> derivative_coefficients_1d(const KnotVector& kv,
                                               const std::vector<double>& coeffs) {
    int p = kv.degree;
    int n = kv.basis_count();
    if ((int)coeffs.size() != n)
        throw std::runtime_error("derivative_coefficients_1d: size mismatch");
    // d/dx sum c_i N_{i,p} = sum_j d_j N_{j,p-1}, basis on knots[1..end-1]
    std::vector<double> d(n - 1);
    for (int j = 0; j < n - 1; ++j) {
        double den = kv.knots[j + p + 1] - kv.knots[j + 1];
        d[j] = den != 0.0 ? p * (coeffs[j + 1] - coeffs[j]) / den : 0.0;
    }
    return d;
}

std::vector<double> integration_weights_1d(const KnotVector& kv) {
    const int p = kv.degree;
    const int n = kv.basis_count();
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = (kv.knots[i + p + 1] - kv.knots[i]) / (p + 1);
    return w;
}

SplineSpace make_spline_space(const KnotVector& kvx, const KnotVector& kvy) {
    SplineSpace s;
    s.kvx = kvx;
    s.kvy = kvy;
    s.nbx = kvx.basis_count();
    s.nby = kvy.basis_count();
    return s;
}

void SplineSpace::eval(const std::vector<double>& coeffs, double x, double y,
                       double* value, double* grad) const {
    double bx[8], dbx[8], by[8], dby[8];
    int fx = kvx.eval_basis(x, bx, dbx);
    int fy = kvy.eval_basis(y, by, dby);
    double v = 0, gx = 0, gy = 0;
    for (int j = 0; j <= kvy.degree; ++j) {
        for (int i = 0; i <= kvx.degree; ++i) {
            double c = coeffs[index(fx + i, fy + j)];
            v += c * bx[i] * by[j];
            gx += c * dbx[i] * by[j];
            gy += c * bx[i] * dby[j];
        }
    }
    if (value) *value = v;
    if (grad) { grad[0] = gx; grad[1] = gy; }
}

MixedSpaces build_mixed_spaces(int nx, int ny, double x0, double y0,
                               double width, double height) {
    if (nx < 2 || ny < 2)
        throw std::runtime_error("build_mixed_spaces: need nx, ny >= 2");
    if (!(width > 0.0) || !(height > 0.0))
        throw std::runtime_error("build_mixed_spaces: domain must have positive size");
    MixedSpaces sp;
    sp.nx = nx; sp.ny = ny;
    sp.x0 = x0; sp.y0 = y0;
    sp.width = width; sp.height = height;
    sp.hx = width / nx; sp.hy = height / ny;

    KnotVector k2x = make_open_knot_vector(nx, 2, {x0, x0 + width});
    KnotVector k1x = make_open_knot_vector(nx, 1, {x0, x0 + width});
    KnotVector k2y = make_open_knot_vector(ny, 2, {y0, y0 + height});
    KnotVector k1y = make_open_knot_vector(ny, 1, {y0, y0 + height});

    sp.vx = make_spline_space(k2x, k1y);
    sp.vy = make_spline_space(k1x, k2y);
    sp.press = make_spline_space(k1x, k1y);
    sp.levelset = sp.press;
    return sp;
}

BoundaryNormalDofs boundary_normal_dofs(const MixedSpaces& sp) {
    BoundaryNormalDofs b;
    for (int j = 0; j < sp.vx.nby; ++j) {
        b.vx.push_back(sp.vx.index(0, j));
        b.vx.push_back(sp.vx.index(sp.vx.nbx - 1, j));
    }
    for (int i = 0; i < sp.vy.nbx; ++i) {
        b.vy.push_back(sp.vy.index(i, 0));
        b.vy.push_back(sp.vy.index(i, sp.vy.nby - 1));
    }
    std::sort(b.vx.begin(), b.vx.end());
    std::sort(b.vy.begin(), b.vy.end());
    b.combined = b.vx;
    for (int d : b.vy) b.combined.push_back(d + sp.dim_vx());
    std::sort(b.combined.begin(), b.combined.end());
    return b;
}

std::vector<double> divergence_coefficients(const MixedSpaces& sp,
                                            const std::vector<double>& u) {
    int nvx = sp.dim_vx();
    std::vector<double> d(sp.dim_p(), 0.0);
    // d/dx of the vx block, one y-line at a time
    std::vector<double> line(sp.vx.nbx);
    for (int j = 0; j < sp.vx.nby; ++j) {
        for (int i = 0; i < sp.vx.nbx; ++i) line[i] = u[sp.vx.index(i, j)];
        std::vector<double> dl = derivative_coefficients_1d(sp.vx.kvx, line);
        for (int i = 0; i < (int)dl.size(); ++i) d[sp.press.index(i, j)] += dl[i];
    }
    // d/dy of the vy block, one x-line at a time
    std::vector<double> col(sp.vy.nby);
    for (int i = 0; i < sp.vy.nbx; ++i) {
        for (int j = 0; j < sp.vy.nby; ++j) col[j] = u[nvx + sp.vy.index(i, j)];
        std::vector<double> dc = derivative_coefficients_1d(sp.vy.kvy, col);
        for (int j = 0; j < (int)dc.size(); ++j) d[sp.press.index(i, j)] += dc[j];
    }
    return d;
}

} // namespace tf2
