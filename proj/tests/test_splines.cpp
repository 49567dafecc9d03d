#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tf2/splines.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace tf2;

TEST_CASE("open knot vector layout") {
    auto kv = make_open_knot_vector(5, 2, {0.0, 1.0});
    CHECK(kv.degree == 2);
    CHECK(kv.n_elems == 5);
    CHECK(kv.basis_count() == 7); // n + degree for single-multiplicity interior knots
    CHECK(kv.knots.front() == 0.0);
    CHECK(kv.knots.back() == 1.0);
    // clamped ends: degree+1 repeats
    for (int i = 0; i < 3; ++i) {
        CHECK(kv.knots[i] == 0.0);
        CHECK(kv.knots[kv.knots.size() - 1 - i] == 1.0);
    }
    CHECK(kv.knots[3] == doctest::Approx(0.2));
}

TEST_CASE("find_span brackets the query point") {
    auto kv = make_open_knot_vector(7, 2, {-1.0, 3.0});
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        double x = U(rng);
        int s = kv.find_span(x);
        CHECK(kv.knots[s] <= x);
        CHECK(x <= kv.knots[s + 1]);
    }
    CHECK(kv.find_span(3.0) == kv.elem_span(6)); // right end lands in the last span
    CHECK(kv.find_span(-1.0) == kv.elem_span(0));
}

TEST_CASE("basis partition of unity and nonnegativity") {
    for (int deg : {1, 2, 3}) {
        auto kv = make_open_knot_vector(6, deg, {0.0, 2.0});
        std::mt19937 rng(7 + deg);
        std::uniform_real_distribution<double> U(0.0, 2.0);
        double val[8], der[8];
        for (int t = 0; t < 100; ++t) {
            double x = U(rng);
            kv.eval_basis(x, val, der);
            double sv = 0, sd = 0;
            for (int f = 0; f <= deg; ++f) {
                CHECK(val[f] >= -1e-14);
                sv += val[f];
                sd += der[f];
            }
            CHECK(sv == doctest::Approx(1.0).epsilon(1e-13));
            CHECK(std::abs(sd) < 1e-11); // derivative of a constant
        }
    }
}

TEST_CASE("basis derivatives match finite differences") {
    auto kv = make_open_knot_vector(5, 2, {0.0, 1.0});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    double vp[4], vm[4], v0[4], d0[4], dummy[4];
    for (int t = 0; t < 50; ++t) {
        double x = U(rng);
        const double h = 1e-6;
        // keep the stencil inside one span so the active set is fixed
        int s0 = kv.find_span(x);
        if (kv.find_span(x - h) != s0 || kv.find_span(x + h) != s0) continue;
        int a = kv.eval_basis(x, v0, d0);
        int am = kv.eval_basis(x - h, vm, dummy);
        int ap = kv.eval_basis(x + h, vp, dummy);
        REQUIRE(a == am);
        REQUIRE(a == ap);
        for (int f = 0; f < 3; ++f) {
            double fd = (vp[f] - vm[f]) / (2 * h);
            CHECK(d0[f] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("spline reproduces polynomials up to its degree") {
    // interpolate x and x^2 exactly with a quadratic spline via Greville-style
    // least squares: instead solve small collocation at distinct points
    auto kv = make_open_knot_vector(4, 2, {0.0, 1.0});
    int n = kv.basis_count();
    // coefficients for the linear function x on a quadratic open knot basis:
    // Greville abscissae t* = (t_{i+1}+t_{i+2})/2
    std::vector<double> cx(n);
    for (int i = 0; i < n; ++i)
        cx[i] = 0.5 * (kv.knots[i + 1] + kv.knots[i + 2]);
    double val[3], der[3];
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 60; ++t) {
        double x = U(rng);
        int a = kv.eval_basis(x, val, der);
        double s = 0, sd = 0;
        for (int f = 0; f < 3; ++f) {
            s += cx[a + f] * val[f];
            sd += cx[a + f] * der[f];
        }
        CHECK(s == doctest::Approx(x).epsilon(1e-13));
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("derivative coefficients give the exact derivative spline") {
    auto kv = make_open_knot_vector(6, 2, {0.0, 3.0});
    int n = kv.basis_count();
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> c(n);
    for (double& v : c) v = U(rng);
    auto dc = derivative_coefficients_1d(kv, c);
    auto kd = make_open_knot_vector(6, 1, {0.0, 3.0});
    REQUIRE((int)dc.size() == kd.basis_count());
    double val[3], der[3], dval[2], dder[2];
    std::uniform_real_distribution<double> X(0.0, 3.0);
    for (int t = 0; t < 100; ++t) {
        double x = X(rng);
        int a = kv.eval_basis(x, val, der);
        int ad = kd.eval_basis(x, dval, dder);
        double d1 = 0, d2 = 0;
        for (int f = 0; f < 3; ++f) d1 += c[a + f] * der[f];
        for (int f = 0; f < 2; ++f) d2 += dc[ad + f] * dval[f];
        CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
    }
}

TEST_CASE("integration weights integrate each basis function") {
    auto kv = make_open_knot_vector(5, 2, {0.0, 2.0});
    auto w = integration_weights_1d(kv);
    REQUIRE((int)w.size() == kv.basis_count());
    // sum = measure of the interval (partition of unity integrated)
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
    // brute-force quadrature of each basis function with many Simpson panels
    for (int i = 0; i < kv.basis_count(); ++i) {
        const int N = 4000;
        double h = 2.0 / N, acc = 0.0;
        double val[3], der[3];
        auto bi = [&](double x) {
            int a = kv.eval_basis(x, val, der);
            return (i >= a && i < a + 3) ? val[i - a] : 0.0;
        };
        for (int k = 0; k < N; ++k) {
            double x0 = k * h;
            acc += h / 6.0 * (bi(x0) + 4.0 * bi(x0 + 0.5 * h) + bi(x0 + h));
        }
        CHECK(w[i] == doctest::Approx(acc).epsilon(1e-9));
    }
}

TEST_CASE("tensor space evaluation matches the univariate factors") {
    auto kvx = make_open_knot_vector(4, 2, {0.0, 2.0});
    auto kvy = make_open_knot_vector(3, 1, {0.0, 1.0});
    auto sp = make_spline_space(kvx, kvy);
    CHECK(sp.dof_count() == kvx.basis_count() * kvy.basis_count());
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> c(sp.dof_count());
    for (double& v : c) v = U(rng);

    std::uniform_real_distribution<double> X(0.0, 2.0), Y(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        double x = X(rng), y = Y(rng);
        double v, g[2];
        sp.eval(c, x, y, &v, g);
        // manual tensor product
        double bx[3], dbx[3], by[2], dby[2];
        int ax = kvx.eval_basis(x, bx, dbx);
        int ay = kvy.eval_basis(y, by, dby);
        double vv = 0, gx = 0, gy = 0;
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 3; ++i) {
                double cf = c[sp.index(ax + i, ay + j)];
                vv += cf * bx[i] * by[j];
                gx += cf * dbx[i] * by[j];
                gy += cf * bx[i] * dby[j];
            }
        CHECK(v == doctest::Approx(vv).epsilon(1e-13));
        CHECK(g[0] == doctest::Approx(gx).epsilon(1e-12));
        CHECK(g[1] == doctest::Approx(gy).epsilon(1e-12));
    }
}

TEST_CASE("mixed spaces have the compatible dimensions") {
    auto sp = build_mixed_spaces(8, 5, 0.0, 0.0, 2.0, 1.0);
    CHECK(sp.dim_vx() == (8 + 2) * (5 + 1));
    CHECK(sp.dim_vy() == (8 + 1) * (5 + 2));
    CHECK(sp.dim_p() == (8 + 1) * (5 + 1));
    CHECK(sp.hx == doctest::Approx(0.25));
    CHECK(sp.hy == doctest::Approx(0.2));
}

TEST_CASE("divergence of a discrete velocity is exactly a pressure-space field") {
    auto sp = build_mixed_spaces(5, 4, 0.0, 0.0, 1.3, 0.9);
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> u(sp.dim_u());
    for (double& v : u) v = U(rng);
    auto dc = divergence_coefficients(sp, u);
    REQUIRE((int)dc.size() == sp.dim_p());

    std::vector<double> ux(u.begin(), u.begin() + sp.dim_vx());
    std::vector<double> uy(u.begin() + sp.dim_vx(), u.end());
    std::uniform_real_distribution<double> X(0.0, 1.3), Y(0.0, 0.9);
    for (int t = 0; t < 80; ++t) {
        double x = X(rng), y = Y(rng);
        double vx, gx[2], vy, gy[2], dv, dg[2];
        sp.vx.eval(ux, x, y, &vx, gx);
        sp.vy.eval(uy, x, y, &vy, gy);
        sp.press.eval(dc, x, y, &dv, dg);
        CHECK(dv == doctest::Approx(gx[0] + gy[1]).epsilon(1e-11));
    }
}

TEST_CASE("wall-normal dof lists pick exactly the boundary layers") {
    auto sp = build_mixed_spaces(4, 3, 0.0, 0.0, 1.0, 1.0);
    auto bnd = boundary_normal_dofs(sp);
    // vx: first and last column of a (nx+2) x (ny+1) grid
    CHECK((int)bnd.vx.size() == 2 * (3 + 1));
    CHECK((int)bnd.vy.size() == 2 * (4 + 1));
    CHECK((int)bnd.combined.size() == (int)bnd.vx.size() + (int)bnd.vy.size());
    for (int r : bnd.vx) {
        int i = r % sp.vx.nbx;
        CHECK((i == 0 || i == sp.vx.nbx - 1));
    }
    for (int r : bnd.vy) {
        int j = r / sp.vy.nbx;
        CHECK((j == 0 || j == sp.vy.nby - 1));
    }
    // zeroing them forces u.n = 0 on the whole boundary
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> u(sp.dim_u());
    for (double& v : u) v = U(rng);
    for (int r : bnd.combined) u[r] = 0.0;
    std::vector<double> ux(u.begin(), u.begin() + sp.dim_vx());
    std::vector<double> uy(u.begin() + sp.dim_vx(), u.end());
    for (int t = 0; t < 30; ++t) {
        double s = (t + 0.5) / 30.0;
        double v, g[2];
        sp.vx.eval(ux, 0.0, s, &v, g);
        CHECK(std::abs(v) < 1e-14);
        sp.vx.eval(ux, 1.0, s, &v, g);
        CHECK(std::abs(v) < 1e-14);
        sp.vy.eval(uy, s, 0.0, &v, g);
        CHECK(std::abs(v) < 1e-14);
        sp.vy.eval(uy, s, 1.0, &v, g);
        CHECK(std::abs(v) < 1e-14);
    }
}
