#pragma once

#include <vector>

namespace tf2 {

// Tensor-product Gauss-Legendre rules on the reference element [-1,1]^2.
// Order q per direction integrates polynomials of degree 2q-1 exactly.
struct QuadratureRule {
    int order = 0;                 // points per direction
    std::vector<double> xi;        // size order, 1d abscissae
    std::vector<double> wi;        // size order, 1d weights
    int npoints() const { return order * order; }
    // 2d point k = kx + order*ky
    double px(int k) const { return xi[k % order]; }
    double py(int k) const { return xi[k / order]; }
    double pw(int k) const { return wi[k % order] * wi[k / order]; }
};

// order in [1,5]; throws on anything else
QuadratureRule gauss_rule(int order);

} // namespace tf2
