#include "tf2/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tf2 {

QuadratureRule gauss_rule(int order) {
    QuadratureRule r;
    r.order = order;
    switch (order) {
    case 1:
        r.xi = {0.0};
        r.wi = {2.0};
        break;
    case 2:
        r.xi = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
        r.wi = {1.0, 1.0};
        break;
    case 3:
        r.xi = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
        r.wi = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        break;
    case 4:
        r.xi = {-0.8611363115940526, -0.3399810435848563,
                0.3399810435848563, 0.8611363115940526};
        r.wi = {0.3478548451374538, 0.6521451548625461,
                0.6521451548625461, 0.3478548451374538};
        break;
    case 5:
        r.xi = {-0.9061798459386640, -0.5384693101056831, 0.0,
                0.5384693101056831, 0.9061798459386640};
        r.wi = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                0.4786286704993665, 0.2369268850561891};
        break;
    default:
        throw std::runtime_error("gauss_rule: unsupported order " + std::to_string(order));
    }
    return r;
}

} // namespace tf2
