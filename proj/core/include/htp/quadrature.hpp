#ifndef HTP_QUADRATURE_HPP_
#define HTP_QUADRATURE_HPP_

#include <vector>

namespace htp {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// Gauss-Hermite rule for expectations under N(0, 1):
/// E[h(X)] ~ sum_i w_i h(x_i), weights summing to one.
QuadratureRule gauss_hermite_normal(int n);

}  // namespace htp

#endif  // HTP_QUADRATURE_HPP_
