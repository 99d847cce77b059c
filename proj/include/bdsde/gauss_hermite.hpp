#pragma once

#include <cstddef>
#include <vector>

namespace bdsde {

// Physicists' Gauss-Hermite rule: integral of exp(-x^2) f(x) dx is
// sum w_i f(x_i), exact for polynomials of degree 2*order - 1.
struct GaussHermiteRule {
  std::vector<double> nodes;    // symmetric, ascending
  std::vector<double> weights;  // positive, sum = sqrt(pi)
};

// Computed once per order via the symmetric-tridiagonal (Golub-Welsch)
// eigenproblem and cached.
const GaussHermiteRule& gauss_hermite(std::size_t order);

// E[f(m + s Z)] for Z ~ N(0,1) via the substitution z = sqrt(2) x.
template <typename F>
double gauss_hermite_expectation(const GaussHermiteRule& rule, double m, double s, F&& f) {
  constexpr double inv_sqrt_pi = 0.5641895835477562869;  // 1/sqrt(pi)
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    acc += rule.weights[k] * f(m + s * 1.4142135623730951 * rule.nodes[k]);
  return acc * inv_sqrt_pi;
}

}  // namespace bdsde
