#pragma once

#include "asmcmc/linalg.hpp"

#include <cstddef>
#include <functional>

namespace asmcmc {

/// Nodes and weights for integration against the standard gaussian density
/// (probabilists' normalization: weights sum to 1).
struct GaussHermiteRule {
    Vec nodes;
    Vec weights;
};

/// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
/// polynomials. Exact for polynomials up to degree 2*points - 1.
GaussHermiteRule gauss_hermite(std::size_t points);

/// Tensor-product expectation E[f(x)] over a standard gaussian on R^dim.
double gauss_hermite_expectation(std::size_t dim, std::size_t points_per_dim,
                                 const std::function<double(const Vec&)>& f);

} // namespace asmcmc
