#include "asmcmc/quadrature.hpp"

#include "asmcmc/errors.hpp"

#include <cmath>

namespace asmcmc {

GaussHermiteRule gauss_hermite(std::size_t points) {
    if (points < 1) throw config_error("gauss_hermite: need at least 1 point");
    if (points == 1) return {{0.0}, {1.0}};

    // Jacobi matrix: zero diagonal, off-diagonal sqrt(k).
    Matrix j(points, points);
    for (std::size_t k = 1; k < points; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        j(k, k - 1) = b;
        j(k - 1, k) = b;
    }
    const SymEig eig = jacobi_eigensolve(j);

    GaussHermiteRule rule;
    rule.nodes.resize(points);
    rule.weights.resize(points);
    // Eigenvalues come back descending; emit nodes ascending.
    for (std::size_t i = 0; i < points; ++i) {
        const std::size_t src = points - 1 - i;
        rule.nodes[i] = eig.values[src];
        const double v0 = eig.vectors(0, src);
        rule.weights[i] = v0 * v0; // mu_0 = 1 for the normalized gaussian weight
    }
    return rule;
}

double gauss_hermite_expectation(std::size_t dim, std::size_t points_per_dim,
                                 const std::function<double(const Vec&)>& f) {
    if (dim == 0) throw config_error("gauss_hermite_expectation: dim must be positive");
    const GaussHermiteRule rule = gauss_hermite(points_per_dim);
    const std::size_t p = rule.nodes.size();

    Vec x(dim, 0.0);
    std::vector<std::size_t> idx(dim, 0);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        for (std::size_t k = 0; k < dim; ++k) {
            x[k] = rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        total += w * f(x);

        std::size_t k = 0;
        while (k < dim && ++idx[k] == p) {
            idx[k] = 0;
            ++k;
        }
        if (k == dim) break;
    }
    return total;
}

} // namespace asmcmc
