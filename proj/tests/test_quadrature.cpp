#include "asmcmc/quadrature.hpp"

#include "asmcmc/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace asmcmc;

TEST_CASE("gauss-hermite weights sum to one and nodes integrate moments") {
    for (std::size_t p : {3ul, 10ul, 50ul}) {
        const GaussHermiteRule rule = gauss_hermite(p);
        double w = 0.0, m2 = 0.0, m4 = 0.0, m6 = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            w += rule.weights[i];
            const double x2 = rule.nodes[i] * rule.nodes[i];
            m2 += rule.weights[i] * x2;
            m4 += rule.weights[i] * x2 * x2;
            m6 += rule.weights[i] * x2 * x2 * x2;
        }
        CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
        if (p >= 3) CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
        if (p >= 4) CHECK(m6 == doctest::Approx(15.0).epsilon(1e-11));
    }
}

TEST_CASE("nodes are symmetric and ascending") {
    const GaussHermiteRule rule = gauss_hermite(10);
    for (std::size_t i = 0; i + 1 < 10; ++i) CHECK(rule.nodes[i] < rule.nodes[i + 1]);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(rule.nodes[i] == doctest::Approx(-rule.nodes[9 - i]).epsilon(1e-11));
}

TEST_CASE("tensor expectation of a separable polynomial") {
    // E[(x^2)(3 + y^4)] = 1 * (3 + 3) = 6
    const double v = gauss_hermite_expectation(2, 8, [](const Vec& x) {
        return x[0] * x[0] * (3.0 + x[1] * x[1] * x[1] * x[1]);
    });
    CHECK(v == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("gaussian expectation of exp matches closed form") {
    // E[exp(a x)] = exp(a^2 / 2)
    const double a = 0.7;
    const double v =
        gauss_hermite_expectation(1, 40, [a](const Vec& x) { return std::exp(a * x[0]); });
    CHECK(v == doctest::Approx(std::exp(a * a / 2.0)).epsilon(1e-12));
}

TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(gauss_hermite(0), config_error);
}
