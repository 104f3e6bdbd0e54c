#include "asmcmc/posterior.hpp"

#include "asmcmc/errors.hpp"
#include "asmcmc/io.hpp"
#include "asmcmc/quadrature.hpp"

#include <cmath>

namespace asmcmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

void BayesProblem::set_data(Vec data, double noise_var) {
    if (data.size() != data_.size())
        throw config_error("set_data: dimension does not match the problem's observations");
    if (noise_var <= 0.0) throw config_error("set_data: noise variance must be positive");
    if (!all_finite(data)) throw numeric_error("set_data: non-finite data");
    data_ = std::move(data);
    noise_var_ = noise_var;
}

double misfit(const BayesProblem& problem, const Vec& x) {
    if (x.size() != problem.dim()) throw config_error("misfit: wrong parameter dimension");
    if (!all_finite(x)) throw numeric_error("misfit: non-finite input");
    const Vec m = problem.forward(x);
    if (!all_finite(m))
        throw numeric_error("misfit: forward model returned non-finite values (problem " +
                            problem.name() + ")");
    const Vec& d = problem.data();
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = d[i] - m[i];
        s += r * r;
    }
    return s / (2.0 * problem.noise_var());
}

Vec misfit_gradient(const BayesProblem& problem, const Vec& x) {
    if (x.size() != problem.dim())
        throw config_error("misfit_gradient: wrong parameter dimension");
    if (!all_finite(x)) throw numeric_error("misfit_gradient: non-finite input");
    Vec g = problem.misfit_gradient(x);
    if (!all_finite(g))
        throw numeric_error("misfit_gradient: non-finite gradient (problem " + problem.name() +
                            ")");
    return g;
}

Vec fd_misfit_gradient(const BayesProblem& problem, const Vec& x, double rel_step) {
    Vec g(x.size());
    Vec xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        const double xi = x[i];
        xp[i] = xi + h;
        const double fp = misfit(problem, xp);
        xp[i] = xi - h;
        const double fm = misfit(problem, xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double log_standard_gaussian(const Vec& y) {
    double q = 0.0;
    for (double v : y) q += v * v;
    return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + q);
}

void MisfitSurrogate::validate() const {
    if (problem == nullptr) throw config_error("surrogate: no problem attached");
    if (subspace.split == 0)
        throw config_error("surrogate: subspace partition not set");
    if (subspace.dim() != problem->dim())
        throw config_error("surrogate: subspace dimension does not match problem");
    if (inner_m < 1) throw config_error("surrogate: inner sample count must be >= 1");
    if (rule == InnerRule::gauss_hermite && inactive_dim() != 1)
        throw config_error(
            "surrogate: gauss_hermite inner rule requires exactly one inactive variable");
}

MisfitSurrogate make_surrogate(const BayesProblem& problem, const ActiveSubspace& subspace,
                               std::size_t inner_m, InnerRule rule) {
    MisfitSurrogate s;
    s.problem = &problem;
    s.subspace = subspace;
    s.inner_m = inner_m;
    s.rule = rule;
    s.validate();
    return s;
}

namespace {

Vec lift(const Matrix& w1, const Matrix& w2, const Vec& y, const Vec& z) {
    const std::size_t m = w1.rows();
    Vec x(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w1.cols(); ++j) s += w1(i, j) * y[j];
        for (std::size_t j = 0; j < w2.cols(); ++j) s += w2(i, j) * z[j];
        x[i] = s;
    }
    return x;
}

std::string vec_to_string(const Vec& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_double(v[i]);
    }
    return s + "]";
}

} // namespace

double surrogate_misfit(const MisfitSurrogate& surrogate, const Vec& y_active, Rng& rng) {
    surrogate.validate();
    if (y_active.size() != surrogate.active_dim())
        throw config_error("surrogate_misfit: wrong active dimension");
    const Matrix& w1 = surrogate.subspace.w1;
    const Matrix& w2 = surrogate.subspace.w2;
    const std::size_t zdim = surrogate.inactive_dim();

    const auto inner_misfit = [&](const Vec& z) {
        double f = std::numeric_limits<double>::quiet_NaN();
        try {
            f = misfit(*surrogate.problem, lift(w1, w2, y_active, z));
        } catch (const numeric_error& e) {
            throw numeric_error("surrogate_misfit: inner evaluation failed at z = " +
                                vec_to_string(z) + ": " + e.what());
        }
        if (!std::isfinite(f))
            throw numeric_error("surrogate_misfit: non-finite misfit at z = " + vec_to_string(z));
        return f;
    };

    if (surrogate.rule == InnerRule::gauss_hermite) {
        const GaussHermiteRule rule = gauss_hermite(surrogate.inner_m);
        double acc = 0.0;
        Vec z(1);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            z[0] = rule.nodes[i];
            acc += rule.weights[i] * inner_misfit(z);
        }
        return acc;
    }

    double acc = 0.0;
    for (std::size_t i = 0; i < surrogate.inner_m; ++i)
        acc += inner_misfit(rng.gaussian_vector(zdim));
    return acc / static_cast<double>(surrogate.inner_m);
}

double log_approx_posterior(const MisfitSurrogate& surrogate, const Vec& y_active, Rng& rng) {
    const double g = surrogate_misfit(surrogate, y_active, rng);
    return -g + log_standard_gaussian(y_active);
}

double conditional_expectation_reference(const BayesProblem& problem,
                                         const ActiveSubspace& subspace, const Vec& y_active,
                                         std::size_t quad_points) {
    if (subspace.split == 0) throw config_error("conditional expectation: partition not set");
    const std::size_t zdim = subspace.dim() - subspace.split;
    if (zdim > 2)
        throw config_error("conditional expectation reference: inactive dimension must be <= 2 "
                           "for tensor quadrature");
    if (y_active.size() != subspace.split)
        throw config_error("conditional expectation: wrong active dimension");
    return gauss_hermite_expectation(zdim, quad_points, [&](const Vec& z) {
        return misfit(problem, lift(subspace.w1, subspace.w2, y_active, z));
    });
}

} // namespace asmcmc
