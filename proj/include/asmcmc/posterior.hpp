#pragma once

#include "asmcmc/linalg.hpp"
#include "asmcmc/rng.hpp"
#include "asmcmc/subspace.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace asmcmc {

/// A Bayesian inverse problem with additive gaussian noise: fixed data d,
/// noise variance sigma^2, standard gaussian prior on R^dim. The misfit is
/// f(x) = ||d - m(x)||^2 / (2 sigma^2) and implementations supply its true
/// gradient (1/sigma^2) * J(x)^T (m(x) - d).
class BayesProblem {
public:
    virtual ~BayesProblem() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;

    /// Parameter-to-observable map; increments the forward-call counter.
    Vec forward(const Vec& x) const {
        ++forward_calls_;
        return forward_impl(x);
    }

    /// Gradient of the misfit at x.
    virtual Vec misfit_gradient(const Vec& x) const = 0;

    const Vec& data() const { return data_; }
    double noise_var() const { return noise_var_; }
    std::size_t obs_dim() const { return data_.size(); }

    /// Replace the fixed data vector (and its noise variance) at setup
    /// time, e.g. with measurements loaded from file. The data stays
    /// constant afterwards.
    void set_data(Vec data, double noise_var);

    long long forward_calls() const { return forward_calls_.load(); }
    void reset_forward_calls() const { forward_calls_.store(0); }

protected:
    virtual Vec forward_impl(const Vec& x) const = 0;

    Vec data_;
    double noise_var_ = 1.0;

private:
    mutable std::atomic<long long> forward_calls_{0};
};

/// f(x) = ||d - m(x)||^2 / (2 sigma^2).
double misfit(const BayesProblem& problem, const Vec& x);

/// The problem's misfit gradient, with input validation.
Vec misfit_gradient(const BayesProblem& problem, const Vec& x);

/// Central finite differences of the misfit, step 1e-5 relative.
/// Verification hook for the analytic gradients.
Vec fd_misfit_gradient(const BayesProblem& problem, const Vec& x, double rel_step = 1e-5);

/// log of the standard gaussian density on R^n.
double log_standard_gaussian(const Vec& y);

enum class InnerRule { monte_carlo, gauss_hermite };

/// Monte Carlo (or one-dimensional Gauss-Hermite) estimate of the misfit's
/// conditional expectation given the active variables.
struct MisfitSurrogate {
    const BayesProblem* problem = nullptr;
    ActiveSubspace subspace;
    std::size_t inner_m = 10;
    InnerRule rule = InnerRule::monte_carlo;

    std::size_t active_dim() const { return subspace.split; }
    std::size_t inactive_dim() const { return subspace.dim() - subspace.split; }
    void validate() const;
};

MisfitSurrogate make_surrogate(const BayesProblem& problem, const ActiveSubspace& subspace,
                               std::size_t inner_m, InnerRule rule);

/// Average of inner_m misfit evaluations at x = W1 y + W2 z with z drawn
/// from the standard gaussian conditional; Gauss-Hermite nodes replace the
/// draws when the rule is enabled (inactive dimension must be 1).
double surrogate_misfit(const MisfitSurrogate& surrogate, const Vec& y_active, Rng& rng);

/// -g(y) + log rho_pri(y) with the standard gaussian marginal prior.
double log_approx_posterior(const MisfitSurrogate& surrogate, const Vec& y_active, Rng& rng);

/// Tensor Gauss-Hermite reference for the conditional expectation
/// g(y) = E_z[f(W1 y + W2 z)]; inactive dimension capped at 2.
double conditional_expectation_reference(const BayesProblem& problem,
                                         const ActiveSubspace& subspace, const Vec& y_active,
                                         std::size_t quad_points);

} // namespace asmcmc
