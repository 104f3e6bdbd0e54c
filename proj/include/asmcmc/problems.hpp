#pragma once

#include "asmcmc/linalg.hpp"
#include "asmcmc/posterior.hpp"
#include "asmcmc/rng.hpp"

#include <atomic>
#include <cstdint>
#include <memory>

namespace asmcmc {

/// Two-parameter scalar forward model m(x) = x^T A x / 2 with
/// A = Q diag(1, eps) Q^T for a fixed 45-degree rotation Q. The parameter
/// eps controls how dominant the one-dimensional active subspace is.
class QuadraticProblem : public BayesProblem {
public:
    QuadraticProblem(double eps, double data_scalar, double noise_var);

    std::string name() const override { return "quadratic"; }
    std::size_t dim() const override { return 2; }
    Vec misfit_gradient(const Vec& x) const override;

    const Matrix& a() const { return a_; }
    static Matrix rotation(); // the fixed Q
    double eps() const { return eps_; }

protected:
    Vec forward_impl(const Vec& x) const override;

private:
    double eps_;
    Matrix a_;
};

/// Linear forward model m(x) = M x; the posterior is gaussian with
/// closed-form mean and covariance, so this problem exists for oracles.
class LinearGaussianProblem : public BayesProblem {
public:
    LinearGaussianProblem(Matrix m, Vec data, double noise_var);

    std::string name() const override { return "linear_gaussian"; }
    std::size_t dim() const override { return m_.cols(); }
    Vec misfit_gradient(const Vec& x) const override;

    const Matrix& forward_matrix() const { return m_; }
    std::size_t rank() const { return rank_; }

protected:
    Vec forward_impl(const Vec& x) const override;

private:
    Matrix m_;
    std::size_t rank_;
};

/// Closed forms for the linear model: the exact gradient outer-product
/// matrix, the conditional-average constant gamma^2, and the approximate
/// posterior mean/covariance built from the first n eigenvectors.
struct LinearClosedForms {
    Matrix c_exact;
    double gamma_sq = 0.0;
    Vec mu;
    Matrix gamma_cov;
    Matrix w1;
};
LinearClosedForms linear_closed_forms(const LinearGaussianProblem& problem, std::size_t n);

/// Poisson inverse problem: -div(a grad u) = 1 on the unit square with
/// u = 0 on left/bottom/top and zero flux on the right; log a is a
/// truncated Karhunen-Loeve series with an exponential 1-norm kernel.
/// Observations are the solution at seven points on the right boundary;
/// synthetic data comes from a prior draw x_true plus 1% noise.
class PoissonKLProblem : public BayesProblem {
public:
    PoissonKLProblem(std::size_t grid_n, std::size_t m_kl, double beta, std::uint64_t seed);

    std::string name() const override { return "poisson_kl"; }
    std::size_t dim() const override { return m_kl_; }

    /// One forward solve + one adjoint solve; exactly two linear solves.
    Vec misfit_gradient(const Vec& x) const override;

    struct Solution {
        Matrix u; // grid_n x grid_n nodal field, Dirichlet rows included
        Vec observations;
    };
    Solution solve_pde(const Vec& x) const;

    /// Test hook: solve with an explicit nodal coefficient field.
    Solution solve_with_coefficients(const Vec& nodal_a) const;

    /// Nodal log-coefficient field for parameters x.
    Vec log_coefficient_field(const Vec& x) const;

    std::size_t grid_n() const { return grid_n_; }
    double beta() const { return beta_; }
    const Vec& kl_eigenvalues() const { return kl_sigma_; }
    /// Unit-norm grid eigenvector of KL mode i (length grid_n^2).
    Vec kl_mode(std::size_t i) const;
    const Vec& x_true() const { return x_true_; }
    const Vec& observation_s2() const { return obs_s2_; }
    std::uint64_t seed() const { return seed_; }

    long long linear_solves() const { return linear_solves_.load(); }

protected:
    Vec forward_impl(const Vec& x) const override;

private:
    Vec nodal_coefficients(const Vec& x) const;
    Vec observe(const Vec& u_dof) const;

    std::size_t grid_n_, m_kl_;
    double beta_;
    std::uint64_t seed_;
    double h_;
    std::size_t n_dof_;
    Vec kl_sigma_;      // descending, positive
    Matrix psi_;        // n_nodes x m_kl, sqrt(sigma_i) * phi_i(node)
    Vec x_true_;
    Vec obs_s2_;
    // per observation point: (dof, weight) pairs for linear interpolation
    std::vector<std::vector<std::pair<std::size_t, double>>> obs_interp_;
    mutable std::atomic<long long> linear_solves_{0};
};

} // namespace asmcmc
