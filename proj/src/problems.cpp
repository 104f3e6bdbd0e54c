#include "asmcmc/problems.hpp"

#include "asmcmc/errors.hpp"
#include "asmcmc/subspace.hpp"

#include <cmath>
#include <iostream>

namespace asmcmc {

// QuadraticProblem ----------------------------------------------------------

Matrix QuadraticProblem::rotation() {
    const double r = std::sqrt(2.0) / 2.0;
    Matrix q(2, 2);
    q(0, 0) = r;
    q(0, 1) = r;
    q(1, 0) = -r;
    q(1, 1) = r;
    return q;
}

QuadraticProblem::QuadraticProblem(double eps, double data_scalar, double noise_var)
    : eps_(eps) {
    if (eps <= 0.0) throw config_error("quadratic problem: eps must be positive");
    if (noise_var <= 0.0) throw config_error("quadratic problem: noise variance must be positive");
    const Matrix q = rotation();
    Matrix d(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = eps;
    a_ = matmul(matmul(q, d), transpose(q));
    // Exact symmetry regardless of roundoff.
    const double avg = 0.5 * (a_(0, 1) + a_(1, 0));
    a_(0, 1) = a_(1, 0) = avg;
    data_ = {data_scalar};
    noise_var_ = noise_var;
}

Vec QuadraticProblem::forward_impl(const Vec& x) const {
    const Vec ax = matvec(a_, x);
    return {0.5 * dot(x, ax)};
}

Vec QuadraticProblem::misfit_gradient(const Vec& x) const {
    const Vec ax = matvec(a_, x);
    const double m = 0.5 * dot(x, ax);
    const double scale = (m - data_[0]) / noise_var_;
    return {scale * ax[0], scale * ax[1]};
}

// LinearGaussianProblem ------------------------------------------------------

LinearGaussianProblem::LinearGaussianProblem(Matrix m, Vec data, double noise_var)
    : m_(std::move(m)), rank_(0) {
    if (data.size() != m_.rows())
        throw config_error("linear problem: data dimension does not match rows of M");
    if (noise_var <= 0.0) throw config_error("linear problem: noise variance must be positive");
    data_ = std::move(data);
    noise_var_ = noise_var;
    // Rank from the spectrum of M^T M.
    const SymEig eig = jacobi_eigensolve(matmul_at_b(m_, m_));
    const double tol = 1e-12 * std::max(eig.values.front(), 1e-300);
    for (double v : eig.values)
        if (v > tol) ++rank_;
}

Vec LinearGaussianProblem::forward_impl(const Vec& x) const { return matvec(m_, x); }

Vec LinearGaussianProblem::misfit_gradient(const Vec& x) const {
    Vec r = matvec(m_, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= data_[i];
    Vec g = matvec_transposed(m_, r);
    for (double& v : g) v /= noise_var_;
    return g;
}

LinearClosedForms linear_closed_forms(const LinearGaussianProblem& problem, std::size_t n) {
    const Matrix& m = problem.forward_matrix();
    const std::size_t cols = m.cols();
    const std::size_t rows = m.rows();
    if (n > cols - 1) throw config_error("linear_closed_forms: n must be <= m-1");
    const Vec& d = problem.data();
    const double s2 = problem.noise_var();

    LinearClosedForms out;

    // C = (1/sigma^4) M^T (M M^T + d d^T) M
    Matrix inner = matmul(m, transpose(m));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < rows; ++j) inner(i, j) += d[i] * d[j];
    out.c_exact = matmul_at_b(m, matmul(inner, m));
    for (double& v : out.c_exact.raw()) v /= s2 * s2;
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i + 1; j < cols; ++j) {
            const double avg = 0.5 * (out.c_exact(i, j) + out.c_exact(j, i));
            out.c_exact(i, j) = out.c_exact(j, i) = avg;
        }

    CMatrix c;
    c.entries = out.c_exact;
    c.provenance = {Provenance::Kind::quadrature, 0, 0};
    const ActiveSubspace spectrum = partition(eigendecompose(c), n);
    out.w1 = spectrum.w1;

    // gamma^2 = trace(W2^T M^T M W2) = ||M W2||_F^2
    const Matrix mw2 = matmul(m, spectrum.w2);
    out.gamma_sq = frobenius_norm(mw2) * frobenius_norm(mw2);

    // M~ = M W1 W1^T; mu = M~^T S^-1 d; Gamma = I - M~^T S^-1 M~ with
    // S = M~ M~^T + sigma^2 I.
    const Matrix mtil = matmul(matmul(m, spectrum.w1), transpose(spectrum.w1));
    Matrix s = matmul(mtil, transpose(mtil));
    for (std::size_t i = 0; i < rows; ++i) s(i, i) += s2;
    const DenseLU lu(s);

    const Vec sinv_d = lu.solve(d);
    out.mu = matvec_transposed(mtil, sinv_d);

    Matrix sinv_mtil(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        const Vec col = lu.solve(mtil.column(j));
        for (std::size_t i = 0; i < rows; ++i) sinv_mtil(i, j) = col[i];
    }
    out.gamma_cov = Matrix::identity(cols);
    const Matrix update = matmul_at_b(mtil, sinv_mtil);
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = 0; j < cols; ++j) out.gamma_cov(i, j) -= update(i, j);
    return out;
}

// PoissonKLProblem -----------------------------------------------------------

namespace {

/// Harmonic mean; the face coefficient between two nodal values.
inline double face_coeff(double a, double b) { return 2.0 * a * b / (a + b); }

} // namespace

PoissonKLProblem::PoissonKLProblem(std::size_t grid_n, std::size_t m_kl, double beta,
                                   std::uint64_t seed)
    : grid_n_(grid_n), m_kl_(m_kl), beta_(beta), seed_(seed) {
    if (grid_n < 16) throw config_error("poisson problem: grid_n must be >= 16");
    if (m_kl < 1 || m_kl > grid_n * grid_n)
        throw config_error("poisson problem: m_kl must be in [1, grid_n^2]");
    if (beta <= 0.0) throw config_error("poisson problem: correlation length must be positive");

    const std::size_t n_nodes = grid_n * grid_n;
    if (n_nodes > 4096)
        std::cerr << "poisson problem: grid_n=" << grid_n << " builds a dense " << n_nodes << "x"
                  << n_nodes << " covariance eigenproblem; this is expensive\n";

    h_ = 1.0 / static_cast<double>(grid_n - 1);
    n_dof_ = (grid_n - 1) * (grid_n - 2);

    // Grid covariance of the exponential 1-norm kernel, then its top
    // m_kl eigenpairs. Discrete orthonormality: phi_i has unit euclidean
    // norm on the grid and sigma_i is the plain matrix eigenvalue.
    Matrix cov(n_nodes, n_nodes);
    for (std::size_t p = 0; p < n_nodes; ++p) {
        const double ps1 = static_cast<double>(p / grid_n) * h_;
        const double ps2 = static_cast<double>(p % grid_n) * h_;
        for (std::size_t q = p; q < n_nodes; ++q) {
            const double qs1 = static_cast<double>(q / grid_n) * h_;
            const double qs2 = static_cast<double>(q % grid_n) * h_;
            const double dist = std::abs(ps1 - qs1) + std::abs(ps2 - qs2);
            const double v = std::exp(-dist / beta);
            cov(p, q) = v;
            cov(q, p) = v;
        }
    }
    const SymEig eig = tridiagonal_eigensolve(cov);
    kl_sigma_.assign(eig.values.begin(), eig.values.begin() + m_kl);
    for (std::size_t i = 0; i < m_kl; ++i)
        if (kl_sigma_[i] <= 0.0)
            throw numeric_error("poisson problem: non-positive KL eigenvalue at index " +
                                std::to_string(i));
    psi_ = Matrix(n_nodes, m_kl);
    for (std::size_t i = 0; i < m_kl; ++i) {
        const double scale = std::sqrt(kl_sigma_[i]);
        for (std::size_t p = 0; p < n_nodes; ++p) psi_(p, i) = scale * eig.vectors(p, i);
    }

    // Observation interpolation along the right boundary column.
    obs_s2_ = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    const std::size_t i_right = grid_n - 1;
    const auto dof_index = [&](std::size_t i, std::size_t j) {
        return (i - 1) * (grid_n - 2) + (j - 1);
    };
    for (double s2 : obs_s2_) {
        const double t = s2 / h_;
        std::size_t j0 = static_cast<std::size_t>(std::floor(t));
        double frac = t - static_cast<double>(j0);
        if (j0 >= grid_n - 2) { // clamp against roundoff at the last interior node
            j0 = grid_n - 3;
            frac = 1.0;
        }
        std::vector<std::pair<std::size_t, double>> terms;
        if (frac < 1.0) terms.emplace_back(dof_index(i_right, j0), 1.0 - frac);
        if (frac > 0.0) terms.emplace_back(dof_index(i_right, j0 + 1), frac);
        obs_interp_.push_back(std::move(terms));
    }

    // Synthetic data d = m(x_true) + noise with sigma^2 = 1e-4 ||m(x_true)||^2.
    Rng xtrue_rng(derive_seed(seed, 0x78747275ULL));
    x_true_ = xtrue_rng.gaussian_vector(m_kl);
    const Vec clean = solve_pde(x_true_).observations;
    double norm_sq = 0.0;
    for (double v : clean) norm_sq += v * v;
    noise_var_ = 1e-4 * norm_sq;
    Rng noise_rng(derive_seed(seed, 0x6e6f6973ULL));
    data_ = clean;
    const double sigma = std::sqrt(noise_var_);
    for (double& v : data_) v += sigma * noise_rng.gaussian();
}

Vec PoissonKLProblem::log_coefficient_field(const Vec& x) const {
    if (x.size() != m_kl_) throw config_error("poisson problem: wrong parameter dimension");
    const std::size_t n_nodes = grid_n_ * grid_n_;
    Vec log_a(n_nodes);
    for (std::size_t p = 0; p < n_nodes; ++p) {
        const double* row = psi_.row_ptr(p);
        double s = 0.0;
        for (std::size_t i = 0; i < m_kl_; ++i) s += row[i] * x[i];
        log_a[p] = s;
    }
    return log_a;
}

Vec PoissonKLProblem::nodal_coefficients(const Vec& x) const {
    Vec a = log_coefficient_field(x);
    for (double& v : a) v = std::exp(v);
    return a;
}

Vec PoissonKLProblem::kl_mode(std::size_t i) const {
    if (i >= m_kl_) throw config_error("poisson problem: KL mode index out of range");
    const std::size_t n_nodes = grid_n_ * grid_n_;
    Vec phi(n_nodes);
    const double inv_scale = 1.0 / std::sqrt(kl_sigma_[i]);
    for (std::size_t p = 0; p < n_nodes; ++p) phi[p] = psi_(p, i) * inv_scale;
    return phi;
}

PoissonKLProblem::Solution PoissonKLProblem::solve_with_coefficients(const Vec& nodal_a) const {
    const std::size_t n = grid_n_;
    if (nodal_a.size() != n * n)
        throw config_error("poisson problem: coefficient field has wrong size");
    const auto node = [&](std::size_t i, std::size_t j) { return i * n + j; };
    const auto dof = [&](std::size_t i, std::size_t j) { return (i - 1) * (n - 2) + (j - 1); };
    const auto is_unknown = [&](std::size_t i, std::size_t j) {
        return i >= 1 && j >= 1 && j <= n - 2;
    };

    const std::size_t bw = n - 2;
    BandedCholesky chol(n_dof_, bw);
    Vec rhs(n_dof_, 0.0);

    // Control volumes: h^2 interior, h^2/2 for the half cells on the
    // Neumann (right) boundary.
    for (std::size_t i = 1; i <= n - 1; ++i)
        for (std::size_t j = 1; j <= n - 2; ++j)
            rhs[dof(i, j)] = (i == n - 1 ? 0.5 : 1.0) * h_ * h_;

    // Horizontal faces between (i,j) and (i+1,j): full length.
    for (std::size_t j = 1; j <= n - 2; ++j) {
        for (std::size_t i = 0; i + 1 <= n - 1; ++i) {
            const double t = face_coeff(nodal_a[node(i, j)], nodal_a[node(i + 1, j)]);
            const bool left_unknown = is_unknown(i, j);
            const std::size_t rp = left_unknown ? dof(i, j) : 0;
            const std::size_t rq = dof(i + 1, j);
            chol.at(rq, 0) += t;
            if (left_unknown) {
                chol.at(rp, 0) += t;
                chol.at(rq, rq - rp) -= t;
            }
        }
    }
    // Vertical faces between (i,j) and (i,j+1): half length on the right column.
    for (std::size_t i = 1; i <= n - 1; ++i) {
        const double geom = (i == n - 1) ? 0.5 : 1.0;
        for (std::size_t j = 0; j + 1 <= n - 1; ++j) {
            const double t = geom * face_coeff(nodal_a[node(i, j)], nodal_a[node(i, j + 1)]);
            const bool lower_unknown = is_unknown(i, j);
            const bool upper_unknown = is_unknown(i, j + 1);
            if (lower_unknown) chol.at(dof(i, j), 0) += t;
            if (upper_unknown) chol.at(dof(i, j + 1), 0) += t;
            if (lower_unknown && upper_unknown) chol.at(dof(i, j + 1), 1) -= t;
        }
    }

    chol.factor();
    const Vec u_dof = chol.solve(rhs);
    ++linear_solves_;

    Solution sol;
    sol.u = Matrix(n, n);
    for (std::size_t i = 1; i <= n - 1; ++i)
        for (std::size_t j = 1; j <= n - 2; ++j) sol.u(i, j) = u_dof[dof(i, j)];
    sol.observations = observe(u_dof);
    if (!all_finite(sol.observations))
        throw numeric_error("poisson problem: non-finite PDE solution");
    return sol;
}

PoissonKLProblem::Solution PoissonKLProblem::solve_pde(const Vec& x) const {
    return solve_with_coefficients(nodal_coefficients(x));
}

Vec PoissonKLProblem::observe(const Vec& u_dof) const {
    Vec obs(obs_interp_.size(), 0.0);
    for (std::size_t k = 0; k < obs_interp_.size(); ++k)
        for (const auto& [idx, w] : obs_interp_[k]) obs[k] += w * u_dof[idx];
    return obs;
}

Vec PoissonKLProblem::forward_impl(const Vec& x) const { return solve_pde(x).observations; }

Vec PoissonKLProblem::misfit_gradient(const Vec& x) const {
    const std::size_t n = grid_n_;
    const Vec nodal_a = nodal_coefficients(x);
    const auto node = [&](std::size_t i, std::size_t j) { return i * n + j; };
    const auto dof = [&](std::size_t i, std::size_t j) { return (i - 1) * (n - 2) + (j - 1); };
    const auto is_unknown = [&](std::size_t i, std::size_t j) {
        return i >= 1 && j >= 1 && j <= n - 2;
    };

    // Assemble and factor once; forward and adjoint share the symmetric K.
    const std::size_t bw = n - 2;
    BandedCholesky chol(n_dof_, bw);
    Vec rhs(n_dof_, 0.0);
    for (std::size_t i = 1; i <= n - 1; ++i)
        for (std::size_t j = 1; j <= n - 2; ++j)
            rhs[dof(i, j)] = (i == n - 1 ? 0.5 : 1.0) * h_ * h_;
    for (std::size_t j = 1; j <= n - 2; ++j) {
        for (std::size_t i = 0; i + 1 <= n - 1; ++i) {
            const double t = face_coeff(nodal_a[node(i, j)], nodal_a[node(i + 1, j)]);
            const bool left_unknown = is_unknown(i, j);
            const std::size_t rq = dof(i + 1, j);
            chol.at(rq, 0) += t;
            if (left_unknown) {
                const std::size_t rp = dof(i, j);
                chol.at(rp, 0) += t;
                chol.at(rq, rq - rp) -= t;
            }
        }
    }
    for (std::size_t i = 1; i <= n - 1; ++i) {
        const double geom = (i == n - 1) ? 0.5 : 1.0;
        for (std::size_t j = 0; j + 1 <= n - 1; ++j) {
            const double t = geom * face_coeff(nodal_a[node(i, j)], nodal_a[node(i, j + 1)]);
            const bool lower_unknown = is_unknown(i, j);
            const bool upper_unknown = is_unknown(i, j + 1);
            if (lower_unknown) chol.at(dof(i, j), 0) += t;
            if (upper_unknown) chol.at(dof(i, j + 1), 0) += t;
            if (lower_unknown && upper_unknown) chol.at(dof(i, j + 1), 1) -= t;
        }
    }
    chol.factor();

    const Vec u = chol.solve(rhs);
    ++linear_solves_;

    // Adjoint load: B^T (m(x) - d) / sigma^2 folded in later; solve with
    // the unscaled residual and scale at assembly.
    const Vec m_obs = observe(u);
    Vec adj_rhs(n_dof_, 0.0);
    for (std::size_t k = 0; k < obs_interp_.size(); ++k) {
        const double r = m_obs[k] - data_[k];
        for (const auto& [idx, w] : obs_interp_[k]) adj_rhs[idx] += w * r;
    }
    const Vec lam = chol.solve(adj_rhs);
    ++linear_solves_;

    // d f / d a_node accumulated over faces:
    //   w_F * geom * d harm(a_p, a_q) / d a_node,
    // with w_F = (lam_p - lam_q)(u_p - u_q) and Dirichlet values zero.
    const std::size_t n_nodes = n * n;
    Vec da(n_nodes, 0.0);
    const auto val = [&](const Vec& v, std::size_t i, std::size_t j) {
        return is_unknown(i, j) ? v[dof(i, j)] : 0.0;
    };
    const auto accumulate_face = [&](std::size_t ip, std::size_t jp, std::size_t iq,
                                     std::size_t jq, double geom) {
        const double ap = nodal_a[node(ip, jp)];
        const double aq = nodal_a[node(iq, jq)];
        const double wf = (val(lam, ip, jp) - val(lam, iq, jq)) *
                          (val(u, ip, jp) - val(u, iq, jq));
        const double denom = (ap + aq) * (ap + aq);
        da[node(ip, jp)] += geom * wf * 2.0 * aq * aq / denom;
        da[node(iq, jq)] += geom * wf * 2.0 * ap * ap / denom;
    };
    for (std::size_t j = 1; j <= n - 2; ++j)
        for (std::size_t i = 0; i + 1 <= n - 1; ++i) accumulate_face(i, j, i + 1, j, 1.0);
    for (std::size_t i = 1; i <= n - 1; ++i) {
        const double geom = (i == n - 1) ? 0.5 : 1.0;
        for (std::size_t j = 0; j + 1 <= n - 1; ++j) accumulate_face(i, j, i, j + 1, geom);
    }

    // Chain rule through a = exp(psi x): df/dx_i = -(1/s2) sum_p da_p a_p psi_{p,i}.
    Vec grad(m_kl_, 0.0);
    for (std::size_t p = 0; p < n_nodes; ++p) {
        const double scale = da[p] * nodal_a[p];
        if (scale == 0.0) continue;
        const double* row = psi_.row_ptr(p);
        for (std::size_t i = 0; i < m_kl_; ++i) grad[i] += scale * row[i];
    }
    const double inv_s2 = -1.0 / noise_var_;
    for (double& v : grad) v *= inv_s2;
    return grad;
}

} // namespace asmcmc
