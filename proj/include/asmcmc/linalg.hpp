#pragma once

#include <cstddef>
#include <vector>

namespace asmcmc {

using Vec = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    Vec& raw() { return data_; }
    const Vec& raw() const { return data_; }

    /// Column block [j0, j0+count).
    Matrix columns(std::size_t j0, std::size_t count) const;

    Vec column(std::size_t j) const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    Vec data_;
};

// Basic operations ---------------------------------------------------------

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);
Vec matvec(const Matrix& a, const Vec& x);
Vec matvec_transposed(const Matrix& a, const Vec& x); // a^T x
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b); // a^T b
Matrix transpose(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
bool all_finite(const Vec& v);

/// max_ij |a - b| over entries.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Symmetric eigenproblems ---------------------------------------------------

/// Eigenvalues descending, eigenvectors as columns of an orthogonal matrix.
struct SymEig {
    Vec values;
    Matrix vectors;
};

/// Cyclic Jacobi for dense symmetric matrices (dimension up to a few
/// hundred). Off-diagonal tolerance 1e-14 * ||A||_F, at most `max_sweeps`
/// sweeps; throws numeric_error with the sweep count on non-convergence.
SymEig jacobi_eigensolve(const Matrix& a, int max_sweeps = 100);

/// Householder tridiagonalization + implicit-shift QL, for the larger
/// symmetric matrices (grid covariances). Same descending convention.
SymEig tridiagonal_eigensolve(const Matrix& a);

/// Spectral norm (largest singular value) of a general matrix.
double spectral_norm(const Matrix& a);

// Linear solves -------------------------------------------------------------

/// Dense LU with partial pivoting for small systems.
class DenseLU {
public:
    explicit DenseLU(Matrix a);
    Vec solve(Vec rhs) const;

private:
    Matrix lu_;
    std::vector<std::size_t> perm_;
};

/// Banded SPD Cholesky (lower band storage). Used as the direct sparse
/// factorization for the finite-difference PDE systems.
class BandedCholesky {
public:
    /// `band(i, k)` holds A(i, i-k) for k = 0..half_bandwidth.
    BandedCholesky(std::size_t n, std::size_t half_bandwidth);

    double& at(std::size_t i, std::size_t k) { return band_[i * (bw_ + 1) + k]; }
    double at(std::size_t i, std::size_t k) const { return band_[i * (bw_ + 1) + k]; }

    /// Factor in place; throws numeric_error on a non-positive pivot.
    void factor();

    /// Solve A x = rhs with the factored band.
    Vec solve(const Vec& rhs) const;

    std::size_t size() const { return n_; }

private:
    std::size_t n_, bw_;
    Vec band_;
    bool factored_ = false;
};

} // namespace asmcmc
