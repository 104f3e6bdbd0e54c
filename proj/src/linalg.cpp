#include "asmcmc/linalg.hpp"

#include "asmcmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace asmcmc {

Matrix Matrix::columns(std::size_t j0, std::size_t count) const {
    Matrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, j0 + j);
    return out;
}

Vec Matrix::column(std::size_t j) const {
    Vec c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

Vec matvec(const Matrix& a, const Vec& x) {
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vec matvec_transposed(const Matrix& a, const Vec& x) {
    Vec y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * xi;
    }
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i)
        m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

/// Sort descending and fix signs: the largest-magnitude entry of each
/// eigenvector is positive; on ties the lowest index wins.
SymEig sort_and_orient(Vec values, Matrix vectors) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    SymEig out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.values[j] = values[src];
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = std::abs(vectors(i, src));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        const double sign = vectors(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sign * vectors(i, src);
    }
    return out;
}

} // namespace

SymEig jacobi_eigensolve(const Matrix& input, int max_sweeps) {
    const std::size_t n = input.rows();
    if (n == 0 || input.cols() != n) throw numeric_error("jacobi: matrix must be square");
    Matrix a = input;
    Matrix v = Matrix::identity(n);
    const double tol = 1e-14 * frobenius_norm(a);

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_diagonal_norm(a) <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off_diagonal_norm(a) > tol && sweep == max_sweeps)
        throw numeric_error("jacobi: no convergence after " + std::to_string(max_sweeps) +
                            " sweeps");

    Vec values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
    return sort_and_orient(std::move(values), std::move(v));
}

namespace {

// Householder reduction to tridiagonal form, accumulating the transform in z.
void householder_tridiagonalize(Matrix& z, Vec& d, Vec& e) {
    const std::size_t n = z.rows();
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                double f = z(i, l);
                double g = (f >= 0.0 ? -std::sqrt(h) : std::sqrt(h));
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
                for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
    }
}

double pythag(double a, double b) {
    const double absa = std::abs(a), absb = std::abs(b);
    if (absa > absb) {
        const double r = absb / absa;
        return absa * std::sqrt(1.0 + r * r);
    }
    if (absb == 0.0) return 0.0;
    const double r = absa / absb;
    return absb * std::sqrt(1.0 + r * r);
}

// Implicit-shift QL on the tridiagonal (d, e), rotations folded into z.
void ql_implicit(Vec& d, Vec& e, Matrix& z) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter == 50)
                    throw numeric_error("ql: no convergence after 50 iterations");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = pythag(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = pythag(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * f;
                        z(k, i) = c * z(k, i) - s * f;
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

} // namespace

SymEig tridiagonal_eigensolve(const Matrix& input) {
    const std::size_t n = input.rows();
    if (n == 0 || input.cols() != n)
        throw numeric_error("tridiagonal_eigensolve: matrix must be square");
    Matrix z = input;
    Vec d(n, 0.0), e(n, 0.0);
    householder_tridiagonalize(z, d, e);
    ql_implicit(d, e, z);
    return sort_and_orient(std::move(d), std::move(z));
}

double spectral_norm(const Matrix& a) {
    // Gram matrix of the smaller side keeps the eigensolve small.
    const Matrix g = (a.rows() >= a.cols()) ? matmul_at_b(a, a) : matmul(a, transpose(a));
    const SymEig eig = jacobi_eigensolve(g);
    return std::sqrt(std::max(0.0, eig.values.front()));
}

DenseLU::DenseLU(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw numeric_error("lu: matrix must be square");
    std::iota(perm_.begin(), perm_.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = std::abs(lu_(i, k));
            if (m > best) {
                best = m;
                piv = i;
            }
        }
        if (best == 0.0) throw numeric_error("lu: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
            std::swap(perm_[k], perm_[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            lu_(i, k) /= lu_(k, k);
            const double lik = lu_(i, k);
            if (lik == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= lik * lu_(k, j);
        }
    }
}

Vec DenseLU::solve(Vec rhs) const {
    const std::size_t n = lu_.rows();
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
    for (std::size_t i = 1; i < n; ++i) {
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
        x[i] = s / lu_(i, i);
    }
    return x;
}

BandedCholesky::BandedCholesky(std::size_t n, std::size_t half_bandwidth)
    : n_(n), bw_(half_bandwidth), band_(n * (half_bandwidth + 1), 0.0) {}

void BandedCholesky::factor() {
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t kmax = std::min(bw_, i);
        for (std::size_t k = kmax + 1; k-- > 0;) {
            const std::size_t j = i - k; // column index, j <= i
            double s = at(i, k);
            const std::size_t pmax = std::min(bw_ - k, j);
            for (std::size_t p = 1; p <= pmax; ++p) s -= at(i, k + p) * at(j, p);
            if (k == 0) {
                if (s <= 0.0)
                    throw numeric_error("banded cholesky: non-positive pivot at row " +
                                        std::to_string(i) + " (value " + std::to_string(s) +
                                        ")");
                at(i, 0) = std::sqrt(s);
            } else {
                at(i, k) = s / at(j, 0);
            }
        }
    }
    factored_ = true;
}

Vec BandedCholesky::solve(const Vec& rhs) const {
    if (!factored_) throw numeric_error("banded cholesky: solve before factor");
    Vec x = rhs;
    for (std::size_t i = 0; i < n_; ++i) {
        double s = x[i];
        const std::size_t kmax = std::min(bw_, i);
        for (std::size_t k = 1; k <= kmax; ++k) s -= at(i, k) * x[i - k];
        x[i] = s / at(i, 0);
    }
    for (std::size_t i = n_; i-- > 0;) {
        double s = x[i];
        const std::size_t kmax = std::min(bw_, n_ - 1 - i);
        for (std::size_t k = 1; k <= kmax; ++k) s -= at(i + k, k) * x[i + k];
        x[i] = s / at(i, 0);
    }
    return x;
}

} // namespace asmcmc
