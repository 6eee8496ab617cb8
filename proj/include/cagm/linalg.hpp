#pragma once

// Dense vector/matrix primitives sized for desk-scale experiments (n <= 512),
// a cyclic Jacobi eigensolver for symmetric matrices, and the central
// finite-difference oracles the rest of the library is tested against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cagm/error.hpp"

namespace cagm {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ValidationError("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
    if (x.size() != y.size()) throw ValidationError("axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec add(Vec a, const Vec& b) {
    axpy(1.0, b, a);
    return a;
}

inline Vec sub(Vec a, const Vec& b) {
    axpy(-1.0, b, a);
    return a;
}

inline Vec scale(Vec v, double alpha) {
    for (double& x : v) x *= alpha;
    return v;
}

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    Vec row(std::size_t i) const {
        return Vec(data.begin() + static_cast<std::ptrdiff_t>(i * cols),
                   data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Vec matvec(const Matrix& m, const Vec& x) {
    if (m.cols != x.size()) throw ValidationError("matvec: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// m^T x, i.e. x viewed as coefficients of m's rows.
inline Vec matvec_t(const Matrix& m, const Vec& x) {
    if (m.rows != x.size()) throw ValidationError("matvec_t: dimension mismatch");
    Vec y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += m(i, j) * x[i];
    return y;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ValidationError("matmul: inner dimension mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

inline double max_abs(const Matrix& m) {
    double v = 0.0;
    for (double x : m.data) v = std::max(v, std::abs(x));
    return v;
}

struct EighResult {
    Vec eigenvalues;      // descending
    Matrix eigenvectors;  // column i pairs with eigenvalues[i]; columns orthonormal
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Matrices here are tiny, so the O(n^3)-per-sweep cost is irrelevant and the
// rotations keep the eigenvector basis orthonormal to machine precision.
inline EighResult jacobi_eigh(const Matrix& a_in, int max_sweeps = 100) {
    if (a_in.rows != a_in.cols) throw ValidationError("jacobi_eigh: matrix not square");
    const std::size_t n = a_in.rows;
    if (n == 0) throw ValidationError("jacobi_eigh: empty matrix");
    if (n > 512) throw ValidationError("jacobi_eigh: n > 512 unsupported");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a_in(i, j) - a_in(j, i)) > 1e-10)
                throw ValidationError("jacobi_eigh: input not symmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");

    Matrix a = a_in;
    Matrix v = Matrix::identity(n);

    auto off_diag_norm = [&a, n]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return std::sqrt(2.0 * s);
    };

    const double scale = std::max(1.0, max_abs(a_in));
    const double tol = 1e-14 * scale;

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_diag_norm() <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol / static_cast<double>(n * n)) continue;
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
    if (sweep == max_sweeps && off_diag_norm() > tol)
        throw NumericError("jacobi_eigh: no convergence after " + std::to_string(max_sweeps) +
                           " sweeps, off-diagonal residual " + std::to_string(off_diag_norm()));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&a](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EighResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Matrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        result.eigenvalues[col] = a(order[col], order[col]);
        for (std::size_t k = 0; k < n; ++k) result.eigenvectors(k, col) = v(k, order[col]);
    }
    return result;
}

using ScalarFn = std::function<double(const Vec&)>;

// Default finite-difference steps. Second differences lose roughly half the
// mantissa, hence the larger Hessian step.
inline constexpr double kFdGradStep = 1e-5;
inline constexpr double kFdHessStep = 1e-3;

// Central differences (f(w+h e_i) - f(w-h e_i)) / 2h. The repo-wide oracle
// every analytic gradient is checked against.
inline Vec fd_gradient(const ScalarFn& f, const Vec& w, double h = kFdGradStep) {
    if (h <= 0.0) throw ValidationError("fd_gradient: step must be positive");
    Vec g(w.size());
    Vec probe = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double fp = f(probe);
        probe[i] = w[i] - h;
        const double fm = f(probe);
        probe[i] = w[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("fd_gradient: non-finite objective at coordinate " +
                               std::to_string(i));
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Second central differences (f(w+h e_i) - 2 f(w) + f(w-h e_i)) / h^2.
inline Vec fd_hessian_diag(const ScalarFn& f, const Vec& w, double h = kFdHessStep) {
    if (h <= 0.0) throw ValidationError("fd_hessian_diag: step must be positive");
    const double f0 = f(w);
    if (!std::isfinite(f0)) throw NumericError("fd_hessian_diag: non-finite objective at center");
    Vec d(w.size());
    Vec probe = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double fp = f(probe);
        probe[i] = w[i] - h;
        const double fm = f(probe);
        probe[i] = w[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("fd_hessian_diag: non-finite objective at coordinate " +
                               std::to_string(i));
        d[i] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    return d;
}

}  // namespace cagm
