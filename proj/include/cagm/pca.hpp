#pragma once

// Principal component analysis on top of the Jacobi eigensolver: sample
// covariance with 1/(m-1) normalization, eigenvalue-descending components,
// and a deterministic sign convention (first nonzero coordinate of each
// component is positive).

#include <cmath>
#include <string>

#include "cagm/error.hpp"
#include "cagm/linalg.hpp"

namespace cagm {

struct PcaModel {
    Vec mean;                // dim n
    Matrix components;       // k x n, rows orthonormal, eigenvalue-descending
    Vec explained_variance;  // k, non-increasing, non-negative
};

inline Vec column_means(const Matrix& x) {
    Vec mean(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x(i, j);
    for (double& m : mean) m /= static_cast<double>(x.rows);
    return mean;
}

// Sample covariance of the rows of x, 1/(m-1) normalization.
inline Matrix sample_covariance(const Matrix& x) {
    if (x.rows < 2) throw ValidationError("sample_covariance: need at least 2 rows");
    const Vec mean = column_means(x);
    Matrix cov(x.cols, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t a = 0; a < x.cols; ++a) {
            const double da = x(i, a) - mean[a];
            for (std::size_t b = a; b < x.cols; ++b) cov(a, b) += da * (x(i, b) - mean[b]);
        }
    }
    const double norm = 1.0 / static_cast<double>(x.rows - 1);
    for (std::size_t a = 0; a < x.cols; ++a)
        for (std::size_t b = a; b < x.cols; ++b) {
            cov(a, b) *= norm;
            cov(b, a) = cov(a, b);
        }
    return cov;
}

// Flips rows so the first coordinate with magnitude above 1e-12 is positive.
inline void apply_sign_convention(Matrix& components) {
    for (std::size_t r = 0; r < components.rows; ++r) {
        for (std::size_t c = 0; c < components.cols; ++c) {
            const double v = components(r, c);
            if (std::abs(v) > 1e-12) {
                if (v < 0.0)
                    for (std::size_t j = 0; j < components.cols; ++j)
                        components(r, j) = -components(r, j);
                break;
            }
        }
    }
}

inline PcaModel pca_fit(const Matrix& x, std::size_t k) {
    if (x.rows < 2) throw ValidationError("pca_fit: need at least 2 samples");
    if (k == 0 || k > std::min(x.rows, x.cols))
        throw ValidationError("pca_fit: k must satisfy 1 <= k <= min(m, n), got k=" +
                              std::to_string(k));
    if (!all_finite(x.data)) throw ValidationError("pca_fit: input contains non-finite values");

    PcaModel model;
    model.mean = column_means(x);
    const EighResult eig = jacobi_eigh(sample_covariance(x));

    model.components = Matrix(k, x.cols);
    model.explained_variance.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        // covariance is PSD; tiny negative eigenvalues are roundoff
        model.explained_variance[r] = std::max(0.0, eig.eigenvalues[r]);
        for (std::size_t j = 0; j < x.cols; ++j)
            model.components(r, j) = eig.eigenvectors(j, r);
    }
    apply_sign_convention(model.components);
    return model;
}

// components * (x - mean)
inline Vec pca_project(const PcaModel& model, const Vec& x) {
    if (x.size() != model.mean.size())
        throw ValidationError("pca_project: expected dim " + std::to_string(model.mean.size()) +
                              ", got " + std::to_string(x.size()));
    return matvec(model.components, sub(x, model.mean));
}

// mean + components^T * z
inline Vec pca_reconstruct(const PcaModel& model, const Vec& z) {
    if (z.size() != model.components.rows)
        throw ValidationError("pca_reconstruct: expected dim " +
                              std::to_string(model.components.rows) + ", got " +
                              std::to_string(z.size()));
    return add(matvec_t(model.components, z), model.mean);
}

}  // namespace cagm
