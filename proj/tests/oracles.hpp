#pragma once

// Reference routines written out by hand, independent of Eigen's solvers, so
// that each dual-route check has one route the library does not share.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flycl/linalg.hpp"
#include "flycl/philox.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const flycl::Matrix& A) {
    Dense out(static_cast<std::size_t>(A.rows()), std::vector<double>(static_cast<std::size_t>(A.cols())));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) out[i][j] = A(i, j);
    return out;
}

inline flycl::Matrix to_eigen(const Dense& A) {
    const std::size_t r = A.size(), c = r ? A[0].size() : 0;
    flycl::Matrix out(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) = A[i][j];
    return out;
}

/// Column rank by Gaussian elimination with partial pivoting.
inline std::size_t rank(Dense A, double tol = 1e-9) {
    const std::size_t rows = A.size(), cols = rows ? A[0].size() : 0;
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols && r < rows; ++c) {
        std::size_t piv = r;
        for (std::size_t i = r + 1; i < rows; ++i)
            if (std::fabs(A[i][c]) > std::fabs(A[piv][c])) piv = i;
        if (std::fabs(A[piv][c]) <= tol) continue;
        std::swap(A[piv], A[r]);
        for (std::size_t i = r + 1; i < rows; ++i) {
            const double f = A[i][c] / A[r][c];
            for (std::size_t j = c; j < cols; ++j) A[i][j] -= f * A[r][j];
        }
        ++r;
    }
    return r;
}

/// Solves A X = B by Doolittle LU with partial pivoting.
inline Dense lu_solve(Dense A, Dense B) {
    const std::size_t n = A.size(), nrhs = B.empty() ? 0 : B[0].size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t i = c + 1; i < n; ++i)
            if (std::fabs(A[i][c]) > std::fabs(A[piv][c])) piv = i;
        if (A[piv][c] == 0.0) throw std::runtime_error("singular");
        std::swap(A[piv], A[c]);
        std::swap(B[piv], B[c]);
        for (std::size_t i = c + 1; i < n; ++i) {
            const double f = A[i][c] / A[c][c];
            A[i][c] = f;
            for (std::size_t j = c + 1; j < n; ++j) A[i][j] -= f * A[c][j];
            for (std::size_t j = 0; j < nrhs; ++j) B[i][j] -= f * B[c][j];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t j = 0; j < nrhs; ++j) {
            double s = B[ii][j];
            for (std::size_t k = ii + 1; k < n; ++k) s -= A[ii][k] * B[k][j];
            B[ii][j] = s / A[ii][ii];
        }
    }
    return B;
}

inline Dense matmul(const Dense& A, const Dense& B) {
    const std::size_t r = A.size(), inner = B.size(), c = inner ? B[0].size() : 0;
    Dense out(r, std::vector<double>(c, 0.0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < inner; ++k)
            for (std::size_t j = 0; j < c; ++j) out[i][j] += A[i][k] * B[k][j];
    return out;
}

inline Dense transpose(const Dense& A) {
    const std::size_t r = A.size(), c = r ? A[0].size() : 0;
    Dense out(c, std::vector<double>(r));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j][i] = A[i][j];
    return out;
}

inline std::vector<double> matvec(const Dense& A, const std::vector<double>& v) {
    std::vector<double> out(A.size(), 0.0);
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += A[i][j] * v[j];
    return out;
}

/// Explicit ridge hat matrix route: A = H (HᵀH + λI)⁻¹ Hᵀ, computed in the
/// equivalent n x n form A = K (K + λI)⁻¹ with K = H Hᵀ (K and its resolvent
/// commute). Returns (Ŷ, df, GCV).
struct HatResult {
    Dense fitted;
    double df = 0.0;
    double gcv = 0.0;
};

inline HatResult hat_gcv(const Dense& H, const Dense& Y, double lambda) {
    const std::size_t n = H.size();
    const Dense K = matmul(H, transpose(H));
    Dense R = K;
    for (std::size_t i = 0; i < n; ++i) R[i][i] += lambda;
    Dense I(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) I[i][i] = 1.0;
    const Dense Rinv = lu_solve(R, I);
    const Dense A = matmul(K, Rinv);
    HatResult out;
    out.fitted = matmul(A, Y);
    for (std::size_t i = 0; i < n; ++i) out.df += A[i][i];
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < Y[i].size(); ++j) {
            const double e = Y[i][j] - out.fitted[i][j];
            rss += e * e;
        }
    const double denom = 1.0 - out.df / static_cast<double>(n);
    out.gcv = rss / (static_cast<double>(n) * denom * denom);
    return out;
}

inline Dense one_hot(const std::vector<std::uint32_t>& labels, std::size_t classes) {
    Dense Y(labels.size(), std::vector<double>(classes, 0.0));
    for (std::size_t i = 0; i < labels.size(); ++i) Y[i][labels[i]] = 1.0;
    return Y;
}

inline double rel_frobenius(const flycl::Matrix& a, const flycl::Matrix& b) {
    const double nb = b.norm();
    return nb > 0.0 ? (a - b).norm() / nb : (a - b).norm();
}

/// Standard-normal matrix drawn from one Philox stream, row after row.
inline flycl::RowMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed, std::uint64_t stream = 0,
                                 double scale = 1.0) {
    flycl::PhiloxStream rng(seed, stream);
    flycl::RowMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = scale * rng.next_normal();
    return out;
}

inline std::vector<std::uint32_t> random_labels(std::size_t n, std::uint32_t classes, std::uint64_t seed) {
    flycl::PhiloxStream rng(seed, 99);
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i < classes ? static_cast<std::uint32_t>(i) : rng.uniform_below(classes);
    return out;
}

/// Random symmetric PSD matrix B Bᵀ with B of shape m x rank.
inline flycl::Matrix random_psd(std::size_t m, std::size_t rank, std::uint64_t seed) {
    const flycl::Matrix B = gaussian(m, rank, seed, 7);
    return B * B.transpose();
}

}  // namespace oracle
