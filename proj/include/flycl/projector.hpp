#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flycl/linalg.hpp"

namespace flycl {

/// Fixed m x d expansion matrix with exactly p nonzeros per row, stored as
/// per-row (column, weight) lists sorted by column.
class SparseProjectionMatrix {
public:
    SparseProjectionMatrix() = default;

    /// Builds from explicit entries: `indices` and `weights` hold m*p values,
    /// row after row. Checks p <= d, in-range and strictly increasing columns
    /// within each row.
    SparseProjectionMatrix(std::size_t m, std::size_t d, std::size_t p, std::vector<std::uint32_t> indices,
                           std::vector<double> weights, std::uint64_t seed = 0);

    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return d_; }
    std::size_t nnz_per_row() const noexcept { return p_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::span<const std::uint32_t> row_indices(std::size_t i) const noexcept {
        return {indices_.data() + i * p_, p_};
    }
    std::span<const double> row_weights(std::size_t i) const noexcept { return {weights_.data() + i * p_, p_}; }

    RowMatrix densify() const;

    friend bool operator==(const SparseProjectionMatrix&, const SparseProjectionMatrix&) = default;

private:
    std::size_t m_ = 0;
    std::size_t d_ = 0;
    std::size_t p_ = 0;
    std::vector<std::uint32_t> indices_;
    std::vector<double> weights_;
    std::uint64_t seed_ = 0;
};

/// Seeded sparse random projection. Requires 0 < p < d < m.
///
/// Row i draws its column set from Philox stream 2i (Floyd's algorithm over
/// uniform_below) and its p standard-normal weights from stream 2i+1, assigned
/// in ascending column order.
SparseProjectionMatrix build_projection(std::uint64_t seed, std::size_t m, std::size_t d, std::size_t p);

/// h = W v over the stored entries only (m*p multiply-adds).
Vector project(const SparseProjectionMatrix& W, std::span<const double> v);

/// Row-wise project; bitwise identical to looping project().
RowMatrix project_batch(const SparseProjectionMatrix& W, const RowMatrix& V);

/// Dense GEMM reference path: H = V * Wdenseᵀ (m*d multiply-adds per row).
RowMatrix project_batch_dense(const RowMatrix& dense_weights, const RowMatrix& V);

/// k retained entries of a length-`dim` vector, ascending by index.
struct SparseActivation {
    std::size_t dim = 0;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    std::size_t size() const noexcept { return indices.size(); }
    Vector densify() const;

    friend bool operator==(const SparseActivation&, const SparseActivation&) = default;
};

/// Keeps the k entries of largest magnitude (signed values retained). Ties go
/// to the lower index. Zero entries are never kept, so fewer than k survive
/// when h has fewer than k nonzeros. Requires 1 <= k <= h.size().
SparseActivation top_k(std::span<const double> h, std::size_t k);

/// In-place top_k applied to every row of H.
void top_k_rows(RowMatrix& H, std::size_t k);

/// ||h - top_k(h)||² / ||h||², and 0 for h = 0.
double sparsification_residual(std::span<const double> h, std::size_t k);

/// Z(v) = top-k(W v), or the identity map when built without a projection.
/// The dense variant holds the same W densified and multiplies it with GEMM.
class SparseCoder {
public:
    enum class Mode { Identity, Sparse, Dense };

    static SparseCoder identity(std::size_t input_dim);
    SparseCoder(SparseProjectionMatrix W, std::size_t k);

    /// Same outputs as this coder, computed through the dense matrix product.
    SparseCoder as_dense() const;

    Mode mode() const noexcept { return mode_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    std::size_t k() const noexcept { return k_; }
    const SparseProjectionMatrix& projection() const noexcept { return W_; }

    /// Pre-activation h (no top-k) for every row of V.
    RowMatrix project(const RowMatrix& V) const;
    /// Post-top-k activations for every row of V, as a dense n x m matrix.
    RowMatrix encode_batch(const RowMatrix& V) const;
    SparseActivation encode(std::span<const double> v) const;

private:
    SparseCoder() = default;

    Mode mode_ = Mode::Identity;
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    std::size_t k_ = 0;
    SparseProjectionMatrix W_;
    RowMatrix dense_;
};

}  // namespace flycl
