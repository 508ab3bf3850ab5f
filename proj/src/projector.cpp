#include "flycl/projector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "flycl/error.hpp"
#include "flycl/philox.hpp"

namespace flycl {

namespace {

void check_input(const SparseProjectionMatrix& W, std::size_t dim) {
    if (dim != W.cols()) {
        throw Error(Errc::DimensionMismatch,
                    "input has dimension " + std::to_string(dim) + ", projection expects " + std::to_string(W.cols()));
    }
}

// Batch kernel tiling. A block of kBlock samples is transposed so that input
// dimension j is kBlock contiguous doubles. The block is walked in slices of
// kSlice dimensions (L1-sized) against chunks of kRows projection rows whose
// accumulators stay in L2. Each row's entries are column-sorted, so the slice
// boundaries split them into contiguous runs and every output is summed in
// ascending column order regardless of tiling.
constexpr std::size_t kBlock = 64;
constexpr std::size_t kSlice = 64;
constexpr std::size_t kRows = 128;

// Start of each slice's run within each row: (slices + 1) offsets per row.
std::vector<std::uint32_t> slice_offsets(const SparseProjectionMatrix& W, std::size_t slices) {
    const std::size_t m = W.rows();
    const std::size_t p = W.nnz_per_row();
    std::vector<std::uint32_t> offsets(m * (slices + 1));
    for (std::size_t i = 0; i < m; ++i) {
        const auto idx = W.row_indices(i);
        std::size_t e = 0;
        for (std::size_t c = 0; c <= slices; ++c) {
            const std::size_t limit = std::min(W.cols(), c * kSlice);
            while (e < p && idx[e] < limit) ++e;
            offsets[i * (slices + 1) + c] = static_cast<std::uint32_t>(e);
        }
    }
    return offsets;
}

// acc[0..kBlock) += sum over entries [begin, end) of w[e] * block column idx[e].
inline void accumulate_run(double* acc, const double* block, const std::uint32_t* idx, const double* w,
                           std::size_t begin, std::size_t end) {
#if defined(__AVX512F__)
    constexpr int lanes = static_cast<int>(kBlock / 8);
    __m512d a[lanes];
    for (int v = 0; v < lanes; ++v) a[v] = _mm512_load_pd(acc + 8 * v);
    for (std::size_t e = begin; e < end; ++e) {
        const __m512d weight = _mm512_set1_pd(w[e]);
        const double* column = block + static_cast<std::size_t>(idx[e]) * kBlock;
        for (int v = 0; v < lanes; ++v) a[v] = _mm512_fmadd_pd(weight, _mm512_load_pd(column + 8 * v), a[v]);
    }
    for (int v = 0; v < lanes; ++v) _mm512_store_pd(acc + 8 * v, a[v]);
#else
    for (std::size_t e = begin; e < end; ++e) {
        const double weight = w[e];
        const double* column = block + static_cast<std::size_t>(idx[e]) * kBlock;
        for (std::size_t s = 0; s < kBlock; ++s) acc[s] = std::fma(weight, column[s], acc[s]);
    }
#endif
}

// One sample, same fused multiply-add sequence as the block kernel.
void project_row(const SparseProjectionMatrix& W, const double* v, double* out) {
    const std::size_t p = W.nnz_per_row();
    for (std::size_t i = 0; i < W.rows(); ++i) {
        const std::uint32_t* idx = W.row_indices(i).data();
        const double* w = W.row_weights(i).data();
        double acc = 0.0;
        for (std::size_t e = 0; e < p; ++e) acc = std::fma(w[e], v[idx[e]], acc);
        out[i] = acc;
    }
}

// Below this many samples the scalar path beats padding a block.
constexpr std::size_t kScalarBelow = 8;

}  // namespace

SparseProjectionMatrix::SparseProjectionMatrix(std::size_t m, std::size_t d, std::size_t p,
                                               std::vector<std::uint32_t> indices, std::vector<double> weights,
                                               std::uint64_t seed)
    : m_(m), d_(d), p_(p), indices_(std::move(indices)), weights_(std::move(weights)), seed_(seed) {
    if (m == 0 || d == 0 || p == 0 || p > d) {
        throw Error(Errc::InvalidShape, "projection shape m=" + std::to_string(m) + " d=" + std::to_string(d) +
                                            " p=" + std::to_string(p) + " needs 0 < p <= d");
    }
    if (indices_.size() != m * p || weights_.size() != m * p) {
        throw Error(Errc::InvalidShape, "projection needs m*p = " + std::to_string(m * p) + " entries, got " +
                                            std::to_string(indices_.size()) + " indices and " +
                                            std::to_string(weights_.size()) + " weights");
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto idx = row_indices(i);
        for (std::size_t e = 0; e < p; ++e) {
            if (idx[e] >= d || (e > 0 && idx[e] <= idx[e - 1])) {
                throw Error(Errc::InvalidShape,
                            "row " + std::to_string(i) + " columns must be strictly increasing and < d");
            }
        }
    }
}

RowMatrix SparseProjectionMatrix::densify() const {
    RowMatrix dense = RowMatrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(d_));
    for (std::size_t i = 0; i < m_; ++i) {
        const auto idx = row_indices(i);
        const auto w = row_weights(i);
        for (std::size_t e = 0; e < p_; ++e) dense(static_cast<Eigen::Index>(i), idx[e]) = w[e];
    }
    return dense;
}

SparseProjectionMatrix build_projection(std::uint64_t seed, std::size_t m, std::size_t d, std::size_t p) {
    if (!(0 < p && p < d && d < m)) {
        throw Error(Errc::InvalidShape, "projection requires 0 < p < d < m, got m=" + std::to_string(m) +
                                            " d=" + std::to_string(d) + " p=" + std::to_string(p));
    }
    if (d > 0xFFFFFFFFull) throw Error(Errc::InvalidShape, "d exceeds 32-bit column range");

    std::vector<std::uint32_t> indices(m * p);
    std::vector<double> weights(m * p);
    std::vector<char> chosen(d, 0);
    for (std::size_t i = 0; i < m; ++i) {
        PhiloxStream columns(seed, 2 * static_cast<std::uint64_t>(i));
        std::uint32_t* row = indices.data() + i * p;
        std::size_t filled = 0;
        // Floyd: uniform p-subset of {0..d-1}.
        for (std::size_t j = d - p; j < d; ++j) {
            const std::uint32_t t = columns.uniform_below(static_cast<std::uint32_t>(j + 1));
            const std::uint32_t pick = chosen[t] ? static_cast<std::uint32_t>(j) : t;
            chosen[pick] = 1;
            row[filled++] = pick;
        }
        std::sort(row, row + p);
        for (std::size_t e = 0; e < p; ++e) chosen[row[e]] = 0;

        PhiloxStream normals(seed, 2 * static_cast<std::uint64_t>(i) + 1);
        double* w = weights.data() + i * p;
        for (std::size_t e = 0; e < p; ++e) w[e] = normals.next_normal();
    }
    return SparseProjectionMatrix(m, d, p, std::move(indices), std::move(weights), seed);
}

RowMatrix project_batch(const SparseProjectionMatrix& W, const RowMatrix& V) {
    check_input(W, static_cast<std::size_t>(V.cols()));
    const auto n = static_cast<std::size_t>(V.rows());
    const std::size_t d = W.cols();
    const std::size_t m = W.rows();
    RowMatrix H(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    if (n < kScalarBelow) {
        for (std::size_t r = 0; r < n; ++r) {
            project_row(W, V.row(static_cast<Eigen::Index>(r)).data(), H.row(static_cast<Eigen::Index>(r)).data());
        }
        return H;
    }
    const std::size_t slices = (d + kSlice - 1) / kSlice;
    const std::vector<std::uint32_t> offsets = slice_offsets(W, slices);

    std::vector<double, Eigen::aligned_allocator<double>> block(kBlock * d);
    std::vector<double, Eigen::aligned_allocator<double>> acc(kBlock * kRows);
    for (std::size_t first = 0; first < n; first += kBlock) {
        const std::size_t width = std::min(kBlock, n - first);
        std::fill(block.begin(), block.end(), 0.0);
        for (std::size_t s = 0; s < width; ++s) {
            const double* row = V.row(static_cast<Eigen::Index>(first + s)).data();
            for (std::size_t j = 0; j < d; ++j) block[j * kBlock + s] = row[j];
        }
        for (std::size_t r0 = 0; r0 < m; r0 += kRows) {
            const std::size_t r1 = std::min(m, r0 + kRows);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t c = 0; c < slices; ++c) {
                for (std::size_t i = r0; i < r1; ++i) {
                    const std::uint32_t* off = offsets.data() + i * (slices + 1);
                    accumulate_run(acc.data() + (i - r0) * kBlock, block.data(), W.row_indices(i).data(),
                                   W.row_weights(i).data(), off[c], off[c + 1]);
                }
            }
            for (std::size_t s = 0; s < width; ++s) {
                double* out = H.row(static_cast<Eigen::Index>(first + s)).data();
                for (std::size_t i = r0; i < r1; ++i) out[i] = acc[(i - r0) * kBlock + s];
            }
        }
    }
    return H;
}

Vector project(const SparseProjectionMatrix& W, std::span<const double> v) {
    check_input(W, v.size());
    Vector h(static_cast<Eigen::Index>(W.rows()));
    project_row(W, v.data(), h.data());
    return h;
}

RowMatrix project_batch_dense(const RowMatrix& dense_weights, const RowMatrix& V) {
    if (V.cols() != dense_weights.cols()) {
        throw Error(Errc::DimensionMismatch, "input has dimension " + std::to_string(V.cols()) +
                                                 ", projection expects " + std::to_string(dense_weights.cols()));
    }
    RowMatrix H(V.rows(), dense_weights.rows());
    H.noalias() = V * dense_weights.transpose();
    return H;
}

Vector SparseActivation::densify() const {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t e = 0; e < indices.size(); ++e) out(indices[e]) = values[e];
    return out;
}

SparseActivation top_k(std::span<const double> h, std::size_t k) {
    if (k < 1 || k > h.size()) {
        throw Error(Errc::InvalidK, "k=" + std::to_string(k) + " must be in [1, " + std::to_string(h.size()) + "]");
    }
    std::vector<std::uint32_t> order;
    order.reserve(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] != 0.0) order.push_back(static_cast<std::uint32_t>(i));
    }
    if (order.size() > k) {
        auto stronger = [&h](std::uint32_t a, std::uint32_t b) {
            const double ma = std::fabs(h[a]);
            const double mb = std::fabs(h[b]);
            return ma > mb || (ma == mb && a < b);
        };
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), stronger);
        order.resize(k);
        std::sort(order.begin(), order.end());
    }
    SparseActivation out;
    out.dim = h.size();
    out.indices = std::move(order);
    out.values.reserve(out.indices.size());
    for (std::uint32_t i : out.indices) out.values.push_back(h[i]);
    return out;
}

void top_k_rows(RowMatrix& H, std::size_t k) {
    const auto m = static_cast<std::size_t>(H.cols());
    if (k < 1 || k > m) {
        throw Error(Errc::InvalidK, "k=" + std::to_string(k) + " must be in [1, " + std::to_string(m) + "]");
    }
    if (k == m) return;
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
        double* row = H.row(r).data();
        const SparseActivation kept = top_k({row, m}, k);
        std::fill(row, row + m, 0.0);
        for (std::size_t e = 0; e < kept.size(); ++e) row[kept.indices[e]] = kept.values[e];
    }
}

double sparsification_residual(std::span<const double> h, std::size_t k) {
    const SparseActivation kept = top_k(h, k);
    double total = 0.0;
    for (double x : h) total += x * x;
    if (total == 0.0) return 0.0;
    double retained = 0.0;
    for (double x : kept.values) retained += x * x;
    return std::max(0.0, total - retained) / total;
}

SparseCoder SparseCoder::identity(std::size_t input_dim) {
    SparseCoder coder;
    coder.mode_ = Mode::Identity;
    coder.input_dim_ = input_dim;
    coder.output_dim_ = input_dim;
    coder.k_ = input_dim;
    return coder;
}

SparseCoder::SparseCoder(SparseProjectionMatrix W, std::size_t k)
    : mode_(Mode::Sparse), input_dim_(W.cols()), output_dim_(W.rows()), k_(k), W_(std::move(W)) {
    if (k_ < 1 || k_ > output_dim_) {
        throw Error(Errc::InvalidK,
                    "k=" + std::to_string(k_) + " must be in [1, m=" + std::to_string(output_dim_) + "]");
    }
}

SparseCoder SparseCoder::as_dense() const {
    SparseCoder coder = *this;
    if (mode_ == Mode::Sparse) {
        coder.mode_ = Mode::Dense;
        coder.dense_ = W_.densify();
    }
    return coder;
}

RowMatrix SparseCoder::project(const RowMatrix& V) const {
    switch (mode_) {
        case Mode::Identity:
            if (static_cast<std::size_t>(V.cols()) != input_dim_) {
                throw Error(Errc::DimensionMismatch, "input has dimension " + std::to_string(V.cols()) +
                                                         ", expected " + std::to_string(input_dim_));
            }
            return V;
        case Mode::Sparse: return project_batch(W_, V);
        case Mode::Dense: return project_batch_dense(dense_, V);
    }
    return V;
}

RowMatrix SparseCoder::encode_batch(const RowMatrix& V) const {
    RowMatrix H = project(V);
    if (mode_ != Mode::Identity) top_k_rows(H, k_);
    return H;
}

SparseActivation SparseCoder::encode(std::span<const double> v) const {
    RowMatrix V(1, static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), V.data());
    const RowMatrix h = project(V);
    const std::size_t k = mode_ == Mode::Identity ? output_dim_ : k_;
    return top_k({h.data(), output_dim_}, k);
}

}  // namespace flycl
