#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "flycl/error.hpp"
#include "flycl/projector.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace flycl;

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// Exhaustive top-k: sort all indices by (|h| desc, index asc), keep the
/// first k nonzero ones.
SparseActivation sort_top_k(const std::vector<double>& h, std::size_t k) {
    std::vector<std::uint32_t> order(h.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return std::fabs(h[a]) > std::fabs(h[b]); });
    std::vector<std::uint32_t> kept;
    for (std::size_t i = 0; i < order.size() && kept.size() < k; ++i)
        if (h[order[i]] != 0.0) kept.push_back(order[i]);
    std::sort(kept.begin(), kept.end());
    SparseActivation out;
    out.dim = h.size();
    out.indices = kept;
    for (auto i : kept) out.values.push_back(h[i]);
    return out;
}

}  // namespace

TEST(Projector, BuildProjectionRowsHaveExactlyPDistinctIndices) {
    const auto W = build_projection(7, 4, 3, 2);
    ASSERT_EQ(W.rows(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto idx = W.row_indices(i);
        ASSERT_EQ(idx.size(), 2u);
        EXPECT_LT(idx[0], idx[1]);
        EXPECT_LT(idx[1], 3u);
    }
}

TEST(Projector, ExactlyPNonzerosPerRowAtScale) {
    const auto W = build_projection(3, 500, 80, 17);
    const RowMatrix D = W.densify();
    for (Eigen::Index i = 0; i < D.rows(); ++i) EXPECT_EQ((D.row(i).array() != 0.0).count(), 17);
}

TEST(Projector, BuildProjectionIsDeterministicInSeed) {
    EXPECT_EQ(build_projection(7, 64, 20, 5), build_projection(7, 64, 20, 5));
    EXPECT_FALSE(build_projection(7, 64, 20, 5) == build_projection(8, 64, 20, 5));
}

TEST(Projector, RowDrawsFollowDocumentedStreams) {
    // Row i: Floyd over uniform_below on stream 2i, normals on stream 2i+1 in
    // ascending column order.
    const std::uint64_t seed = 1234;
    const std::size_t m = 16, d = 10, p = 4;
    const auto W = build_projection(seed, m, d, p);
    for (std::size_t i = 0; i < m; ++i) {
        PhiloxStream pick(seed, 2 * i);
        std::set<std::uint32_t> cols;
        for (std::size_t j = d - p; j < d; ++j) {
            const std::uint32_t t = pick.uniform_below(static_cast<std::uint32_t>(j + 1));
            cols.insert(cols.count(t) ? static_cast<std::uint32_t>(j) : t);
        }
        PhiloxStream normals(seed, 2 * i + 1);
        std::size_t e = 0;
        for (auto c : cols) {
            EXPECT_EQ(W.row_indices(i)[e], c);
            EXPECT_EQ(W.row_weights(i)[e], normals.next_normal());
            ++e;
        }
    }
}

TEST(Projector, WeightsAreStandardNormal) {
    const auto W = build_projection(11, 4000, 100, 50);
    double s1 = 0.0, s2 = 0.0;
    const double n = 4000.0 * 50.0;
    for (std::size_t i = 0; i < W.rows(); ++i)
        for (double w : W.row_weights(i)) {
            s1 += w;
            s2 += w * w;
        }
    EXPECT_NEAR(s1 / n, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Projector, ColumnsAreUniform) {
    const std::size_t m = 20000, d = 20, p = 5;
    const auto W = build_projection(12, m, d, p);
    std::vector<double> hits(d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (auto c : W.row_indices(i)) hits[c] += 1.0;
    const double expected = static_cast<double>(m * p) / d;
    double chi2 = 0.0;
    for (double h : hits) chi2 += (h - expected) * (h - expected) / expected;
    EXPECT_LT(chi2, 45.0);  // 19 dof, p < 1e-3
}

TEST(Projector, InvalidShapes) {
    EXPECT_FLYCL_ERROR(Errc::InvalidShape, build_projection(0, 10, 5, 5), "p=5");
    EXPECT_FLYCL_ERROR(Errc::InvalidShape, build_projection(0, 10, 5, 0), "p=0");
    EXPECT_FLYCL_ERROR(Errc::InvalidShape, build_projection(0, 5, 5, 2), "m=5");
    EXPECT_FLYCL_ERROR(Errc::InvalidShape, SparseProjectionMatrix(2, 3, 2, {0, 1, 1, 1}, {1, 1, 1, 1}), "");
    EXPECT_FLYCL_ERROR(Errc::InvalidShape, SparseProjectionMatrix(1, 3, 2, {0, 3}, {1, 1}), "");
    EXPECT_FLYCL_ERROR(Errc::InvalidShape, SparseProjectionMatrix(1, 3, 2, {0}, {1}), "entries");
}

TEST(Projector, FullColumnRankForTallSparseProjection) {
    int full = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RowMatrix D = build_projection(seed, 200, 50, 10).densify();
        full += oracle::rank(oracle::to_dense(D)) == 50 ? 1 : 0;
    }
    EXPECT_GE(full, 99);
}

TEST(Projector, ZeroVectorProjectsToZero) {
    const auto W = build_projection(1, 50, 10, 3);
    const std::vector<double> v(10, 0.0);
    EXPECT_TRUE(project(W, v).isZero(0.0));
}

TEST(Projector, HandCase) {
    // Rows {(0,1),(1,2)} and {(0,-1),(1,0.5)}: d = 2 is allowed in the explicit
    // constructor since p <= d there.
    const SparseProjectionMatrix W(2, 2, 2, {0, 1, 0, 1}, {1.0, 2.0, -1.0, 0.5});
    const std::vector<double> v{2.0, 3.0};
    const Vector h = project(W, v);
    EXPECT_EQ(h(0), 8.0);
    EXPECT_EQ(h(1), -0.5);
}

TEST(Projector, MatchesDenseMatvecOracle) {
    const std::size_t m = 300, d = 40;
    const auto W = build_projection(5, m, d, d - 1);
    const auto D = oracle::to_dense(W.densify());
    const RowMatrix V = oracle::gaussian(5, d, 6);
    for (Eigen::Index r = 0; r < V.rows(); ++r) {
        const std::vector<double> v(V.row(r).data(), V.row(r).data() + d);
        const auto expected = oracle::matvec(D, v);
        const auto got = to_std(project(W, v));
        for (std::size_t i = 0; i < m; ++i) {
            EXPECT_NEAR(got[i], expected[i], 1e-12 * std::max(1.0, std::fabs(expected[i])));
        }
    }
}

TEST(Projector, DimensionMismatch) {
    const auto W = build_projection(1, 50, 10, 3);
    const std::vector<double> v(9, 1.0);
    EXPECT_FLYCL_ERROR(Errc::DimensionMismatch, project(W, v), "9");
    EXPECT_FLYCL_ERROR(Errc::DimensionMismatch, project_batch(W, RowMatrix::Zero(2, 11)), "11");
}

TEST(Projector, Linearity) {
    const auto W = build_projection(2, 400, 30, 7);
    const RowMatrix UV = oracle::gaussian(2, 30, 3);
    const double a = 1.7, b = -0.3;
    std::vector<double> u(30), v(30), w(30);
    for (int j = 0; j < 30; ++j) {
        u[j] = UV(0, j);
        v[j] = UV(1, j);
        w[j] = a * u[j] + b * v[j];
    }
    const Vector lhs = project(W, w);
    const Vector rhs = a * project(W, u) + b * project(W, v);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Projector, BatchIsBitwiseEqualToLoop) {
    for (std::size_t n : {0u, 1u, 7u, 8u, 64u, 130u}) {
        const auto W = build_projection(4, 1000, 96, 30);
        const RowMatrix V = oracle::gaussian(n, 96, 8 + n);
        const RowMatrix H = project_batch(W, V);
        ASSERT_EQ(H.rows(), static_cast<Eigen::Index>(n));
        ASSERT_EQ(H.cols(), 1000);
        for (std::size_t r = 0; r < n; ++r) {
            const Vector h = project(W, {V.row(r).data(), 96});
            ASSERT_EQ(std::memcmp(H.row(r).data(), h.data(), sizeof(double) * 1000), 0) << "n=" << n << " row " << r;
        }
    }
}

TEST(Projector, DenseBatchAgreesWithSparse) {
    const auto W = build_projection(4, 500, 64, 20);
    const RowMatrix V = oracle::gaussian(20, 64, 9);
    const RowMatrix Hs = project_batch(W, V);
    const RowMatrix Hd = project_batch_dense(W.densify(), V);
    EXPECT_LT((Hs - Hd).cwiseAbs().maxCoeff(), 1e-12 * Hs.cwiseAbs().maxCoeff());
}

TEST(Projector, TopKExamples) {
    const std::vector<double> h{3, 1, -4, 2};
    EXPECT_EQ(top_k(h, 2).densify(), (Vector(4) << 3, 0, -4, 0).finished());
    EXPECT_EQ(top_k(h, 4).densify(), (Vector(4) << 3, 1, -4, 2).finished());
    const std::vector<double> ties{1, 1, 1};
    EXPECT_EQ(top_k(ties, 2).indices, (std::vector<std::uint32_t>{0, 1}));
    const std::vector<double> signed_ties{-2, 2, 1, -2};
    EXPECT_EQ(top_k(signed_ties, 2).indices, (std::vector<std::uint32_t>{0, 1}));
}

TEST(Projector, TopKSkipsZeros) {
    const std::vector<double> h{0, 5, 0, 0};
    const auto a = top_k(h, 3);
    EXPECT_EQ(a.indices, (std::vector<std::uint32_t>{1}));
    EXPECT_EQ(a.values, (std::vector<double>{5}));
}

TEST(Projector, TopKInvalidK) {
    const std::vector<double> h{1, 2};
    EXPECT_FLYCL_ERROR(Errc::InvalidK, top_k(h, 0), "k=0");
    EXPECT_FLYCL_ERROR(Errc::InvalidK, top_k(h, 3), "k=3");
}

TEST(Projector, TopKMatchesExhaustiveSortOracle) {
    PhiloxStream rng(21, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.uniform_below(40);
        std::vector<double> h(m);
        // Small integer values force plenty of ties and zeros.
        for (auto& x : h) x = static_cast<double>(static_cast<int>(rng.uniform_below(7)) - 3);
        const std::size_t k = 1 + rng.uniform_below(static_cast<std::uint32_t>(m));
        ASSERT_EQ(top_k(h, k), sort_top_k(h, k)) << "trial " << trial;
    }
}

TEST(Projector, TopKIsIdempotent) {
    const RowMatrix H = oracle::gaussian(20, 300, 22);
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
        for (std::size_t k : {1u, 10u, 150u, 300u}) {
            const auto once = top_k({H.row(r).data(), 300}, k);
            const Vector dense = once.densify();
            EXPECT_EQ(top_k({dense.data(), 300}, k), once);
        }
    }
}

TEST(Projector, TopKRowsMatchesTopK) {
    RowMatrix H = oracle::gaussian(5, 50, 23);
    const RowMatrix original = H;
    top_k_rows(H, 7);
    for (Eigen::Index r = 0; r < 5; ++r) {
        EXPECT_EQ(Vector(H.row(r).transpose()), top_k({original.row(r).data(), 50}, 7).densify());
    }
}

TEST(Projector, ResidualExamples) {
    const std::vector<double> h{3, 4};
    EXPECT_DOUBLE_EQ(sparsification_residual(h, 1), 9.0 / 25.0);
    EXPECT_EQ(sparsification_residual(h, 2), 0.0);
    const std::vector<double> zero(5, 0.0);
    EXPECT_EQ(sparsification_residual(zero, 2), 0.0);
}

TEST(Projector, ResidualIsNonIncreasingInK) {
    const RowMatrix H = oracle::gaussian(1, 10000, 24);
    const std::span<const double> h{H.data(), 10000};
    double last = 1.0;
    for (std::size_t k = 1; k <= 10000; k += 97) {
        const double r = sparsification_residual(h, k);
        EXPECT_LE(r, last) << "k=" << k;
        last = r;
    }
    EXPECT_EQ(sparsification_residual(h, 10000), 0.0);
}

TEST(Projector, SparseCoderModesAgree) {
    const auto W = build_projection(30, 600, 48, 12);
    const SparseCoder sparse(W, 60);
    const SparseCoder dense = sparse.as_dense();
    EXPECT_EQ(dense.mode(), SparseCoder::Mode::Dense);
    const RowMatrix V = oracle::gaussian(30, 48, 31);
    const RowMatrix Es = sparse.encode_batch(V);
    const RowMatrix Ed = dense.encode_batch(V);
    for (Eigen::Index r = 0; r < V.rows(); ++r) {
        EXPECT_EQ((Es.row(r).array() != 0.0).count(), 60);
        EXPECT_LT((Es.row(r) - Ed.row(r)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(sparse.encode({V.row(r).data(), 48}).densify(), Vector(Es.row(r).transpose()));
    }
    const SparseCoder id = SparseCoder::identity(48);
    EXPECT_EQ(id.encode_batch(V), V);
    EXPECT_EQ(id.output_dim(), 48u);
}
