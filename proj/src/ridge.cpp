#include "flycl/ridge.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "flycl/error.hpp"

namespace flycl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_grid(const LambdaGrid& grid) {
    if (grid.empty()) throw Error(Errc::InvalidArgument, "lambda grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) {
            throw Error(Errc::InvalidArgument, "lambda grid entry " + std::to_string(i) + " must be positive");
        }
        if (i > 0 && grid[i] <= grid[i - 1]) {
            throw Error(Errc::InvalidArgument, "lambda grid must be strictly increasing at entry " + std::to_string(i));
        }
    }
}

void check_labels(const RowMatrix& H, const LabelMatrix& Y) {
    if (static_cast<std::size_t>(H.rows()) != Y.rows()) {
        throw Error(Errc::DimensionMismatch, "H has " + std::to_string(H.rows()) + " rows, Y has " +
                                                 std::to_string(Y.rows()));
    }
    for (std::size_t i = 0; i < Y.labels.size(); ++i) {
        if (Y.labels[i] >= Y.num_classes) {
            throw Error(Errc::UnknownClass, "label " + std::to_string(Y.labels[i]) + " at row " +
                                                std::to_string(i) + " >= class count " +
                                                std::to_string(Y.num_classes));
        }
    }
}

// Lower triangle of G mirrored into the upper triangle.
void symmetrize_from_lower(Matrix& G) {
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
}

LabelMatrix labels_of(const TaskBatch& batch) { return {batch.labels, batch.classes_seen}; }

}  // namespace

Matrix LabelMatrix::dense() const {
    Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    return Y;
}

LambdaGrid log_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi >= lo) || points == 0) {
        throw Error(Errc::InvalidArgument, "lambda grid needs 0 < min <= max and points >= 1");
    }
    if (points == 1) return {lo};
    if (hi == lo) throw Error(Errc::InvalidArgument, "lambda grid with several points needs min < max");
    LambdaGrid grid(points);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

LambdaGrid transformer_lambda_grid() { return log_grid(1e6, 1e9, 13); }
LambdaGrid cnn_lambda_grid() { return log_grid(1e4, 1e9, 21); }

RidgeState::RidgeState(std::size_t m)
    : G(Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))),
      S(static_cast<Eigen::Index>(m), 0) {}

void update_stats(RidgeState& state, const RowMatrix& H, const LabelMatrix& Y) {
    if (static_cast<std::size_t>(H.cols()) != state.dim()) {
        throw Error(Errc::DimensionMismatch, "H has " + std::to_string(H.cols()) + " columns, state has m=" +
                                                 std::to_string(state.dim()));
    }
    check_labels(H, Y);
    if (Y.num_classes < state.classes_seen) {
        throw Error(Errc::DimensionMismatch, "label matrix has " + std::to_string(Y.num_classes) +
                                                 " classes, state already has " + std::to_string(state.classes_seen));
    }
    if (Y.num_classes > state.classes_seen) {
        const Eigen::Index old_cols = state.S.cols();
        state.S.conservativeResize(Eigen::NoChange, Y.num_classes);
        state.S.rightCols(Y.num_classes - old_cols).setZero();
        state.classes_seen = Y.num_classes;
    }
    if (H.rows() > 0) {
        state.G.selfadjointView<Eigen::Lower>().rankUpdate(H.transpose());
        symmetrize_from_lower(state.G);
        for (std::size_t i = 0; i < Y.labels.size(); ++i) {
            state.S.col(Y.labels[i]) += H.row(static_cast<Eigen::Index>(i)).transpose();
        }
    }
    state.solved = false;
}

GcvReport gcv_select(const RowMatrix& H, const LabelMatrix& Y, const LambdaGrid& grid) {
    check_grid(grid);
    check_labels(H, Y);
    const Eigen::Index n = H.rows();
    if (n < 2) throw Error(Errc::DegenerateInput, "GCV needs at least 2 samples, got " + std::to_string(n));
    const Matrix Yd = Y.dense();

    // Left singular vectors and squared singular values, descending.
    Matrix U;
    Vector s2;
    if (n <= H.cols()) {
        Matrix K = Matrix::Zero(n, n);
        K.selfadjointView<Eigen::Lower>().rankUpdate(H);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
        s2 = eig.eigenvalues().reverse();
        U = eig.eigenvectors().rowwise().reverse();
    } else {
        Matrix M = Matrix::Zero(H.cols(), H.cols());
        M.selfadjointView<Eigen::Lower>().rankUpdate(H.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
        s2 = eig.eigenvalues().reverse();
        const Matrix V = eig.eigenvectors().rowwise().reverse();
        U = H * V;
    }
    const double s2_max = std::max(s2.size() > 0 ? s2(0) : 0.0, 0.0);
    const double cutoff = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * s2_max;
    Eigen::Index rank = 0;
    while (rank < s2.size() && s2(rank) > cutoff) ++rank;
    if (rank == 0) throw Error(Errc::DegenerateInput, "activation matrix is numerically zero");
    s2.conservativeResize(rank);
    U.conservativeResize(Eigen::NoChange, rank);
    if (n > H.cols()) {
        for (Eigen::Index i = 0; i < rank; ++i) U.col(i) /= std::sqrt(s2(i));
    }

    const Matrix B = U.transpose() * Yd;  // r x c
    GcvReport report;
    report.grid = grid;
    report.singular_values = s2.cwiseSqrt();
    report.df.resize(grid.size());
    report.gcv.resize(grid.size());
    const double nd = static_cast<double>(n);
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Vector shrink = s2.array() / (s2.array() + grid[j]);
        const double df = shrink.sum();
        const Matrix Yhat = U * (shrink.asDiagonal() * B);
        const double rss = (Yd - Yhat).squaredNorm();
        report.df[j] = df;
        double score = std::numeric_limits<double>::infinity();
        if (df < nd) {
            const double slack = 1.0 - df / nd;
            score = rss / (nd * slack * slack);
            if (!std::isfinite(score)) score = std::numeric_limits<double>::infinity();
        }
        report.gcv[j] = score;
        if (std::isfinite(score) && score <= best) {
            best = score;
            report.selected = grid[j];
            report.selected_index = j;
            found = true;
        }
    }
    if (!found) throw Error(Errc::DegenerateInput, "every lambda candidate has df >= n");
    return report;
}

Matrix solve_ridge_system(const Matrix& G, const Matrix& S, double lambda, SolveMethod method) {
    if (!(lambda > 0.0)) throw Error(Errc::InvalidArgument, "lambda must be positive, got " + std::to_string(lambda));
    if (G.rows() != G.cols() || S.rows() != G.rows()) {
        throw Error(Errc::DimensionMismatch, "G is " + std::to_string(G.rows()) + "x" + std::to_string(G.cols()) +
                                                 ", S has " + std::to_string(S.rows()) + " rows");
    }
    Matrix A = G;
    A.diagonal().array() += lambda;
    if (method == SolveMethod::Cholesky) {
        Eigen::LLT<Eigen::Ref<Matrix>> llt(A);
        if (llt.info() != Eigen::Success) {
            throw Error(Errc::NotPositiveDefinite, "G + lambda*I is not positive definite at lambda=" +
                                                       std::to_string(lambda));
        }
        return llt.solve(S);
    }
    Eigen::PartialPivLU<Eigen::Ref<Matrix>> lu(A);
    Matrix X = lu.solve(S);
    if (!X.allFinite()) {
        throw Error(Errc::NotPositiveDefinite, "LU solve produced non-finite values at lambda=" +
                                                   std::to_string(lambda));
    }
    return X;
}

void solve_prototypes(RidgeState& state, double lambda, SolveMethod method) {
    state.C = solve_ridge_system(state.G, state.S, lambda, method);
    state.solved = true;
    state.lambda_history.push_back(lambda);
}

CvReport cv_select(const RowMatrix& H, const LabelMatrix& Y, const LambdaGrid& grid, std::size_t folds,
                   SolveMethod method, double budget_seconds) {
    const auto start = Clock::now();
    check_grid(grid);
    check_labels(H, Y);
    const auto n = static_cast<std::size_t>(H.rows());
    if (folds < 2 || n < folds) {
        throw Error(Errc::DegenerateInput, std::to_string(folds) + "-fold CV needs at least " +
                                               std::to_string(std::max<std::size_t>(folds, 2)) + " samples, got " +
                                               std::to_string(n));
    }
    const Matrix Yd = Y.dense();
    const Eigen::Index m = H.cols();

    CvReport report;
    report.grid = grid;
    report.folds = folds;
    report.solves_total = folds * grid.size();
    std::vector<double> total(grid.size(), 0.0);
    std::vector<std::size_t> evaluated(grid.size(), 0);

    Matrix G(m, m);
    Matrix A(m, m);
    for (std::size_t f = 0; f < folds && report.solves_done < report.solves_total; ++f) {
        std::vector<Eigen::Index> train, held;
        for (std::size_t i = 0; i < n; ++i) (i % folds == f ? held : train).push_back(static_cast<Eigen::Index>(i));
        const RowMatrix Htr = H(train, Eigen::all);
        const RowMatrix Hval = H(held, Eigen::all);
        const Matrix Ytr = Yd(train, Eigen::all);
        const Matrix Yval = Yd(held, Eigen::all);

        G.setZero();
        G.selfadjointView<Eigen::Lower>().rankUpdate(Htr.transpose());
        symmetrize_from_lower(G);
        const Matrix S = Htr.transpose() * Ytr;

        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (seconds_since(start) > budget_seconds) break;
            A = G;
            A.diagonal().array() += grid[j];
            Matrix C;
            if (method == SolveMethod::Cholesky) {
                Eigen::LLT<Eigen::Ref<Matrix>> llt(A);
                if (llt.info() != Eigen::Success) {
                    throw Error(Errc::NotPositiveDefinite, "fold " + std::to_string(f) + " system at lambda=" +
                                                               std::to_string(grid[j]));
                }
                C = llt.solve(S);
            } else {
                Eigen::PartialPivLU<Eigen::Ref<Matrix>> lu(A);
                C = lu.solve(S);
            }
            total[j] += (Yval - Hval * C).squaredNorm();
            ++evaluated[j];
            ++report.solves_done;
        }
        if (seconds_since(start) > budget_seconds) break;
    }

    report.complete = report.solves_done == report.solves_total;
    report.error.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (evaluated[j] != folds) continue;
        report.error[j] = total[j] / static_cast<double>(n);
        if (report.error[j] <= best) {
            best = report.error[j];
            report.selected = grid[j];
        }
    }
    report.seconds = seconds_since(start);
    return report;
}

StageTimings& StageTimings::operator+=(const StageTimings& other) noexcept {
    projection += other.projection;
    statistics += other.statistics;
    selection += other.selection;
    solve += other.solve;
    return *this;
}

TaskTrainResult train_task(RidgeState& state, const SparseCoder& coder, const TaskBatch& batch,
                           const RidgeOptions& options) {
    if (batch.labels.empty()) {
        throw Error(Errc::EmptyDataset, "task " + std::to_string(batch.task_index) + " has no samples");
    }
    TaskTrainResult result;

    auto t0 = Clock::now();
    const RowMatrix H = coder.encode_batch(batch.features);
    result.timings.projection = seconds_since(t0);

    const LabelMatrix Y = labels_of(batch);
    t0 = Clock::now();
    update_stats(state, H, Y);
    result.timings.statistics = seconds_since(t0);

    t0 = Clock::now();
    if (options.fixed_lambda) {
        result.lambda = *options.fixed_lambda;
    } else if (options.explicit_cv) {
        result.cv = cv_select(H, Y, options.grid, options.cv_folds, options.solve);
        result.lambda = result.cv->selected;
    } else {
        result.gcv = gcv_select(H, Y, options.grid);
        result.lambda = result.gcv->selected;
    }
    result.timings.selection = seconds_since(t0);

    t0 = Clock::now();
    solve_prototypes(state, result.lambda, options.solve);
    result.timings.solve = seconds_since(t0);
    ++state.tasks_seen;
    return result;
}

OnlineTrainResult train_online(RidgeState& state, const SparseCoder& coder, const std::vector<TaskBatch>& batches,
                               const RidgeOptions& options, std::size_t solve_every) {
    if (solve_every == 0) throw Error(Errc::InvalidArgument, "solve_every must be >= 1");
    OnlineTrainResult result;
    std::optional<double> lambda = options.fixed_lambda;
    if (!lambda && !state.lambda_history.empty()) lambda = state.lambda_history.back();
    bool pending = false;

    for (std::size_t b = 0; b < batches.size(); ++b) {
        const TaskBatch& batch = batches[b];
        auto t0 = Clock::now();
        const RowMatrix H = coder.encode_batch(batch.features);
        result.timings.projection += seconds_since(t0);

        const LabelMatrix Y = labels_of(batch);
        t0 = Clock::now();
        update_stats(state, H, Y);
        result.timings.statistics += seconds_since(t0);
        pending = true;

        const bool last = b + 1 == batches.size();
        if ((b + 1) % solve_every != 0 && !last) continue;

        t0 = Clock::now();
        if (!options.fixed_lambda && H.rows() >= 2) {
            if (options.explicit_cv && static_cast<std::size_t>(H.rows()) >= options.cv_folds) {
                lambda = cv_select(H, Y, options.grid, options.cv_folds, options.solve).selected;
            } else {
                lambda = gcv_select(H, Y, options.grid).selected;
            }
        }
        result.timings.selection += seconds_since(t0);
        if (!lambda) continue;

        t0 = Clock::now();
        solve_prototypes(state, *lambda, options.solve);
        result.timings.solve += seconds_since(t0);
        result.lambdas.push_back(*lambda);
        ++result.solves;
        pending = false;
    }
    if (pending) {
        throw Error(Errc::DegenerateInput, "online stream ended without a selectable lambda");
    }
    return result;
}

std::uint32_t score_argmax(const RowMatrix& C, const SparseActivation& activation) {
    if (activation.dim != static_cast<std::size_t>(C.rows())) {
        throw Error(Errc::DimensionMismatch, "activation has dimension " + std::to_string(activation.dim) +
                                                 ", prototypes have " + std::to_string(C.rows()) + " rows");
    }
    const auto c = static_cast<std::size_t>(C.cols());
    std::vector<double> scores(c, 0.0);
    const double* base = C.data();
    for (std::size_t e = 0; e < activation.indices.size(); ++e) {
        const double a = activation.values[e];
        const double* row = base + static_cast<std::size_t>(activation.indices[e]) * c;
        for (std::size_t j = 0; j < c; ++j) scores[j] += a * row[j];
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
        if (scores[j] > scores[best]) best = j;
    }
    return static_cast<std::uint32_t>(best);
}

std::uint32_t score_argmax_dense(const RowMatrix& C, const Vector& activation) {
    if (activation.size() != C.rows()) {
        throw Error(Errc::DimensionMismatch, "activation has dimension " + std::to_string(activation.size()) +
                                                 ", prototypes have " + std::to_string(C.rows()) + " rows");
    }
    const Vector scores = C.transpose() * activation;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.size(); ++j) {
        if (scores(j) > scores(best)) best = j;
    }
    return static_cast<std::uint32_t>(best);
}

PrototypeScorer::PrototypeScorer(const RowMatrix& C)
    : rows_(static_cast<std::size_t>(C.rows())),
      classes_(static_cast<std::size_t>(C.cols())),
      stride_((classes_ + 7) / 8 * 8),
      padded_(rows_ * stride_, 0.0) {
    for (std::size_t i = 0; i < rows_; ++i) {
        std::copy_n(C.row(static_cast<Eigen::Index>(i)).data(), classes_, padded_.data() + i * stride_);
    }
}

namespace {

#if defined(__AVX512F__)
template <int NV>
void sparse_scores(const double* table, std::size_t stride, const SparseActivation& a, double* scores) {
    __m512d acc[NV];
    for (int v = 0; v < NV; ++v) acc[v] = _mm512_setzero_pd();
    for (std::size_t e = 0; e < a.indices.size(); ++e) {
        const __m512d x = _mm512_set1_pd(a.values[e]);
        const double* row = table + static_cast<std::size_t>(a.indices[e]) * stride;
        for (int v = 0; v < NV; ++v) acc[v] = _mm512_fmadd_pd(x, _mm512_load_pd(row + 8 * v), acc[v]);
    }
    for (int v = 0; v < NV; ++v) _mm512_storeu_pd(scores + 8 * v, acc[v]);
}
#endif

void sparse_scores_generic(const double* table, std::size_t stride, const SparseActivation& a, double* scores) {
    std::fill(scores, scores + stride, 0.0);
    for (std::size_t e = 0; e < a.indices.size(); ++e) {
        const double x = a.values[e];
        const double* row = table + static_cast<std::size_t>(a.indices[e]) * stride;
        for (std::size_t j = 0; j < stride; ++j) scores[j] += x * row[j];
    }
}

}  // namespace

std::uint32_t PrototypeScorer::argmax(const SparseActivation& activation) const {
    if (activation.dim != rows_) {
        throw Error(Errc::DimensionMismatch, "activation has dimension " + std::to_string(activation.dim) +
                                                 ", prototypes have " + std::to_string(rows_) + " rows");
    }
    if (classes_ == 0) throw Error(Errc::Unsolved, "no prototype columns");
    std::vector<double> scores(stride_);
    const double* table = padded_.data();
#if defined(__AVX512F__)
    switch (stride_ / 8) {
        case 1: sparse_scores<1>(table, stride_, activation, scores.data()); break;
        case 2: sparse_scores<2>(table, stride_, activation, scores.data()); break;
        case 3: sparse_scores<3>(table, stride_, activation, scores.data()); break;
        case 4: sparse_scores<4>(table, stride_, activation, scores.data()); break;
        case 5: sparse_scores<5>(table, stride_, activation, scores.data()); break;
        case 6: sparse_scores<6>(table, stride_, activation, scores.data()); break;
        case 7: sparse_scores<7>(table, stride_, activation, scores.data()); break;
        case 8: sparse_scores<8>(table, stride_, activation, scores.data()); break;
        default: sparse_scores_generic(table, stride_, activation, scores.data()); break;
    }
#else
    sparse_scores_generic(table, stride_, activation, scores.data());
#endif
    std::size_t best = 0;
    for (std::size_t j = 1; j < classes_; ++j) {
        if (scores[j] > scores[best]) best = j;
    }
    return static_cast<std::uint32_t>(best);
}

std::uint32_t predict(const RidgeState& state, const SparseCoder& coder, std::span<const double> v) {
    if (!state.solved) throw Error(Errc::Unsolved, "prototypes have not been solved");
    if (v.size() != coder.input_dim()) {
        throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(v.size()) + ", expected " +
                                                 std::to_string(coder.input_dim()));
    }
    return score_argmax(state.C, coder.encode(v));
}

std::vector<std::uint32_t> predict_batch(const RidgeState& state, const SparseCoder& coder, const RowMatrix& V,
                                         bool dense_scores) {
    if (!state.solved) throw Error(Errc::Unsolved, "prototypes have not been solved");
    std::vector<std::uint32_t> out;
    if (V.rows() == 0) return out;
    const RowMatrix Hpre = coder.project(V);
    const std::size_t m = coder.output_dim();
    const std::size_t k = coder.mode() == SparseCoder::Mode::Identity ? m : coder.k();
    out.reserve(static_cast<std::size_t>(V.rows()));
    const PrototypeScorer scorer = dense_scores ? PrototypeScorer() : PrototypeScorer(state.C);
    for (Eigen::Index r = 0; r < Hpre.rows(); ++r) {
        const SparseActivation a = top_k({Hpre.row(r).data(), m}, k);
        out.push_back(dense_scores ? score_argmax_dense(state.C, a.densify()) : scorer.argmax(a));
    }
    return out;
}

}  // namespace flycl
