#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "flycl/embed_store.hpp"
#include "flycl/linalg.hpp"
#include "flycl/projector.hpp"

namespace flycl {

/// One-hot n x c indicator, kept as a label vector plus the class count.
struct LabelMatrix {
    std::vector<std::uint32_t> labels;
    std::uint32_t num_classes = 0;

    Matrix dense() const;
    std::size_t rows() const noexcept { return labels.size(); }
};

using LambdaGrid = std::vector<double>;

/// `points` values evenly spaced in log10 between lo and hi (inclusive).
LambdaGrid log_grid(double lo, double hi, std::size_t points);
/// 13 points over [1e6, 1e9]: transformer-backbone embeddings.
LambdaGrid transformer_lambda_grid();
/// 21 points over [1e4, 1e9]: CNN-backbone embeddings.
LambdaGrid cnn_lambda_grid();

enum class SolveMethod { Cholesky, Lu };

/// Streaming ridge accumulators. G is kept fully symmetric; C is stored
/// row-major so prediction can read one m-row per active unit.
struct RidgeState {
    Matrix G;   // m x m, sum of Hᵀ H
    Matrix S;   // m x c, sum of Hᵀ Y
    RowMatrix C;  // m x c, valid only when `solved`
    bool solved = false;
    std::vector<double> lambda_history;
    std::uint32_t classes_seen = 0;
    std::size_t tasks_seen = 0;

    RidgeState() = default;
    explicit RidgeState(std::size_t m);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(G.rows()); }
};

/// G += HᵀH; S (zero-padded to Y.num_classes columns) += HᵀY; C becomes stale.
void update_stats(RidgeState& state, const RowMatrix& H, const LabelMatrix& Y);

struct GcvReport {
    LambdaGrid grid;
    std::vector<double> df;
    std::vector<double> gcv;  // +inf where df >= n
    double selected = 0.0;
    std::size_t selected_index = 0;
    Vector singular_values;  // descending, numerically nonzero only
};

/// Adaptive ridge selection on one task's activations.
///
/// The thin SVD H = U Σ Vᵀ is obtained from the eigendecomposition of the
/// smaller Gram matrix (H Hᵀ when n <= m, otherwise Hᵀ H); singular values
/// below n * eps * s_max are dropped. For each λ, D = Σ²/(Σ²+λ), df = tr D,
/// Ŷ = U (D ∘ UᵀY) and GCV = ||Y - Ŷ||² / (n (1 - df/n)²). The minimum wins,
/// ties going to the larger λ.
GcvReport gcv_select(const RowMatrix& H, const LabelMatrix& Y, const LambdaGrid& grid);

/// Explicit k-fold cross-validation over the grid with a full m x m solve per
/// (fold, λ). Folds are interleaved (sample i goes to fold i mod k). The error
/// is the summed squared one-hot residual on held-out rows. When
/// `budget_seconds` runs out the scan stops early with `complete == false`.
struct CvReport {
    LambdaGrid grid;
    std::vector<double> error;  // NaN for candidates not fully evaluated
    double selected = 0.0;
    std::size_t folds = 0;
    std::size_t solves_done = 0;
    std::size_t solves_total = 0;
    bool complete = false;
    double seconds = 0.0;
};

CvReport cv_select(const RowMatrix& H, const LabelMatrix& Y, const LambdaGrid& grid, std::size_t folds,
                   SolveMethod method, double budget_seconds = std::numeric_limits<double>::infinity());

/// C = (G + λI)⁻¹ S by Cholesky (or partial-pivot LU) and two triangular solves.
void solve_prototypes(RidgeState& state, double lambda, SolveMethod method = SolveMethod::Cholesky);

/// Solve (G + λI) X = S without touching the state.
Matrix solve_ridge_system(const Matrix& G, const Matrix& S, double lambda, SolveMethod method);

struct StageTimings {
    double projection = 0.0;
    double statistics = 0.0;
    double selection = 0.0;
    double solve = 0.0;

    double total() const noexcept { return projection + statistics + selection + solve; }
    StageTimings& operator+=(const StageTimings& other) noexcept;
};

struct RidgeOptions {
    LambdaGrid grid = transformer_lambda_grid();
    SolveMethod solve = SolveMethod::Cholesky;
    bool explicit_cv = false;
    std::size_t cv_folds = 5;
    std::optional<double> fixed_lambda;
};

struct TaskTrainResult {
    double lambda = 0.0;
    std::optional<GcvReport> gcv;
    std::optional<CvReport> cv;
    StageTimings timings;
};

/// One task of the training loop: encode, accumulate, select λ on this task's
/// activations, solve against the accumulated statistics.
TaskTrainResult train_task(RidgeState& state, const SparseCoder& coder, const TaskBatch& batch,
                           const RidgeOptions& options);

struct OnlineTrainResult {
    std::vector<double> lambdas;
    std::size_t solves = 0;
    StageTimings timings;
};

/// Per-batch streaming: statistics after every batch, a re-solve every
/// `solve_every` batches with λ selected on the current batch, and a final
/// solve if the last batch was not a solve point. Batches with fewer than two
/// rows reuse the latest λ.
OnlineTrainResult train_online(RidgeState& state, const SparseCoder& coder, const std::vector<TaskBatch>& batches,
                               const RidgeOptions& options, std::size_t solve_every = 1);

/// argmax_i h'ᵀ C[:, i] over the active entries only; ties to the lowest column.
std::uint32_t score_argmax(const RowMatrix& C, const SparseActivation& activation);
/// Same decision from a dense h' (m*c work).
std::uint32_t score_argmax_dense(const RowMatrix& C, const Vector& activation);

/// C copied with rows padded to a multiple of 8 columns, so the per-unit
/// update is whole SIMD vectors and the class scores can stay in registers.
class PrototypeScorer {
public:
    PrototypeScorer() = default;
    explicit PrototypeScorer(const RowMatrix& C);

    std::size_t classes() const noexcept { return classes_; }
    /// Same decision as score_argmax(C, activation).
    std::uint32_t argmax(const SparseActivation& activation) const;

private:
    std::size_t rows_ = 0;
    std::size_t classes_ = 0;
    std::size_t stride_ = 0;
    std::vector<double, Eigen::aligned_allocator<double>> padded_;
};

std::uint32_t predict(const RidgeState& state, const SparseCoder& coder, std::span<const double> v);
std::vector<std::uint32_t> predict_batch(const RidgeState& state, const SparseCoder& coder, const RowMatrix& V,
                                         bool dense_scores = false);

}  // namespace flycl
