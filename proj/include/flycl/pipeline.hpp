#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flycl/embed_store.hpp"
#include "flycl/ncm.hpp"
#include "flycl/projector.hpp"
#include "flycl/ridge.hpp"

namespace flycl {

/// Which classifier runs. The ablations drop one stage of the full pipeline:
/// NoProjection is ridge on the raw d-dim features, NoRidge is cosine NCM on
/// the projected top-k features. Ncm is cosine NCM on the raw features.
enum class PipelineKind { Fly, Ncm, NoProjection, NoRidge };

std::string to_string(PipelineKind kind);
PipelineKind parse_pipeline_kind(const std::string& name);

/// Components swapped for their unoptimized counterparts. Every variant
/// computes the same classifier; only λ selection (explicit_cv) can change
/// the outputs, through a different λ.
struct VanillaFlags {
    bool dense_projection = false;  // densified W, GEMM instead of the sparse kernel
    bool explicit_cv = false;       // k-fold CV with full solves per candidate
    bool lu_solve = false;          // partial-pivot LU instead of Cholesky
    bool dense_similarity = false;  // dense h'ᵀC over all m units

    bool any() const noexcept { return dense_projection || explicit_cv || lu_solve || dense_similarity; }
    friend bool operator==(const VanillaFlags&, const VanillaFlags&) = default;
};

struct PipelineConfig {
    PipelineKind kind = PipelineKind::Fly;
    VanillaFlags vanilla;
    std::size_t m = 10000;
    std::size_t p = 300;
    std::size_t k = 3000;
    std::uint64_t seed = 0;
    LambdaGrid grid = transformer_lambda_grid();
    std::optional<double> fixed_lambda;
    std::size_t cv_folds = 5;
};

struct PredictTimings {
    double projection = 0.0;
    double similarity = 0.0;
};

/// A classifier trained task by task on a CIL stream. Predictions are stream
/// columns (see TaskBatch::labels).
class ContinualLearner {
public:
    virtual ~ContinualLearner() = default;

    virtual TaskTrainResult learn_task(const TaskBatch& batch) = 0;
    virtual OnlineTrainResult learn_online(const std::vector<TaskBatch>& batches, std::size_t solve_every) = 0;
    virtual std::vector<std::uint32_t> predict(const RowMatrix& V, PredictTimings* timings = nullptr) const = 0;
};

/// Fly-CL: Z(v) = top-k(W v), streaming ridge with GCV, Cholesky solve.
class FlyPipeline final : public ContinualLearner {
public:
    FlyPipeline(SparseCoder coder, RidgeOptions options, bool dense_similarity = false);

    TaskTrainResult learn_task(const TaskBatch& batch) override;
    OnlineTrainResult learn_online(const std::vector<TaskBatch>& batches, std::size_t solve_every) override;
    std::vector<std::uint32_t> predict(const RowMatrix& V, PredictTimings* timings = nullptr) const override;

    const RidgeState& state() const noexcept { return state_; }
    RidgeState& state() noexcept { return state_; }
    const SparseCoder& coder() const noexcept { return coder_; }
    const RidgeOptions& options() const noexcept { return options_; }

private:
    SparseCoder coder_;
    RidgeOptions options_;
    bool dense_similarity_;
    RidgeState state_;
    PrototypeScorer scorer_;  // rebuilt after every solve
};

/// Cosine nearest-class-mean on raw or projected features.
class NcmPipeline final : public ContinualLearner {
public:
    explicit NcmPipeline(SparseCoder coder);

    TaskTrainResult learn_task(const TaskBatch& batch) override;
    OnlineTrainResult learn_online(const std::vector<TaskBatch>& batches, std::size_t solve_every) override;
    std::vector<std::uint32_t> predict(const RowMatrix& V, PredictTimings* timings = nullptr) const override;

    const PrototypeBank& bank() const noexcept { return bank_; }

private:
    SparseCoder coder_;
    PrototypeBank bank_;
};

/// Sparse coder for a config: the seeded projection with top-k, its dense
/// twin, or the identity for pipelines without projection.
SparseCoder make_coder(const PipelineConfig& config, std::size_t input_dim);

std::unique_ptr<ContinualLearner> make_pipeline(const PipelineConfig& config, std::size_t input_dim);

/// The Fly-CL pipeline with the flagged components replaced by their vanilla
/// counterparts.
std::unique_ptr<FlyPipeline> vanilla_pipeline_variant(const PipelineConfig& config, std::size_t input_dim,
                                                      const VanillaFlags& flags);

}  // namespace flycl
