#include "flycl/pipeline.hpp"

#include <chrono>

#include "flycl/error.hpp"

namespace flycl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string to_string(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::Fly: return "fly";
        case PipelineKind::Ncm: return "ncm";
        case PipelineKind::NoProjection: return "no-proj";
        case PipelineKind::NoRidge: return "no-ridge";
    }
    return "fly";
}

PipelineKind parse_pipeline_kind(const std::string& name) {
    if (name == "fly") return PipelineKind::Fly;
    if (name == "ncm" || name == "no-all") return PipelineKind::Ncm;
    if (name == "no-proj") return PipelineKind::NoProjection;
    if (name == "no-ridge") return PipelineKind::NoRidge;
    throw Error(Errc::InvalidConfig, "pipeline: unknown value \"" + name + "\" (fly, ncm, no-proj, no-ridge)");
}

FlyPipeline::FlyPipeline(SparseCoder coder, RidgeOptions options, bool dense_similarity)
    : coder_(std::move(coder)),
      options_(std::move(options)),
      dense_similarity_(dense_similarity),
      state_(coder_.output_dim()) {}

TaskTrainResult FlyPipeline::learn_task(const TaskBatch& batch) {
    TaskTrainResult result = train_task(state_, coder_, batch, options_);
    scorer_ = PrototypeScorer(state_.C);
    return result;
}

OnlineTrainResult FlyPipeline::learn_online(const std::vector<TaskBatch>& batches, std::size_t solve_every) {
    OnlineTrainResult result = train_online(state_, coder_, batches, options_, solve_every);
    ++state_.tasks_seen;
    scorer_ = PrototypeScorer(state_.C);
    return result;
}

std::vector<std::uint32_t> FlyPipeline::predict(const RowMatrix& V, PredictTimings* timings) const {
    if (!state_.solved) throw Error(Errc::Unsolved, "prototypes have not been solved");
    std::vector<std::uint32_t> out;
    if (V.rows() == 0) return out;
    auto t0 = Clock::now();
    const RowMatrix Hpre = coder_.project(V);
    const std::size_t m = coder_.output_dim();
    const std::size_t k = coder_.mode() == SparseCoder::Mode::Identity ? m : coder_.k();
    std::vector<SparseActivation> codes;
    codes.reserve(static_cast<std::size_t>(V.rows()));
    for (Eigen::Index r = 0; r < Hpre.rows(); ++r) codes.push_back(top_k({Hpre.row(r).data(), m}, k));
    if (timings) timings->projection += seconds_since(t0);

    t0 = Clock::now();
    out.reserve(codes.size());
    if (dense_similarity_) {
        Vector dense(static_cast<Eigen::Index>(m));
        for (const SparseActivation& a : codes) {
            dense.setZero();
            for (std::size_t e = 0; e < a.indices.size(); ++e) dense(a.indices[e]) = a.values[e];
            out.push_back(score_argmax_dense(state_.C, dense));
        }
    } else {
        for (const SparseActivation& a : codes) out.push_back(scorer_.argmax(a));
    }
    if (timings) timings->similarity += seconds_since(t0);
    return out;
}

NcmPipeline::NcmPipeline(SparseCoder coder) : coder_(std::move(coder)), bank_(coder_.output_dim()) {}

TaskTrainResult NcmPipeline::learn_task(const TaskBatch& batch) {
    TaskTrainResult result;
    auto t0 = Clock::now();
    const RowMatrix H = coder_.encode_batch(batch.features);
    result.timings.projection = seconds_since(t0);
    t0 = Clock::now();
    accumulate_prototypes(bank_, H, batch.labels);
    result.timings.statistics = seconds_since(t0);
    return result;
}

OnlineTrainResult NcmPipeline::learn_online(const std::vector<TaskBatch>& batches, std::size_t) {
    OnlineTrainResult result;
    for (const TaskBatch& batch : batches) result.timings += learn_task(batch).timings;
    return result;
}

std::vector<std::uint32_t> NcmPipeline::predict(const RowMatrix& V, PredictTimings* timings) const {
    std::vector<std::uint32_t> out;
    if (V.rows() == 0) return out;
    auto t0 = Clock::now();
    const RowMatrix H = coder_.encode_batch(V);
    if (timings) timings->projection += seconds_since(t0);
    t0 = Clock::now();
    out.reserve(static_cast<std::size_t>(H.rows()));
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
        out.push_back(cosine_predict(bank_, {H.row(r).data(), static_cast<std::size_t>(H.cols())}));
    }
    if (timings) timings->similarity += seconds_since(t0);
    return out;
}

SparseCoder make_coder(const PipelineConfig& config, std::size_t input_dim) {
    if (config.kind == PipelineKind::Ncm || config.kind == PipelineKind::NoProjection) {
        return SparseCoder::identity(input_dim);
    }
    if (config.m <= input_dim) {
        throw Error(Errc::InvalidConfig, "m=" + std::to_string(config.m) + " must exceed feature dim d=" +
                                             std::to_string(input_dim));
    }
    if (config.p == 0 || config.p >= input_dim) {
        throw Error(Errc::InvalidConfig, "p=" + std::to_string(config.p) + " must be in (0, d=" +
                                             std::to_string(input_dim) + ")");
    }
    if (config.k < 1 || config.k > config.m) {
        throw Error(Errc::InvalidK, "k=" + std::to_string(config.k) + " must be in [1, m=" +
                                        std::to_string(config.m) + "]");
    }
    SparseCoder coder(build_projection(config.seed, config.m, input_dim, config.p), config.k);
    return config.vanilla.dense_projection ? coder.as_dense() : coder;
}

std::unique_ptr<ContinualLearner> make_pipeline(const PipelineConfig& config, std::size_t input_dim) {
    switch (config.kind) {
        case PipelineKind::Fly:
        case PipelineKind::NoProjection: return vanilla_pipeline_variant(config, input_dim, config.vanilla);
        case PipelineKind::Ncm:
        case PipelineKind::NoRidge: return std::make_unique<NcmPipeline>(make_coder(config, input_dim));
    }
    throw Error(Errc::InvalidConfig, "unknown pipeline kind");
}

std::unique_ptr<FlyPipeline> vanilla_pipeline_variant(const PipelineConfig& config, std::size_t input_dim,
                                                      const VanillaFlags& flags) {
    PipelineConfig effective = config;
    effective.vanilla = flags;
    RidgeOptions options;
    options.grid = config.grid;
    options.fixed_lambda = config.fixed_lambda;
    options.cv_folds = config.cv_folds;
    options.explicit_cv = flags.explicit_cv;
    options.solve = flags.lu_solve ? SolveMethod::Lu : SolveMethod::Cholesky;
    return std::make_unique<FlyPipeline>(make_coder(effective, input_dim), std::move(options), flags.dense_similarity);
}

}  // namespace flycl
