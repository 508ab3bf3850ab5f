#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "flycl/error.hpp"
#include "flycl/pipeline.hpp"
#include "scratch.hpp"

using namespace flycl;

namespace {

PipelineConfig small_config(PipelineKind kind = PipelineKind::Fly) {
    PipelineConfig c;
    c.kind = kind;
    c.m = 2000;
    c.p = 25;
    c.k = 600;
    c.seed = 3;
    c.grid = unit_scale_grid();
    return c;
}

double accuracy(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& labels) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

TEST(Pipeline, KindNames) {
    for (auto k : {PipelineKind::Fly, PipelineKind::Ncm, PipelineKind::NoProjection, PipelineKind::NoRidge}) {
        EXPECT_EQ(parse_pipeline_kind(to_string(k)), k);
    }
    EXPECT_EQ(parse_pipeline_kind("no-all"), PipelineKind::Ncm);
    EXPECT_FLYCL_ERROR(Errc::InvalidConfig, parse_pipeline_kind("bogus"), "pipeline");
}

TEST(Pipeline, CoderShapeChecks) {
    PipelineConfig c = small_config();
    c.m = 64;
    EXPECT_FLYCL_ERROR(Errc::InvalidConfig, make_coder(c, 64), "m=64");
    c = small_config();
    c.p = 64;
    EXPECT_FLYCL_ERROR(Errc::InvalidConfig, make_coder(c, 64), "p=64");
    c = small_config();
    c.k = 2001;
    EXPECT_FLYCL_ERROR(Errc::InvalidK, make_coder(c, 64), "k=2001");
    EXPECT_EQ(make_coder(small_config(PipelineKind::Ncm), 64).mode(), SparseCoder::Mode::Identity);
    EXPECT_EQ(make_coder(small_config(PipelineKind::NoProjection), 64).output_dim(), 64u);
    PipelineConfig dense = small_config();
    dense.vanilla.dense_projection = true;
    EXPECT_EQ(make_coder(dense, 64).mode(), SparseCoder::Mode::Dense);
}

TEST(Pipeline, PredictBeforeTrainingIsUnsolved) {
    auto fly = make_pipeline(small_config(), 64);
    EXPECT_FLYCL_ERROR(Errc::Unsolved, fly->predict(RowMatrix::Ones(1, 64)), "solved");
}

TEST(Pipeline, TrainingAccuracyAtLeastCosineBaseline) {
    const auto tasks = synth_tasks(small_synth(0, 0.5, 0.1), 10);
    auto fly = make_pipeline(small_config(), 64);
    auto ncm = make_pipeline(small_config(PipelineKind::Ncm), 64);
    fly->learn_task(tasks[0]);
    ncm->learn_task(tasks[0]);
    const double a_fly = accuracy(fly->predict(tasks[0].features), tasks[0].labels);
    const double a_ncm = accuracy(ncm->predict(tasks[0].features), tasks[0].labels);
    EXPECT_GE(a_fly, a_ncm);
}

TEST(Pipeline, VanillaVariantsPreservePredictionsAtFixedLambda) {
    const auto tasks = synth_tasks(small_synth(1, 0.9, 0.2), 5);
    PipelineConfig config = small_config();
    config.fixed_lambda = 1.0;
    const RowMatrix queries = concat(tasks).features;

    auto reference = make_pipeline(config, 64);
    for (const auto& t : tasks) reference->learn_task(t);
    const auto expected = reference->predict(queries);

    for (int mask = 0; mask < 16; ++mask) {
        VanillaFlags flags;
        flags.dense_projection = mask & 1;
        flags.explicit_cv = mask & 2;
        flags.lu_solve = mask & 4;
        flags.dense_similarity = mask & 8;
        auto variant = vanilla_pipeline_variant(config, 64, flags);
        for (const auto& t : tasks) variant->learn_task(t);
        EXPECT_EQ(variant->predict(queries), expected) << "flags mask " << mask;
    }
}

TEST(Pipeline, AllOptimizedVariantIsTheDefaultPipeline) {
    const auto tasks = synth_tasks(small_synth(2), 5);
    auto a = make_pipeline(small_config(), 64);
    auto b = vanilla_pipeline_variant(small_config(), 64, VanillaFlags{});
    for (const auto& t : tasks) {
        a->learn_task(t);
        b->learn_task(t);
    }
    EXPECT_EQ(static_cast<FlyPipeline&>(*a).state().C, b->state().C);
    EXPECT_EQ(static_cast<FlyPipeline&>(*a).state().lambda_history, b->state().lambda_history);
}

TEST(Pipeline, ExplicitCvSelectsFromTheGrid) {
    const auto tasks = synth_tasks(small_synth(3), 10);
    PipelineConfig config = small_config();
    config.m = 300;
    config.k = 100;
    VanillaFlags flags;
    flags.explicit_cv = true;
    auto cv = vanilla_pipeline_variant(config, 64, flags);
    const auto r = cv->learn_task(tasks[0]);
    ASSERT_TRUE(r.cv.has_value());
    EXPECT_TRUE(r.cv->complete);
    EXPECT_EQ(r.cv->folds, 5u);
    EXPECT_NE(std::find(config.grid.begin(), config.grid.end(), r.lambda), config.grid.end());
}

TEST(Pipeline, OnlineLearnerMatchesTaskLearnerAtFixedLambda) {
    const auto tasks = synth_tasks(small_synth(4), 5);
    PipelineConfig config = small_config();
    config.fixed_lambda = 0.5;
    auto task_mode = vanilla_pipeline_variant(config, 64, {});
    auto online = vanilla_pipeline_variant(config, 64, {});
    for (const auto& t : tasks) {
        task_mode->learn_task(t);
        online->learn_online(minibatches(t, 16), 1);
    }
    EXPECT_LT((task_mode->state().C - online->state().C).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(online->state().tasks_seen, tasks.size());
}

TEST(Pipeline, NcmAndAblationsLearnTheStream) {
    const auto tasks = synth_tasks(small_synth(5, 0.3, 0.1), 5);
    const TaskBatch all = concat(tasks);
    for (auto kind : {PipelineKind::Fly, PipelineKind::Ncm, PipelineKind::NoProjection, PipelineKind::NoRidge}) {
        auto learner = make_pipeline(small_config(kind), 64);
        for (const auto& t : tasks) learner->learn_task(t);
        PredictTimings timings;
        const auto pred = learner->predict(all.features, &timings);
        EXPECT_GE(accuracy(pred, all.labels), 95.0) << to_string(kind);
        EXPECT_GE(timings.projection, 0.0);
        EXPECT_TRUE(learner->predict(RowMatrix(0, 64)).empty());
    }
}

TEST(Pipeline, NoRidgeIsCosineNcmOnCodes) {
    const auto tasks = synth_tasks(small_synth(6), 10);
    const PipelineConfig config = small_config(PipelineKind::NoRidge);
    NcmPipeline learner(make_coder(config, 64));
    learner.learn_task(tasks[0]);
    const SparseCoder coder = make_coder(config, 64);
    PrototypeBank bank(coder.output_dim());
    const RowMatrix H = coder.encode_batch(tasks[0].features);
    accumulate_prototypes(bank, H, tasks[0].labels);
    EXPECT_EQ(learner.bank().sums(), bank.sums());
    const auto pred = learner.predict(tasks[0].features);
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
        EXPECT_EQ(pred[r], cosine_predict(bank, {H.row(r).data(), static_cast<std::size_t>(H.cols())}));
    }
}
