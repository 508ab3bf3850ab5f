// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "flycl/analysis.hpp"
#include "flycl/experiment.hpp"
#include "flycl/pipeline.hpp"
#include "flycl/projector.hpp"
#include "flycl/ridge.hpp"
#include "flycl/synthgen.hpp"
#include "oracles.hpp"

using namespace flycl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
    std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

LabelMatrix labels_of(const TaskBatch& b) { return {b.labels, b.classes_seen}; }

void streaming_equals_batch() {
    const auto start = Clock::now();
    double max_stats = 0.0, max_c = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SynthSpec spec = small_synth(seed, 0.5, 0.2, 9, 64, 40);
        const auto tasks = synth_tasks(spec, 3);
        const SparseCoder coder(build_projection(seed, 2000, 64, 25), 600);
        RidgeState streamed(2000);
        for (const auto& t : tasks) update_stats(streamed, coder.encode_batch(t.features), labels_of(t));
        const TaskBatch all = concat(tasks);
        RidgeState once(2000);
        update_stats(once, coder.encode_batch(all.features), labels_of(all));
        max_stats = std::max({max_stats, (streamed.G - once.G).cwiseAbs().maxCoeff(),
                              (streamed.S - once.S).cwiseAbs().maxCoeff()});
        solve_prototypes(streamed, 1.0);
        solve_prototypes(once, 1.0);
        max_c = std::max(max_c, oracle::rel_frobenius(Matrix(streamed.C), Matrix(once.C)));
    }
    const double elapsed = seconds_since(start);
    report("streaming_equals_batch", max_stats < 1e-9 && max_c < 1e-8 && elapsed < 30.0,
           fmt("max|dG|,|dS|=%.2e  relC=%.2e  %.1fs", max_stats, max_c, elapsed));
}

void gcv_matches_hat_matrix() {
    const LambdaGrid grid = transformer_lambda_grid();
    double worst = 0.0;
    int argmin_agree = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RowMatrix H = oracle::gaussian(40, 120, 1000 + seed, 3, 300.0);
        const LabelMatrix Y{oracle::random_labels(40, 5, seed), 5};
        const GcvReport r = gcv_select(H, Y, grid);
        const auto Hd = oracle::to_dense(H);
        const auto Yd = oracle::one_hot(Y.labels, 5);
        double best = INFINITY;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const auto hat = oracle::hat_gcv(Hd, Yd, grid[j]);
            worst = std::max(worst, std::fabs(r.gcv[j] - hat.gcv) / hat.gcv);
            if (hat.gcv <= best) {
                best = hat.gcv;
                best_j = j;
            }
        }
        argmin_agree += r.selected_index == best_j;
    }
    report("gcv_matches_hat_matrix", worst < 1e-8 && argmin_agree == 20,
           fmt("max rel err=%.2e  argmin agrees %d/20", worst, argmin_agree));
}

void cholesky_matches_lu() {
    double worst = 0.0, worst_residual = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix G = oracle::random_psd(100, 60 + seed, seed);
        const Matrix S = oracle::gaussian(100, 7, seed, 11);
        const double lambda = std::pow(10.0, static_cast<double>(seed % 5) - 2.0);
        const Matrix C = solve_ridge_system(G, S, lambda, SolveMethod::Cholesky);
        auto A = oracle::to_dense(G);
        for (std::size_t i = 0; i < 100; ++i) A[i][i] += lambda;
        const Matrix ref = oracle::to_eigen(oracle::lu_solve(A, oracle::to_dense(S)));
        worst = std::max(worst, oracle::rel_frobenius(C, ref));
        const Matrix R = (G + lambda * Matrix::Identity(100, 100)) * C - S;
        worst_residual = std::max(worst_residual, R.norm() / S.norm());
    }
    report("cholesky_matches_lu", worst < 1e-8 && worst_residual < 1e-6,
           fmt("max rel diff=%.2e  max residual=%.2e", worst, worst_residual));
}

void projection_full_rank() {
    int full = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RowMatrix W = build_projection(seed, 200, 50, 10).densify();
        full += oracle::rank(oracle::to_dense(W)) == 50;
    }
    report("projection_full_rank", full >= 99, fmt("%d/100 seeds full column rank", full));
}

void topk_residual_decay() {
    const std::size_t m = 10000, d = 768, p = 300;
    const auto kstar = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(m), 0.8)));
    const EmbeddingDataset ds = generate(small_synth(0, 0.5, 0.1, 10, d, 20));
    const SparseCoder coder(build_projection(0, m, d, p), 1);
    const RowMatrix H = coder.project(ds.features);
    std::vector<std::size_t> ks{1, 10, 50, 100, 300, 1000, kstar, 3000, 5000, 8000, m};
    std::vector<double> mean(ks.size(), 0.0);
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        const std::span<const double> h(H.row(i).data(), m);
        for (std::size_t j = 0; j < ks.size(); ++j) mean[j] += sparsification_residual(h, ks[j]);
    }
    bool monotone = true;
    for (std::size_t j = 0; j < ks.size(); ++j) {
        mean[j] /= static_cast<double>(H.rows());
        if (j > 0 && mean[j] > mean[j - 1]) monotone = false;
    }
    const double at_kstar = mean[6];
    report("topk_residual_decay", monotone && at_kstar < 0.1,
           fmt("monotone=%s  residual(k=%zu)=%.4f", monotone ? "yes" : "no", kstar, at_kstar));
}

ExperimentConfig synth_run(std::uint64_t seed, double rho, double sigma) {
    ExperimentConfig c;
    c.synth = small_synth(seed, rho, sigma, 10, 128, 100);
    c.m = 4000;
    c.p = 50;
    c.k = 1200;
    c.seed = seed;
    c.lambda_min = 1e-3;
    c.lambda_max = 1e5;
    c.lambda_points = 17;
    return c;
}

void decorrelation_trend() {
    int ordered = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RunReport r = run_cil(synth_run(seed, 0.9, 0.1));
        const double raw = mean_abs_off_diagonal(r.correlations[0]);
        const double projected = mean_abs_off_diagonal(r.correlations[1]);
        const double modulated = mean_abs_off_diagonal(r.correlations[2]);
        ordered += raw > projected && projected > modulated;
        detail += fmt("[%.3f>%.3f>%.3f] ", raw, projected, modulated);
    }
    report("decorrelation_trend", ordered == 5, fmt("%d/5 seeds ordered ", ordered) + detail);
}

void online_equals_task_mode() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto tasks = synth_tasks(small_synth(seed, 0.5, 0.2, 10, 64, 40), 2);
        PipelineConfig cfg;
        cfg.m = 2000;
        cfg.p = 25;
        cfg.k = 600;
        cfg.seed = seed;
        cfg.fixed_lambda = 1.0;
        FlyPipeline task_mode(make_coder(cfg, 64), RidgeOptions{.fixed_lambda = 1.0});
        FlyPipeline online(make_coder(cfg, 64), RidgeOptions{.fixed_lambda = 1.0});
        for (const auto& t : tasks) {
            task_mode.learn_task(t);
            online.learn_online(minibatches(t, 16), 1);
        }
        worst = std::max(worst, oracle::rel_frobenius(Matrix(online.state().C), Matrix(task_mode.state().C)));
    }
    report("online_equals_task_mode", worst < 1e-9, fmt("max rel diff=%.2e", worst));
}

void component_speedups() {
    const std::size_t m = 10000, d = 768, p = 300, k = 3000;
    const EmbeddingDataset train_ds = generate(small_synth(0, 0.5, 0.1, 10, d, 60));
    const EmbeddingDataset query_ds = generate(small_synth(0, 0.5, 0.1, 10, d, 20));
    TaskBatch train = split_tasks(train_ds, sequential_manifest(10, 10)).front();
    PipelineConfig cfg;
    cfg.m = m;
    cfg.p = p;
    cfg.k = k;
    cfg.grid = log_grid(1e-3, 1e5, 13);

    // Budget for explicit CV: a margin over 10x the GCV path on the same activations.
    const SparseCoder coder = make_coder(cfg, d);
    const RowMatrix H = coder.encode_batch(train.features);
    const auto gstart = Clock::now();
    gcv_select(H, labels_of(train), cfg.grid);
    const double budget = 12.0 * seconds_since(gstart);

    const BenchReport r = benchmark_components(train, query_ds.features, cfg, 3, budget);
    const double proj = r.component("projection").speedup(), sel = r.component("selection").speedup();
    const double solve = r.component("solve").speedup(), sim = r.component("similarity").speedup();
    report("component_speedups", proj >= 2.0 && sel >= 10.0 && solve >= 1.3 && sim >= 2.0 && r.predictions_match,
           fmt("n=%zu projection=%.2fx selection=%.1fx%s solve=%.2fx similarity=%.2fx match=%s", r.n, proj, sel,
               r.component("selection").vanilla_lower_bound ? "(lower bound)" : "", solve, sim,
               r.predictions_match ? "yes" : "no"));
}

void ablation_direction() {
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ExperimentConfig c = synth_run(seed, 0.9, 0.3);
        const double fly = run_cil(c).overall;
        c.kind = PipelineKind::NoProjection;
        const double no_proj = run_cil(c).overall;
        c.kind = PipelineKind::NoRidge;
        const double no_ridge = run_cil(c).overall;
        wins += fly > no_proj && fly > no_ridge;
        detail += fmt("[fly=%.2f no-proj=%.2f no-ridge=%.2f] ", fly, no_proj, no_ridge);
    }
    report("ablation_direction", wins == 3, fmt("%d/3 seeds ", wins) + detail);
}

}  // namespace

int main() {
    const std::vector<void (*)()> criteria{streaming_equals_batch, gcv_matches_hat_matrix, cholesky_matches_lu,
                                           projection_full_rank,   topk_residual_decay,    decorrelation_trend,
                                           online_equals_task_mode, component_speedups,    ablation_direction};
    for (auto run : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            report("criterion threw", false, e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
