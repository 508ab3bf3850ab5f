// flycl: command line front end for the continual-learning engine.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flycl/embed_store.hpp"
#include "flycl/error.hpp"
#include "flycl/experiment.hpp"
#include "flycl/synthgen.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> data, test, manifest, out, pipeline, checkpoint;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> m, p, k, lambda_points, batch_size, solve_every, repeats, cv_folds;
    std::optional<std::uint32_t> classes_per_task;
    std::optional<double> lambda_min, lambda_max, lambda, holdout, cv_budget;
    bool online = false;
    bool dense_projection = false, explicit_cv = false, lu_solve = false, dense_similarity = false;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--data", o.data, "FLYE training embeddings");
    cmd->add_option("--test", o.test, "FLYE test embeddings (default: holdout split)");
    cmd->add_option("--manifest", o.manifest, "task manifest (default: sequential groups)");
    cmd->add_option("--classes-per-task", o.classes_per_task, "group size when no manifest is given");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "seed for projection, split and subsets");
    cmd->add_option("--pipeline", o.pipeline, "fly | ncm | no-proj | no-ridge");
    cmd->add_option("--m", o.m, "expanded dimension");
    cmd->add_option("--p", o.p, "nonzeros per projection row");
    cmd->add_option("--k", o.k, "active units kept by top-k");
    cmd->add_option("--lambda-min", o.lambda_min, "smallest ridge candidate");
    cmd->add_option("--lambda-max", o.lambda_max, "largest ridge candidate");
    cmd->add_option("--lambda-points", o.lambda_points, "number of log-spaced candidates");
    cmd->add_option("--lambda", o.lambda, "fixed ridge parameter (skips selection)");
    cmd->add_option("--cv-folds", o.cv_folds, "folds for explicit cross-validation");
    cmd->add_flag("--online", o.online, "train per mini-batch instead of per task");
    cmd->add_option("--batch-size", o.batch_size, "mini-batch size for --online");
    cmd->add_option("--solve-every", o.solve_every, "re-solve every N mini-batches");
    cmd->add_option("--holdout", o.holdout, "training fraction of the holdout split");
    cmd->add_option("--checkpoint", o.checkpoint, "write the final ridge state here");
    cmd->add_flag("--dense-projection", o.dense_projection, "vanilla: dense projection");
    cmd->add_flag("--explicit-cv", o.explicit_cv, "vanilla: k-fold CV for lambda");
    cmd->add_flag("--lu-solve", o.lu_solve, "vanilla: LU instead of Cholesky");
    cmd->add_flag("--dense-similarity", o.dense_similarity, "vanilla: dense scoring");
}

flycl::ExperimentConfig resolve(const Overrides& o) {
    flycl::ExperimentConfig c;
    if (!o.config.empty()) c = flycl::ExperimentConfig::load(o.config);
    if (o.data) c.data = *o.data;
    if (o.test) c.test_data = *o.test;
    if (o.manifest) c.manifest = *o.manifest;
    if (o.classes_per_task) c.classes_per_task = *o.classes_per_task;
    if (o.out) c.out = *o.out;
    if (o.checkpoint) c.checkpoint = *o.checkpoint;
    if (o.seed) c.seed = *o.seed;
    if (o.pipeline) c.kind = flycl::parse_pipeline_kind(*o.pipeline);
    if (o.m) c.m = *o.m;
    if (o.p) c.p = *o.p;
    if (o.k) c.k = *o.k;
    if (o.lambda_min) c.lambda_min = *o.lambda_min;
    if (o.lambda_max) c.lambda_max = *o.lambda_max;
    if (o.lambda_points) c.lambda_points = *o.lambda_points;
    if (o.lambda) c.fixed_lambda = *o.lambda;
    if (o.cv_folds) c.cv_folds = *o.cv_folds;
    if (o.online) c.online = true;
    if (o.batch_size) c.batch_size = *o.batch_size;
    if (o.solve_every) c.solve_every = *o.solve_every;
    if (o.holdout) c.holdout_fraction = *o.holdout;
    if (o.repeats) c.bench_repeats = *o.repeats;
    if (o.cv_budget) c.cv_budget_seconds = *o.cv_budget;
    c.vanilla.dense_projection |= o.dense_projection;
    c.vanilla.explicit_cv |= o.explicit_cv;
    c.vanilla.lu_solve |= o.lu_solve;
    c.vanilla.dense_similarity |= o.dense_similarity;
    c.validate();
    return c;
}

void print_run(const flycl::RunReport& r) {
    std::printf("stage  classes  A_t       lambda        tau_post_s\n");
    for (const auto& t : r.tasks) {
        std::printf("%5zu  %7u  %7.3f  %12.6g  %10.4f\n", t.task + 1, t.classes_seen, t.average, t.lambda, t.tau.post);
    }
    std::printf("overall accuracy %.3f, final %.3f\n", r.overall, r.final_average());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming continual learning over precomputed embeddings"};
    app.require_subcommand(1);

    Overrides run_opts;
    auto* run = app.add_subcommand("run", "class-incremental run with per-task evaluation");
    add_run_flags(run, run_opts);

    Overrides sweep_opts;
    std::string axis, values;
    auto* sweep = app.add_subcommand("sweep", "one run per value of m, p, k or lambda");
    add_run_flags(sweep, sweep_opts);
    sweep->add_option("--axis", axis, "m | p | k | lambda")->required();
    sweep->add_option("--values", values, "a,b,c or min:max:points")->required();

    Overrides bench_opts;
    auto* bench = app.add_subcommand("bench", "optimized vs vanilla component timings");
    add_run_flags(bench, bench_opts);
    bench->add_option("--repeats", bench_opts.repeats, "timed repetitions per component");
    bench->add_option("--cv-budget", bench_opts.cv_budget, "stop explicit CV after this many seconds");

    flycl::SynthSpec spec;
    std::string synth_out, synth_manifest;
    std::uint32_t synth_cpt = 0;
    auto* synth = app.add_subcommand("synth", "write a synthetic FLYE dataset");
    synth->add_option("--out", synth_out, "output FLYE file")->required();
    synth->add_option("--classes", spec.num_classes, "number of classes");
    synth->add_option("--dim", spec.dim, "feature dimension");
    synth->add_option("--samples", spec.samples_per_class, "samples per class");
    synth->add_option("--rho", spec.rho, "common direction strength in [0, 1)");
    synth->add_option("--sigma", spec.sigma, "within-class noise");
    synth->add_option("--seed", spec.seed, "seed");
    synth->add_option("--manifest", synth_manifest, "also write a sequential manifest here");
    synth->add_option("--classes-per-task", synth_cpt, "group size for --manifest");

    std::string check_data, check_manifest;
    auto* validate = app.add_subcommand("validate", "check a FLYE file and optional manifest");
    validate->add_option("--data", check_data, "FLYE file")->required();
    validate->add_option("--manifest", check_manifest, "manifest to check against the data");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            print_run(flycl::run_cil(resolve(run_opts)));
        } else if (sweep->parsed()) {
            const flycl::ExperimentConfig c = resolve(sweep_opts);
            const flycl::SweepAxis a = flycl::parse_sweep_axis(axis);
            const auto report = flycl::run_sweep(c, a, flycl::parse_sweep_values(a, values));
            std::printf("%-12s  A_T       overall   tau_post_s\n", axis.c_str());
            for (const auto& r : report.rows) {
                std::printf("%-12g  %7.3f  %7.3f  %10.4f\n", r.value, r.final_accuracy, r.overall, r.tau_post);
            }
        } else if (bench->parsed()) {
            const auto r = flycl::run_bench(resolve(bench_opts));
            std::printf("m=%zu d=%zu p=%zu n=%zu lambda=%g\n", r.m, r.d, r.p, r.n, r.lambda);
            std::printf("%-12s %12s %12s %9s\n", "component", "optimized_s", "vanilla_s", "speedup");
            for (const auto& c : r.components) {
                std::printf("%-12s %12.6f %12.6f %8.2fx%s\n", c.component.c_str(), c.optimized, c.vanilla, c.speedup(),
                            c.vanilla_lower_bound ? " (lower bound)" : "");
            }
            std::printf("predictions match: %s\n", r.predictions_match ? "yes" : "no");
        } else if (synth->parsed()) {
            const flycl::EmbeddingDataset ds = flycl::generate(spec);
            flycl::write_embedding_file(ds, synth_out);
            if (!synth_manifest.empty()) {
                const std::uint32_t cpt = synth_cpt ? synth_cpt : spec.num_classes;
                auto manifest = flycl::sequential_manifest(spec.num_classes, cpt, "synth");
                manifest.seed = spec.seed;
                flycl::write_manifest(manifest, synth_manifest);
            }
            std::printf("wrote %zu samples, d=%zu, %u classes to %s\n", ds.size(), ds.dim(), ds.num_classes,
                        synth_out.c_str());
        } else if (validate->parsed()) {
            const flycl::EmbeddingDataset ds = flycl::read_embedding_file(check_data);
            ds.validate();
            std::printf("%s: n=%zu d=%zu classes=%u\n", check_data.c_str(), ds.size(), ds.dim(), ds.num_classes);
            if (!check_manifest.empty()) {
                const auto manifest = flycl::read_manifest(check_manifest);
                manifest.validate(ds.num_classes);
                std::printf("%s: %zu tasks, %zu classes\n", check_manifest.c_str(), manifest.tasks.size(),
                            manifest.total_classes());
            }
        }
    } catch (const flycl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
