#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flycl/analysis.hpp"
#include "flycl/embed_store.hpp"
#include "flycl/pipeline.hpp"
#include "flycl/synthgen.hpp"

namespace flycl {

/// Everything one run needs. Loaded from a JSON config file, then overridden
/// field by field from the command line.
struct ExperimentConfig {
    std::string data;       // FLYE file; empty means `synth`
    std::string test_data;  // optional FLYE test split; otherwise holdout
    std::string manifest;   // optional; otherwise sequential groups
    std::uint32_t classes_per_task = 0;  // 0: five equal tasks
    std::optional<SynthSpec> synth;
    std::string out;
    std::string checkpoint;

    PipelineKind kind = PipelineKind::Fly;
    VanillaFlags vanilla;
    std::size_t m = 10000;
    std::size_t p = 300;
    std::size_t k = 3000;
    std::uint64_t seed = 0;
    double lambda_min = 1e6;
    double lambda_max = 1e9;
    std::size_t lambda_points = 13;
    std::optional<double> fixed_lambda;
    std::size_t cv_folds = 5;

    bool online = false;
    std::size_t batch_size = 64;
    std::size_t solve_every = 1;

    double holdout_fraction = 0.8;
    std::size_t correlation_classes = 10;

    double cv_budget_seconds = -1.0;  // bench only; negative means unlimited
    std::size_t bench_repeats = 3;

    /// Field checks that do not need the dataset. Messages name the field.
    void validate() const;
    /// Shape checks against the loaded feature dimension.
    void validate_for_dim(std::size_t d) const;

    PipelineConfig pipeline_config() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& doc);
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct ExperimentInputs {
    EmbeddingDataset train;
    EmbeddingDataset test;
    TaskManifest manifest;
    std::vector<double> extraction;  // per task, zeros without a sidecar
};

/// Loads or synthesizes the data, splits off a test set when none is given
/// and resolves the manifest. The extraction sidecar is `<data>.timing.json`.
ExperimentInputs load_inputs(const ExperimentConfig& config);

/// Class-incremental run: train task by task, evaluate on the cumulative test
/// set of seen classes after each one. Writes the report when `out` is set.
RunReport run_cil(const ExperimentConfig& config);
RunReport run_cil(const ExperimentConfig& config, const ExperimentInputs& inputs);

enum class SweepAxis { M, P, K, Lambda };
SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

/// "a,b,c" or "min:max:points" (linear for m/p/k, log-spaced for lambda).
/// Duplicates are rejected.
std::vector<double> parse_sweep_values(SweepAxis axis, const std::string& text);

struct SweepRow {
    double value = 0.0;
    double final_accuracy = 0.0;  // A_T
    double overall = 0.0;         // Ā
    double tau_post = 0.0;        // summed over tasks
};

struct SweepReport {
    SweepAxis axis = SweepAxis::K;
    std::vector<SweepRow> rows;
};

/// One run_cil per value with everything else (including the seed) shared.
/// Writes sweep.csv plus one report directory per value under `out`.
SweepReport run_sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values);

struct ComponentTiming {
    std::string component;
    double optimized = 0.0;
    double vanilla = 0.0;
    bool vanilla_lower_bound = false;  // vanilla run stopped at the time budget

    double speedup() const { return optimized > 0.0 ? vanilla / optimized : 0.0; }
};

struct BenchReport {
    std::size_t m = 0, d = 0, p = 0, n = 0, classes = 0, test_samples = 0;
    double lambda = 0.0;
    std::vector<ComponentTiming> components;  // projection, selection, solve, similarity
    bool predictions_match = false;           // all-vanilla vs optimized at the same λ
    std::size_t cv_solves_done = 0;
    std::size_t cv_solves_total = 0;

    const ComponentTiming& component(const std::string& name) const;
};

/// Times the four post-extraction components in optimized and vanilla form on
/// one task (`train`) and a query set. Each measurement takes the median of
/// `repeats` runs after one untimed warm-up; explicit CV runs once (it is the
/// expensive side) and stops at `cv_budget_seconds` when that is >= 0.
BenchReport benchmark_components(const TaskBatch& train, const RowMatrix& queries, const PipelineConfig& config,
                                 std::size_t repeats = 3, double cv_budget_seconds = -1.0);

/// Benchmark on the first task of the configured data; writes bench.json and
/// bench.csv when `out` is set.
BenchReport run_bench(const ExperimentConfig& config);

nlohmann::json bench_to_json(const BenchReport& report);

}  // namespace flycl
