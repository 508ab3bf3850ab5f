#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flycl/embed_store.hpp"
#include "flycl/linalg.hpp"
#include "flycl/pipeline.hpp"

namespace flycl {

inline constexpr int kReportSchemaVersion = 1;

/// a_{t,i} for i = 0..tasks_seen-1, in percent. `task_of_class[c]` is the
/// task that introduced stream column c. Throws EmptyTestSet when there are no
/// test samples or one of the seen tasks has none.
std::vector<double> stage_accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels,
                                   std::span<const std::size_t> task_of_class, std::size_t tasks_seen);

double mean_accuracy(std::span<const double> values);
/// Mean of the per-stage averages A_1..A_T.
double overall_accuracy(std::span<const double> stage_averages);

struct TimingSplit {
    double train = 0.0;  // τ_train
    double post = 0.0;   // τ_post
};

/// τ_post = total - extraction. Throws NegativeTime for negative inputs or
/// extraction > total.
TimingSplit timing_split(double total, double extraction);

enum class PrototypeStage { Raw, Projected, Modulated, ModulatedFull };
std::string to_string(PrototypeStage stage);

struct CorrelationMatrix {
    std::vector<std::uint32_t> classes;
    Matrix matrix;
    PrototypeStage stage = PrototypeStage::Raw;
};

/// Pearson coefficients between the columns of `vectors` listed in `subset`,
/// taken over the vector components. Needs at least two columns, each with
/// nonzero variance (ZeroVariance otherwise).
CorrelationMatrix prototype_correlations(const Matrix& vectors, const std::vector<std::uint32_t>& subset,
                                         PrototypeStage stage = PrototypeStage::Raw);

double mean_abs_off_diagonal(const CorrelationMatrix& correlations);

/// Correlations of the same class subset at each stage of a trained pipeline:
/// raw class means, class means of the top-k activations, and columns of C
/// restricted to the union of the subset's active units (plus unrestricted).
/// `train` holds the training samples with stream-column labels.
std::vector<CorrelationMatrix> stage_correlations(const RowMatrix& train_features,
                                                  std::span<const std::uint32_t> train_columns,
                                                  const FlyPipeline& pipeline,
                                                  const std::vector<std::uint32_t>& subset);

struct TaskRecord {
    std::size_t task = 0;
    std::uint32_t classes_seen = 0;
    std::size_t train_samples = 0;
    std::size_t test_samples = 0;
    double lambda = 0.0;  // 0 for pipelines without ridge
    std::vector<double> accuracy;  // a_{t,i}
    double average = 0.0;          // A_t
    StageTimings train_timings;
    PredictTimings eval_timings;
    double extraction = 0.0;
    TimingSplit tau;
};

struct RunReport {
    nlohmann::json config = nlohmann::json::object();
    std::vector<TaskRecord> tasks;
    double overall = 0.0;  // Ā
    std::vector<double> lambda_history;
    std::vector<CorrelationMatrix> correlations;

    double final_average() const { return tasks.empty() ? 0.0 : tasks.back().average; }
};

/// JSON form. Everything wall-clock lives under "timing" so the rest of the
/// document is deterministic for a given config and seed.
nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// Writes report.json, accuracy_curve.csv, accuracy_matrix.csv, timing.csv and
/// correlations.csv into `out_dir` (created if missing).
void emit_report(const RunReport& report, const std::filesystem::path& out_dir);

/// Extraction wall time per task from a feature-extractor sidecar. Uses
/// "per_task_seconds" when it has one entry per task, else splits
/// "total_seconds" by each task's share of "num_samples" (or of the sum of
/// `task_samples`).
std::vector<double> read_extraction_sidecar(const std::filesystem::path& path,
                                            const std::vector<std::size_t>& task_samples);

}  // namespace flycl
