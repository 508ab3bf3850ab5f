#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "flycl/linalg.hpp"

namespace flycl {

/// Labeled d-dimensional embeddings, widened to double on load.
struct EmbeddingDataset {
    RowMatrix features;  // n x d
    std::vector<std::uint32_t> labels;
    std::uint32_t num_classes = 0;
    std::vector<std::string> class_names;  // empty, or one per class

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

    /// Throws on the first violated invariant (shape, label range, non-finite value).
    void validate() const;
};

/// Ordered, pairwise-disjoint class groups that define the CIL stream.
struct TaskManifest {
    std::string dataset;
    std::uint64_t seed = 0;
    std::uint32_t classes_per_task = 0;
    std::vector<std::vector<std::uint32_t>> tasks;

    /// Disjointness and class-range check against a dataset with `num_classes` classes.
    void validate(std::uint32_t num_classes) const;
    std::size_t total_classes() const noexcept;
};

/// One task of the stream. `labels` are stream columns (order of first
/// appearance across the manifest), not dataset labels; `class_ids[j]` is the
/// dataset label of stream column j for every column seen so far.
struct TaskBatch {
    RowMatrix features;
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> source_labels;
    std::size_t task_index = 0;
    std::uint32_t classes_seen = 0;  // c_t
    std::vector<std::uint32_t> class_ids;
};

// FLYE binary format, little-endian:
//   "FLYE" | u32 version=1 | u32 flags (bit0: class names) | u64 n | u32 d | u32 num_classes
//   | n*d f32 row-major | n u32 labels | [num_classes x (u32 byte length, UTF-8 bytes)]
inline constexpr std::uint32_t kFlyeVersion = 1;
inline constexpr std::uint32_t kFlyeFlagClassNames = 1u;

EmbeddingDataset read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const EmbeddingDataset& dataset, const std::filesystem::path& path);

/// Manifest file: a JSON object with "dataset", "seed", "classes_per_task" and
/// "tasks" (array of arrays of dataset class indices).
TaskManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const TaskManifest& manifest, const std::filesystem::path& path);

/// Consecutive groups of `classes_per_task` classes in index order.
TaskManifest sequential_manifest(std::uint32_t num_classes, std::uint32_t classes_per_task,
                                 std::string dataset_name = "");

std::vector<TaskBatch> split_tasks(const EmbeddingDataset& dataset, const TaskManifest& manifest);

/// Consecutive slices of at most `batch_size` rows, each carrying the task's
/// class bookkeeping. Used for online (per-batch) training.
std::vector<TaskBatch> minibatches(const TaskBatch& batch, std::size_t batch_size);

/// Per-class stratified split: round(fraction * n_c) samples of each class go
/// to the training side, clamped to [1, n_c - 1]. Deterministic in seed.
std::pair<EmbeddingDataset, EmbeddingDataset> holdout_split(const EmbeddingDataset& dataset, double fraction,
                                                            std::uint64_t seed);

/// Rows of `dataset` whose label is in `classes`, in dataset order.
EmbeddingDataset select_classes(const EmbeddingDataset& dataset, const std::vector<std::uint32_t>& classes);

}  // namespace flycl
