#pragma once

#include <vector>

#include "flycl/embed_store.hpp"
#include "flycl/ridge.hpp"
#include "flycl/synthgen.hpp"

inline flycl::SynthSpec small_synth(std::uint64_t seed = 0, double rho = 0.5, double sigma = 0.1,
                                    std::uint32_t classes = 10, std::uint32_t dim = 64, std::uint32_t per_class = 40) {
    flycl::SynthSpec spec;
    spec.num_classes = classes;
    spec.dim = dim;
    spec.samples_per_class = per_class;
    spec.rho = rho;
    spec.sigma = sigma;
    spec.seed = seed;
    return spec;
}

inline std::vector<flycl::TaskBatch> synth_tasks(const flycl::SynthSpec& spec, std::uint32_t classes_per_task) {
    return flycl::split_tasks(flycl::generate(spec), flycl::sequential_manifest(spec.num_classes, classes_per_task));
}

/// Rows of every batch stacked, with their stream-column labels.
inline flycl::TaskBatch concat(const std::vector<flycl::TaskBatch>& batches) {
    flycl::TaskBatch out = batches.back();
    Eigen::Index rows = 0;
    for (const auto& b : batches) rows += b.features.rows();
    out.features.resize(rows, batches.front().features.cols());
    out.labels.clear();
    out.source_labels.clear();
    Eigen::Index at = 0;
    for (const auto& b : batches) {
        out.features.middleRows(at, b.features.rows()) = b.features;
        at += b.features.rows();
        out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
        out.source_labels.insert(out.source_labels.end(), b.source_labels.begin(), b.source_labels.end());
    }
    return out;
}

/// λ candidates for unit-scale synthetic features; the transformer grid
/// (1e6..1e9) sits entirely in the over-regularized range for them.
inline flycl::LambdaGrid unit_scale_grid() { return flycl::log_grid(1e-3, 1e5, 17); }
