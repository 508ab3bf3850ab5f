#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flycl/ridge.hpp"

namespace flycl {

/// Everything needed to resume a run: the streaming statistics plus the
/// parameters that regenerate W. C is not stored; it is re-solved from
/// (G, S, last λ) on resume.
///
/// FLYS layout, little-endian:
///   "FLYS" | u32 version=1 | u32 flags=0 | u64 seed | u32 m | u32 d | u32 p | u32 k
///   | u32 classes_seen | u64 tasks_seen | u32 num_lambdas | f64 x num_lambdas
///   | u32 x classes_seen class ids | f64 G lower triangle, row by row (j <= i)
///   | f64 S row-major m x classes_seen
struct Checkpoint {
    std::uint64_t seed = 0;
    std::uint32_t m = 0;
    std::uint32_t d = 0;
    std::uint32_t p = 0;
    std::uint32_t k = 0;
    std::vector<std::uint32_t> class_ids;
    RidgeState state;
};

inline constexpr std::uint32_t kFlysVersion = 1;

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace flycl
