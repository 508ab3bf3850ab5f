#pragma once

#include <cstdint>

#include "flycl/embed_store.hpp"

namespace flycl {

/// Class-cluster stream with a shared dominant direction.
struct SynthSpec {
    std::uint32_t num_classes = 10;
    std::uint32_t dim = 64;
    std::uint32_t samples_per_class = 100;
    double rho = 0.5;    // weight of the common direction, in [0, 1)
    double sigma = 0.1;  // within-class noise standard deviation, > 0
    std::uint64_t seed = 0;

    void validate() const;
};

/// Class means rho*u + sqrt(1 - rho^2)*e_i with u a random unit vector and the
/// e_i orthonormal (Gram-Schmidt of Gaussian draws); samples add N(0, sigma^2 I).
/// Rows are class-major. Philox streams: 0 for u, 1+i for e_i, 2^32+i for the
/// noise of class i.
EmbeddingDataset generate(const SynthSpec& spec);

/// The exact class means of `spec`, d x num_classes.
Matrix synth_class_means(const SynthSpec& spec);

}  // namespace flycl
