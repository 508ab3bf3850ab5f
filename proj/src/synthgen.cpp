#include "flycl/synthgen.hpp"

#include <cmath>
#include <string>

#include "flycl/error.hpp"
#include "flycl/philox.hpp"

namespace flycl {

namespace {

constexpr std::uint64_t kNoiseStreamBase = std::uint64_t{1} << 32;

Vector normal_vector(std::uint64_t seed, std::uint64_t stream, Eigen::Index d) {
    PhiloxStream rng(seed, stream);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.next_normal();
    return v;
}

}  // namespace

void SynthSpec::validate() const {
    if (num_classes == 0) throw Error(Errc::InvalidConfig, "num_classes must be positive");
    if (dim == 0) throw Error(Errc::InvalidConfig, "dim must be positive");
    if (samples_per_class == 0) throw Error(Errc::InvalidConfig, "samples_per_class must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw Error(Errc::InvalidConfig, "rho=" + std::to_string(rho) + " not in [0, 1)");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(Errc::InvalidConfig, "sigma=" + std::to_string(sigma) + " must be positive");
    }
    if (num_classes > dim) {
        throw Error(Errc::TooManyClasses, "num_classes=" + std::to_string(num_classes) + " exceeds dim=" +
                                              std::to_string(dim));
    }
}

Matrix synth_class_means(const SynthSpec& spec) {
    spec.validate();
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const auto c = static_cast<Eigen::Index>(spec.num_classes);

    Vector u = normal_vector(spec.seed, 0, d);
    u.normalize();

    // Modified Gram-Schmidt, applied twice per vector.
    Matrix basis(d, c);
    for (Eigen::Index i = 0; i < c; ++i) {
        Vector v = normal_vector(spec.seed, 1 + static_cast<std::uint64_t>(i), d);
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j < i; ++j) v -= basis.col(j).dot(v) * basis.col(j);
        }
        const double norm = v.norm();
        if (norm < 1e-12) throw Error(Errc::DegenerateInput, "class component " + std::to_string(i) + " collapsed");
        basis.col(i) = v / norm;
    }

    const double own = std::sqrt(1.0 - spec.rho * spec.rho);
    Matrix means(d, c);
    for (Eigen::Index i = 0; i < c; ++i) means.col(i) = spec.rho * u + own * basis.col(i);
    return means;
}

EmbeddingDataset generate(const SynthSpec& spec) {
    const Matrix means = synth_class_means(spec);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const std::size_t per = spec.samples_per_class;

    EmbeddingDataset ds;
    ds.num_classes = spec.num_classes;
    ds.features.resize(static_cast<Eigen::Index>(per * spec.num_classes), d);
    ds.labels.reserve(per * spec.num_classes);
    Eigen::Index row = 0;
    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
        PhiloxStream rng(spec.seed, kNoiseStreamBase + c);
        for (std::size_t s = 0; s < per; ++s, ++row) {
            for (Eigen::Index j = 0; j < d; ++j) ds.features(row, j) = means(j, c) + spec.sigma * rng.next_normal();
            ds.labels.push_back(c);
        }
    }
    return ds;
}

}  // namespace flycl
