#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flycl/linalg.hpp"

namespace flycl {

/// Per-class running sums and counts. The mean of class i is sum(i) / count(i).
class PrototypeBank {
public:
    PrototypeBank() = default;
    explicit PrototypeBank(std::size_t dim) : sums_(static_cast<Eigen::Index>(dim), 0) {}

    std::size_t dim() const noexcept { return static_cast<std::size_t>(sums_.rows()); }
    std::size_t num_classes() const noexcept { return counts_.size(); }
    std::uint64_t count(std::size_t c) const { return counts_.at(c); }
    bool empty() const noexcept;

    /// d x c matrix of class means (zero column for a class with no samples).
    Matrix means() const;
    Vector mean(std::size_t c) const;
    const Matrix& sums() const noexcept { return sums_; }

    friend void accumulate_prototypes(PrototypeBank& bank, const RowMatrix& features,
                                      std::span<const std::uint32_t> labels);

private:
    Matrix sums_;
    std::vector<std::uint64_t> counts_;
};

/// Streaming per-class mean update; the bank grows to cover every label seen.
void accumulate_prototypes(PrototypeBank& bank, const RowMatrix& features, std::span<const std::uint32_t> labels);

/// argmax_i cos(v, mu_i). Ties go to the lowest class; zero-norm and empty
/// prototypes score -inf.
std::uint32_t cosine_predict(const PrototypeBank& bank, std::span<const double> v);

}  // namespace flycl
