#include "flycl/ncm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flycl/error.hpp"

namespace flycl {

bool PrototypeBank::empty() const noexcept {
    return std::none_of(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c > 0; });
}

Matrix PrototypeBank::means() const {
    Matrix out = sums_;
    for (std::size_t c = 0; c < counts_.size(); ++c) {
        if (counts_[c] > 0) out.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts_[c]);
    }
    return out;
}

Vector PrototypeBank::mean(std::size_t c) const {
    if (c >= counts_.size() || counts_[c] == 0) {
        throw Error(Errc::EmptyBank, "class " + std::to_string(c) + " has no samples");
    }
    return sums_.col(static_cast<Eigen::Index>(c)) / static_cast<double>(counts_[c]);
}

void accumulate_prototypes(PrototypeBank& bank, const RowMatrix& features, std::span<const std::uint32_t> labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw Error(Errc::DimensionMismatch, std::to_string(features.rows()) + " feature rows vs " +
                                                 std::to_string(labels.size()) + " labels");
    }
    if (bank.sums_.rows() == 0 && bank.counts_.empty()) bank.sums_.resize(features.cols(), 0);
    if (features.rows() > 0 && features.cols() != bank.sums_.rows()) {
        throw Error(Errc::DimensionMismatch, "features have dimension " + std::to_string(features.cols()) +
                                                 ", bank holds " + std::to_string(bank.sums_.rows()));
    }
    std::uint32_t needed = static_cast<std::uint32_t>(bank.counts_.size());
    for (std::uint32_t label : labels) needed = std::max(needed, label + 1);
    if (needed > bank.counts_.size()) {
        const Eigen::Index old = bank.sums_.cols();
        bank.sums_.conservativeResize(Eigen::NoChange, needed);
        bank.sums_.rightCols(needed - old).setZero();
        bank.counts_.resize(needed, 0);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        bank.sums_.col(labels[i]) += features.row(static_cast<Eigen::Index>(i)).transpose();
        ++bank.counts_[labels[i]];
    }
}

std::uint32_t cosine_predict(const PrototypeBank& bank, std::span<const double> v) {
    if (bank.empty()) throw Error(Errc::EmptyBank, "no prototypes stored");
    if (v.size() != bank.dim()) {
        throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(v.size()) + ", bank holds " +
                                                 std::to_string(bank.dim()));
    }
    const Eigen::Map<const Vector> query(v.data(), static_cast<Eigen::Index>(v.size()));
    const double qnorm = query.norm();
    if (qnorm == 0.0) throw Error(Errc::ZeroVector, "query vector has zero norm");

    // Means and sums share direction, so cosine against the sums is enough.
    const Matrix& sums = bank.sums();
    double best = -std::numeric_limits<double>::infinity();
    std::uint32_t best_class = 0;
    bool any = false;
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        if (bank.count(c) == 0) continue;
        const auto col = sums.col(static_cast<Eigen::Index>(c));
        const double norm = col.norm();
        const double score = norm > 0.0 ? query.dot(col) / (qnorm * norm) : -std::numeric_limits<double>::infinity();
        if (!any || score > best) {
            best = score;
            best_class = static_cast<std::uint32_t>(c);
            any = true;
        }
    }
    return best_class;
}

}  // namespace flycl
