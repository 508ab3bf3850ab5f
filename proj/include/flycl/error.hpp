#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flycl {

enum class Errc {
    BadMagic,
    VersionMismatch,
    TruncatedFile,
    NonFiniteValue,
    EmptyDataset,
    IoError,
    UnknownClass,
    OverlappingTasks,
    ClassTooSmall,
    InvalidShape,
    DimensionMismatch,
    InvalidK,
    DegenerateInput,
    NotPositiveDefinite,
    Unsolved,
    EmptyBank,
    ZeroVector,
    TooManyClasses,
    EmptyTestSet,
    NegativeTime,
    ZeroVariance,
    InvalidConfig,
    InvalidArgument,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure in the engine surfaces as an Error. The message always
/// names the offending field, offset, row or value.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace flycl
