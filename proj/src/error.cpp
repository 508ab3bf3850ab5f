#include "flycl/error.hpp"

namespace flycl {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::BadMagic: return "BadMagic";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::TruncatedFile: return "TruncatedFile";
        case Errc::NonFiniteValue: return "NonFiniteValue";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::IoError: return "IoError";
        case Errc::UnknownClass: return "UnknownClass";
        case Errc::OverlappingTasks: return "OverlappingTasks";
        case Errc::ClassTooSmall: return "ClassTooSmall";
        case Errc::InvalidShape: return "InvalidShape";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::InvalidK: return "InvalidK";
        case Errc::DegenerateInput: return "DegenerateInput";
        case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
        case Errc::Unsolved: return "Unsolved";
        case Errc::EmptyBank: return "EmptyBank";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::TooManyClasses: return "TooManyClasses";
        case Errc::EmptyTestSet: return "EmptyTestSet";
        case Errc::NegativeTime: return "NegativeTime";
        case Errc::ZeroVariance: return "ZeroVariance";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace flycl
