#pragma once

// Error type shared by every xaudit module. One exception class carries a
// machine-readable kind so callers (and the CLI) can branch on it without
// string matching.

#include <stdexcept>
#include <string>
#include <string_view>

namespace xaudit {

enum class ErrorKind {
    // corpus
    BadMagic,
    MalformedHeader,
    TruncatedPayload,
    ValueOverflow,
    UnsupportedMaxVal,
    SchemaError,
    LabelOutOfRange,
    DuplicateId,
    MissingImage,
    // synthgen
    SpecError,
    GeometryOverlap,
    // prototype
    ArchError,
    ShapeMismatch,
    EmptyDataset,
    NonFiniteLoss,
    // explain / audit
    ZeroMass,
    InsufficientData,
    // remedy
    PolicyGap,
    UnknownImage,
    GeometryError,
    DatasetMismatch,
    // plumbing
    IoError,
    ConfigError,
    InvalidArgument,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::BadMagic: return "BadMagic";
        case ErrorKind::MalformedHeader: return "MalformedHeader";
        case ErrorKind::TruncatedPayload: return "TruncatedPayload";
        case ErrorKind::ValueOverflow: return "ValueOverflow";
        case ErrorKind::UnsupportedMaxVal: return "UnsupportedMaxVal";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::MissingImage: return "MissingImage";
        case ErrorKind::SpecError: return "SpecError";
        case ErrorKind::GeometryOverlap: return "GeometryOverlap";
        case ErrorKind::ArchError: return "ArchError";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::ZeroMass: return "ZeroMass";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::PolicyGap: return "PolicyGap";
        case ErrorKind::UnknownImage: return "UnknownImage";
        case ErrorKind::GeometryError: return "GeometryError";
        case ErrorKind::DatasetMismatch: return "DatasetMismatch";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) { throw Error(kind, detail); }

inline void require(bool condition, ErrorKind kind, const std::string& detail) {
    if (!condition) fail(kind, detail);
}

}  // namespace xaudit
