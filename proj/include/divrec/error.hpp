#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divrec {

enum class ErrorCode {
    // audio_io
    MalformedHeader,
    UnsupportedEncoding,
    TruncatedData,
    IoFailure,
    // preprocess / features
    ClipTooShort,
    SignalTooShort,
    DegenerateBoundaries,
    // network / training
    ShapeMismatch,
    CacheMissing,
    NonFiniteGradient,
    EmptyClass,
    // evaluation / cli
    EmptySet,
    NoAudioFound,
    ModelIncompatible,
    TooShort,
    InvalidArgument,
    MalformedFile,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ClipTooShort: return "ClipTooShort";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::DegenerateBoundaries: return "DegenerateBoundaries";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CacheMissing: return "CacheMissing";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NoAudioFound: return "NoAudioFound";
    case ErrorCode::ModelIncompatible: return "ModelIncompatible";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedFile: return "MalformedFile";
    }
    return "Unknown";
}

} // namespace divrec
