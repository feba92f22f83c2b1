#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracegrow {

enum class ErrorCode {
    InvalidArgument,
    OutOfRange,
    DimensionMismatch,
    EmptyTrace,
    NoSeeds,
    InvalidThickness,
    DegenerateStroke,
    UnknownCategoryValue,
    MalformedPng,
    MalformedImage,
    MalformedStrokeList,
    EmptyCategorySet,
    InvalidObjectCount,
    EmptyList,
    UnknownDataset,
    UnknownImage,
    UnknownSession,
    InsufficientImages,
    NotInSession,
    IncompleteBatch,
    BatchClosed,
    PortInUse,
    Io,
};

std::string_view toString(ErrorCode code) noexcept;

// Every failure in the library is reported through this one exception type;
// callers dispatch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace tracegrow
