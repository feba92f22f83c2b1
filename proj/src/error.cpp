#include <tracegrow/error.h>

namespace tracegrow {

std::string_view toString(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument:      return "InvalidArgument";
        case ErrorCode::OutOfRange:           return "OutOfRange";
        case ErrorCode::DimensionMismatch:    return "DimensionMismatch";
        case ErrorCode::EmptyTrace:           return "EmptyTrace";
        case ErrorCode::NoSeeds:              return "NoSeeds";
        case ErrorCode::InvalidThickness:     return "InvalidThickness";
        case ErrorCode::DegenerateStroke:     return "DegenerateStroke";
        case ErrorCode::UnknownCategoryValue: return "UnknownCategoryValue";
        case ErrorCode::MalformedPng:         return "MalformedPng";
        case ErrorCode::MalformedImage:       return "MalformedImage";
        case ErrorCode::MalformedStrokeList:  return "MalformedStrokeList";
        case ErrorCode::EmptyCategorySet:     return "EmptyCategorySet";
        case ErrorCode::InvalidObjectCount:   return "InvalidObjectCount";
        case ErrorCode::EmptyList:            return "EmptyList";
        case ErrorCode::UnknownDataset:       return "UnknownDataset";
        case ErrorCode::UnknownImage:         return "UnknownImage";
        case ErrorCode::UnknownSession:       return "UnknownSession";
        case ErrorCode::InsufficientImages:   return "InsufficientImages";
        case ErrorCode::NotInSession:         return "NotInSession";
        case ErrorCode::IncompleteBatch:      return "IncompleteBatch";
        case ErrorCode::BatchClosed:          return "BatchClosed";
        case ErrorCode::PortInUse:            return "PortInUse";
        case ErrorCode::Io:                   return "Io";
    }
    return "Unknown";
}

} // namespace tracegrow
