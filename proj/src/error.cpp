#include "sumvln/error.hpp"

namespace sumvln {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::PixelOutOfBounds: return "PixelOutOfBounds";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::MissingDepth: return "MissingDepth";
    case ErrorCode::MissingPose: return "MissingPose";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::UnreachableTarget: return "UnreachableTarget";
    case ErrorCode::SteppedAfterStop: return "SteppedAfterStop";
    case ErrorCode::InvalidWorld: return "InvalidWorld";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::QTooSmall: return "QTooSmall";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::MalformedGlb: return "MalformedGlb";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::MissingPositionAccessor: return "MissingPositionAccessor";
    case ErrorCode::ChunkLengthMismatch: return "ChunkLengthMismatch";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::InvalidKey: return "InvalidKey";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyInstruction: return "EmptyInstruction";
    case ErrorCode::UnresolvedPlaceholder: return "UnresolvedPlaceholder";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::ModelRefusal: return "ModelRefusal";
    case ErrorCode::MissingActionTag: return "MissingActionTag";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::PolicyFailure: return "PolicyFailure";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::BadArgs: return "BadArgs";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::ParseFailure: return "ParseFailure";
  }
  return "Unknown";
}

}  // namespace sumvln
