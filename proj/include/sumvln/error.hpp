#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sumvln {

// Every failure surfaced by the library carries one of these codes so callers
// (and the CLI exit-code mapping) can branch without string matching.
enum class ErrorCode {
  // geometry
  NonPositiveDepth,
  PixelOutOfBounds,
  BehindCamera,
  MissingDepth,
  MissingPose,
  InvalidIntrinsics,
  // simulator
  UnreachableTarget,
  SteppedAfterStop,
  InvalidWorld,
  // sum
  EmptyInput,
  QTooSmall,
  BackendUnreachable,
  MalformedGlb,
  BadMagic,
  UnsupportedVersion,
  MissingPositionAccessor,
  ChunkLengthMismatch,
  CorruptRecord,
  InvalidKey,
  InvalidConfig,
  // agent
  EmptyInstruction,
  UnresolvedPlaceholder,
  EndpointUnreachable,
  ModelRefusal,
  MissingActionTag,
  InvalidAction,
  MissingSection,
  // runner
  PolicyFailure,
  // eval
  EmptyGroup,
  // cli / io
  BadArgs,
  IoFailure,
  UnknownKey,
  ParseFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sumvln
