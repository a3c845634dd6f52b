#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dtensor {

enum class ErrorCode {
  LengthMismatch,
  InvalidShape,
  InvalidId,
  OutOfBounds,
  RangeOutOfBounds,
  BadChunkDim,
  MissingChunk,
  InconsistentMeta,
  ShapeMismatch,
  MergedDimSliced,
  UnknownId,
  InconsistentShape,
  DuplicateCoordinate,
  MalformedPointers,
  RankTooLow,
  BadBlockShape,
  DuplicateBlock,
  AlreadyExists,
  SchemaViolation,
  UnknownColumn,
  BadMagic,
  UnsupportedVersion,
  CorruptColumn,
  NotFound,
  Io,
  DensityTooHigh,
  InvalidDensity,
  TooLargeForDense,
  VerificationFailed,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::InvalidId: return "InvalidId";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::BadChunkDim: return "BadChunkDim";
    case ErrorCode::MissingChunk: return "MissingChunk";
    case ErrorCode::InconsistentMeta: return "InconsistentMeta";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MergedDimSliced: return "MergedDimSliced";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::InconsistentShape: return "InconsistentShape";
    case ErrorCode::DuplicateCoordinate: return "DuplicateCoordinate";
    case ErrorCode::MalformedPointers: return "MalformedPointers";
    case ErrorCode::RankTooLow: return "RankTooLow";
    case ErrorCode::BadBlockShape: return "BadBlockShape";
    case ErrorCode::DuplicateBlock: return "DuplicateBlock";
    case ErrorCode::AlreadyExists: return "AlreadyExists";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::CorruptColumn: return "CorruptColumn";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DensityTooHigh: return "DensityTooHigh";
    case ErrorCode::InvalidDensity: return "InvalidDensity";
    case ErrorCode::TooLargeForDense: return "TooLargeForDense";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code, so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dtensor
