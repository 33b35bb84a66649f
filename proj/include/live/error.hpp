#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace live {

enum class ErrorCode {
  InvalidArgument,
  EmptyInput,
  MalformedMR,
  RemoteUnavailable,
  ShapeMismatch,
  NonFinite,
  OutOfRange,
  DimensionMismatch,
  EmbeddingCountMismatch,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  CorruptFile,
  UnprojectedImage,
  LengthOverflow,
  NonFiniteGradient,
  EmptyCorpus,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to an exit status and tests can assert on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // RemoteUnavailable is the only condition worth retrying.
  bool retryable() const noexcept { return code_ == ErrorCode::RemoteUnavailable; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MalformedMR: return "MalformedMR";
    case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmbeddingCountMismatch: return "EmbeddingCountMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::UnprojectedImage: return "UnprojectedImage";
    case ErrorCode::LengthOverflow: return "LengthOverflow";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace live
