#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nep {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kUnknownType,
  kTypeMismatch,
  kDanglingEdge,
  kDuplicateNode,
  kSelfLoop,
  kUnknownObject,
  kNotTargeted,
  kOutOfRange,
  kDeadStart,
  kSamplingExhausted,
  kEmptyLabels,
  kMissingEmbedding,
  kDimensionMismatch,
  kUnknownLinkType,
  kTapeConsumed,
  kNumerical,
  kDiverged,
  kInfeasible,
  kStratification,
  kMismatchedObjects,
  kCheckpoint,
};

std::string_view to_string(ErrorCode code);

/// All library failures surface as nep::Error; `code()` identifies the
/// failure class so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nep
