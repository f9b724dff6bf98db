#include "nep/error.hpp"

namespace nep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kUnknownType: return "unknown type";
    case ErrorCode::kTypeMismatch: return "endpoint type mismatch";
    case ErrorCode::kDanglingEdge: return "dangling edge";
    case ErrorCode::kDuplicateNode: return "duplicate node";
    case ErrorCode::kSelfLoop: return "self loop";
    case ErrorCode::kUnknownObject: return "unknown object";
    case ErrorCode::kNotTargeted: return "not targeted type";
    case ErrorCode::kOutOfRange: return "out of range";
    case ErrorCode::kDeadStart: return "dead start";
    case ErrorCode::kSamplingExhausted: return "sampling exhausted";
    case ErrorCode::kEmptyLabels: return "empty labels";
    case ErrorCode::kMissingEmbedding: return "missing embedding";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kUnknownLinkType: return "unknown link type";
    case ErrorCode::kTapeConsumed: return "tape consumed";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kStratification: return "stratification";
    case ErrorCode::kMismatchedObjects: return "mismatched objects";
    case ErrorCode::kCheckpoint: return "checkpoint";
  }
  return "unknown";
}

}  // namespace nep
