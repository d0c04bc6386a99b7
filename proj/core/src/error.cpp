#include "cst/error.hpp"

namespace cst {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kIndexOutOfRange: return "INDEX_OUT_OF_RANGE";
    case ErrorCode::kNonFinite: return "NON_FINITE";
    case ErrorCode::kGraphConsumed: return "GRAPH_CONSUMED";
    case ErrorCode::kNotScalar: return "NOT_SCALAR";
    case ErrorCode::kCorruptHeader: return "CORRUPT_HEADER";
    case ErrorCode::kExtentOverflow: return "EXTENT_OVERFLOW";
    case ErrorCode::kTruncatedPayload: return "TRUNCATED_PAYLOAD";
    case ErrorCode::kFileNotFound: return "FILE_NOT_FOUND";
    case ErrorCode::kCheckpointNotFound: return "CHECKPOINT_NOT_FOUND";
    case ErrorCode::kManifestNotFound: return "MANIFEST_NOT_FOUND";
    case ErrorCode::kIoFailure: return "IO_FAILURE";
    case ErrorCode::kInsufficientClasses: return "INSUFFICIENT_CLASSES";
    case ErrorCode::kInsufficientImages: return "INSUFFICIENT_IMAGES";
    case ErrorCode::kEmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::kUnknownClass: return "UNKNOWN_CLASS";
    case ErrorCode::kZeroEpisodes: return "ZERO_EPISODES";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::kTrainingFailed: return "TRAINING_FAILED";
  }
  return "UNKNOWN";
}

}  // namespace cst
