#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cst {

// Stable, machine-readable failure categories. The CLI prints code_name()
// verbatim, so renaming an enumerator is a breaking change.
enum class ErrorCode {
  kShapeMismatch,
  kIndexOutOfRange,
  kNonFinite,
  kGraphConsumed,
  kNotScalar,
  kCorruptHeader,
  kExtentOverflow,
  kTruncatedPayload,
  kFileNotFound,
  kCheckpointNotFound,
  kManifestNotFound,
  kIoFailure,
  kInsufficientClasses,
  kInsufficientImages,
  kEmptyDataset,
  kUnknownClass,
  kZeroEpisodes,
  kInvalidArgument,
  kConfigInvalid,
  kTrainingFailed,
};

std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cst
