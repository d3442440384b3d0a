#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlsmo {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kMissingFile,
  kShortHeader,
  kNoRowsSurvived,
  kDatasetTooSmall,
  kTrainingDiverged,
  kUndefinedMape,
  kUnsupportedDimension,
  kUnavailableFront,
  kAllInfeasible,
  kDegenerateRange,
  kParse,
  kIo,
  kConfig,
  kStage,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries a code so callers (and the CLI)
// can tell the labeled failure modes apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mlsmo
