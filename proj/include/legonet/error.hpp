#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace legonet {

enum class ErrorCode {
  kBadMagic,
  kUnsupportedVersion,
  kChecksumMismatch,
  kTruncatedFile,
  kTrailingData,
  kBadManifest,
  kIoFailure,
  kInvalidArgument,
  kUnsupportedRank,
  kCountMismatch,
  kTooFewBlocks,
  kDimensionMismatch,
  kIndexOverflow,
  kLengthMismatch,
  kShapeMismatch,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map them onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace legonet
