#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cloudatelier {

enum class ErrorCode {
  kUsage,
  kIo,
  kOutOfDiskSpace,
  kUnsupportedFormat,
  kCorruptHeader,
  kMalformedRecord,
  kDegenerateExtent,
  kInternalOverflow,
  kUnknownNode,
  kTileCorrupt,
  kDegenerateGeometry,
  kSchemaVersionUnsupported,
  kValidationFailed,
  kTooFewPoints,
  kStaleVersion,
  kUnauthorized,
  kUnknownTarget,
  kDuplicateOp,
  kInvalidOp,
  kConfig,
};

/// Stable upper-case identifier used on the wire and in CLI error lines.
std::string_view error_code_name(ErrorCode code);

/// Inverse of error_code_name; returns kInvalidOp for unknown names.
ErrorCode error_code_from_name(std::string_view name);

/// CLI exit status for an error: 1 usage, 2 data, 3 I/O.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string detail() const { return what(); }

 private:
  ErrorCode code_;
};

}  // namespace cloudatelier
