#include "cloudatelier/error.hpp"

#include <array>
#include <utility>

namespace cloudatelier {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 20> kNames = {{
    {ErrorCode::kUsage, "USAGE"},
    {ErrorCode::kIo, "IO"},
    {ErrorCode::kOutOfDiskSpace, "OUT_OF_DISK_SPACE"},
    {ErrorCode::kUnsupportedFormat, "UNSUPPORTED_FORMAT"},
    {ErrorCode::kCorruptHeader, "CORRUPT_HEADER"},
    {ErrorCode::kMalformedRecord, "MALFORMED_RECORD"},
    {ErrorCode::kDegenerateExtent, "DEGENERATE_EXTENT"},
    {ErrorCode::kInternalOverflow, "INTERNAL_OVERFLOW"},
    {ErrorCode::kUnknownNode, "UNKNOWN_NODE"},
    {ErrorCode::kTileCorrupt, "TILE_CORRUPT"},
    {ErrorCode::kDegenerateGeometry, "DEGENERATE_GEOMETRY"},
    {ErrorCode::kSchemaVersionUnsupported, "SCHEMA_VERSION_UNSUPPORTED"},
    {ErrorCode::kValidationFailed, "VALIDATION_FAILED"},
    {ErrorCode::kTooFewPoints, "TOO_FEW_POINTS"},
    {ErrorCode::kStaleVersion, "STALE_VERSION"},
    {ErrorCode::kUnauthorized, "UNAUTHORIZED"},
    {ErrorCode::kUnknownTarget, "UNKNOWN_TARGET"},
    {ErrorCode::kDuplicateOp, "DUPLICATE_OP"},
    {ErrorCode::kInvalidOp, "INVALID_OP"},
    {ErrorCode::kConfig, "CONFIG"},
}};

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) {
      return name;
    }
  }
  return "UNKNOWN";
}

ErrorCode error_code_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) {
      return c;
    }
  }
  return ErrorCode::kInvalidOp;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
      return 1;
    case ErrorCode::kIo:
    case ErrorCode::kOutOfDiskSpace:
      return 3;
    default:
      return 2;
  }
}

}  // namespace cloudatelier
